//! Training-pathology instruments: NTK eigen-spectra, back-propagated
//! gradient histograms, temporal residual profiles, and the spectral-bias
//! regression experiment. Diagnostics run on checkpointed state at logging
//! intervals or from the CLI, never inside the training hot loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamVector, Tape};
use crate::error::{Error, Result};
use crate::nets::{
    coord_leaf, forward, init_glorot, register_params, Activation, Arch, Embedding,
    FourierConfig, Network, NetworkConfig,
};
use crate::problems::{build_residual, Problem};
use crate::train::{adam_step, LrSchedule, TrainConfig, TrainState};
use crate::tensor::JetMat;
use crate::weighting::{per_sample_grad, NtkTerm};

/// Dense Gram assembly is restricted to small batches.
pub const NTK_BATCH_LIMIT: usize = 200;

/// Eigenvalues of the Gram matrix of per-sample parameter gradients,
/// descending. `coords` is row-major `[2 × batch]`.
pub fn ntk_spectrum(
    net: &Network,
    params: &ParamVector,
    term: NtkTerm,
    coords: &[f64],
    batch: usize,
) -> Result<Vec<f64>> {
    if batch > NTK_BATCH_LIMIT {
        return Err(Error::BatchTooLarge {
            got: batch,
            limit: NTK_BATCH_LIMIT,
        });
    }
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let grads: Vec<ParamVector> = (0..batch)
        .map(|i| per_sample_grad(net, params, term, &[coords[i], coords[batch + i]]))
        .collect::<Result<_>>()?;
    let mut gram = vec![0.0; batch * batch];
    for i in 0..batch {
        for j in 0..=i {
            let d = grads[i].dot(&grads[j]);
            gram[i * batch + j] = d;
            gram[j * batch + i] = d;
        }
    }
    let mut eig = symmetric_eigenvalues(&mut gram, batch);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eig)
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major,
/// destroyed in place). Deterministic and dependency-free; fine for the
/// ≤200×200 matrices diagnostics produce.
pub fn symmetric_eigenvalues(a: &mut [f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    let frob: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Log-spaced histogram of |g| over `[1e-12, 1e2]` plus underflow/overflow
/// bins, with the summary values plotted alongside it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GradHistogram {
    /// `counts[0]` is the underflow bin, `counts[BINS+1]` the overflow bin.
    pub counts: Vec<u64>,
    pub norm: f64,
    pub max_abs: f64,
    pub total: u64,
}

pub const HIST_BINS: usize = 56;
pub const HIST_LOG_LO: f64 = -12.0;
pub const HIST_LOG_HI: f64 = 2.0;

pub fn grad_histogram(grad: &ParamVector) -> GradHistogram {
    let mut counts = vec![0u64; HIST_BINS + 2];
    let mut max_abs = 0.0f64;
    let scale = HIST_BINS as f64 / (HIST_LOG_HI - HIST_LOG_LO);
    for &g in grad.as_slice() {
        let a = g.abs();
        max_abs = max_abs.max(a);
        let idx = if a < 1e-12 {
            0
        } else {
            let b = ((a.log10() - HIST_LOG_LO) * scale).floor() as i64;
            if b >= HIST_BINS as i64 {
                HIST_BINS + 1
            } else {
                1 + b as usize
            }
        };
        counts[idx] += 1;
    }
    GradHistogram {
        counts,
        norm: grad.l2_norm(),
        max_abs,
        total: grad.len() as u64,
    }
}

/// Per-chunk mean squared residual at fixed dense spatial sampling: the
/// temporal profile `L_r(t, θ)` evaluated at chunk-center times.
pub fn temporal_residual_profile(
    net: &Network,
    params: &ParamVector,
    problem: &dyn Problem,
    m: usize,
    n_x: usize,
) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidConfig("temporal profile needs M ≥ 2".into()));
    }
    let d = problem.domain();
    let mut profile = Vec::with_capacity(m);
    for chunk in 0..m {
        let t = d.t1 * (chunk as f64 + 0.5) / m as f64;
        let mut coords = vec![0.0; 2 * n_x];
        for j in 0..n_x {
            coords[j] = t;
            coords[n_x + j] = d.x_lo + d.x_len() * j as f64 / n_x as f64;
        }
        let mut tape = Tape::new();
        let pnodes = register_params(&mut tape, net, params);
        let r = build_residual(&mut tape, net, &pnodes, problem, &coords, n_x)?;
        let sq = tape.mul(r, r);
        let mean = tape.mean_all(sq);
        profile.push(tape.scalar(mean));
    }
    Ok(profile)
}

// ---------------------------------------------------------------------------
// Spectral-bias regression experiment.
// ---------------------------------------------------------------------------

/// Outcome of regressing `sin(x) + sin(8x)`: first iteration at which each
/// frequency component's error halves.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpectralBiasResult {
    pub half_iter_low: Option<u64>,
    pub half_iter_high: Option<u64>,
}

/// Magnitude of the DFT coefficient at integer frequency `k` on a uniform
/// periodic grid.
fn fourier_component(values: &[f64], k: usize) -> f64 {
    let n = values.len() as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, &v) in values.iter().enumerate() {
        let phase = -std::f64::consts::TAU * k as f64 * j as f64 / n;
        re += v * phase.cos();
        im += v * phase.sin();
    }
    (re * re + im * im).sqrt() / n
}

/// Regress `f(x) = sin(x) + sin(8x)` with a plain MLP (optionally behind a
/// Fourier embedding) and report when each component's error halves.
pub fn spectral_bias_experiment(
    fourier: Option<FourierConfig>,
    seed: u64,
    iters: u64,
    width: usize,
    depth: usize,
) -> Result<SpectralBiasResult> {
    let n = 128usize;
    let xs: Vec<f64> = (0..n).map(|j| std::f64::consts::TAU * j as f64 / n as f64).collect();
    let target: Vec<f64> = xs.iter().map(|&x| x.sin() + (8.0 * x).sin()).collect();

    let cfg = NetworkConfig {
        arch: Arch::Plain,
        depth,
        width,
        activation: Activation::Tanh,
        embedding: match fourier {
            Some(f) => Embedding::Fourier(f),
            None => Embedding::None,
        },
        rwf: None,
        input_dim: 1,
        output_dim: 1,
    };
    let net = init_glorot(&cfg, seed)?;
    let train_cfg = TrainConfig {
        lr: LrSchedule {
            eta0: 1e-3,
            decay_rate: 1.0,
            decay_steps: 1,
            warmup_steps: 0,
        },
        ..Default::default()
    };
    let mut state = TrainState::new(&net, &train_cfg, seed);
    // the data grid is fixed; no sampling randomness is needed
    state.rng = ChaCha8Rng::seed_from_u64(seed);

    let mut initial_low = None;
    let mut initial_high = None;
    let mut result = SpectralBiasResult {
        half_iter_low: None,
        half_iter_high: None,
    };

    for iter in 0..=iters {
        let mut tape = Tape::new();
        let pnodes = register_params(&mut tape, &net, &state.params);
        let leaf = coord_leaf(&mut tape, &xs, 1, n, None);
        let out = forward(&mut tape, &net, &pnodes, leaf)?;
        let pred = tape.coeff(out, 0);
        let target_node = tape.constant(JetMat::from_real(1, n, target.clone()));
        let diff = tape.sub(pred, target_node);
        let loss = tape.mean_square(diff);

        let err: Vec<f64> = (0..n).map(|j| tape.value(diff).at(0, j, 0)).collect();
        let c_low = fourier_component(&err, 1);
        let c_high = fourier_component(&err, 8);
        let init_low = *initial_low.get_or_insert(c_low);
        let init_high = *initial_high.get_or_insert(c_high);
        if result.half_iter_low.is_none() && c_low <= 0.5 * init_low {
            result.half_iter_low = Some(iter);
        }
        if result.half_iter_high.is_none() && c_high <= 0.5 * init_high {
            result.half_iter_high = Some(iter);
        }
        if result.half_iter_low.is_some() && result.half_iter_high.is_some() {
            break;
        }
        if iter == iters {
            break;
        }
        let grad = tape.loss_grad(loss, net.layout())?;
        adam_step(&mut state, &grad)?;
    }
    Ok(result)
}
