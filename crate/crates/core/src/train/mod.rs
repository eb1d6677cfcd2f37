//! The training loop: Adam with staircase-exponential learning-rate decay,
//! stratified random collocation sampling, per-iteration causal-weight
//! updates, frequency-f global-weight updates, and curriculum drivers.

mod checkpoint;
mod curriculum;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointData};
pub use curriculum::{
    continue_parameter, time_march, ContinuationPlan, StitchedSolution, WindowPlan,
};

use std::time::Instant;

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{NodeId, ParamVector, Tape};
use crate::error::{Error, Result};
use crate::nets::{register_params, Network};
use crate::problems::{bc_loss_nodes, build_residual, ic_loss_nodes, BcKind, Problem};
use crate::weighting::{
    causal_weighted_residual, ntk_trace, total_loss, LossWeights, NtkTerm, TermTriple,
};

/// Staircase exponential decay with optional linear warmup:
/// `η(step) = η₀ · min(1, (step+1)/W) · ρ^⌊step/D⌋`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LrSchedule {
    pub eta0: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    #[serde(default)]
    pub warmup_steps: u64,
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        let warm = if self.warmup_steps > 0 {
            ((step + 1) as f64 / self.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        self.eta0 * warm * self.decay_rate.powi((step / self.decay_steps) as i32)
    }
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            eta0: 1e-3,
            decay_rate: 0.9,
            decay_steps: 2000,
            warmup_steps: 0,
        }
    }
}

/// Adam constants. The optimizer itself is standard; no weight decay on
/// purpose (it degrades forward-problem accuracy).
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Global-weight update scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    None,
    GradNorm,
    Ntk,
}

/// Gradient norms below this are treated as degenerate: the term keeps its
/// previous λ for the round instead of producing an infinite weight.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    /// Gradient-descent steps S for this window.
    pub iters: u64,
    pub n_ic: usize,
    pub n_bc: usize,
    pub n_r: usize,
    /// Temporal chunks M.
    pub chunks: usize,
    pub weighting: WeightingMode,
    pub causal: bool,
    /// Causal tolerance ε.
    pub epsilon: f64,
    /// Moving-average factor α.
    pub alpha: f64,
    /// Global-update frequency f.
    pub update_every: u64,
    pub lr: LrSchedule,
    /// Per-term sample count for NTK-trace updates.
    pub ntk_batch: usize,
    pub log_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iters: 10_000,
            n_ic: 128,
            n_bc: 64,
            n_r: 128,
            chunks: 16,
            weighting: WeightingMode::GradNorm,
            causal: true,
            epsilon: 1.0,
            alpha: 0.9,
            update_every: 1000,
            lr: LrSchedule::default(),
            ntk_batch: 32,
            log_every: 500,
        }
    }
}

/// Everything one training run mutates: the unit of checkpointing.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ParamVector,
    pub m: ParamVector,
    pub v: ParamVector,
    pub step: u64,
    pub weights: LossWeights,
    pub rng: ChaCha8Rng,
    pub lr: LrSchedule,
}

impl TrainState {
    pub fn new(net: &Network, cfg: &TrainConfig, seed: u64) -> Self {
        let layout = net.layout().clone();
        TrainState {
            params: net.params().clone(),
            m: ParamVector::zeros(layout.clone()),
            v: ParamVector::zeros(layout),
            step: 0,
            weights: LossWeights::new(cfg.chunks, cfg.epsilon, cfg.alpha, cfg.update_every),
            rng: ChaCha8Rng::seed_from_u64(seed),
            lr: cfg.lr,
        }
    }

    /// Reset optimizer moments and the step counter (curriculum warm starts
    /// carry parameters but restart Adam and the learning-rate schedule).
    pub fn reset_optimizer(&mut self) {
        let layout = self.params.layout().clone();
        self.m = ParamVector::zeros(layout.clone());
        self.v = ParamVector::zeros(layout);
        self.step = 0;
    }
}

/// Bias-corrected Adam update with the staircase learning rate.
pub fn adam_step(state: &mut TrainState, grad: &ParamVector) -> Result<()> {
    if !grad.all_finite() {
        return Err(Error::NonFiniteGradient {
            step: state.step,
            last_good: None,
        });
    }
    let eta = state.lr.at(state.step);
    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let (p, m, v, g) = (
        state.params.as_mut_slice(),
        state.m.as_mut_slice(),
        state.v.as_mut_slice(),
        grad.as_slice(),
    );
    for i in 0..p.len() {
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= eta * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    state.step += 1;
    Ok(())
}

/// A stratified collocation batch: `n` points in chunk-major order with
/// `chunk_size` points per temporal chunk; `coords` is `[2 × n]` row-major
/// (time row first).
#[derive(Debug, Clone)]
pub struct CollocationBatch {
    pub coords: Vec<f64>,
    pub n: usize,
    pub chunks: usize,
    pub chunk_size: usize,
}

impl CollocationBatch {
    /// Chunk index of a time value under the `⌊M·t/T⌋` rule, clamped at `t = T`.
    pub fn chunk_of(t: f64, t1: f64, m: usize) -> usize {
        ((m as f64 * t / t1) as usize).min(m - 1)
    }
}

/// Fresh uniform draw each call: `n_r/M` points inside each temporal chunk
/// (rounded up), spatial coordinate uniform on the domain.
pub fn sample_collocation(
    rng: &mut ChaCha8Rng,
    problem: &dyn Problem,
    n_r: usize,
    m: usize,
) -> CollocationBatch {
    let d = problem.domain();
    let chunk_size = n_r.div_ceil(m);
    let n = chunk_size * m;
    let mut coords = vec![0.0; 2 * n];
    for chunk in 0..m {
        let t_lo = d.t1 * chunk as f64 / m as f64;
        let t_hi = d.t1 * (chunk + 1) as f64 / m as f64;
        for j in 0..chunk_size {
            let idx = chunk * chunk_size + j;
            coords[idx] = rng.random_range(t_lo..t_hi);
            coords[n + idx] = rng.random_range(d.x_lo..d.x_hi);
        }
    }
    CollocationBatch {
        coords,
        n,
        chunks: m,
        chunk_size,
    }
}

/// Uniform spatial samples for the IC term.
pub fn sample_ic(rng: &mut ChaCha8Rng, problem: &dyn Problem, n_ic: usize) -> Vec<f64> {
    let d = problem.domain();
    (0..n_ic).map(|_| rng.random_range(d.x_lo..d.x_hi)).collect()
}

/// Boundary samples for loss-term BCs: uniform times, alternating endpoints.
pub fn sample_bc(rng: &mut ChaCha8Rng, problem: &dyn Problem, n_bc: usize) -> Vec<f64> {
    let d = problem.domain();
    let mut coords = vec![0.0; 2 * n_bc];
    for i in 0..n_bc {
        coords[i] = rng.random_range(0.0..d.t1);
        coords[n_bc + i] = if i % 2 == 0 { d.x_lo } else { d.x_hi };
    }
    coords
}

/// One logged observation of the training loop.
#[derive(Debug, Clone)]
pub struct MetricsSnapshot {
    pub step: u64,
    pub l_ic: f64,
    pub l_bc: Option<f64>,
    pub l_r: f64,
    pub total: f64,
    pub lambda_ic: f64,
    pub lambda_bc: f64,
    pub lambda_r: f64,
    pub w_min: f64,
    pub w_mean: f64,
    pub lr: f64,
    pub elapsed_s: f64,
}

struct LossNodes {
    l_ic: NodeId,
    l_bc: Option<NodeId>,
    l_r: NodeId,
}

/// Record one full loss evaluation on a fresh tape. Updates `weights.w` with
/// the causal weights committed this iteration.
fn build_losses(
    tape: &mut Tape,
    net: &Network,
    problem: &dyn Problem,
    params: &ParamVector,
    weights: &mut LossWeights,
    cfg: &TrainConfig,
    causal_on: bool,
    ic_xs: &[f64],
    ic_targets: &[f64],
    bc_coords: Option<&[f64]>,
    colloc: &CollocationBatch,
) -> Result<LossNodes> {
    let pnodes = register_params(tape, net, params);
    let l_ic = ic_loss_nodes(tape, net, &pnodes, ic_xs, ic_targets)?;
    let l_bc = match bc_coords {
        Some(coords) => Some(bc_loss_nodes(tape, net, &pnodes, problem, coords, coords.len() / 2)?),
        None => None,
    };
    let r = build_residual(tape, net, &pnodes, problem, &colloc.coords, colloc.n)?;
    let r2 = tape.mul(r, r);
    let mut chunk_nodes = Vec::with_capacity(colloc.chunks);
    for c in 0..colloc.chunks {
        let sl = tape.slice_cols(r2, c * colloc.chunk_size, colloc.chunk_size);
        chunk_nodes.push(tape.mean_all(sl));
    }
    let l_r = if causal_on && colloc.chunks > 1 {
        let (l_r, w_vals) = causal_weighted_residual(tape, &chunk_nodes, cfg.epsilon)?;
        weights.w = w_vals;
        l_r
    } else {
        let mut acc = chunk_nodes[0];
        for &c in &chunk_nodes[1..] {
            acc = tape.add(acc, c);
        }
        weights.w = vec![1.0; colloc.chunks];
        tape.affine_const(acc, 1.0 / colloc.chunks as f64, 0.0)
    };
    Ok(LossNodes { l_ic, l_bc, l_r })
}

/// Skip-aware λ update: degenerate terms keep their previous value.
fn update_lambdas(weights: &mut LossWeights, measures: &TermTriple, alpha: f64) {
    let sum = measures.ic + measures.bc.unwrap_or(0.0) + measures.r;
    let mix = |old: f64, measure: f64| {
        if measure < DEGENERATE_NORM {
            old
        } else {
            alpha * old + (1.0 - alpha) * (sum / measure)
        }
    };
    weights.lambda_ic = mix(weights.lambda_ic, measures.ic);
    if let Some(bc) = measures.bc {
        weights.lambda_bc = mix(weights.lambda_bc, bc);
    }
    weights.lambda_r = mix(weights.lambda_r, measures.r);
}

/// Run `cfg.iters` steps of Algorithm-style training on one temporal window:
/// sample → evaluate terms → update temporal weights (every iteration) →
/// update global weights (every `update_every` iterations) → descend.
pub fn train_window(
    problem: &dyn Problem,
    net: &Network,
    state: &mut TrainState,
    cfg: &TrainConfig,
    on_metrics: &mut dyn FnMut(&MetricsSnapshot),
) -> Result<()> {
    crate::tune_allocator();
    let start = Instant::now();
    let bc_active = problem.bc_kind() == BcKind::LossTerm && cfg.n_bc > 0;
    for local in 0..cfg.iters {
        // cadence follows the absolute step counter so a resumed run keeps
        // the same update schedule as an uninterrupted one
        let n1 = state.step + 1;
        // (a) fresh random samples
        let ic_xs = sample_ic(&mut state.rng, problem, cfg.n_ic);
        let ic_targets: Vec<f64> = ic_xs.iter().map(|&x| problem.ic(x)).collect();
        let bc_coords = bc_active.then(|| sample_bc(&mut state.rng, problem, cfg.n_bc));
        let colloc = sample_collocation(&mut state.rng, problem, cfg.n_r, cfg.chunks);

        // (b) record the loss; temporal weights update inside
        let mut tape = Tape::new();
        let nodes = build_losses(
            &mut tape,
            net,
            problem,
            &state.params,
            &mut state.weights,
            cfg,
            cfg.causal,
            &ic_xs,
            &ic_targets,
            bc_coords.as_deref(),
            &colloc,
        )?;

        // (c)+(d) global weights every `update_every` iterations, including
        // the very first step: the initial gradient norms carry the term
        // imbalance before descent has distorted it
        if cfg.weighting != WeightingMode::None && (n1 - 1) % cfg.update_every == 0 {
            let measures = match cfg.weighting {
                WeightingMode::GradNorm => {
                    let g_ic = tape.loss_grad(nodes.l_ic, net.layout())?;
                    let g_bc = nodes
                        .l_bc
                        .map(|n| tape.loss_grad(n, net.layout()))
                        .transpose()?;
                    let g_r = tape.loss_grad(nodes.l_r, net.layout())?;
                    TermTriple {
                        ic: g_ic.l2_norm(),
                        bc: g_bc.map(|g| g.l2_norm()),
                        r: g_r.l2_norm(),
                    }
                }
                WeightingMode::Ntk => {
                    let nb = cfg.ntk_batch;
                    let ic_n = nb.min(ic_xs.len());
                    let mut ic_coords = vec![0.0; 2 * ic_n];
                    ic_coords[ic_n..].copy_from_slice(&ic_xs[..ic_n]);
                    let tr_ic =
                        ntk_trace(net, &state.params, NtkTerm::Value, &ic_coords, ic_n)?;
                    let tr_bc = match &bc_coords {
                        Some(coords) => {
                            let bcn = nb.min(coords.len() / 2);
                            let full = coords.len() / 2;
                            let mut sub = vec![0.0; 2 * bcn];
                            sub[..bcn].copy_from_slice(&coords[..bcn]);
                            sub[bcn..].copy_from_slice(&coords[full..full + bcn]);
                            Some(ntk_trace(net, &state.params, NtkTerm::Value, &sub, bcn)?)
                        }
                        None => None,
                    };
                    let rn = nb.min(colloc.n);
                    let mut r_coords = vec![0.0; 2 * rn];
                    r_coords[..rn].copy_from_slice(&colloc.coords[..rn]);
                    r_coords[rn..].copy_from_slice(&colloc.coords[colloc.n..colloc.n + rn]);
                    let tr_r = ntk_trace(
                        net,
                        &state.params,
                        NtkTerm::Residual(problem),
                        &r_coords,
                        rn,
                    )?;
                    TermTriple {
                        ic: tr_ic,
                        bc: tr_bc,
                        r: tr_r,
                    }
                }
                WeightingMode::None => unreachable!(),
            };
            update_lambdas(&mut state.weights, &measures, cfg.alpha);
        }

        // (e) descend on the weighted total
        let total = total_loss(&mut tape, nodes.l_ic, nodes.l_bc, nodes.l_r, &state.weights);
        let grad = tape.loss_grad(total, net.layout())?;
        adam_step(state, &grad)?;

        if n1 % cfg.log_every == 0 || local + 1 == cfg.iters {
            on_metrics(&MetricsSnapshot {
                step: state.step,
                l_ic: tape.scalar(nodes.l_ic),
                l_bc: nodes.l_bc.map(|n| tape.scalar(n)),
                l_r: tape.scalar(nodes.l_r),
                total: tape.scalar(total),
                lambda_ic: state.weights.lambda_ic,
                lambda_bc: state.weights.lambda_bc,
                lambda_r: state.weights.lambda_r,
                w_min: state.weights.w_min(),
                w_mean: state.weights.w_mean(),
                lr: state.lr.at(state.step.saturating_sub(1)),
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(())
}

/// Loss of one fixed batch under the current parameters (no state mutation).
/// Used by gradient checks and determinism tests.
pub fn loss_on_batch(
    problem: &dyn Problem,
    net: &Network,
    params: &ParamVector,
    weights: &LossWeights,
    cfg: &TrainConfig,
    ic_xs: &[f64],
    bc_coords: Option<&[f64]>,
    colloc: &CollocationBatch,
) -> Result<(f64, ParamVector)> {
    let ic_targets: Vec<f64> = ic_xs.iter().map(|&x| problem.ic(x)).collect();
    let mut tape = Tape::new();
    let mut weights = weights.clone();
    let nodes = build_losses(
        &mut tape,
        net,
        problem,
        params,
        &mut weights,
        cfg,
        cfg.causal,
        ic_xs,
        &ic_targets,
        bc_coords,
        colloc,
    )?;
    let total = total_loss(&mut tape, nodes.l_ic, nodes.l_bc, nodes.l_r, &weights);
    let grad = tape.loss_grad(total, net.layout())?;
    Ok((tape.scalar(total), grad))
}
