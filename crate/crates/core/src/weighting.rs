//! Adaptive loss weighting: causal temporal weights, gradient-norm and
//! NTK-trace global balancing, and moving-average updates.
//!
//! Temporal weights follow `w_i = exp(−ε·Σ_{k<i} L_r^k)` and are always used
//! under stop-gradient. Global weights satisfy the balancing identity
//! `λ̂_i·‖∇L_i‖ = Σ_j ‖∇L_j‖` so every weighted term back-propagates with the
//! same gradient magnitude.

use crate::autodiff::{NodeId, ParamVector, Tape};
use crate::error::{Error, Result};
use crate::nets::{coord_leaf, forward, register_params, Network};
use crate::problems::{build_residual, Problem};

/// Global weights, temporal weights, and their update hyper-parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub lambda_ic: f64,
    pub lambda_bc: f64,
    pub lambda_r: f64,
    /// Temporal weights, one per chunk; `w[0] = 1` always.
    pub w: Vec<f64>,
    /// Causal tolerance ε.
    pub epsilon: f64,
    /// Moving-average factor α.
    pub alpha: f64,
    /// Global-update frequency f (iterations).
    pub update_every: u64,
}

impl LossWeights {
    /// Algorithm defaults: all weights one, `f = 1000`, `α = 0.9`, `ε = 1.0`.
    pub fn new(chunks: usize, epsilon: f64, alpha: f64, update_every: u64) -> Self {
        LossWeights {
            lambda_ic: 1.0,
            lambda_bc: 1.0,
            lambda_r: 1.0,
            w: vec![1.0; chunks.max(1)],
            epsilon,
            alpha,
            update_every,
        }
    }

    pub fn chunks(&self) -> usize {
        self.w.len()
    }

    pub fn w_min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn w_mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }
}

/// Per-term losses of one iteration; `l_r` is the causally weighted mean of
/// the chunk losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_ic: f64,
    pub l_bc: Option<f64>,
    pub l_r_chunks: Vec<f64>,
    pub l_r: f64,
}

/// `w_i = exp(−ε·Σ_{k<i} L_r^k)`; `w[0] = 1` by the empty sum.
pub fn causal_weights(chunk_losses: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    for &l in chunk_losses {
        if l < 0.0 || !l.is_finite() {
            return Err(Error::InvalidLoss(l));
        }
    }
    let mut w = Vec::with_capacity(chunk_losses.len());
    let mut prefix = 0.0;
    for &l in chunk_losses {
        w.push((-epsilon * prefix).exp());
        prefix += l;
    }
    Ok(w)
}

/// Tape version of the causal residual: builds
/// `L_r = (1/M)·Σ stop_grad(w_i)·L_r^i` from chunk-loss scalar nodes and
/// returns the committed weight values for logging.
pub fn causal_weighted_residual(
    tape: &mut Tape,
    chunk_losses: &[NodeId],
    epsilon: f64,
) -> Result<(NodeId, Vec<f64>)> {
    let m = chunk_losses.len();
    assert!(m >= 1);
    let values: Vec<f64> = chunk_losses.iter().map(|&c| tape.scalar(c)).collect();
    for &v in &values {
        if v < 0.0 || !v.is_finite() {
            return Err(Error::InvalidLoss(v));
        }
    }
    let mut w_values = Vec::with_capacity(m);
    let mut weighted_sum: Option<NodeId> = None;
    let mut prefix: Option<NodeId> = None;
    for (i, &chunk) in chunk_losses.iter().enumerate() {
        let w_node = match prefix {
            None => tape.constant_scalar(1.0),
            Some(p) => {
                let scaled = tape.affine_const(p, -epsilon, 0.0);
                tape.unary(crate::jet::UnaryFn::Exp, scaled, "causal")?
            }
        };
        let w_frozen = tape.stop_gradient(w_node);
        w_values.push(tape.scalar(w_frozen));
        let term = tape.mul(w_frozen, chunk);
        weighted_sum = Some(match weighted_sum {
            None => term,
            Some(s) => tape.add(s, term),
        });
        if i + 1 < m {
            prefix = Some(match prefix {
                None => chunk,
                Some(p) => tape.add(p, chunk),
            });
        }
    }
    let l_r = tape.affine_const(weighted_sum.unwrap(), 1.0 / m as f64, 0.0);
    Ok((l_r, w_values))
}

/// Per-term values for the three canonical loss terms. `bc` is absent when
/// boundary conditions are enforced exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermTriple {
    pub ic: f64,
    pub bc: Option<f64>,
    pub r: f64,
}

impl TermTriple {
    fn sum(&self) -> f64 {
        self.ic + self.bc.unwrap_or(0.0) + self.r
    }
}

fn balance(values: &TermTriple, degenerate: impl Fn(&'static str, f64) -> Error) -> Result<TermTriple> {
    let total = values.sum();
    let check = |name: &'static str, v: f64| -> Result<f64> {
        if v <= 0.0 || !v.is_finite() {
            Err(degenerate(name, v))
        } else {
            Ok(total / v)
        }
    };
    Ok(TermTriple {
        ic: check("ic", values.ic)?,
        bc: values.bc.map(|v| check("bc", v)).transpose()?,
        r: check("r", values.r)?,
    })
}

/// `λ̂_i = (Σ_j ‖∇L_j‖)/‖∇L_i‖`: after weighting, every term's gradient norm
/// equals the total.
pub fn grad_norm_lambdas(grad_norms: &TermTriple) -> Result<TermTriple> {
    balance(grad_norms, |term, norm| Error::DegenerateGradient {
        term: term.to_string(),
        norm,
    })
}

/// Same balancing identity with NTK traces in place of gradient norms.
pub fn ntk_lambdas(traces: &TermTriple) -> Result<TermTriple> {
    balance(traces, |term, trace| Error::DegenerateKernel {
        term: term.to_string(),
        trace,
    })
}

/// `λ_new = α·λ_old + (1−α)·λ̂_new`, component-wise.
pub fn ema_update(old: &TermTriple, new_hat: &TermTriple, alpha: f64) -> TermTriple {
    debug_assert!((0.0..=1.0).contains(&alpha));
    let mix = |o: f64, n: f64| alpha * o + (1.0 - alpha) * n;
    TermTriple {
        ic: mix(old.ic, new_hat.ic),
        bc: match (old.bc, new_hat.bc) {
            (Some(o), Some(n)) => Some(mix(o, n)),
            (o, _) => o,
        },
        r: mix(old.r, new_hat.r),
    }
}

/// Weighted total `λ_ic·L_ic + λ_bc·L_bc + λ_r·L_r` as a scalar node ready
/// for the reverse sweep. The λ enter as literal constants, so they are
/// gradient-frozen by construction.
pub fn total_loss(
    tape: &mut Tape,
    l_ic: NodeId,
    l_bc: Option<NodeId>,
    l_r: NodeId,
    weights: &LossWeights,
) -> NodeId {
    let a = tape.affine_const(l_ic, weights.lambda_ic, 0.0);
    let c = tape.affine_const(l_r, weights.lambda_r, 0.0);
    let mut total = tape.add(a, c);
    if let Some(bc) = l_bc {
        let b = tape.affine_const(bc, weights.lambda_bc, 0.0);
        total = tape.add(total, b);
    }
    total
}

// ---------------------------------------------------------------------------
// NTK diagonal machinery.
// ---------------------------------------------------------------------------

/// Which per-sample output the kernel is built from.
#[derive(Clone, Copy)]
pub enum NtkTerm<'a> {
    /// `∂u/∂θ` at the sample points (IC and BC kernels).
    Value,
    /// `∂R[u]/∂θ` at the sample points (residual kernel uses the residual
    /// operator, not the raw output).
    Residual(&'a dyn Problem),
}

/// Gradient of the term output at one sample with respect to every parameter.
pub fn per_sample_grad(
    net: &Network,
    params: &ParamVector,
    term: NtkTerm,
    coord: &[f64; 2],
) -> Result<ParamVector> {
    let mut tape = Tape::new();
    let pnodes = register_params(&mut tape, net, params);
    let out = match term {
        NtkTerm::Value => {
            let leaf = coord_leaf(&mut tape, coord, 2, 1, None);
            let o = forward(&mut tape, net, &pnodes, leaf)?;
            tape.coeff(o, 0)
        }
        NtkTerm::Residual(problem) => build_residual(&mut tape, net, &pnodes, problem, coord, 1)?,
    };
    let scalar = tape.sum_all(out);
    tape.loss_grad(scalar, net.layout())
}

/// Sum of diagonal NTK entries: `Σ_i ‖∂(output at sample i)/∂θ‖²`.
/// `coords` is row-major `[2 × batch]`.
pub fn ntk_trace(net: &Network, params: &ParamVector, term: NtkTerm, coords: &[f64], batch: usize) -> Result<f64> {
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut trace = 0.0;
    for i in 0..batch {
        let coord = [coords[i], coords[batch + i]];
        let g = per_sample_grad(net, params, term, &coord)?;
        trace += g.as_slice().iter().map(|v| v * v).sum::<f64>();
    }
    Ok(trace)
}
