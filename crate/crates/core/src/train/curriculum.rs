//! Curriculum drivers: time-marching over temporal windows and continuation
//! over a problem parameter.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nets::{
    forward_values, init_glorot, Embedding, Network, NetworkConfig, TimeEmbedding,
};
use crate::oracle::interp_periodic;
use crate::problems::{BcKind, Problem, WithIc};

use super::{train_window, MetricsSnapshot, TrainConfig, TrainState};

/// Sequential time-marching plan. Windows tile `[0, T]` without overlap; the
/// initial condition of window `k+1` is the previous window's prediction at
/// its final time slice, re-fit as new IC data on a fixed evaluation grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowPlan {
    pub n_windows: usize,
    pub iters_per_window: u64,
    /// Grid resolution for the IC transfer between windows.
    pub transfer_grid: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        WindowPlan {
            n_windows: 1,
            iters_per_window: 10_000,
            transfer_grid: 512,
        }
    }
}

/// Ordered continuation stages over one named problem constant. Warm starts
/// carry parameters and reset optimizer moments.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ContinuationPlan {
    pub constant: String,
    /// `(constant value, iteration budget)` per stage.
    pub stages: Vec<(f64, u64)>,
}

/// Per-window networks and states plus a stitched evaluator that dispatches
/// queries to the owning window.
pub struct StitchedSolution {
    pub nets: Vec<Network>,
    pub states: Vec<TrainState>,
    pub window_len: f64,
    pub t_total: f64,
}

impl StitchedSolution {
    pub fn n_windows(&self) -> usize {
        self.nets.len()
    }

    fn window_of(&self, t: f64) -> (usize, f64) {
        let k = ((t / self.window_len) as usize).min(self.nets.len() - 1);
        (k, t - k as f64 * self.window_len)
    }

    /// Evaluate the stitched solution at one space-time point.
    pub fn evaluate(&self, t: f64, x: f64) -> Result<f64> {
        let (k, local_t) = self.window_of(t);
        Ok(forward_values(&self.nets[k], &self.states[k].params, &[local_t, x], 1)?[0])
    }

    /// Evaluate on a full grid, time-major.
    pub fn evaluate_grid(&self, times: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(times.len() * xs.len());
        for &t in times {
            let (k, local_t) = self.window_of(t);
            let mut coords = vec![0.0; 2 * xs.len()];
            for (i, &x) in xs.iter().enumerate() {
                coords[i] = local_t;
                coords[xs.len() + i] = x;
            }
            out.extend(forward_values(&self.nets[k], &self.states[k].params, &coords, xs.len())?);
        }
        Ok(out)
    }
}

/// Network template for one window: the temporal horizon becomes the window
/// length, and a trainable time period re-initializes to it.
fn window_net_config(template: &NetworkConfig, window_len: f64) -> NetworkConfig {
    let mut cfg = template.clone();
    if let Embedding::Periodic(p) | Embedding::FourierOverPeriodic(p, _) = &mut cfg.embedding {
        if let TimeEmbedding::Trainable { init_period } = &mut p.time {
            *init_period = window_len;
        }
    }
    cfg
}

/// Evaluate a window's net at its final local time on the transfer grid and
/// wrap the samples as the next window's initial condition.
fn transfer_ic(
    net: &Network,
    state: &TrainState,
    problem: &dyn Problem,
    window_len: f64,
    grid: usize,
) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
    let d = problem.domain();
    let xs: Vec<f64> = (0..grid)
        .map(|j| d.x_lo + d.x_len() * j as f64 / grid as f64)
        .collect();
    let mut coords = vec![0.0; 2 * grid];
    for (i, &x) in xs.iter().enumerate() {
        coords[i] = window_len;
        coords[grid + i] = x;
    }
    let values = forward_values(net, &state.params, &coords, grid)?;
    let (x_lo, x_len) = (d.x_lo, d.x_len());
    let periodic = problem.bc_kind() == BcKind::PeriodicHard;
    Ok(Arc::new(move |x: f64| {
        if periodic {
            interp_periodic(x_lo, x_len, &values, x)
        } else {
            // clamped linear interpolation
            let n = values.len();
            let s = ((x - x_lo) / x_len * n as f64).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            let frac = s - i as f64;
            values[i] * (1.0 - frac) + values[i + 1] * frac
        }
    }))
}

/// Train windows sequentially over `[0, T]`. Window `k > 0` targets the
/// previous window's final-slice prediction as its initial condition. A
/// window failure aborts the march but preserves completed windows.
pub fn time_march(
    problem: &dyn Problem,
    net_template: &NetworkConfig,
    plan: &WindowPlan,
    cfg: &TrainConfig,
    master_seed: u64,
    on_metrics: &mut dyn FnMut(usize, &MetricsSnapshot),
) -> Result<StitchedSolution> {
    if plan.n_windows == 0 {
        return Err(Error::InvalidConfig("window plan needs at least one window".into()));
    }
    let total_t = problem.domain().t1;
    let window_len = total_t / plan.n_windows as f64;
    let mut nets = Vec::with_capacity(plan.n_windows);
    let mut states = Vec::with_capacity(plan.n_windows);
    let mut ic: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> = None;

    let window_cfg = TrainConfig {
        iters: plan.iters_per_window,
        ..cfg.clone()
    };

    for k in 0..plan.n_windows {
        let base = problem.with_horizon(window_len);
        let window_problem: Arc<dyn Problem> = match &ic {
            None => base,
            Some(g) => Arc::new(WithIc::new(base, g.clone())),
        };
        let net_cfg = window_net_config(net_template, window_len);
        let net = init_glorot(&net_cfg, splitmix(master_seed, 101 + k as u64))?;
        let mut state = TrainState::new(&net, &window_cfg, splitmix(master_seed, 201 + k as u64));
        train_window(window_problem.as_ref(), &net, &mut state, &window_cfg, &mut |m| {
            on_metrics(k, m)
        })?;
        ic = Some(transfer_ic(&net, &state, window_problem.as_ref(), window_len, plan.transfer_grid)?);
        nets.push(net);
        states.push(state);
    }

    Ok(StitchedSolution {
        nets,
        states,
        window_len,
        t_total: total_t,
    })
}

/// Sequential warm-started training over an increasing sequence of values of
/// one problem constant. Parameters carry over; optimizer moments reset.
pub fn continue_parameter(
    problem: &dyn Problem,
    net: &Network,
    plan: &ContinuationPlan,
    cfg: &TrainConfig,
    seed: u64,
    on_metrics: &mut dyn FnMut(usize, &MetricsSnapshot),
) -> Result<TrainState> {
    if plan.stages.is_empty() {
        return Err(Error::InvalidConfig("continuation plan needs stages".into()));
    }
    for &(_, budget) in &plan.stages {
        if budget == 0 {
            return Err(Error::InvalidConfig("stage budgets must be positive".into()));
        }
    }
    let mut state = TrainState::new(net, cfg, seed);
    for (i, &(value, iters)) in plan.stages.iter().enumerate() {
        let staged = problem.with_constant(&plan.constant, value)?;
        if i > 0 {
            state.reset_optimizer();
        }
        let stage_cfg = TrainConfig { iters, ..cfg.clone() };
        train_window(staged.as_ref(), net, &mut state, &stage_cfg, &mut |m| {
            on_metrics(i, m)
        })?;
    }
    Ok(state)
}

fn splitmix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}
