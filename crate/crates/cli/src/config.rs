//! Run configuration: one structured TOML file per run, schema-validated
//! with unknown keys rejected. Every field has a documented default; the
//! weighting defaults mirror the training algorithm's recommended values
//! (`f = 1000`, `α = 0.9`, `ε = 1.0`) and the optimizer defaults mirror the
//! benchmark settings (`η₀ = 1e-3`, decay 0.9 every 2000 steps).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use pinn_core::nets::{
    Activation, Arch, Embedding, FourierConfig, NetworkConfig, PeriodicConfig, RwfConfig,
    TimeEmbedding,
};
use pinn_core::problems::{by_name, BcKind, Problem};
use pinn_core::train::{ContinuationPlan, LrSchedule, TrainConfig, WeightingMode, WindowPlan};

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory for checkpoints and the metrics stream.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub problem: ProblemSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub weighting: WeightingSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub curriculum: Option<CurriculumSection>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// One of: `allen_cahn`, `advection`, `ks`, `heat_dirichlet`.
    pub name: String,
    /// Temporal horizon override (defaults to the benchmark's own).
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Named constant overrides, e.g. `c = 80.0`.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_arch")]
    pub arch: String,
    pub depth: usize,
    pub width: usize,
    #[serde(default = "default_activation")]
    pub activation: String,
    /// Random Fourier features on top of the (possibly embedded) coordinates.
    #[serde(default)]
    pub fourier: Option<FourierSection>,
    #[serde(default)]
    pub periodic: Option<PeriodicSection>,
    #[serde(default)]
    pub rwf: Option<RwfSection>,
}

fn default_arch() -> String {
    "plain".into()
}
fn default_activation() -> String {
    "tanh".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FourierSection {
    pub sigma: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSection {
    /// Exact spatial periodicity through the embedding (hard periodic BCs).
    #[serde(default)]
    pub spatial: bool,
    /// Trainable temporal period initialized to the window length.
    #[serde(default)]
    pub time_trainable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RwfSection {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct WeightingSection {
    /// One of `grad_norm`, `ntk`, `none`.
    pub scheme: String,
    pub causal: bool,
    /// Causal tolerance ε.
    pub epsilon: f64,
    /// Moving-average factor α.
    pub alpha: f64,
    /// Global-update frequency f (iterations).
    pub update_every: u64,
    /// Temporal chunks M.
    pub chunks: usize,
    /// Per-term sample count for NTK-trace updates.
    pub ntk_batch: usize,
}

impl Default for WeightingSection {
    fn default() -> Self {
        WeightingSection {
            scheme: "grad_norm".into(),
            causal: true,
            epsilon: 1.0,
            alpha: 0.9,
            update_every: 1000,
            chunks: 16,
            ntk_batch: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct OptimizerSection {
    pub lr: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    /// Linear learning-rate warmup steps (0 disables).
    pub warmup_steps: u64,
    /// Total iterations (per window when time-marching).
    pub iters: u64,
    pub n_ic: usize,
    pub n_bc: usize,
    pub n_r: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            lr: 1e-3,
            decay_rate: 0.9,
            decay_steps: 2000,
            warmup_steps: 0,
            iters: 10_000,
            n_ic: 64,
            n_bc: 64,
            n_r: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSection {
    /// Time-marching: number of equal windows tiling the horizon.
    #[serde(default)]
    pub time_windows: Option<usize>,
    #[serde(default = "default_transfer_grid")]
    pub transfer_grid: usize,
    /// Continuation over one named constant.
    #[serde(default)]
    pub continuation: Option<ContinuationSection>,
}

fn default_transfer_grid() -> usize {
    512
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ContinuationSection {
    pub constant: String,
    pub values: Vec<f64>,
    pub iters: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct EvalSection {
    /// Spectral oracle resolution (power of two).
    pub n_modes: usize,
    /// Oracle step size; 0 selects the per-problem default.
    pub dt: f64,
    /// Time slices in the evaluation grid.
    pub n_save: usize,
    /// Spatial points in the evaluation grid.
    pub nx: usize,
    /// Oracle cache directory; falls back to `PINN_CACHE_DIR`.
    pub cache_dir: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            n_modes: 1024,
            dt: 0.0,
            n_save: 100,
            nx: 256,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct OutputSection {
    pub log_every: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { log_every: 1000 }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("config error in {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_validated(text: &str) -> anyhow::Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level validation beyond the serde schema.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.build_problem()?;
        self.network_config()?.validate()?;
        match self.weighting.scheme.as_str() {
            "grad_norm" | "ntk" | "none" => {}
            other => anyhow::bail!("weighting.scheme: unknown scheme `{other}`"),
        }
        if !(0.0..=1.0).contains(&self.weighting.alpha) {
            anyhow::bail!("weighting.alpha must lie in [0, 1]");
        }
        if self.weighting.epsilon <= 0.0 {
            anyhow::bail!("weighting.epsilon must be positive");
        }
        if self.weighting.chunks == 0 || self.weighting.update_every == 0 {
            anyhow::bail!("weighting.chunks and weighting.update_every must be positive");
        }
        if let Some(c) = &self.curriculum {
            if c.time_windows.is_some() && c.continuation.is_some() {
                anyhow::bail!("curriculum: choose either time_windows or continuation, not both");
            }
            if let Some(w) = c.time_windows {
                if w == 0 {
                    anyhow::bail!("curriculum.time_windows must be positive");
                }
            }
            if let Some(cont) = &c.continuation {
                if cont.values.len() != cont.iters.len() || cont.values.is_empty() {
                    anyhow::bail!("curriculum.continuation: values and iters must be equal-length and nonempty");
                }
            }
        }
        if !self.eval.n_modes.is_power_of_two() {
            anyhow::bail!("eval.n_modes must be a power of two");
        }
        Ok(())
    }

    pub fn build_problem(&self) -> anyhow::Result<Arc<dyn Problem>> {
        let mut problem = by_name(&self.problem.name)
            .map_err(|e| anyhow::anyhow!("problem.name: {e}"))?;
        for (k, v) in &self.problem.constants {
            problem = problem
                .with_constant(k, *v)
                .map_err(|e| anyhow::anyhow!("problem.constants.{k}: {e}"))?;
        }
        if let Some(t) = self.problem.t_end {
            if t <= 0.0 {
                anyhow::bail!("problem.t_end must be positive");
            }
            problem = problem.with_horizon(t);
        }
        Ok(problem)
    }

    /// The network template; the trainable time period (when enabled) is
    /// re-initialized per window by the curriculum driver.
    pub fn network_config(&self) -> anyhow::Result<NetworkConfig> {
        let problem = self.build_problem()?;
        let domain = problem.domain();
        let n = &self.network;
        let arch = match n.arch.as_str() {
            "plain" => Arch::Plain,
            "modified" => Arch::Modified,
            other => anyhow::bail!("network.arch: unknown arch `{other}`"),
        };
        let activation = match n.activation.as_str() {
            "tanh" => Activation::Tanh,
            "gelu" => Activation::Gelu,
            "sin" => Activation::Sin,
            other => anyhow::bail!("network.activation: unknown activation `{other}`"),
        };
        let periodic_cfg = match &n.periodic {
            Some(p) if p.spatial || p.time_trainable => {
                if !p.spatial && p.time_trainable {
                    anyhow::bail!(
                        "network.periodic: time_trainable requires spatial periodicity"
                    );
                }
                if problem.bc_kind() != BcKind::PeriodicHard {
                    anyhow::bail!(
                        "network.periodic.spatial: problem `{}` has no periodic boundary",
                        problem.name()
                    );
                }
                Some(PeriodicConfig {
                    spatial_periods: vec![domain.x_len()],
                    time: if p.time_trainable {
                        TimeEmbedding::Trainable {
                            init_period: domain.t1,
                        }
                    } else {
                        TimeEmbedding::Raw
                    },
                })
            }
            _ => None,
        };
        let fourier_cfg = n.fourier.as_ref().map(|f| FourierConfig {
            sigma: f.sigma,
            m: f.m,
        });
        let embedding = match (periodic_cfg, fourier_cfg) {
            (None, None) => Embedding::None,
            (None, Some(f)) => Embedding::Fourier(f),
            (Some(p), None) => Embedding::Periodic(p),
            (Some(p), Some(f)) => Embedding::FourierOverPeriodic(p, f),
        };
        Ok(NetworkConfig {
            arch,
            depth: n.depth,
            width: n.width,
            activation,
            embedding,
            rwf: n.rwf.as_ref().map(|r| RwfConfig {
                mu: r.mu,
                sigma: r.sigma,
            }),
            input_dim: 2,
            output_dim: 1,
        })
    }

    pub fn weighting_mode(&self) -> WeightingMode {
        match self.weighting.scheme.as_str() {
            "ntk" => WeightingMode::Ntk,
            "none" => WeightingMode::None,
            _ => WeightingMode::GradNorm,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iters: self.optimizer.iters,
            n_ic: self.optimizer.n_ic,
            n_bc: self.optimizer.n_bc,
            n_r: self.optimizer.n_r,
            chunks: self.weighting.chunks,
            weighting: self.weighting_mode(),
            causal: self.weighting.causal,
            epsilon: self.weighting.epsilon,
            alpha: self.weighting.alpha,
            update_every: self.weighting.update_every,
            lr: LrSchedule {
                eta0: self.optimizer.lr,
                decay_rate: self.optimizer.decay_rate,
                decay_steps: self.optimizer.decay_steps,
                warmup_steps: self.optimizer.warmup_steps,
            },
            ntk_batch: self.weighting.ntk_batch,
            log_every: self.output.log_every,
        }
    }

    pub fn window_plan(&self) -> WindowPlan {
        let (windows, transfer) = match &self.curriculum {
            Some(c) => (c.time_windows.unwrap_or(1), c.transfer_grid),
            None => (1, 512),
        };
        WindowPlan {
            n_windows: windows,
            iters_per_window: self.optimizer.iters,
            transfer_grid: transfer,
        }
    }

    pub fn continuation_plan(&self) -> Option<ContinuationPlan> {
        let c = self.curriculum.as_ref()?.continuation.as_ref()?;
        Some(ContinuationPlan {
            constant: c.constant.clone(),
            stages: c.values.iter().copied().zip(c.iters.iter().copied()).collect(),
        })
    }

    /// Oracle step size: explicit, or the per-problem default.
    pub fn oracle_dt(&self) -> f64 {
        if self.eval.dt > 0.0 {
            return self.eval.dt;
        }
        match self.problem.name.as_str() {
            "ks" => pinn_core::oracle::DEFAULT_DT_KS,
            _ => pinn_core::oracle::DEFAULT_DT_ALLEN_CAHN,
        }
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.eval
            .cache_dir
            .clone()
            .or_else(pinn_core::oracle::cache_dir_from_env)
    }
}

/// Ablation toggles: each names one methodological component that can be
/// disabled individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    Fourier,
    Rwf,
    Weighting,
    Causal,
    ModifiedMlp,
    TimePeriod,
}

impl Toggle {
    pub fn parse(s: &str) -> anyhow::Result<Toggle> {
        Ok(match s {
            "fourier" => Toggle::Fourier,
            "rwf" => Toggle::Rwf,
            "grad_norm" | "ntk" | "weighting" => Toggle::Weighting,
            "causal" => Toggle::Causal,
            "modified_mlp" => Toggle::ModifiedMlp,
            "time_period" => Toggle::TimePeriod,
            other => anyhow::bail!("unknown toggle `{other}`"),
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Toggle::Fourier => "fourier",
            Toggle::Rwf => "rwf",
            Toggle::Weighting => "weighting",
            Toggle::Causal => "causal",
            Toggle::ModifiedMlp => "modified_mlp",
            Toggle::TimePeriod => "time_period",
        }
    }

    /// Whether the base config actually uses the component.
    pub fn active_in(&self, cfg: &RunConfig) -> bool {
        match self {
            Toggle::Fourier => cfg.network.fourier.is_some(),
            Toggle::Rwf => cfg.network.rwf.is_some(),
            Toggle::Weighting => cfg.weighting.scheme != "none",
            Toggle::Causal => cfg.weighting.causal,
            Toggle::ModifiedMlp => cfg.network.arch == "modified",
            Toggle::TimePeriod => cfg
                .network
                .periodic
                .as_ref()
                .is_some_and(|p| p.time_trainable),
        }
    }

    /// Disable the component in a copy of the config.
    pub fn disable(&self, cfg: &RunConfig) -> RunConfig {
        let mut out = cfg.clone();
        match self {
            Toggle::Fourier => out.network.fourier = None,
            Toggle::Rwf => out.network.rwf = None,
            Toggle::Weighting => out.weighting.scheme = "none".into(),
            Toggle::Causal => out.weighting.causal = false,
            Toggle::ModifiedMlp => out.network.arch = "plain".into(),
            Toggle::TimePeriod => {
                if let Some(p) = &mut out.network.periodic {
                    p.time_trainable = false;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
name = "advection"

[network]
depth = 3
width = 128
"#;

    #[test]
    fn defaults_mirror_algorithm_recommendations() {
        let cfg = RunConfig::from_str_validated(MINIMAL).unwrap();
        assert_eq!(cfg.weighting.update_every, 1000);
        assert_eq!(cfg.weighting.alpha, 0.9);
        assert_eq!(cfg.weighting.epsilon, 1.0);
        assert_eq!(cfg.optimizer.lr, 1e-3);
        assert_eq!(cfg.optimizer.decay_rate, 0.9);
        assert_eq!(cfg.optimizer.decay_steps, 2000);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{MINIMAL}\nnonsense_key = 1\n");
        assert!(RunConfig::from_str_validated(&bad).is_err());
        let bad2 = MINIMAL.replace("[network]", "[network]\nwobble = 2");
        assert!(RunConfig::from_str_validated(&bad2).is_err());
    }

    #[test]
    fn unknown_problem_and_scheme_rejected() {
        let bad = MINIMAL.replace("advection", "warp_drive");
        let err = RunConfig::from_str_validated(&bad).unwrap_err().to_string();
        assert!(err.contains("warp_drive"), "{err}");
        let bad2 = format!("{MINIMAL}\n[weighting]\nscheme = \"psychic\"\n");
        assert!(RunConfig::from_str_validated(&bad2).is_err());
    }

    #[test]
    fn periodic_embedding_requires_periodic_problem() {
        let bad = r#"
[problem]
name = "heat_dirichlet"

[network]
depth = 3
width = 128
periodic = { spatial = true }
"#;
        let err = RunConfig::from_str_validated(bad).unwrap_err().to_string();
        assert!(err.contains("periodic"), "{err}");
    }

    #[test]
    fn toggles_disable_components() {
        let text = r#"
[problem]
name = "advection"

[network]
arch = "modified"
depth = 3
width = 128
fourier = { sigma = 1.0, m = 32 }
periodic = { spatial = true, time_trainable = true }
rwf = { mu = 1.0, sigma = 0.1 }
"#;
        let cfg = RunConfig::from_str_validated(text).unwrap();
        for t in [
            Toggle::Fourier,
            Toggle::Rwf,
            Toggle::Weighting,
            Toggle::Causal,
            Toggle::ModifiedMlp,
            Toggle::TimePeriod,
        ] {
            assert!(t.active_in(&cfg), "{t:?}");
            let off = t.disable(&cfg);
            assert!(!t.active_in(&off), "{t:?}");
            off.validate().unwrap();
        }
    }
}
