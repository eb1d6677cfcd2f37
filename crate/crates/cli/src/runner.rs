//! Drives one experiment end to end: build problem and network from the run
//! config, train (single window, time-marching, or continuation), stream
//! metrics, checkpoint each window, and evaluate against the reference
//! solution.

use std::path::{Path, PathBuf};
use std::time::Instant;

use pinn_core::oracle::{reference_solution, relative_l2, GridSolution};
use pinn_core::problems::Problem;
use pinn_core::train::{
    continue_parameter, save_checkpoint, time_march, StitchedSolution, TrainState,
};
use pinn_core::nets::init_glorot;

use crate::config::RunConfig;
use crate::metrics::{MetricsWriter, Record};

pub struct RunOutcome {
    pub final_loss: f64,
    pub rel_l2: Option<f64>,
    pub runtime_s: f64,
    pub steps: u64,
    pub solution: StitchedSolution,
    pub out_dir: Option<PathBuf>,
}

fn splitmix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Reference grid for the configured problem and evaluation settings.
pub fn reference_grid(cfg: &RunConfig, problem: &dyn Problem) -> anyhow::Result<GridSolution> {
    Ok(reference_solution(
        problem,
        cfg.eval.n_modes,
        cfg.oracle_dt(),
        cfg.eval.n_save,
        cfg.eval.nx,
        cfg.cache_dir().as_deref(),
    )?)
}

/// Relative L² of a stitched solution against the reference grid.
pub fn evaluate_solution(
    solution: &StitchedSolution,
    reference: &GridSolution,
) -> anyhow::Result<(f64, Vec<f64>)> {
    let pred = solution.evaluate_grid(&reference.times, &reference.xs)?;
    let rel = relative_l2(&pred, &reference.values)?;
    Ok((rel, pred))
}

/// Run one experiment. `out_dir = None` keeps everything in memory (no
/// files). Returns the final training loss, the relative L² against the
/// reference, and the per-window solution.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> anyhow::Result<RunOutcome> {
    pinn_core::tune_allocator();
    let start = Instant::now();
    let problem = cfg.build_problem()?;
    let net_template = cfg.network_config()?;
    for w in net_template.validate()? {
        eprintln!("warning: {w}");
    }
    let train_cfg = cfg.train_config();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("run_config.toml"), toml::to_string_pretty(cfg)?)?;
    }
    let mut writer = MetricsWriter::create(out_dir.map(|d| d.join("metrics.jsonl")).as_deref())?;

    let mut final_loss = 0.0f64;
    let solution = match cfg.continuation_plan() {
        Some(plan) => {
            let net = init_glorot(&net_template, splitmix(cfg.seed, 101))?;
            let state = continue_parameter(
                problem.as_ref(),
                &net,
                &plan,
                &train_cfg,
                splitmix(cfg.seed, 201),
                &mut |stage, m| {
                    final_loss = m.total;
                    let _ = writer.write(&Record::from_snapshot(stage, m, None));
                },
            )?;
            let t1 = problem.domain().t1;
            StitchedSolution {
                nets: vec![net],
                states: vec![state],
                window_len: t1,
                t_total: t1,
            }
        }
        None => {
            let plan = cfg.window_plan();
            time_march(
                problem.as_ref(),
                &net_template,
                &plan,
                &train_cfg,
                cfg.seed,
                &mut |window, m| {
                    final_loss = m.total;
                    let _ = writer.write(&Record::from_snapshot(window, m, None));
                },
            )?
        }
    };

    if let Some(dir) = out_dir {
        for (k, (net, state)) in solution.nets.iter().zip(&solution.states).enumerate() {
            save_checkpoint(&dir.join(format!("window_{k:02}.ckpt")), net, state)?;
        }
    }

    let reference = reference_grid(cfg, problem.as_ref())?;
    let (rel, _) = evaluate_solution(&solution, &reference)?;
    let steps: u64 = solution.states.iter().map(|s| s.step).sum();
    let runtime_s = start.elapsed().as_secs_f64();
    writer.write(&Record::Summary {
        seed: cfg.seed,
        steps,
        final_loss,
        rel_l2: Some(rel),
        runtime_s,
    })?;

    Ok(RunOutcome {
        final_loss,
        rel_l2: Some(rel),
        runtime_s,
        steps,
        solution,
        out_dir: out_dir.map(Path::to_path_buf),
    })
}

/// Rebuild a stitched solution from a run directory's checkpoints.
pub fn load_run(dir: &Path) -> anyhow::Result<(RunConfig, StitchedSolution)> {
    let cfg = RunConfig::from_path(&dir.join("run_config.toml"))?;
    let problem = cfg.build_problem()?;
    let t1 = problem.domain().t1;
    let mut nets = Vec::new();
    let mut states: Vec<TrainState> = Vec::new();
    for k in 0.. {
        let path = dir.join(format!("window_{k:02}.ckpt"));
        if !path.exists() {
            break;
        }
        let data = pinn_core::train::load_checkpoint(&path)?;
        nets.push(data.rebuild_network()?);
        states.push(data.state);
    }
    if nets.is_empty() {
        anyhow::bail!("no window checkpoints found in {}", dir.display());
    }
    let n = nets.len();
    Ok((
        cfg,
        StitchedSolution {
            nets,
            states,
            window_len: t1 / n as f64,
            t_total: t1,
        },
    ))
}
