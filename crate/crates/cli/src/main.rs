use std::path::PathBuf;

use clap::{Parser, Subcommand};

use pinn_cli::ablate::{format_table, run_ablation};
use pinn_cli::config::{RunConfig, Toggle};
use pinn_cli::diagnose::{run_diagnostics, Which};
use pinn_cli::runner;

/// Physics-informed neural network training engine.
///
/// Reference caches default to `$PINN_CACHE_DIR` when a config does not set
/// `eval.cache_dir`.
#[derive(Parser)]
#[command(name = "pinn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Validate the configuration and exit without touching any files.
        #[arg(long)]
        dry_run: bool,
    },
    /// Evaluate a finished run against its reference solution and dump
    /// prediction/reference/error grids.
    Eval {
        /// Run directory produced by `pinn train`.
        #[arg(long)]
        run: PathBuf,
        /// Where to write the grid dumps (defaults to the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the base config plus single-component-off rows and emit a table.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        /// Components to toggle (repeatable): fourier, rwf, weighting,
        /// causal, modified_mlp, time_period.
        #[arg(long = "toggle")]
        toggles: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run rows concurrently (timings then marked unreliable).
        #[arg(long)]
        parallel: bool,
    },
    /// Append NTK/gradient/temporal diagnostics to a run's metrics stream.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        /// ntk | grads | temporal | all
        #[arg(long, default_value = "all")]
        which: String,
        #[arg(long, default_value_t = 64)]
        batch: usize,
    },
    /// Pre-generate the reference-solution cache for a configuration.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Cache directory override.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    pinn_core::tune_allocator();
    match Cli::parse().command {
        Command::Train {
            config,
            seed,
            out,
            dry_run,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if dry_run {
                println!("config ok: {}", config.display());
                return Ok(());
            }
            let out_dir = cfg.out_dir.clone();
            let outcome = runner::run(&cfg, out_dir.as_deref())?;
            println!(
                "seed {} | steps {} | final loss {:.6e} | rel-L2 {} | {:.1} s",
                cfg.seed,
                outcome.steps,
                outcome.final_loss,
                outcome
                    .rel_l2
                    .map(|r| format!("{r:.6e}"))
                    .unwrap_or_else(|| "-".into()),
                outcome.runtime_s
            );
        }
        Command::Eval { run, out } => {
            let (cfg, solution) = runner::load_run(&run)?;
            let problem = cfg.build_problem()?;
            let reference = runner::reference_grid(&cfg, problem.as_ref())?;
            let (rel, pred) = runner::evaluate_solution(&solution, &reference)?;
            let out_dir = out.unwrap_or_else(|| run.clone());
            std::fs::create_dir_all(&out_dir)?;
            let mut pred_grid = reference.clone();
            pred_grid.values = pred;
            let mut err_grid = reference.clone();
            for (e, (p, r)) in err_grid
                .values
                .iter_mut()
                .zip(pred_grid.values.iter().zip(&reference.values))
            {
                *e = p - r;
            }
            pinn_core::oracle::write_grid(&out_dir.join("prediction.grid"), &pred_grid)?;
            pinn_core::oracle::write_grid(&out_dir.join("reference.grid"), &reference)?;
            pinn_core::oracle::write_grid(&out_dir.join("error.grid"), &err_grid)?;
            println!("rel-L2 {rel:.6e}");
        }
        Command::Ablate {
            config,
            toggles,
            seed,
            out,
            parallel,
        } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let toggles: Vec<Toggle> = toggles
                .iter()
                .map(|t| Toggle::parse(t))
                .collect::<anyhow::Result<_>>()?;
            let table = run_ablation(&cfg, &toggles, parallel, out.as_deref())?;
            print!("{}", format_table(&table));
        }
        Command::Diagnose { run, which, batch } => {
            let which = Which::parse(&which)?;
            let records = run_diagnostics(&run, which, batch)?;
            println!("appended {} diagnostic records", records.len());
        }
        Command::Oracle { config, cache_dir } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if cache_dir.is_some() {
                cfg.eval.cache_dir = cache_dir;
            }
            if cfg.cache_dir().is_none() {
                anyhow::bail!("no cache directory: set eval.cache_dir, --cache-dir, or PINN_CACHE_DIR");
            }
            let problem = cfg.build_problem()?;
            let reference = runner::reference_grid(&cfg, problem.as_ref())?;
            println!(
                "cached reference for {}: {} times x {} points",
                problem.name(),
                reference.times.len(),
                reference.xs.len()
            );
        }
    }
    Ok(())
}
