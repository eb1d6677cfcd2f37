//! Diagnostics over checkpointed runs: NTK spectra, per-term gradient
//! histograms, and the temporal residual profile, appended to the run's
//! metrics stream as typed records.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pinn_core::autodiff::Tape;
use pinn_core::diag::{grad_histogram, ntk_spectrum, temporal_residual_profile};
use pinn_core::nets::register_params;
use pinn_core::problems::{build_residual, ic_loss_nodes, Problem};
use pinn_core::train::{sample_collocation, sample_ic};
use pinn_core::weighting::NtkTerm;

use crate::metrics::{MetricsWriter, Record};
use crate::runner::load_run;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Ntk,
    Grads,
    Temporal,
    All,
}

impl Which {
    pub fn parse(s: &str) -> anyhow::Result<Which> {
        Ok(match s {
            "ntk" => Which::Ntk,
            "grads" => Which::Grads,
            "temporal" => Which::Temporal,
            "all" => Which::All,
            other => anyhow::bail!("unknown diagnostic `{other}` (ntk|grads|temporal|all)"),
        })
    }
}

pub fn run_diagnostics(dir: &Path, which: Which, batch: usize) -> anyhow::Result<Vec<Record>> {
    let (cfg, solution) = load_run(dir)?;
    let problem = cfg.build_problem()?;
    // diagnose the last window's net over its local window problem
    let k = solution.nets.len() - 1;
    let net = &solution.nets[k];
    let state = &solution.states[k];
    let window_problem = problem.with_horizon(solution.window_len);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xD1A6)
        ;
    let mut records = Vec::new();

    if matches!(which, Which::Ntk | Which::All) {
        let ic_xs = sample_ic(&mut rng, window_problem.as_ref(), batch);
        let mut coords = vec![0.0; 2 * batch];
        coords[batch..].copy_from_slice(&ic_xs);
        let eig_ic = ntk_spectrum(net, &state.params, NtkTerm::Value, &coords, batch)?;
        records.push(Record::NtkSpectrum {
            term: "ic".into(),
            batch,
            eigenvalues: eig_ic,
        });
        let colloc = sample_collocation(&mut rng, window_problem.as_ref(), batch, 1);
        let eig_r = ntk_spectrum(
            net,
            &state.params,
            NtkTerm::Residual(window_problem.as_ref()),
            &colloc.coords,
            colloc.n,
        )?;
        records.push(Record::NtkSpectrum {
            term: "r".into(),
            batch: colloc.n,
            eigenvalues: eig_r,
        });
    }

    if matches!(which, Which::Grads | Which::All) {
        for (term, grad) in per_term_gradients(net, state, window_problem.as_ref(), &mut rng, batch)? {
            let h = grad_histogram(&grad);
            records.push(Record::GradHistogram {
                term,
                counts: h.counts,
                norm: h.norm,
                max_abs: h.max_abs,
                total: h.total,
            });
        }
    }

    if matches!(which, Which::Temporal | Which::All) {
        let chunks = cfg.weighting.chunks.max(2);
        let losses = temporal_residual_profile(net, &state.params, window_problem.as_ref(), chunks, 128)?;
        records.push(Record::TemporalProfile {
            chunks,
            losses,
        });
    }

    let metrics_path = dir.join("metrics.jsonl");
    let mut writer = if metrics_path.exists() {
        MetricsWriter::append(&metrics_path)?
    } else {
        MetricsWriter::create(Some(&metrics_path))?
    };
    for r in &records {
        writer.write(r)?;
    }
    Ok(records)
}

/// Per-term parameter gradients on a fresh sampled batch.
pub fn per_term_gradients(
    net: &pinn_core::nets::Network,
    state: &pinn_core::train::TrainState,
    problem: &dyn Problem,
    rng: &mut ChaCha8Rng,
    batch: usize,
) -> anyhow::Result<Vec<(String, pinn_core::autodiff::ParamVector)>> {
    let ic_xs = sample_ic(rng, problem, batch);
    let ic_targets: Vec<f64> = ic_xs.iter().map(|&x| problem.ic(x)).collect();
    let colloc = sample_collocation(rng, problem, batch, 1);
    let mut tape = Tape::new();
    let pnodes = register_params(&mut tape, net, &state.params);
    let l_ic = ic_loss_nodes(&mut tape, net, &pnodes, &ic_xs, &ic_targets)?;
    let r = build_residual(&mut tape, net, &pnodes, problem, &colloc.coords, colloc.n)?;
    let r2 = tape.mul(r, r);
    let l_r = tape.mean_all(r2);
    let g_ic = tape.loss_grad(l_ic, net.layout())?;
    let g_r = tape.loss_grad(l_r, net.layout())?;
    Ok(vec![("ic".into(), g_ic), ("r".into(), g_r)])
}
