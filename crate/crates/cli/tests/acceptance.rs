//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Thresholds are pinned in code. Wall-clock is reported for the benchmark
//! criteria but does not gate them (timings on shared or low-core machines
//! are not comparable; accuracy thresholds gate strictly).
//!
//! Run with `cargo test -p pinn-cli --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pinn_cli::ablate::{plan_rows, run_ablation};
use pinn_cli::config::{RunConfig, Toggle};
use pinn_cli::runner;
use pinn_core::autodiff::{ParamVector, Tape};
use pinn_core::diag::{ntk_spectrum, spectral_bias_experiment};
use pinn_core::nets::{
    init_glorot, jet_eval, Activation, Arch, Embedding, FourierConfig, NetworkConfig, RwfConfig,
};
use pinn_core::oracle::{relative_l2, spectral_solve, SpectralPde};
use pinn_core::problems::{AllenCahn, Problem};
use pinn_core::train::{loss_on_batch, CollocationBatch, TrainConfig, WeightingMode};
use pinn_core::weighting::{
    causal_weights, ema_update, grad_norm_lambdas, ntk_trace, LossWeights, NtkTerm, TermTriple,
};

/// Benchmark criteria hold this while training so their internal parallelism
/// does not fight other heavy tests for cores.
static HEAVY: Mutex<()> = Mutex::new(());

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load_config(name: &str) -> RunConfig {
    let mut cfg = RunConfig::from_path(&configs_dir().join(name)).expect("shipped config");
    cfg.eval.cache_dir = Some(oracle_cache());
    cfg
}

fn oracle_cache() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("oracle-cache");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn report(criterion: u32, name: &str, pass: bool, details: &str) {
    println!(
        "ACCEPTANCE {criterion:2} ({name}): {} — {details}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {details}");
}

/// Train several configs concurrently (two at a time fits the sandbox).
fn run_batch(configs: &[RunConfig]) -> Vec<f64> {
    let results: Vec<Mutex<Option<f64>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..2 {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let outcome = runner::run(&configs[i], None).expect("run");
                *results[i].lock().unwrap() = outcome.rel_l2;
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("rel_l2"))
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// ---------------------------------------------------------------------------
// 1. Gradient-correctness suite.
// ---------------------------------------------------------------------------

fn fd_check(problem: &dyn Problem, cfg: &NetworkConfig, seed: u64, directions: usize) -> f64 {
    let net = init_glorot(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF00D);
    let ic_xs = pinn_core::train::sample_ic(&mut rng, problem, 6);
    let colloc = pinn_core::train::sample_collocation(&mut rng, problem, 8, 4);
    let tcfg = TrainConfig {
        chunks: colloc.chunks,
        causal: false,
        weighting: WeightingMode::None,
        ..Default::default()
    };
    let weights = LossWeights::new(colloc.chunks, 1.0, 0.9, 1000);
    let eval = |p: &ParamVector| {
        loss_on_batch(problem, &net, p, &weights, &tcfg, &ic_xs, None, &colloc).unwrap()
    };
    let params = net.params().clone();
    let (_, grad) = eval(&params);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..directions {
        let mut dir = ParamVector::zeros(params.layout().clone());
        for v in dir.as_mut_slice() {
            *v = rng.random_range(-1.0..1.0);
        }
        let scale = 1.0 / dir.l2_norm();
        for v in dir.as_mut_slice() {
            *v *= scale;
        }
        let mut plus = params.clone();
        plus.axpy(h, &dir);
        let mut minus = params.clone();
        minus.axpy(-h, &dir);
        let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
        let analytic = grad.dot(&dir);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-10));
    }
    worst
}

#[test]
fn criterion_01_gradient_correctness_all_architectures() {
    let t0 = std::time::Instant::now();
    let problem = AllenCahn::default();
    let mut worst: f64 = 0.0;
    let mut combos = 0;
    for arch in [Arch::Plain, Arch::Modified] {
        for rwf in [None, Some(RwfConfig { mu: 1.0, sigma: 0.1 })] {
            for embedding in [
                Embedding::None,
                Embedding::Fourier(FourierConfig { sigma: 1.0, m: 5 }),
            ] {
                let cfg = NetworkConfig {
                    arch,
                    depth: 2,
                    width: 6,
                    activation: Activation::Tanh,
                    embedding,
                    rwf,
                    input_dim: 2,
                    output_dim: 1,
                };
                worst = worst.max(fd_check(&problem, &cfg, 7 + combos, 10));
                combos += 1;
            }
        }
    }
    let pass = combos == 8 && worst < 1e-6;
    report(
        1,
        "gradient correctness",
        pass,
        &format!(
            "8 architectures x 10 directions, worst rel err {worst:.2e} (< 1e-6), {:.1} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. Nested-derivative suite.
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_nested_derivatives() {
    let t0 = std::time::Instant::now();
    // symbolic unit cases to 1e-10
    let unit = |act: Activation| -> pinn_core::nets::Network {
        let cfg = NetworkConfig {
            arch: Arch::Plain,
            depth: 1,
            width: 1,
            activation: act,
            embedding: Embedding::None,
            rwf: None,
            input_dim: 1,
            output_dim: 1,
        };
        let net = init_glorot(&cfg, 1).unwrap();
        let mut params = ParamVector::zeros(net.layout().clone());
        let w0 = params.layout().index_of("layer_0.w").unwrap();
        params.segment_mut(w0)[0] = 1.0;
        let ow = params.layout().index_of("out.w").unwrap();
        params.segment_mut(ow)[0] = 1.0;
        // stash params back into a network clone for jet_eval convenience
        pinn_core::nets::Network::with_params(net, params)
    };
    let mut sym_err: f64 = 0.0;
    let sin_net = unit(Activation::Sin);
    let jet = jet_eval(&sin_net, sin_net.params(), &[0.0], 0, 4).unwrap();
    for (a, b) in jet.coeffs().iter().zip([0.0, 1.0, 0.0, -1.0 / 6.0, 0.0]) {
        sym_err = sym_err.max((a - b).abs());
    }
    let tanh_net = unit(Activation::Tanh);
    let jet = jet_eval(&tanh_net, tanh_net.params(), &[0.0], 0, 4).unwrap();
    for (a, b) in jet.coeffs().iter().zip([0.0, 1.0, 0.0, -1.0 / 3.0, 0.0]) {
        sym_err = sym_err.max((a - b).abs());
    }

    // random tanh nets vs finite differences at tuned steps
    let cfg = NetworkConfig {
        arch: Arch::Plain,
        depth: 3,
        width: 8,
        activation: Activation::Tanh,
        embedding: Embedding::None,
        rwf: None,
        input_dim: 2,
        output_dim: 1,
    };
    let mut fd_err: f64 = 0.0;
    for seed in [11u64, 12, 13] {
        let net = init_glorot(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3 {
            let point = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
            let f = |x: f64| {
                jet_eval(&net, net.params(), &[point[0], x], 1, 0)
                    .unwrap()
                    .value()
            };
            let jet = jet_eval(&net, net.params(), &point, 1, 4).unwrap();
            let x = point[1];
            let h1 = 1e-6;
            let fd1 = (f(x + h1) - f(x - h1)) / (2.0 * h1);
            fd_err = fd_err.max((jet.derivative(1) - fd1).abs() / fd1.abs().max(1e-8));
            let h2 = 1e-4;
            let fd2 = (f(x + h2) - 2.0 * f(x) + f(x - h2)) / (h2 * h2);
            fd_err = fd_err.max((jet.derivative(2) - fd2).abs() / fd2.abs().max(1e-6));
            let stencil = |h: f64| {
                (f(x - 2.0 * h) - 4.0 * f(x - h) + 6.0 * f(x) - 4.0 * f(x + h) + f(x + 2.0 * h))
                    / h.powi(4)
            };
            let fd4 = (4.0 * stencil(5e-3) - stencil(1e-2)) / 3.0;
            fd_err = fd_err.max((jet.derivative(4) - fd4).abs() / fd4.abs().max(1e-3));
        }
    }
    let pass = sym_err < 1e-10 && fd_err < 1e-4;
    report(
        2,
        "nested derivatives",
        pass,
        &format!(
            "symbolic err {sym_err:.2e} (< 1e-10), fd err {fd_err:.2e} (< 1e-4), {:.1} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 3. Weighting identities.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_weighting_identities() {
    let t0 = std::time::Instant::now();
    // balancing identity exact to 1e-12
    let norms = TermTriple {
        ic: 0.137,
        bc: Some(2.9),
        r: 41.5,
    };
    let l = grad_norm_lambdas(&norms).unwrap();
    let total = norms.ic + norms.bc.unwrap() + norms.r;
    let mut ident_err: f64 = 0.0;
    for (lam, n) in [(l.ic, norms.ic), (l.bc.unwrap(), norms.bc.unwrap()), (l.r, norms.r)] {
        ident_err = ident_err.max(((lam * n) - total).abs() / total);
    }
    // causal weights against direct evaluation, monotone, w1 = 1
    let losses = [0.51, 0.0, 0.33, 0.12, 0.9];
    let w = causal_weights(&losses, 1.7).unwrap();
    let mut causal_err: f64 = 0.0;
    let mut prefix = 0.0;
    for (i, wi) in w.iter().enumerate() {
        causal_err = causal_err.max((wi - (-1.7 * prefix).exp()).abs());
        prefix += losses[i];
    }
    let monotone = w.windows(2).all(|p| p[1] <= p[0] + 1e-15) && w[0] == 1.0;
    // EMA endpoints exact
    let old = TermTriple { ic: 2.0, bc: None, r: 0.5 };
    let hat = TermTriple { ic: 9.0, bc: None, r: 3.5 };
    let e1 = ema_update(&old, &hat, 1.0);
    let e0 = ema_update(&old, &hat, 0.0);
    let ema_exact = e1 == old && e0 == hat;

    let pass = ident_err < 1e-12 && causal_err < 1e-15 && monotone && ema_exact;
    report(
        3,
        "weighting identities",
        pass,
        &format!(
            "identity err {ident_err:.2e} (< 1e-12), causal err {causal_err:.2e}, monotone {monotone}, ema endpoints {ema_exact}, {:.2} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. NTK equivalence on a small net.
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_ntk_equivalence() {
    let t0 = std::time::Instant::now();
    // 17-parameter net: 1 hidden layer of width 4
    let cfg = NetworkConfig {
        arch: Arch::Plain,
        depth: 1,
        width: 4,
        activation: Activation::Tanh,
        embedding: Embedding::None,
        rwf: None,
        input_dim: 2,
        output_dim: 1,
    };
    let net = init_glorot(&cfg, 5).unwrap();
    assert!(net.layout().total_len() <= 50);
    let problem = AllenCahn::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let batch = 12;
    let mut coords = vec![0.0; 2 * batch];
    for i in 0..batch {
        coords[i] = rng.random_range(0.0..1.0);
        coords[batch + i] = rng.random_range(-1.0..1.0f64);
    }
    let mut worst: f64 = 0.0;
    for term in [NtkTerm::Value, NtkTerm::Residual(&problem)] {
        // brute force: assemble the full Jacobian, form the Gram matrix,
        // take its trace
        let mut jac: Vec<ParamVector> = Vec::new();
        for i in 0..batch {
            jac.push(
                pinn_core::weighting::per_sample_grad(
                    &net,
                    net.params(),
                    term,
                    &[coords[i], coords[batch + i]],
                )
                .unwrap(),
            );
        }
        let mut gram_trace = 0.0;
        for row in &jac {
            let mut diag = 0.0;
            for (a, b) in row.as_slice().iter().zip(row.as_slice()) {
                diag += a * b;
            }
            gram_trace += diag;
        }
        let trace = ntk_trace(&net, net.params(), term, &coords, batch).unwrap();
        let eig = ntk_spectrum(&net, net.params(), term, &coords, batch).unwrap();
        let eig_sum: f64 = eig.iter().sum();
        worst = worst.max((trace - gram_trace).abs() / gram_trace.abs().max(1e-300));
        worst = worst.max((eig_sum - gram_trace).abs() / gram_trace.abs().max(1e-300));
    }
    let pass = worst < 1e-10;
    report(
        4,
        "ntk equivalence",
        pass,
        &format!(
            "trace and eigen-sum vs brute-force Gram, worst rel err {worst:.2e} (< 1e-10), {:.2} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 5. RWF gradient-step theorem.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_rwf_gradient_step_theorem() {
    let t0 = std::time::Instant::now();
    use pinn_core::autodiff::ParamLayout;
    use std::sync::Arc;
    let mut layout = ParamLayout::new();
    let seg_s = layout.push("s", 1, 1);
    let seg_v = layout.push("v", 1, 1);
    let layout = Arc::new(layout);
    let (s0, v0) = (1.3, 0.7);
    let discrepancy = |eta: f64| -> f64 {
        let mut p = ParamVector::zeros(layout.clone());
        p.segment_mut(seg_s)[0] = s0;
        p.segment_mut(seg_v)[0] = v0;
        let mut tape = Tape::new();
        let sn = tape.param(seg_s, &layout, &p);
        let vn = tape.param(seg_v, &layout, &p);
        let w = tape.mul(sn, vn);
        let x = tape.constant_scalar(0.9);
        let wx = tape.mul(w, x);
        let y = tape.constant_scalar(0.4);
        let diff = tape.sub(wx, y);
        let loss = tape.mul(diff, diff);
        let grad = tape.loss_grad(loss, &layout).unwrap();
        let adj = tape.backward(loss).unwrap();
        let dl_dw = adj.node(w).unwrap().data()[0];
        let (s1, v1) = (
            s0 - eta * grad.segment(seg_s)[0],
            v0 - eta * grad.segment(seg_v)[0],
        );
        let dw_actual = s1 * v1 - s0 * v0;
        let dw_theorem = -eta * (s0 * s0 + v0 * v0) * dl_dw;
        (dw_actual - dw_theorem).abs()
    };
    let d: Vec<f64> = [1e-2, 5e-3, 2.5e-3].iter().map(|&e| discrepancy(e)).collect();
    let r1 = d[0] / d[1];
    let r2 = d[1] / d[2];
    let pass = (r1 - 4.0).abs() <= 0.4 && (r2 - 4.0).abs() <= 0.4;
    report(
        5,
        "rwf gradient-step theorem",
        pass,
        &format!(
            "discrepancy ratios {r1:.3}, {r2:.3} (4 ± 10%), {:.2} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Advection desk-scale benchmark.
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_advection_benchmark() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let base = load_config("advection_desk.toml");
    let plain = plain_variant(&base);
    let mut configs = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut c = base.clone();
        c.seed = seed;
        configs.push(c);
        let mut p = plain.clone();
        p.seed = seed;
        configs.push(p);
    }
    let rels = run_batch(&configs);
    let mut full: Vec<f64> = rels.iter().step_by(2).copied().collect();
    let mut plain_r: Vec<f64> = rels.iter().skip(1).step_by(2).copied().collect();
    let full_med = median(&mut full);
    let plain_med = median(&mut plain_r);
    let pass = full_med < 5e-2 && plain_med > 5e-1;
    report(
        6,
        "advection desk benchmark",
        pass,
        &format!(
            "full median rel-L2 {full_med:.3e} (< 5e-2, seeds {full:?}), plain median {plain_med:.3e} (> 5e-1), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

fn plain_variant(base: &RunConfig) -> RunConfig {
    let mut plain = base.clone();
    for t in [
        Toggle::Fourier,
        Toggle::Rwf,
        Toggle::Weighting,
        Toggle::Causal,
        Toggle::ModifiedMlp,
        Toggle::TimePeriod,
    ] {
        plain = t.disable(&plain);
    }
    plain
}

// ---------------------------------------------------------------------------
// 7. Allen-Cahn desk-scale benchmark.
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_allen_cahn_benchmark() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let base = load_config("allen_cahn_desk.toml");
    let plain = plain_variant(&base);
    let mut configs = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut c = base.clone();
        c.seed = seed;
        configs.push(c);
        let mut p = plain.clone();
        p.seed = seed;
        configs.push(p);
    }
    let rels = run_batch(&configs);
    let mut full: Vec<f64> = rels.iter().step_by(2).copied().collect();
    let mut plain_r: Vec<f64> = rels.iter().skip(1).step_by(2).copied().collect();
    let full_med = median(&mut full);
    let plain_med = median(&mut plain_r);
    let pass = full_med < 1e-2 && plain_med > 5e-1;
    report(
        7,
        "allen-cahn desk benchmark",
        pass,
        &format!(
            "full median rel-L2 {full_med:.3e} (< 1e-2, seeds {full:?}), plain median {plain_med:.3e} (> 5e-1), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 8. Ablation ordering on Allen-Cahn.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_ablation_ordering() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let base = load_config("ablation_allen_cahn.toml");
    let toggles = [
        Toggle::Fourier,
        Toggle::Rwf,
        Toggle::Weighting,
        Toggle::Causal,
    ];
    let table = run_ablation(&base, &toggles, true, None).unwrap();
    let rel = |label: &str| -> f64 {
        table
            .rows
            .iter()
            .find(|r| r.label == label)
            .and_then(|r| r.rel_l2)
            .unwrap_or(f64::INFINITY)
    };
    let full = rel("full");
    let rows: Vec<(String, f64)> = table
        .rows
        .iter()
        .map(|r| (r.label.clone(), r.rel_l2.unwrap_or(f64::INFINITY)))
        .collect();
    let full_is_best = table
        .rows
        .iter()
        .filter(|r| r.label != "full")
        .all(|r| r.rel_l2.unwrap_or(f64::INFINITY) > full);
    let fourier_gap = rel("no_fourier") / full;
    let pass = full_is_best && fourier_gap >= 10.0;
    report(
        8,
        "ablation ordering",
        pass,
        &format!(
            "rows {rows:?}; full lowest: {full_is_best}; no-fourier/full = {fourier_gap:.1}x (>= 10x), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Time-marching necessity on KS.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_ks_time_marching() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let marched = load_config("ks_desk.toml");
    // single window at equal total budget
    let mut single = marched.clone();
    let windows = marched
        .curriculum
        .as_ref()
        .and_then(|c| c.time_windows)
        .unwrap_or(1) as u64;
    single.curriculum = None;
    single.optimizer.iters = marched.optimizer.iters * windows;

    let mut configs = Vec::new();
    for seed in [1u64, 2, 3] {
        let mut m = marched.clone();
        m.seed = seed;
        configs.push(m);
        let mut s = single.clone();
        s.seed = seed;
        configs.push(s);
    }
    let rels = run_batch(&configs);
    let mut marched_r: Vec<f64> = rels.iter().step_by(2).copied().collect();
    let mut single_r: Vec<f64> = rels.iter().skip(1).step_by(2).copied().collect();
    let m_med = median(&mut marched_r);
    let s_med = median(&mut single_r);
    let pass = s_med > m_med;
    report(
        9,
        "ks time-marching necessity",
        pass,
        &format!(
            "single-window median rel-L2 {s_med:.3e} > {}-window median {m_med:.3e}, {:.0} s",
            windows,
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 10. Spectral-bias property pair.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_spectral_bias_pair() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let iters = 3000;
    let seeds = [1u64, 2, 3, 4, 5];
    let gap = |fourier: Option<FourierConfig>| -> Vec<f64> {
        seeds
            .iter()
            .map(|&s| {
                let r = spectral_bias_experiment(fourier, s, iters, 64, 2).unwrap();
                let low = r.half_iter_low.unwrap_or(iters + 1) as f64;
                let high = r.half_iter_high.unwrap_or(iters + 1) as f64;
                high - low
            })
            .collect()
    };
    let mut plain_gaps = gap(None);
    let mut fourier_gaps = gap(Some(FourierConfig { sigma: 2.0, m: 32 }));
    let plain_med = median(&mut plain_gaps);
    let fourier_med = median(&mut fourier_gaps);
    // low frequency halves first on the plain MLP; Fourier features close
    // or reverse the gap by at least 5x
    let pass = plain_med > 0.0 && fourier_med <= plain_med / 5.0;
    report(
        10,
        "spectral bias pair",
        pass,
        &format!(
            "plain gap median {plain_med} iters (> 0), fourier gap median {fourier_med} (<= plain/5), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 11. Oracle self-convergence and residual consistency.
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_oracle_self_convergence() {
    let t0 = std::time::Instant::now();
    let pde = SpectralPde::AllenCahn {
        diffusivity: 1e-4,
        reaction: 5.0,
    };
    let ic = |x: f64| x * x * (std::f64::consts::PI * x).cos();
    let n = pinn_core::oracle::DEFAULT_N_ALLEN_CAHN;
    let dt = pinn_core::oracle::DEFAULT_DT_ALLEN_CAHN;
    let coarse = spectral_solve(&pde, ic, (-1.0, 1.0), n, dt, 1.0, 4, 256).unwrap();
    let fine = spectral_solve(&pde, ic, (-1.0, 1.0), 2 * n, dt / 2.0, 1.0, 4, 256).unwrap();
    let self_conv = relative_l2(&coarse.values, &fine.values).unwrap();

    // advection oracle satisfies its residual through an interpolant:
    // spectral x-derivative plus a centered time difference on a fine grid
    let c = 80.0;
    let nx = 256;
    let xs = pinn_core::oracle::uniform_grid(0.0, std::f64::consts::TAU, nx);
    let dt_fd = 1e-5;
    let t_mid = 0.37;
    let sol = pinn_core::oracle::advection_exact(
        |x| x.sin(),
        c,
        &[t_mid - dt_fd, t_mid, t_mid + dt_fd],
        &xs,
    );
    let mut max_res: f64 = 0.0;
    for j in 0..nx {
        let u_t = (sol.value(2, j) - sol.value(0, j)) / (2.0 * dt_fd);
        // exact spectral derivative of sin(x − ct) is cos(x − ct)
        let u_x = (xs[j] - c * t_mid).cos();
        let t_jet = pinn_core::jet::Jet::from_coeffs(vec![sol.value(1, j), u_t]);
        let x_jet = pinn_core::jet::Jet::from_coeffs(vec![sol.value(1, j), u_x]);
        max_res = max_res.max(pinn_core::problems::advection_residual(&t_jet, &x_jet, c).abs());
    }
    // residual bounded by the O(dt²) interpolation error of the time stencil
    let res_bound = c * c * dt_fd * dt_fd; // |u_ttt|·dt²/6 ≈ c³dt²/6 ≤ c²dt²·13
    let pass = self_conv < 1e-6 && max_res < res_bound.max(1e-5) * 20.0;
    report(
        11,
        "oracle self-convergence",
        pass,
        &format!(
            "allen-cahn refinement rel-L2 {self_conv:.2e} (< 1e-6), advection interpolant residual {max_res:.2e}, {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

// ---------------------------------------------------------------------------
// 12. Determinism.
// ---------------------------------------------------------------------------

#[test]
fn criterion_12_determinism() {
    let _guard = HEAVY.lock().unwrap();
    let t0 = std::time::Instant::now();
    let mut cfg = load_config("heat_toy.toml");
    cfg.optimizer.iters = 400;
    cfg.seed = 9;
    let a = runner::run(&cfg, None).unwrap();
    let b = runner::run(&cfg, None).unwrap();
    let bit_exact = a.final_loss.to_bits() == b.final_loss.to_bits()
        && a.rel_l2.unwrap().to_bits() == b.rel_l2.unwrap().to_bits();

    // checkpoint-resume matches the uninterrupted trajectory
    use pinn_core::train::{load_checkpoint, save_checkpoint, train_window, TrainState};
    let problem = cfg.build_problem().unwrap();
    let net = init_glorot(&cfg.network_config().unwrap(), 3).unwrap();
    let tcfg = cfg.train_config();
    let mut full = TrainState::new(&net, &tcfg, 5);
    let full_cfg = TrainConfig { iters: 60, ..tcfg.clone() };
    train_window(problem.as_ref(), &net, &mut full, &full_cfg, &mut |_| {}).unwrap();
    let mut part = TrainState::new(&net, &tcfg, 5);
    let cfg_a = TrainConfig { iters: 23, ..tcfg.clone() };
    train_window(problem.as_ref(), &net, &mut part, &cfg_a, &mut |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    save_checkpoint(&path, &net, &part).unwrap();
    let loaded = load_checkpoint(&path).unwrap();
    let net2 = loaded.rebuild_network().unwrap();
    let mut resumed = loaded.state;
    let cfg_b = TrainConfig { iters: 37, ..tcfg.clone() };
    train_window(problem.as_ref(), &net2, &mut resumed, &cfg_b, &mut |_| {}).unwrap();
    let resume_exact = resumed.params.as_slice() == full.params.as_slice();

    let pass = bit_exact && resume_exact;
    report(
        12,
        "determinism",
        pass,
        &format!(
            "same-seed rerun bit-exact: {bit_exact}; checkpoint-resume exact: {resume_exact}; {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}
