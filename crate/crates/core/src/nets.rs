//! Network architectures and coordinate embeddings.
//!
//! Supports plain and modified MLPs with tanh/GELU/sin activations, random
//! Fourier features, exact-periodicity embeddings (optionally with a
//! trainable temporal period), Glorot initialization, and random weight
//! factorization. Networks are immutable value objects after construction;
//! trainable parameters travel separately as a [`ParamVector`].

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{NodeId, ParamLayout, ParamVector, Tape};
use crate::error::{Error, Result};
use crate::jet::{check_order, Jet, UnaryFn};
use crate::tensor::JetMat;

pub const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Plain,
    Modified,
}

/// Activations must keep a non-vanishing second derivative; ReLU is not
/// representable here by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Gelu,
    Sin,
}

impl Activation {
    fn unary(self) -> UnaryFn {
        match self {
            Activation::Tanh => UnaryFn::Tanh,
            Activation::Gelu => UnaryFn::Gelu,
            Activation::Sin => UnaryFn::Sin,
        }
    }
}

/// Random Fourier feature stage: `γ(x) = [cos(Bx); sin(Bx)]` with fixed
/// `B ~ N(0, σ²)` of shape `m × d`. Moderately large `σ ∈ [1, 10]` is the
/// recommended range when the target spectrum is unknown.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FourierConfig {
    pub sigma: f64,
    pub m: usize,
}

/// Temporal axis treatment inside a periodic embedding.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeEmbedding {
    /// Time passes through raw, prepended to the spatial features.
    Raw,
    /// Time mapped to (cos ωt, sin ωt) with trainable period, initialized to
    /// the temporal domain length. Stored as log-period so it stays positive.
    Trainable { init_period: f64 },
}

/// Exact periodicity embedding: each periodic spatial axis becomes its
/// (cos, sin) pair with ω = 2π/P, which enforces `u⁽ˡ⁾(a) = u⁽ˡ⁾(a+P)` for
/// every derivative order by construction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PeriodicConfig {
    /// Period per spatial axis, in coordinate order after time.
    pub spatial_periods: Vec<f64>,
    pub time: TimeEmbedding,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Embedding {
    None,
    Fourier(FourierConfig),
    Periodic(PeriodicConfig),
    /// Periodic embedding first, then Fourier features on the embedded vector.
    FourierOverPeriodic(PeriodicConfig, FourierConfig),
}

/// Random weight factorization hyper-parameters; recommended `μ = 0.5 or 1.0`,
/// `σ = 0.1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RwfConfig {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetworkConfig {
    pub arch: Arch,
    /// Number of hidden layers.
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub embedding: Embedding,
    pub rwf: Option<RwfConfig>,
    /// Coordinate count (time first for time-dependent problems).
    pub input_dim: usize,
    pub output_dim: usize,
}

impl NetworkConfig {
    /// Hard validation plus soft recommendations. Out-of-range width/depth
    /// only warns: the recommended ranges are guidance, not contracts.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.depth == 0 || self.width == 0 || self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "network dimensions must be positive".into(),
            ));
        }
        match &self.embedding {
            Embedding::Fourier(f) | Embedding::FourierOverPeriodic(_, f) if f.m == 0 => {
                return Err(Error::InvalidConfig("fourier feature count must be positive".into()))
            }
            _ => {}
        }
        if let Embedding::Periodic(p) | Embedding::FourierOverPeriodic(p, _) = &self.embedding {
            for &period in &p.spatial_periods {
                if period <= 0.0 {
                    return Err(Error::InvalidPeriod(period));
                }
            }
            if let TimeEmbedding::Trainable { init_period } = p.time {
                if init_period <= 0.0 {
                    return Err(Error::InvalidPeriod(init_period));
                }
            }
            if p.spatial_periods.len() + 1 != self.input_dim {
                return Err(Error::ShapeError(format!(
                    "periodic embedding expects {} spatial periods for input_dim {}",
                    self.input_dim - 1,
                    self.input_dim
                )));
            }
        }
        let mut warnings = Vec::new();
        if !(128..=512).contains(&self.width) {
            warnings.push(format!(
                "width {} outside the recommended 128-512 range",
                self.width
            ));
        }
        if !(3..=6).contains(&self.depth) {
            warnings.push(format!(
                "depth {} outside the recommended 3-6 range",
                self.depth
            ));
        }
        if let Embedding::Fourier(f) | Embedding::FourierOverPeriodic(_, f) = &self.embedding {
            if !(1.0..=10.0).contains(&f.sigma) {
                warnings.push(format!(
                    "fourier sigma {} outside the recommended [1, 10] range",
                    f.sigma
                ));
            }
        }
        if let Some(rwf) = &self.rwf {
            if rwf.sigma < 0.0 {
                return Err(Error::InvalidConfig("rwf sigma must be nonnegative".into()));
            }
            if rwf.mu.abs() > 2.0 || rwf.sigma > 0.5 {
                warnings.push(format!(
                    "rwf (mu={}, sigma={}) far from the recommended (0.5-1.0, 0.1)",
                    rwf.mu, rwf.sigma
                ));
            }
        }
        Ok(warnings)
    }

    /// Feature dimension produced by the embedding stage.
    pub fn embedded_dim(&self) -> usize {
        match &self.embedding {
            Embedding::None => self.input_dim,
            Embedding::Fourier(f) => 2 * f.m,
            Embedding::Periodic(p) => periodic_dim(p),
            Embedding::FourierOverPeriodic(_, f) => 2 * f.m,
        }
    }
}

fn periodic_dim(p: &PeriodicConfig) -> usize {
    let t_dim = match p.time {
        TimeEmbedding::Raw => 1,
        TimeEmbedding::Trainable { .. } => 2,
    };
    t_dim + 2 * p.spatial_periods.len()
}

/// Layered parameter container. Holds the architecture, the fixed Fourier
/// matrix (sampled once, never trained), and the construction-time parameter
/// values. Layout version stamps travel with checkpoints.
#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    layout: Arc<ParamLayout>,
    params: ParamVector,
    fourier_b: Option<JetMat>,
    seed: u64,
    factorized: bool,
}

/// Segment naming version; bump when the naming convention changes.
pub const LAYOUT_VERSION: u32 = 1;

fn subseed(seed: u64, tag: u64) -> u64 {
    // splitmix64 over (seed ^ tag)
    let mut z = seed ^ tag.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Affine stages of the network in layout order: (name, fan_out, fan_in).
fn affine_stages(config: &NetworkConfig) -> Vec<(String, usize, usize)> {
    let d0 = config.embedded_dim();
    let w = config.width;
    let mut stages = Vec::new();
    if config.arch == Arch::Modified {
        stages.push(("enc_u".to_string(), w, d0));
        stages.push(("enc_v".to_string(), w, d0));
    }
    for l in 0..config.depth {
        let fan_in = if l == 0 { d0 } else { w };
        stages.push((format!("layer_{l}"), w, fan_in));
    }
    stages.push(("out".to_string(), config.output_dim, w));
    stages
}

fn build_layout(config: &NetworkConfig, factorized: bool) -> ParamLayout {
    let mut layout = ParamLayout::new();
    if let Embedding::Periodic(p) | Embedding::FourierOverPeriodic(p, _) = &config.embedding {
        if matches!(p.time, TimeEmbedding::Trainable { .. }) {
            layout.push("embed.log_p_t", 1, 1);
        }
    }
    for (name, rows, cols) in affine_stages(config) {
        if factorized {
            layout.push(format!("{name}.s"), rows, 1);
            layout.push(format!("{name}.v"), rows, cols);
        } else {
            layout.push(format!("{name}.w"), rows, cols);
        }
        layout.push(format!("{name}.b"), rows, 1);
    }
    layout
}

/// Glorot-initialize a network: `W⁽ˡ⁾ ~ N(0, 2/(fan_in + fan_out))`, zero
/// biases, Fourier matrix `B ~ N(0, σ²)` sampled once, trainable log-period
/// initialized to `ln(init_period)`. When the config requests RWF the
/// factorization is applied immediately after initialization.
pub fn init_glorot(config: &NetworkConfig, seed: u64) -> Result<Network> {
    config.validate()?;
    let rwf = config.rwf;
    let base_cfg = NetworkConfig {
        rwf: None,
        ..config.clone()
    };
    let layout = Arc::new(build_layout(&base_cfg, false));
    let mut params = ParamVector::zeros(layout.clone());

    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, 1));
    for (name, rows, cols) in affine_stages(&base_cfg) {
        let std = (2.0 / (rows + cols) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        let seg = layout.index_of(&format!("{name}.w")).unwrap();
        for v in params.segment_mut(seg) {
            *v = normal.sample(&mut rng);
        }
        // biases stay zero
    }
    if let Some(seg) = layout.index_of("embed.log_p_t") {
        let init = match &base_cfg.embedding {
            Embedding::Periodic(p) | Embedding::FourierOverPeriodic(p, _) => match p.time {
                TimeEmbedding::Trainable { init_period } => init_period,
                TimeEmbedding::Raw => unreachable!(),
            },
            _ => unreachable!(),
        };
        params.segment_mut(seg)[0] = init.ln();
    }

    let fourier_b = match &base_cfg.embedding {
        Embedding::Fourier(f) | Embedding::FourierOverPeriodic(_, f) => {
            let d_in = match &base_cfg.embedding {
                Embedding::Fourier(_) => base_cfg.input_dim,
                Embedding::FourierOverPeriodic(p, _) => periodic_dim(p),
                _ => unreachable!(),
            };
            let mut rng_b = ChaCha8Rng::seed_from_u64(subseed(seed, 2));
            let normal = Normal::new(0.0, f.sigma).expect("valid sigma");
            let data: Vec<f64> = (0..f.m * d_in).map(|_| normal.sample(&mut rng_b)).collect();
            Some(JetMat::from_real(f.m, d_in, data))
        }
        _ => None,
    };

    let net = Network {
        config: base_cfg,
        layout,
        params,
        fourier_b,
        seed,
        factorized: false,
    };
    match rwf {
        Some(r) => apply_rwf(&net, r.mu, r.sigma, subseed(seed, 3)),
        None => Ok(net),
    }
}

/// Factorize every weight matrix as `W = diag(exp(s))·V`, with
/// `s ~ N(μ, σ²)` and `V = diag(exp(−s))·W` so the effective weight at the
/// moment of factorization equals the original `W` exactly. `s` and `V`
/// replace `W` as trainable segments.
pub fn apply_rwf(net: &Network, mu: f64, sigma: f64, seed: u64) -> Result<Network> {
    if net.factorized {
        return Err(Error::AlreadyFactorized);
    }
    let config = NetworkConfig {
        rwf: Some(RwfConfig { mu, sigma }),
        ..net.config.clone()
    };
    let layout = Arc::new(build_layout(&config, true));
    let mut params = ParamVector::zeros(layout.clone());

    if let Some(seg) = layout.index_of("embed.log_p_t") {
        params.segment_mut(seg)[0] = net.params.segment_by_name("embed.log_p_t").unwrap()[0];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mu, sigma).expect("valid rwf sigma");
    for (name, rows, cols) in affine_stages(&config) {
        let w_old = net.params.segment_by_name(&format!("{name}.w")).unwrap().to_vec();
        let s_seg = layout.index_of(&format!("{name}.s")).unwrap();
        let v_seg = layout.index_of(&format!("{name}.v")).unwrap();
        let b_seg = layout.index_of(&format!("{name}.b")).unwrap();
        let s: Vec<f64> = (0..rows).map(|_| normal.sample(&mut rng)).collect();
        params.segment_mut(s_seg).copy_from_slice(&s);
        {
            let v = params.segment_mut(v_seg);
            for r in 0..rows {
                let scale = (-s[r]).exp();
                for c in 0..cols {
                    v[r * cols + c] = w_old[r * cols + c] * scale;
                }
            }
        }
        let b_old = net.params.segment_by_name(&format!("{name}.b")).unwrap().to_vec();
        params.segment_mut(b_seg).copy_from_slice(&b_old);
    }
    Ok(Network {
        config,
        layout,
        params,
        fourier_b: net.fourier_b.clone(),
        seed: net.seed,
        factorized: true,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }
    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }
    /// Parameter values at construction time.
    pub fn params(&self) -> &ParamVector {
        &self.params
    }
    pub fn fourier_b(&self) -> Option<&JetMat> {
        self.fourier_b.as_ref()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn is_factorized(&self) -> bool {
        self.factorized
    }

    /// Same architecture with replacement parameter values.
    pub fn with_params(net: Network, params: ParamVector) -> Network {
        assert_eq!(
            params.layout().fingerprint(),
            net.layout.fingerprint(),
            "parameter layout mismatch"
        );
        Network { params, ..net }
    }

    /// Materialize the effective weight of an affine stage (`diag(exp(s))·V`
    /// under RWF, `W` otherwise).
    pub fn effective_weight(&self, params: &ParamVector, stage: &str) -> Vec<f64> {
        if self.factorized {
            let s = params.segment_by_name(&format!("{stage}.s")).unwrap();
            let v = params.segment_by_name(&format!("{stage}.v")).unwrap();
            let cols = v.len() / s.len();
            let mut w = vec![0.0; v.len()];
            for r in 0..s.len() {
                let e = s[r].exp();
                for c in 0..cols {
                    w[r * cols + c] = v[r * cols + c] * e;
                }
            }
            w
        } else {
            params.segment_by_name(&format!("{stage}.w")).unwrap().to_vec()
        }
    }
}

// ---------------------------------------------------------------------------
// Standalone embedding ops (plain f64; mirror the tape path exactly).
// ---------------------------------------------------------------------------

/// `γ(x) = [cos(Bx); sin(Bx)]` for one coordinate vector.
pub fn embed_fourier(x: &[f64], b: &JetMat) -> Result<Vec<f64>> {
    if b.cols() != x.len() {
        return Err(Error::ShapeError(format!(
            "fourier matrix expects {} inputs, got {}",
            b.cols(),
            x.len()
        )));
    }
    let m = b.rows();
    let mut out = vec![0.0; 2 * m];
    for r in 0..m {
        let mut z = 0.0;
        for c in 0..x.len() {
            z += b.at(r, c, 0) * x[c];
        }
        out[r] = z.cos();
        out[m + r] = z.sin();
    }
    Ok(out)
}

/// Periodic embedding of `(t, x, ...)`: each spatial axis mapped to its
/// (cos, sin) pair with ω = 2π/P; time prepended raw, or mapped to a (cos,
/// sin) pair when a temporal period is supplied.
pub fn embed_periodic(coords: &[f64], config: &PeriodicConfig, p_t: Option<f64>) -> Result<Vec<f64>> {
    if coords.len() != config.spatial_periods.len() + 1 {
        return Err(Error::ShapeError(format!(
            "expected {} coordinates, got {}",
            config.spatial_periods.len() + 1,
            coords.len()
        )));
    }
    for &p in &config.spatial_periods {
        if p <= 0.0 {
            return Err(Error::InvalidPeriod(p));
        }
    }
    let mut out = Vec::with_capacity(periodic_dim(config));
    match config.time {
        TimeEmbedding::Raw => out.push(coords[0]),
        TimeEmbedding::Trainable { init_period } => {
            let period = p_t.unwrap_or(init_period);
            if period <= 0.0 {
                return Err(Error::InvalidPeriod(period));
            }
            let w = TAU / period;
            out.push((w * coords[0]).cos());
            out.push((w * coords[0]).sin());
        }
    }
    for (x, &p) in coords[1..].iter().zip(&config.spatial_periods) {
        let w = TAU / p;
        out.push((w * x).cos());
        out.push((w * x).sin());
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tape forward pass.
// ---------------------------------------------------------------------------

/// Directional seed for jet propagation: which coordinate axis carries the
/// unit first coefficient, and the jet order.
#[derive(Debug, Clone, Copy)]
pub struct Seed {
    pub axis: usize,
    pub order: usize,
}

/// Build the coordinate leaf `[input_dim × batch]` with optional jet seeding.
/// `coords` is row-major `input_dim × batch`.
pub fn coord_leaf(tape: &mut Tape, coords: &[f64], dim: usize, batch: usize, seed: Option<Seed>) -> NodeId {
    assert_eq!(coords.len(), dim * batch);
    let k1 = seed.map_or(1, |s| s.order + 1);
    let mut mat = JetMat::zeros(dim, batch, k1);
    for d in 0..dim {
        for b in 0..batch {
            mat.set(d, b, 0, coords[d * batch + b]);
        }
    }
    if let Some(s) = seed {
        if s.order >= 1 {
            for b in 0..batch {
                mat.set(s.axis, b, 1, 1.0);
            }
        }
    }
    tape.constant(mat)
}

/// Coordinate leaf carrying time and space derivatives in one block:
/// `[u, u_t, u_x-series]`. The time row seeds the t-slot, the spatial row
/// seeds the first x-slot. `coords` is row-major `[2 × batch]`.
pub fn coord_leaf_time_space(tape: &mut Tape, coords: &[f64], batch: usize, x_order: usize) -> NodeId {
    assert_eq!(coords.len(), 2 * batch);
    debug_assert!(x_order >= 1);
    let mut mat = JetMat::zeros_time_space(2, batch, x_order);
    for b in 0..batch {
        mat.set(0, b, 0, coords[b]);
        mat.set(0, b, 1, 1.0);
        mat.set(1, b, 0, coords[batch + b]);
        mat.set(1, b, 2, 1.0);
    }
    tape.constant(mat)
}

/// Parameter nodes for every layout segment, in layout order.
pub fn register_params(tape: &mut Tape, net: &Network, params: &ParamVector) -> Vec<NodeId> {
    assert_eq!(
        params.layout().fingerprint(),
        net.layout.fingerprint(),
        "parameter layout does not match network"
    );
    (0..net.layout.segments().len())
        .map(|i| tape.param(i, &net.layout, params))
        .collect()
}

fn seg_node(net: &Network, pnodes: &[NodeId], name: &str) -> NodeId {
    pnodes[net
        .layout
        .index_of(name)
        .unwrap_or_else(|| panic!("missing segment {name}"))]
}

fn build_embedding(tape: &mut Tape, net: &Network, pnodes: &[NodeId], coords: NodeId) -> Result<NodeId> {
    match &net.config.embedding {
        Embedding::None => Ok(coords),
        Embedding::Fourier(_) => fourier_stage(tape, net, coords),
        Embedding::Periodic(p) => periodic_stage(tape, net, pnodes, coords, p),
        Embedding::FourierOverPeriodic(p, _) => {
            let per = periodic_stage(tape, net, pnodes, coords, p)?;
            fourier_stage(tape, net, per)
        }
    }
}

fn fourier_stage(tape: &mut Tape, net: &Network, input: NodeId) -> Result<NodeId> {
    let b = tape.constant(net.fourier_b.clone().expect("fourier matrix"));
    let z = tape.matmul(b, input);
    let cos = tape.unary(UnaryFn::Cos, z, "embed.fourier")?;
    let sin = tape.unary(UnaryFn::Sin, z, "embed.fourier")?;
    Ok(tape.concat_rows(cos, sin))
}

fn periodic_stage(
    tape: &mut Tape,
    net: &Network,
    pnodes: &[NodeId],
    coords: NodeId,
    p: &PeriodicConfig,
) -> Result<NodeId> {
    let t_row = tape.slice_rows(coords, 0, 1);
    let mut feat = match p.time {
        TimeEmbedding::Raw => t_row,
        TimeEmbedding::Trainable { .. } => {
            // ω_t = 2π·exp(−log_p_t); the trainable log-period keeps P_t > 0.
            let log_p = seg_node(net, pnodes, "embed.log_p_t");
            let neg = tape.affine_const(log_p, -1.0, 0.0);
            let inv_p = tape.unary(UnaryFn::Exp, neg, "embed.period")?;
            let omega = tape.affine_const(inv_p, TAU, 0.0);
            let arg = tape.scale_by_scalar(t_row, omega);
            let cos = tape.unary(UnaryFn::Cos, arg, "embed.time")?;
            let sin = tape.unary(UnaryFn::Sin, arg, "embed.time")?;
            tape.concat_rows(cos, sin)
        }
    };
    for (i, &period) in p.spatial_periods.iter().enumerate() {
        if period <= 0.0 {
            return Err(Error::InvalidPeriod(period));
        }
        let row = tape.slice_rows(coords, 1 + i, 1);
        let arg = tape.affine_const(row, TAU / period, 0.0);
        let cos = tape.unary(UnaryFn::Cos, arg, "embed.space")?;
        let sin = tape.unary(UnaryFn::Sin, arg, "embed.space")?;
        let pair = tape.concat_rows(cos, sin);
        feat = tape.concat_rows(feat, pair);
    }
    Ok(feat)
}

/// Effective weight node of an affine stage.
fn weight_node(tape: &mut Tape, net: &Network, pnodes: &[NodeId], stage: &str) -> Result<NodeId> {
    if net.factorized {
        let s = seg_node(net, pnodes, &format!("{stage}.s"));
        let v = seg_node(net, pnodes, &format!("{stage}.v"));
        let exp_s = tape.unary(UnaryFn::Exp, s, &format!("{stage}.s"))?;
        Ok(tape.scale_rows(v, exp_s))
    } else {
        Ok(seg_node(net, pnodes, &format!("{stage}.w")))
    }
}

fn affine(tape: &mut Tape, net: &Network, pnodes: &[NodeId], stage: &str, x: NodeId) -> Result<NodeId> {
    let w = weight_node(tape, net, pnodes, stage)?;
    let b = seg_node(net, pnodes, &format!("{stage}.b"));
    let z = tape.matmul(w, x);
    Ok(tape.add_bias(z, b))
}

/// Forward pass over a coordinate leaf already on the tape. Returns the
/// output node `[output_dim × batch]` with the leaf's jet order.
pub fn forward(tape: &mut Tape, net: &Network, pnodes: &[NodeId], coords: NodeId) -> Result<NodeId> {
    let act = net.config.activation.unary();
    let feat = build_embedding(tape, net, pnodes, coords)?;
    let out = match net.config.arch {
        Arch::Plain => {
            let mut h = feat;
            for l in 0..net.config.depth {
                let stage = format!("layer_{l}");
                let z = affine(tape, net, pnodes, &stage, h)?;
                h = tape.unary(act, z, &stage)?;
            }
            affine(tape, net, pnodes, "out", h)?
        }
        Arch::Modified => {
            // Two encoders mix into every hidden layer through the gate
            // g = σ(f)⊙U + (1−σ(f))⊙V, written as V + σ(f)⊙(U−V).
            let zu = affine(tape, net, pnodes, "enc_u", feat)?;
            let u = tape.unary(act, zu, "enc_u")?;
            let zv = affine(tape, net, pnodes, "enc_v", feat)?;
            let v = tape.unary(act, zv, "enc_v")?;
            let u_minus_v = tape.sub(u, v);
            let mut h = feat;
            for l in 0..net.config.depth {
                let stage = format!("layer_{l}");
                let z = affine(tape, net, pnodes, &stage, h)?;
                let gate = tape.unary(act, z, &stage)?;
                let mixed = tape.mul(gate, u_minus_v);
                h = tape.add(v, mixed);
            }
            affine(tape, net, pnodes, "out", h)?
        }
    };
    if !tape.value(out).all_finite() {
        return Err(Error::NumericalOverflow {
            layer: "out".to_string(),
        });
    }
    Ok(out)
}

/// One-call forward for a batch of points without jet seeding.
pub fn forward_values(net: &Network, params: &ParamVector, coords: &[f64], batch: usize) -> Result<Vec<f64>> {
    let dim = net.config.input_dim;
    let mut tape = Tape::new();
    let leaf = coord_leaf(&mut tape, coords, dim, batch, None);
    let pnodes = register_params(&mut tape, net, params);
    let out = forward(&mut tape, net, &pnodes, leaf)?;
    let v = tape.value(out);
    Ok((0..batch).map(|b| v.at(0, b, 0)).collect())
}

/// Taylor jet of the scalar network output along one coordinate axis.
/// Coefficient `j` equals `∂ʲu/∂xʲ / j!` at the point.
pub fn jet_eval(net: &Network, params: &ParamVector, point: &[f64], axis: usize, order: usize) -> Result<Jet> {
    check_order(order)?;
    if axis >= net.config.input_dim {
        return Err(Error::ShapeError(format!(
            "axis {axis} out of range for input_dim {}",
            net.config.input_dim
        )));
    }
    if point.len() != net.config.input_dim {
        return Err(Error::ShapeError(format!(
            "point has {} coordinates, expected {}",
            point.len(),
            net.config.input_dim
        )));
    }
    let mut tape = Tape::new();
    let leaf = coord_leaf(&mut tape, point, point.len(), 1, Some(Seed { axis, order }));
    let pnodes = register_params(&mut tape, net, params);
    let out = forward(&mut tape, net, &pnodes, leaf)?;
    let v = tape.value(out);
    let coeffs: Vec<f64> = (0..=order).map(|k| v.at(0, 0, k)).collect();
    let jet = Jet::from_coeffs(coeffs);
    if !jet.is_finite() {
        return Err(Error::NumericalOverflow {
            layer: "out".to_string(),
        });
    }
    Ok(jet)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(arch: Arch, embedding: Embedding, rwf: Option<RwfConfig>) -> NetworkConfig {
        NetworkConfig {
            arch,
            depth: 2,
            width: 8,
            activation: Activation::Tanh,
            embedding,
            rwf,
            input_dim: 2,
            output_dim: 1,
        }
    }

    #[test]
    fn glorot_1x1_bias_zero() {
        let cfg = NetworkConfig {
            depth: 1,
            width: 1,
            input_dim: 1,
            ..tiny_config(Arch::Plain, Embedding::None, None)
        };
        let net = init_glorot(&cfg, 7).unwrap();
        assert_eq!(net.params.segment_by_name("layer_0.b").unwrap(), &[0.0]);
        assert_eq!(net.params.segment_by_name("out.b").unwrap(), &[0.0]);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = tiny_config(
            Arch::Modified,
            Embedding::Fourier(FourierConfig { sigma: 1.0, m: 4 }),
            Some(RwfConfig { mu: 1.0, sigma: 0.1 }),
        );
        let a = init_glorot(&cfg, 42).unwrap();
        let b = init_glorot(&cfg, 42).unwrap();
        assert_eq!(a.params.as_slice(), b.params.as_slice());
        assert_eq!(a.fourier_b, b.fourier_b);
        let c = init_glorot(&cfg, 43).unwrap();
        assert_ne!(a.params.as_slice(), c.params.as_slice());
    }

    #[test]
    fn glorot_empirical_variance() {
        let cfg = NetworkConfig {
            depth: 1,
            width: 256,
            input_dim: 256,
            ..tiny_config(Arch::Plain, Embedding::None, None)
        };
        let net = init_glorot(&cfg, 3).unwrap();
        let w = net.params.segment_by_name("layer_0.w").unwrap();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        let expect = 2.0 / 512.0;
        assert!(
            (var - expect).abs() / expect < 0.2,
            "variance {var} vs {expect}"
        );
    }

    #[test]
    fn rwf_identity_factorization() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, None);
        let net = init_glorot(&cfg, 11).unwrap();
        let fact = apply_rwf(&net, 0.0, 0.0, 99).unwrap();
        // σ=0, μ=0 → s=0, exp(s)=1, V=W: forward pass bit-identical
        let coords = vec![0.3, -0.7, 0.1, 0.4]; // 2×2 batch
        let a = forward_values(&net, net.params(), &coords, 2).unwrap();
        let b = forward_values(&fact, fact.params(), &coords, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(fact.params.segment_by_name("layer_0.s").unwrap(), &[0.0; 8]);
    }

    #[test]
    fn rwf_reconstruction_exact() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, None);
        let net = init_glorot(&cfg, 11).unwrap();
        let fact = apply_rwf(&net, 0.8, 0.3, 5).unwrap();
        for stage in ["layer_0", "layer_1", "out"] {
            let orig = net.params.segment_by_name(&format!("{stage}.w")).unwrap();
            let recon = fact.effective_weight(fact.params(), stage);
            for (o, r) in orig.iter().zip(&recon) {
                assert!((o - r).abs() <= 1e-14 * o.abs().max(1.0), "{stage}: {o} vs {r}");
            }
        }
    }

    #[test]
    fn rwf_refactorization_rejected() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, Some(RwfConfig { mu: 1.0, sigma: 0.1 }));
        let net = init_glorot(&cfg, 1).unwrap();
        assert!(matches!(
            apply_rwf(&net, 1.0, 0.1, 2),
            Err(Error::AlreadyFactorized)
        ));
    }

    #[test]
    fn recommended_rwf_defaults_no_warning() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, Some(RwfConfig { mu: 1.0, sigma: 0.1 }));
        let warnings = cfg.validate().unwrap();
        assert!(warnings.iter().all(|w| !w.contains("rwf")), "{warnings:?}");
    }

    #[test]
    fn fourier_embedding_basics() {
        // x = 0 → [1,...,1, 0,...,0]
        let b = JetMat::from_real(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let f = embed_fourier(&[0.0, 0.0], &b).unwrap();
        assert_eq!(f, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        // single row [1], x = [π/2] → [cos(π/2), sin(π/2)] = [0, 1]
        let b1 = JetMat::from_real(1, 1, vec![1.0]);
        let f1 = embed_fourier(&[std::f64::consts::FRAC_PI_2], &b1).unwrap();
        assert!(f1[0].abs() < 1e-15 && (f1[1] - 1.0).abs() < 1e-15);
        // range
        let f2 = embed_fourier(&[12.7, -3.1], &b).unwrap();
        assert!(f2.iter().all(|v| (-1.0..=1.0).contains(v)));
        // dimension mismatch
        assert!(matches!(embed_fourier(&[1.0], &b), Err(Error::ShapeError(_))));
    }

    #[test]
    fn fourier_matrix_sigma_scaling() {
        // entries of B/σ are σ-independent at fixed seed
        let mk = |sigma: f64| {
            let cfg = tiny_config(Arch::Plain, Embedding::Fourier(FourierConfig { sigma, m: 6 }), None);
            init_glorot(&cfg, 17).unwrap().fourier_b.unwrap()
        };
        let b1 = mk(1.0);
        let b2 = mk(2.0);
        for (a, b) in b1.data().iter().zip(b2.data()) {
            assert!((b / 2.0 - a).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_embedding_2d_cell() {
        // 2D cell [0, 2π]²: features [cos x, sin x, cos y, sin y] (after raw t)
        let p = PeriodicConfig {
            spatial_periods: vec![TAU, TAU],
            time: TimeEmbedding::Raw,
        };
        let f = embed_periodic(&[0.5, 1.0, 2.0], &p, None).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f[0], 0.5);
        assert!((f[1] - 1.0f64.cos()).abs() < 1e-15);
        assert!((f[2] - 1.0f64.sin()).abs() < 1e-15);
        assert!((f[3] - 2.0f64.cos()).abs() < 1e-15);
        assert!((f[4] - 2.0f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn periodic_embedding_exact_periodicity() {
        let p = PeriodicConfig {
            spatial_periods: vec![1.7],
            time: TimeEmbedding::Raw,
        };
        for i in 0..20 {
            let x = -2.0 + 0.37 * i as f64;
            let a = embed_periodic(&[0.2, x], &p, None).unwrap();
            let b = embed_periodic(&[0.2, x + 1.7], &p, None).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_period_rejected() {
        let p = PeriodicConfig {
            spatial_periods: vec![-1.0],
            time: TimeEmbedding::Raw,
        };
        assert!(matches!(
            embed_periodic(&[0.0, 0.0], &p, None),
            Err(Error::InvalidPeriod(_))
        ));
    }

    #[test]
    fn modified_gate_collapse() {
        // W₁=W₂, b₁=b₂ → U=V → output independent of hidden weights
        let cfg = tiny_config(Arch::Modified, Embedding::None, None);
        let net = init_glorot(&cfg, 5).unwrap();
        let mut params = net.params().clone();
        let w = params.segment_by_name("enc_u.w").unwrap().to_vec();
        let b = params.segment_by_name("enc_u.b").unwrap().to_vec();
        let vi = params.layout().index_of("enc_v.w").unwrap();
        params.segment_mut(vi).copy_from_slice(&w);
        let bi = params.layout().index_of("enc_v.b").unwrap();
        params.segment_mut(bi).copy_from_slice(&b);

        let coords = vec![0.25, -0.5];
        let out = forward_values(&net, &params, &coords, 1).unwrap()[0];

        // output must equal out.w · U + out.b regardless of depth: compute U directly
        let u: Vec<f64> = {
            let wseg = &w;
            (0..8)
                .map(|r| {
                    let z = wseg[r * 2] * 0.25 + wseg[r * 2 + 1] * (-0.5) + b[r];
                    z.tanh()
                })
                .collect()
        };
        let ow = params.segment_by_name("out.w").unwrap();
        let ob = params.segment_by_name("out.b").unwrap();
        let expect: f64 = (0..8).map(|i| ow[i] * u[i]).sum::<f64>() + ob[0];
        assert!((out - expect).abs() < 1e-12, "{out} vs {expect}");
    }

    #[test]
    fn zero_net_outputs_zero() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, None);
        let net = init_glorot(&cfg, 5).unwrap();
        let zeros = ParamVector::zeros(net.layout().clone());
        let out = forward_values(&net, &zeros, &[0.7, 0.3], 1).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn plain_and_modified_differ() {
        let cfg_p = tiny_config(Arch::Plain, Embedding::None, None);
        let cfg_m = tiny_config(Arch::Modified, Embedding::None, None);
        let np = init_glorot(&cfg_p, 9).unwrap();
        let nm = init_glorot(&cfg_m, 9).unwrap();
        let a = forward_values(&np, np.params(), &[0.4, 0.6], 1).unwrap()[0];
        let b = forward_values(&nm, nm.params(), &[0.4, 0.6], 1).unwrap()[0];
        assert!((a - b).abs() > 1e-12);
    }

    #[test]
    fn jet_eval_order_zero_matches_forward() {
        let cfg = tiny_config(
            Arch::Modified,
            Embedding::Fourier(FourierConfig { sigma: 1.0, m: 4 }),
            Some(RwfConfig { mu: 0.5, sigma: 0.1 }),
        );
        let net = init_glorot(&cfg, 21).unwrap();
        let point = [0.3, 0.9];
        let jet = jet_eval(&net, net.params(), &point, 1, 0).unwrap();
        let fwd = forward_values(&net, net.params(), &point, 1).unwrap()[0];
        assert_eq!(jet.value(), fwd);
    }

    #[test]
    fn jet_eval_sin_composition() {
        // identity-then-sin scalar map: out = sin(w·x) with w=1 net of zero
        // depth is not expressible; instead check a 1-neuron sin-activation
        // net: u(x) = sin(x) via unit weight, zero bias, identity output.
        let cfg = NetworkConfig {
            arch: Arch::Plain,
            depth: 1,
            width: 1,
            activation: Activation::Sin,
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
        let jet = jet_eval(&net, &params, &[0.0], 0, 4).unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0];
        for (a, b) in jet.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{:?}", jet.coeffs());
        }
    }

    #[test]
    fn jet_eval_tanh_neuron() {
        // single tanh neuron, unit weight, zero bias: coeffs [0, 1, 0, −1/3, 0]
        let cfg = NetworkConfig {
            arch: Arch::Plain,
            depth: 1,
            width: 1,
            activation: Activation::Tanh,
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
        let jet = jet_eval(&net, &params, &[0.0], 0, 4).unwrap();
        let expect = [0.0, 1.0, 0.0, -1.0 / 3.0, 0.0];
        for (a, b) in jet.coeffs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{:?}", jet.coeffs());
        }
    }

    #[test]
    fn overflow_reports_layer() {
        let cfg = tiny_config(Arch::Plain, Embedding::None, None);
        let net = init_glorot(&cfg, 5).unwrap();
        let mut params = net.params().clone();
        let w0 = params.layout().index_of("layer_0.w").unwrap();
        params.segment_mut(w0)[0] = f64::MAX;
        params.segment_mut(w0)[1] = f64::MAX;
        let err = forward_values(&net, &params, &[1.0, 1.0], 1).unwrap_err();
        match err {
            Error::NumericalOverflow { layer } => assert!(layer.contains("layer_0"), "{layer}"),
            other => panic!("unexpected error {other}"),
        }
    }
}
