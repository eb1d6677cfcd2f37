//! Benchmark PDE definitions: residual functionals built from jets, initial
//! and boundary conditions, domains, and the non-dimensionalization utility.
//!
//! Residuals exist twice on purpose: once over plain numbers (used by oracle
//! cross-checks and diagnostics) and once as tape nodes (used for training).
//! A consistency test pins the two routes to each other.

use std::sync::Arc;

use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::nets::{coord_leaf, coord_leaf_time_space, forward, Network, TAU};

/// Space-time box `[x_lo, x_hi] × [0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t1: f64,
}

impl Domain {
    pub fn x_len(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Periodicity enforced exactly through the embedding; no loss term.
    PeriodicHard,
    /// Boundary mismatch penalized as a loss term.
    LossTerm,
}

/// Highest derivative order needed per axis (declared ≥ used).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivReq {
    pub t_order: usize,
    pub x_order: usize,
}

/// Derivatives of the network output at one point, un-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointDerivs {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xxxx: f64,
}

impl PointDerivs {
    /// Assemble from the two directional jets of a scalar field.
    pub fn from_jets(t_jet: &Jet, x_jet: &Jet) -> Self {
        let mut d = PointDerivs {
            u: x_jet.value(),
            u_t: t_jet.derivative(1),
            ..Default::default()
        };
        if x_jet.order() >= 1 {
            d.u_x = x_jet.derivative(1);
        }
        if x_jet.order() >= 2 {
            d.u_xx = x_jet.derivative(2);
        }
        if x_jet.order() >= 4 {
            d.u_xxxx = x_jet.derivative(4);
        }
        d
    }
}

/// Batched derivative nodes on a tape, one `[1 × batch]` real row each.
#[derive(Debug, Clone, Copy)]
pub struct DerivNodes {
    pub u: NodeId,
    pub u_t: NodeId,
    pub u_x: Option<NodeId>,
    pub u_xx: Option<NodeId>,
    pub u_xxxx: Option<NodeId>,
}

/// A PDE benchmark: residual functional, IC, BC kind, domain, constants.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> Domain;
    /// Initial condition `g(x)`.
    fn ic(&self, x: f64) -> f64;
    fn bc_kind(&self) -> BcKind;
    fn deriv_req(&self) -> DerivReq;
    fn constants(&self) -> Vec<(String, f64)>;
    /// Residual at one point from plain derivative values.
    fn residual_scalar(&self, d: &PointDerivs) -> f64;
    /// Residual as a tape row built from batched derivative nodes.
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId;
    /// Boundary target for loss-term BCs (value of `u` on ∂Ω).
    fn bc_value(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
    /// Closed-form solution when one exists (for cheap end-to-end checks).
    fn exact(&self, _t: f64, _x: f64) -> Option<f64> {
        None
    }
    /// Same problem with one named constant replaced (continuation support).
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>>;
    /// Same problem with a different temporal horizon (time-marching support).
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem>;
}

// ---------------------------------------------------------------------------
// Spec-surface residual functions over plain jets.
// ---------------------------------------------------------------------------

/// `u_t − 0.0001·u_xx + 5u³ − 5u` with the standard coefficients replaced by
/// the supplied ones.
pub fn allen_cahn_residual(t_jet: &Jet, x_jet: &Jet, diffusivity: f64, reaction: f64) -> f64 {
    let d = PointDerivs::from_jets(t_jet, x_jet);
    d.u_t - diffusivity * d.u_xx + reaction * d.u.powi(3) - reaction * d.u
}

/// `u_t + c·u_x`.
pub fn advection_residual(t_jet: &Jet, x_jet: &Jet, c: f64) -> f64 {
    let d = PointDerivs::from_jets(t_jet, x_jet);
    d.u_t + c * d.u_x
}

/// `u_t + α·u·u_x + β·u_xx + γ·u_xxxx`.
pub fn ks_residual(t_jet: &Jet, x_jet: &Jet, alpha: f64, beta: f64, gamma: f64) -> f64 {
    let d = PointDerivs::from_jets(t_jet, x_jet);
    d.u_t + alpha * d.u * d.u_x + beta * d.u_xx + gamma * d.u_xxxx
}

// ---------------------------------------------------------------------------
// Concrete benchmarks.
// ---------------------------------------------------------------------------

/// Allen-Cahn: `u_t − d·u_xx + a·u³ − a·u = 0` on `[-1,1]`, periodic,
/// `g(x) = x²cos(πx)`.
#[derive(Debug, Clone)]
pub struct AllenCahn {
    pub diffusivity: f64,
    pub reaction: f64,
    pub t1: f64,
}

impl Default for AllenCahn {
    fn default() -> Self {
        AllenCahn {
            diffusivity: 1e-4,
            reaction: 5.0,
            t1: 1.0,
        }
    }
}

impl Problem for AllenCahn {
    fn name(&self) -> &str {
        "allen_cahn"
    }
    fn domain(&self) -> Domain {
        Domain {
            x_lo: -1.0,
            x_hi: 1.0,
            t1: self.t1,
        }
    }
    fn ic(&self, x: f64) -> f64 {
        x * x * (std::f64::consts::PI * x).cos()
    }
    fn bc_kind(&self) -> BcKind {
        BcKind::PeriodicHard
    }
    fn deriv_req(&self) -> DerivReq {
        DerivReq { t_order: 1, x_order: 2 }
    }
    fn constants(&self) -> Vec<(String, f64)> {
        vec![
            ("diffusivity".into(), self.diffusivity),
            ("reaction".into(), self.reaction),
        ]
    }
    fn residual_scalar(&self, d: &PointDerivs) -> f64 {
        d.u_t - self.diffusivity * d.u_xx + self.reaction * d.u.powi(3) - self.reaction * d.u
    }
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
        let u_xx = d.u_xx.expect("allen-cahn needs u_xx");
        let diff = tape.affine_const(u_xx, -self.diffusivity, 0.0);
        let lin = tape.add(d.u_t, diff);
        let u2 = tape.mul(d.u, d.u);
        let u3 = tape.mul(u2, d.u);
        let cubic = tape.affine_const(u3, self.reaction, 0.0);
        let minus_u = tape.affine_const(d.u, -self.reaction, 0.0);
        let nl = tape.add(cubic, minus_u);
        tape.add(lin, nl)
    }
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
        let mut p = self.clone();
        match name {
            "diffusivity" => p.diffusivity = value,
            "reaction" => p.reaction = value,
            _ => return Err(Error::InvalidConfig(format!("unknown constant {name}"))),
        }
        Ok(Arc::new(p))
    }
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
        Arc::new(AllenCahn { t1, ..self.clone() })
    }
}

/// Advection: `u_t + c·u_x = 0` on `(0, 2π)`, periodic, `g(x) = sin(x)`.
#[derive(Debug, Clone)]
pub struct Advection {
    pub c: f64,
    pub t1: f64,
}

impl Default for Advection {
    fn default() -> Self {
        Advection { c: 80.0, t1: 1.0 }
    }
}

impl Problem for Advection {
    fn name(&self) -> &str {
        "advection"
    }
    fn domain(&self) -> Domain {
        Domain {
            x_lo: 0.0,
            x_hi: TAU,
            t1: self.t1,
        }
    }
    fn ic(&self, x: f64) -> f64 {
        x.sin()
    }
    fn bc_kind(&self) -> BcKind {
        BcKind::PeriodicHard
    }
    fn deriv_req(&self) -> DerivReq {
        DerivReq { t_order: 1, x_order: 1 }
    }
    fn constants(&self) -> Vec<(String, f64)> {
        vec![("c".into(), self.c)]
    }
    fn residual_scalar(&self, d: &PointDerivs) -> f64 {
        d.u_t + self.c * d.u_x
    }
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
        let cux = tape.affine_const(d.u_x.expect("advection needs u_x"), self.c, 0.0);
        tape.add(d.u_t, cux)
    }
    fn exact(&self, t: f64, x: f64) -> Option<f64> {
        Some((x - self.c * t).sin())
    }
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
        match name {
            "c" => Ok(Arc::new(Advection { c: value, ..self.clone() })),
            _ => Err(Error::InvalidConfig(format!("unknown constant {name}"))),
        }
    }
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
        Arc::new(Advection { t1, ..self.clone() })
    }
}

/// Kuramoto-Sivashinsky: `u_t + α·u·u_x + β·u_xx + γ·u_xxxx = 0` on
/// `[0, 2π]`, periodic, `g(x) = cos(x)(1 + sin(x))`.
#[derive(Debug, Clone)]
pub struct Ks {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub t1: f64,
}

impl Default for Ks {
    fn default() -> Self {
        Ks {
            alpha: 100.0 / 16.0,
            beta: 100.0 / 256.0,
            gamma: 100.0 / 65536.0,
            t1: 1.0,
        }
    }
}

impl Problem for Ks {
    fn name(&self) -> &str {
        "ks"
    }
    fn domain(&self) -> Domain {
        Domain {
            x_lo: 0.0,
            x_hi: TAU,
            t1: self.t1,
        }
    }
    fn ic(&self, x: f64) -> f64 {
        x.cos() * (1.0 + x.sin())
    }
    fn bc_kind(&self) -> BcKind {
        BcKind::PeriodicHard
    }
    fn deriv_req(&self) -> DerivReq {
        DerivReq { t_order: 1, x_order: 4 }
    }
    fn constants(&self) -> Vec<(String, f64)> {
        vec![
            ("alpha".into(), self.alpha),
            ("beta".into(), self.beta),
            ("gamma".into(), self.gamma),
        ]
    }
    fn residual_scalar(&self, d: &PointDerivs) -> f64 {
        d.u_t + self.alpha * d.u * d.u_x + self.beta * d.u_xx + self.gamma * d.u_xxxx
    }
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
        let u_x = d.u_x.expect("ks needs u_x");
        let u_xx = d.u_xx.expect("ks needs u_xx");
        let u_xxxx = d.u_xxxx.expect("ks needs u_xxxx");
        let uux = tape.mul(d.u, u_x);
        let a = tape.affine_const(uux, self.alpha, 0.0);
        let b = tape.affine_const(u_xx, self.beta, 0.0);
        let g = tape.affine_const(u_xxxx, self.gamma, 0.0);
        let s1 = tape.add(d.u_t, a);
        let s2 = tape.add(b, g);
        tape.add(s1, s2)
    }
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
        let mut p = self.clone();
        match name {
            "alpha" => p.alpha = value,
            "beta" => p.beta = value,
            "gamma" => p.gamma = value,
            _ => return Err(Error::InvalidConfig(format!("unknown constant {name}"))),
        }
        Ok(Arc::new(p))
    }
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
        Arc::new(Ks { t1, ..self.clone() })
    }
}

/// Synthetic Dirichlet toy: heat equation `u_t = κ·u_xx` on `[0,1]` with
/// `u(t,0) = u(t,1) = 0` enforced as a loss term and `g(x) = sin(πx)`.
/// Exact solution `exp(−κπ²t)·sin(πx)` makes it a cheap end-to-end check of
/// the λ_bc machinery.
#[derive(Debug, Clone)]
pub struct HeatDirichlet {
    pub kappa: f64,
    pub t1: f64,
}

impl Default for HeatDirichlet {
    fn default() -> Self {
        HeatDirichlet { kappa: 0.1, t1: 1.0 }
    }
}

impl Problem for HeatDirichlet {
    fn name(&self) -> &str {
        "heat_dirichlet"
    }
    fn domain(&self) -> Domain {
        Domain {
            x_lo: 0.0,
            x_hi: 1.0,
            t1: self.t1,
        }
    }
    fn ic(&self, x: f64) -> f64 {
        (std::f64::consts::PI * x).sin()
    }
    fn bc_kind(&self) -> BcKind {
        BcKind::LossTerm
    }
    fn deriv_req(&self) -> DerivReq {
        DerivReq { t_order: 1, x_order: 2 }
    }
    fn constants(&self) -> Vec<(String, f64)> {
        vec![("kappa".into(), self.kappa)]
    }
    fn residual_scalar(&self, d: &PointDerivs) -> f64 {
        d.u_t - self.kappa * d.u_xx
    }
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
        let diff = tape.affine_const(d.u_xx.expect("heat needs u_xx"), -self.kappa, 0.0);
        tape.add(d.u_t, diff)
    }
    fn exact(&self, t: f64, x: f64) -> Option<f64> {
        let pi = std::f64::consts::PI;
        Some((-self.kappa * pi * pi * t).exp() * (pi * x).sin())
    }
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
        match name {
            "kappa" => Ok(Arc::new(HeatDirichlet { kappa: value, ..self.clone() })),
            _ => Err(Error::InvalidConfig(format!("unknown constant {name}"))),
        }
    }
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
        Arc::new(HeatDirichlet { t1, ..self.clone() })
    }
}

/// Wrap a problem with a replacement initial condition (time-marching
/// windows target the previous window's final slice).
pub struct WithIc {
    inner: Arc<dyn Problem>,
    ic: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl WithIc {
    pub fn new(inner: Arc<dyn Problem>, ic: Arc<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        WithIc { inner, ic }
    }
}

impl Problem for WithIc {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
    fn ic(&self, x: f64) -> f64 {
        (self.ic)(x)
    }
    fn bc_kind(&self) -> BcKind {
        self.inner.bc_kind()
    }
    fn deriv_req(&self) -> DerivReq {
        self.inner.deriv_req()
    }
    fn constants(&self) -> Vec<(String, f64)> {
        self.inner.constants()
    }
    fn residual_scalar(&self, d: &PointDerivs) -> f64 {
        self.inner.residual_scalar(d)
    }
    fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
        self.inner.residual_nodes(tape, d)
    }
    fn bc_value(&self, t: f64, x: f64) -> f64 {
        self.inner.bc_value(t, x)
    }
    fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
        let inner = self.inner.with_constant(name, value)?;
        Ok(Arc::new(WithIc { inner, ic: self.ic.clone() }))
    }
    fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
        Arc::new(WithIc {
            inner: self.inner.with_horizon(t1),
            ic: self.ic.clone(),
        })
    }
}

/// Look up a benchmark by name with default constants.
pub fn by_name(name: &str) -> Result<Arc<dyn Problem>> {
    match name {
        "allen_cahn" => Ok(Arc::new(AllenCahn::default())),
        "advection" => Ok(Arc::new(Advection::default())),
        "ks" => Ok(Arc::new(Ks::default())),
        "heat_dirichlet" => Ok(Arc::new(HeatDirichlet::default())),
        other => Err(Error::InvalidConfig(format!("unknown problem `{other}`"))),
    }
}

// ---------------------------------------------------------------------------
// Loss-node assembly shared by training and diagnostics.
// ---------------------------------------------------------------------------

/// Forward the network once with a combined time-space jet block and expose
/// un-normalized derivative rows for the residual. `coords` is row-major
/// `[2 × batch]` (time row first). The block layout puts the x-series
/// coefficient of order `j` at index `1 + j`.
pub fn build_derivatives(
    tape: &mut Tape,
    net: &Network,
    pnodes: &[NodeId],
    problem: &dyn Problem,
    coords: &[f64],
    batch: usize,
) -> Result<DerivNodes> {
    let req = problem.deriv_req();
    debug_assert!(req.t_order >= 1 && req.t_order <= 1, "residuals use first-order time derivatives");
    let leaf = coord_leaf_time_space(tape, coords, batch, req.x_order.max(1));
    let out = forward(tape, net, pnodes, leaf)?;
    let u = tape.coeff(out, 0);
    let u_t = tape.coeff(out, 1);
    let mut d = DerivNodes {
        u,
        u_t,
        u_x: None,
        u_xx: None,
        u_xxxx: None,
    };
    if req.x_order >= 1 {
        d.u_x = Some(tape.coeff(out, 2));
    }
    if req.x_order >= 2 {
        let c2 = tape.coeff(out, 3);
        d.u_xx = Some(tape.affine_const(c2, 2.0, 0.0));
    }
    if req.x_order >= 4 {
        let c4 = tape.coeff(out, 5);
        d.u_xxxx = Some(tape.affine_const(c4, 24.0, 0.0));
    }
    Ok(d)
}

/// Residual row `[1 × batch]` for a batch of collocation points.
pub fn build_residual(
    tape: &mut Tape,
    net: &Network,
    pnodes: &[NodeId],
    problem: &dyn Problem,
    coords: &[f64],
    batch: usize,
) -> Result<NodeId> {
    let d = build_derivatives(tape, net, pnodes, problem, coords, batch)?;
    Ok(problem.residual_nodes(tape, &d))
}

/// Mean squared initial-condition mismatch at `t = 0` samples:
/// `(1/N)Σ|u(0,xᵢ) − gᵢ|²`.
pub fn ic_loss_nodes(
    tape: &mut Tape,
    net: &Network,
    pnodes: &[NodeId],
    xs: &[f64],
    targets: &[f64],
) -> Result<NodeId> {
    if xs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    debug_assert_eq!(xs.len(), targets.len());
    let batch = xs.len();
    let mut coords = vec![0.0; 2 * batch];
    coords[batch..].copy_from_slice(xs);
    let leaf = coord_leaf(tape, &coords, 2, batch, None);
    let out = forward(tape, net, pnodes, leaf)?;
    let pred = tape.coeff(out, 0);
    let target = tape.constant(crate::tensor::JetMat::from_real(1, batch, targets.to_vec()));
    let diff = tape.sub(pred, target);
    Ok(tape.mean_square(diff))
}

/// Mean squared boundary mismatch at sampled `(t, x)` boundary points.
pub fn bc_loss_nodes(
    tape: &mut Tape,
    net: &Network,
    pnodes: &[NodeId],
    problem: &dyn Problem,
    coords: &[f64],
    batch: usize,
) -> Result<NodeId> {
    if batch == 0 {
        return Err(Error::EmptyBatch);
    }
    let leaf = coord_leaf(tape, coords, 2, batch, None);
    let out = forward(tape, net, pnodes, leaf)?;
    let pred = tape.coeff(out, 0);
    let targets: Vec<f64> = (0..batch)
        .map(|b| problem.bc_value(coords[b], coords[batch + b]))
        .collect();
    let target = tape.constant(crate::tensor::JetMat::from_real(1, batch, targets));
    let diff = tape.sub(pred, target);
    Ok(tape.mean_square(diff))
}

// ---------------------------------------------------------------------------
// Non-dimensionalization utility.
// ---------------------------------------------------------------------------

/// Characteristic scales and the variable maps they induce:
/// `x* = x/L*`, `u* = u/U*`, `t* = t/T*` with `T* = L*/U*`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalingRecord {
    pub l_star: f64,
    pub u_star: f64,
}

impl ScalingRecord {
    pub fn new(l_star: f64, u_star: f64) -> Result<Self> {
        if l_star <= 0.0 {
            return Err(Error::InvalidScale(l_star));
        }
        if u_star <= 0.0 {
            return Err(Error::InvalidScale(u_star));
        }
        Ok(ScalingRecord { l_star, u_star })
    }

    pub fn t_star(&self) -> f64 {
        self.l_star / self.u_star
    }

    /// `Re = U*·L*/ν`.
    pub fn reynolds(&self, nu: f64) -> Result<f64> {
        if nu <= 0.0 {
            return Err(Error::InvalidScale(nu));
        }
        Ok(self.u_star * self.l_star / nu)
    }

    pub fn to_dimensionless_x(&self, x: f64) -> f64 {
        x / self.l_star
    }
    pub fn to_physical_x(&self, x_star: f64) -> f64 {
        x_star * self.l_star
    }
    pub fn to_dimensionless_t(&self, t: f64) -> f64 {
        t / self.t_star()
    }
    pub fn to_physical_t(&self, t_star: f64) -> f64 {
        t_star * self.t_star()
    }
    pub fn to_dimensionless_u(&self, u: f64) -> f64 {
        u / self.u_star
    }
    pub fn to_physical_u(&self, u_star: f64) -> f64 {
        u_star * self.u_star
    }
}

/// A 1D problem stated in physical units.
#[derive(Clone)]
pub struct PhysicalProblem {
    pub pde: PhysicalPde,
    pub x_range: (f64, f64),
    pub t_end: f64,
    pub ic: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

#[derive(Debug, Clone, Copy)]
pub enum PhysicalPde {
    /// `u_t + c·u_x = 0` with `c` in physical velocity units.
    Advection { c: f64 },
    /// `u_t = κ·u_xx` with `κ` in physical diffusivity units.
    Diffusion { kappa: f64 },
}

/// Rescale a physical problem into dimensionless form. The returned problem's
/// constants are the dimensionless groups (`c* = c/U*`, `κ* = κ/(U*L*)`).
pub fn nondimensionalize(record: &ScalingRecord, phys: &PhysicalProblem) -> Result<Arc<dyn Problem>> {
    ScalingRecord::new(record.l_star, record.u_star)?;
    let rec = *record;
    let ic_phys = phys.ic.clone();
    let ic_star = Arc::new(move |x_star: f64| rec.to_dimensionless_u((ic_phys)(rec.to_physical_x(x_star))))
        as Arc<dyn Fn(f64) -> f64 + Send + Sync>;
    let t1 = record.to_dimensionless_t(phys.t_end);
    match phys.pde {
        PhysicalPde::Advection { c } => {
            let base = Advection { c: c / record.u_star, t1 };
            // domain must sit at the dimensionless coordinates
            let (lo, hi) = phys.x_range;
            let scaled = ScaledAdvection {
                inner: base,
                x_lo: record.to_dimensionless_x(lo),
                x_hi: record.to_dimensionless_x(hi),
            };
            Ok(Arc::new(WithIc::new(Arc::new(scaled), ic_star)))
        }
        PhysicalPde::Diffusion { kappa } => {
            let kappa_star = kappa / (record.u_star * record.l_star);
            let base = HeatDirichlet { kappa: kappa_star, t1 };
            let (lo, hi) = phys.x_range;
            let scaled = ScaledHeat {
                inner: base,
                x_lo: record.to_dimensionless_x(lo),
                x_hi: record.to_dimensionless_x(hi),
            };
            Ok(Arc::new(WithIc::new(Arc::new(scaled), ic_star)))
        }
    }
}

macro_rules! scaled_wrapper {
    ($name:ident, $inner:ty) => {
        #[derive(Clone)]
        struct $name {
            inner: $inner,
            x_lo: f64,
            x_hi: f64,
        }
        impl Problem for $name {
            fn name(&self) -> &str {
                self.inner.name()
            }
            fn domain(&self) -> Domain {
                Domain {
                    x_lo: self.x_lo,
                    x_hi: self.x_hi,
                    t1: self.inner.domain().t1,
                }
            }
            fn ic(&self, x: f64) -> f64 {
                self.inner.ic(x)
            }
            fn bc_kind(&self) -> BcKind {
                self.inner.bc_kind()
            }
            fn deriv_req(&self) -> DerivReq {
                self.inner.deriv_req()
            }
            fn constants(&self) -> Vec<(String, f64)> {
                self.inner.constants()
            }
            fn residual_scalar(&self, d: &PointDerivs) -> f64 {
                self.inner.residual_scalar(d)
            }
            fn residual_nodes(&self, tape: &mut Tape, d: &DerivNodes) -> NodeId {
                self.inner.residual_nodes(tape, d)
            }
            fn bc_value(&self, t: f64, x: f64) -> f64 {
                self.inner.bc_value(t, x)
            }
            fn with_constant(&self, name: &str, value: f64) -> Result<Arc<dyn Problem>> {
                let inner = self.inner.with_constant(name, value)?;
                let _ = inner;
                Err(Error::InvalidConfig(
                    "continuation over scaled problems is not supported".into(),
                ))
            }
            fn with_horizon(&self, t1: f64) -> Arc<dyn Problem> {
                let mut c = self.clone();
                c.inner.t1 = t1;
                Arc::new(c)
            }
        }
    };
}

scaled_wrapper!(ScaledAdvection, Advection);
scaled_wrapper!(ScaledHeat, HeatDirichlet);
