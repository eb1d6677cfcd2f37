//! Truncated Taylor jets: the carrier for input derivatives of the network
//! output along one coordinate axis.
//!
//! A jet of order `K` stores the normalized coefficients
//! `(f, f', f''/2!, ..., f^(K)/K!)` of a scalar along one direction. With
//! normalized coefficients the product rule is a plain truncated convolution,
//! which keeps order-4 arithmetic well-conditioned. Un-normalized derivatives
//! are exposed through [`Jet::derivative`].

use crate::error::{Error, Result};

/// Jet orders supported by the engine.
pub const SUPPORTED_ORDERS: [usize; 4] = [0, 1, 2, 4];

/// Truncated Taylor expansion of a scalar along one input direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    /// Constant jet: value `v`, all derivative coefficients zero.
    pub fn constant(v: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = v;
        Jet { coeffs }
    }

    /// Seed jet for a coordinate: value `v` with unit first coefficient, so
    /// downstream jets carry derivatives with respect to this coordinate.
    pub fn seed(v: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = v;
        if order >= 1 {
            coeffs[1] = 1.0;
        }
        Jet { coeffs }
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Jet { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Order-0 coefficient: the plain function value.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Un-normalized derivative of order `j`: `coeffs[j] * j!`.
    pub fn derivative(&self, j: usize) -> f64 {
        self.coeffs[j] * factorial(j)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.order(), other.order(), "jet order mismatch");
        Jet {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.zip_with(other, |a, b| a - b)
    }

    /// Truncated product: plain convolution of normalized coefficients.
    pub fn mul(&self, other: &Jet) -> Jet {
        assert_eq!(self.order(), other.order(), "jet order mismatch");
        let mut out = vec![0.0; self.coeffs.len()];
        conv_trunc(&self.coeffs, &other.coeffs, &mut out);
        Jet { coeffs: out }
    }

    pub fn scale(&self, c: f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    /// Apply an analytic function through the jet (value only).
    pub fn apply(&self, f: UnaryFn) -> Jet {
        let k1 = self.coeffs.len();
        let mut val = vec![0.0; k1];
        let mut dval = vec![0.0; k1];
        apply_unary(f, &self.coeffs, &mut val, &mut dval);
        Jet { coeffs: val }
    }

    pub fn tanh(&self) -> Jet {
        self.apply(UnaryFn::Tanh)
    }
    pub fn sin(&self) -> Jet {
        self.apply(UnaryFn::Sin)
    }
    pub fn cos(&self) -> Jet {
        self.apply(UnaryFn::Cos)
    }
    pub fn exp(&self) -> Jet {
        self.apply(UnaryFn::Exp)
    }
}

pub(crate) fn factorial(j: usize) -> f64 {
    (1..=j).map(|i| i as f64).product()
}

/// Validate a requested jet order against the supported set.
pub fn check_order(order: usize) -> Result<()> {
    if SUPPORTED_ORDERS.contains(&order) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "jet order {order} unsupported (must be one of {SUPPORTED_ORDERS:?})"
        )))
    }
}

// ---------------------------------------------------------------------------
// Raw coefficient kernels, shared with the batched tensor type.
// ---------------------------------------------------------------------------

/// `out = a ⊗ b` (truncated convolution). All slices have equal length.
#[inline(always)]
pub(crate) fn conv_trunc(a: &[f64], b: &[f64], out: &mut [f64]) {
    let k1 = out.len();
    for i in 0..k1 {
        let mut s = 0.0;
        for j in 0..=i {
            s += a[j] * b[i - j];
        }
        out[i] = s;
    }
}

/// Adjoint of multiplication by `b`: `abar[j] += Σ_{i≥j} ybar[i]·b[i−j]`.
///
/// This is the transpose of the lower-triangular Toeplitz operator that
/// `conv_trunc` applies, used by reverse sweeps through jet products.
#[inline(always)]
pub(crate) fn corr_acc(b: &[f64], ybar: &[f64], abar: &mut [f64]) {
    let k1 = abar.len();
    for j in 0..k1 {
        let mut s = 0.0;
        for i in j..k1 {
            s += ybar[i] * b[i - j];
        }
        abar[j] += s;
    }
}

// ---------------------------------------------------------------------------
// Time-space jets: coefficients [u, u_t, u_x, u_x²/2!, ...] in the quotient
// ring R[εt, εx]/(εt², εt·εx, εx^(K+1)). One forward pass carries the time
// derivative and the x-series together; mixed partials are zero by
// construction (no in-scope residual needs them).
// ---------------------------------------------------------------------------

/// `out = a ⊗ b` in the time-space ring. Layout: index 0 = value, index 1 =
/// t-coefficient, index 1+j = x^j coefficient (j ≥ 1).
#[inline(always)]
pub(crate) fn ts_mul(a: &[f64], b: &[f64], out: &mut [f64]) {
    let k1 = out.len();
    out[0] = a[0] * b[0];
    out[1] = a[0] * b[1] + a[1] * b[0];
    for j in 1..k1 - 1 {
        let mut s = a[0] * b[1 + j] + a[1 + j] * b[0];
        for p in 1..j {
            s += a[1 + p] * b[1 + j - p];
        }
        out[1 + j] = s;
    }
}

/// Adjoint of time-space multiplication by `b`.
#[inline(always)]
pub(crate) fn ts_corr_acc(b: &[f64], ybar: &[f64], abar: &mut [f64]) {
    let k1 = abar.len();
    let kx = k1 - 2;
    let mut s0 = b[0] * ybar[0] + b[1] * ybar[1];
    for j in 1..=kx {
        s0 += b[1 + j] * ybar[1 + j];
    }
    abar[0] += s0;
    abar[1] += b[0] * ybar[1];
    for p in 1..=kx {
        let mut s = b[0] * ybar[1 + p];
        for j in (p + 1)..=kx {
            s += b[1 + j - p] * ybar[1 + j];
        }
        abar[1 + p] += s;
    }
}

// ---------------------------------------------------------------------------
// Analytic functions on jets.
// ---------------------------------------------------------------------------

/// Elementwise analytic functions understood by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum UnaryFn {
    Tanh,
    Sin,
    Cos,
    Exp,
    Sigmoid,
    Gelu,
}

/// Derivatives `f, f', ..., f^(5)` at `x` for the table-driven functions.
fn deriv_table(f: UnaryFn, x: f64) -> [f64; 6] {
    match f {
        UnaryFn::Tanh => {
            let t = x.tanh();
            let d1 = 1.0 - t * t;
            let d2 = -2.0 * t * d1;
            let d3 = (6.0 * t * t - 2.0) * d1;
            let d4 = d1 * t * (16.0 - 24.0 * t * t);
            let d5 = (16.0 - 120.0 * t * t + 120.0 * t.powi(4)) * d1;
            [t, d1, d2, d3, d4, d5]
        }
        UnaryFn::Sin => {
            let (s, c) = x.sin_cos();
            [s, c, -s, -c, s, c]
        }
        UnaryFn::Cos => {
            let (s, c) = x.sin_cos();
            [c, -s, -c, s, c, -s]
        }
        UnaryFn::Exp => {
            let e = x.exp();
            [e; 6]
        }
        UnaryFn::Sigmoid => {
            let s = 1.0 / (1.0 + (-x).exp());
            let s1 = s * (1.0 - s);
            let s2 = s1 * (1.0 - 2.0 * s);
            let s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
            let s4 = s3 * (1.0 - 2.0 * s) - 6.0 * s1 * s2;
            let s5 = s4 * (1.0 - 2.0 * s) - 8.0 * s1 * s3 - 6.0 * s2 * s2;
            [s, s1, s2, s3, s4, s5]
        }
        UnaryFn::Gelu => unreachable!("gelu is composed from ring operations"),
    }
}

/// Which truncated algebra a coefficient block lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RingKind {
    /// Taylor coefficients along a single direction; plain convolution.
    Series,
    /// Time-space layout `[u, u_t, u_x, u_xx/2!, ...]`; see `ts_mul`.
    TimeSpace,
}

#[inline(always)]
pub(crate) fn ring_mul(kind: RingKind, a: &[f64], b: &[f64], out: &mut [f64]) {
    match kind {
        RingKind::Series => conv_trunc(a, b, out),
        RingKind::TimeSpace => ts_mul(a, b, out),
    }
}

#[inline(always)]
pub(crate) fn ring_corr_acc(kind: RingKind, b: &[f64], ybar: &[f64], abar: &mut [f64]) {
    match kind {
        RingKind::Series => corr_acc(b, ybar, abar),
        RingKind::TimeSpace => ts_corr_acc(b, ybar, abar),
    }
}

pub(crate) const MAX_K1: usize = 8;

/// Evaluate `f` and `f'` through one coefficient block in a single pass.
///
/// `a` holds the input coefficients; `val` receives `f(a)` and `dval`
/// receives `f'(a)` (the block the reverse sweep multiplies by). Both rings
/// compose through `f(a) = sum_m f^(m)(a0)/m! * ahat^m` with ring powers of
/// the nilpotent part.
pub(crate) fn ring_apply_unary(
    kind: RingKind,
    f: UnaryFn,
    a: &[f64],
    val: &mut [f64],
    dval: &mut [f64],
) {
    if f == UnaryFn::Gelu {
        return apply_gelu(kind, a, val, dval);
    }
    let k1 = a.len();
    let d = deriv_table(f, a[0]);
    val[0] = d[0];
    dval[0] = d[1];
    if k1 == 1 {
        return;
    }
    for i in 1..k1 {
        val[i] = 0.0;
        dval[i] = 0.0;
    }
    // highest nonvanishing power of the nilpotent part
    let top = match kind {
        RingKind::Series => k1 - 1,
        RingKind::TimeSpace => (k1 - 2).max(1),
    };
    let mut ahat = [0.0; MAX_K1];
    ahat[1..k1].copy_from_slice(&a[1..k1]);
    let mut pow = [0.0; MAX_K1];
    pow[1..k1].copy_from_slice(&ahat[1..k1]);
    let mut inv_fact = 1.0;
    let mut m = 1;
    loop {
        let phi = d[m] * inv_fact;
        let psi = d[m + 1] * inv_fact;
        for i in 1..k1 {
            val[i] += phi * pow[i];
            dval[i] += psi * pow[i];
        }
        m += 1;
        if m > top {
            break;
        }
        inv_fact /= m as f64;
        let mut next = [0.0; MAX_K1];
        ring_mul(kind, &pow[..k1], &ahat[..k1], &mut next[..k1]);
        pow = next;
    }
}

/// Single-direction entry point (scalar [`Jet`] arithmetic).
pub(crate) fn apply_unary(f: UnaryFn, a: &[f64], val: &mut [f64], dval: &mut [f64]) {
    ring_apply_unary(RingKind::Series, f, a, val, dval)
}

/// tanh-form GELU evaluated through ring operations, with its derivative.
fn apply_gelu(kind: RingKind, a: &[f64], val: &mut [f64], dval: &mut [f64]) {
    const S: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    const C: f64 = 0.044715;
    let k1 = a.len();

    // u = S(a + C a^3)
    let mut a2 = [0.0; MAX_K1];
    ring_mul(kind, a, a, &mut a2[..k1]);
    let mut a3 = [0.0; MAX_K1];
    ring_mul(kind, &a2[..k1], a, &mut a3[..k1]);
    let mut u = [0.0; MAX_K1];
    for i in 0..k1 {
        u[i] = S * (a[i] + C * a3[i]);
    }
    // t = tanh(u)
    let mut t = [0.0; MAX_K1];
    let mut t_deriv = [0.0; MAX_K1];
    ring_apply_unary(kind, UnaryFn::Tanh, &u[..k1], &mut t[..k1], &mut t_deriv[..k1]);
    // val = 0.5 a (1 + t)
    let mut one_plus_t = t;
    one_plus_t[0] += 1.0;
    let mut half_a = [0.0; MAX_K1];
    for i in 0..k1 {
        half_a[i] = 0.5 * a[i];
    }
    ring_mul(kind, &half_a[..k1], &one_plus_t[..k1], val);
    // dval = 0.5(1+t) + 0.5 a (1-t^2) u',  u' = S(1 + 3C a^2)
    let mut sech2 = [0.0; MAX_K1];
    ring_mul(kind, &t[..k1], &t[..k1], &mut sech2[..k1]);
    for v in sech2[..k1].iter_mut() {
        *v = -*v;
    }
    sech2[0] += 1.0;
    let mut uprime = [0.0; MAX_K1];
    for i in 0..k1 {
        uprime[i] = S * 3.0 * C * a2[i];
    }
    uprime[0] += S;
    let mut tmp = [0.0; MAX_K1];
    ring_mul(kind, &sech2[..k1], &uprime[..k1], &mut tmp[..k1]);
    let mut tmp2 = [0.0; MAX_K1];
    ring_mul(kind, &half_a[..k1], &tmp[..k1], &mut tmp2[..k1]);
    for i in 0..k1 {
        dval[i] = 0.5 * one_plus_t[i] + tmp2[i];
    }
}
