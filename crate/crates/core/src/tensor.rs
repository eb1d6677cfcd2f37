//! Batched jet matrices: the value type carried by tape nodes.
//!
//! A `JetMat` is a `rows × cols` matrix whose entries are jets with `k1 = K+1`
//! coefficients, stored flat in `[row][col][coeff]` order. Parameters and
//! plain values are the `k1 = 1` case. Matrix products against real (`k1 = 1`)
//! operands flatten the column/coefficient axes and run as a single f64 GEMM,
//! which is where nearly all training time goes.

use ndarray::{ArrayView2, ArrayViewMut2};

use crate::jet::{ring_corr_acc, ring_mul, RingKind};

#[derive(Debug, Clone, PartialEq)]
pub struct JetMat {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) k1: usize,
    pub(crate) kind: RingKind,
    pub(crate) data: Vec<f64>,
}

impl JetMat {
    pub fn zeros(rows: usize, cols: usize, k1: usize) -> Self {
        JetMat {
            rows,
            cols,
            k1,
            kind: RingKind::Series,
            data: vec![0.0; rows * cols * k1],
        }
    }

    /// Zero block carrying `[value, d/dt, x-series up to x_order]` entries.
    pub fn zeros_time_space(rows: usize, cols: usize, x_order: usize) -> Self {
        JetMat {
            rows,
            cols,
            k1: x_order + 2,
            kind: RingKind::TimeSpace,
            data: vec![0.0; rows * cols * (x_order + 2)],
        }
    }

    pub(crate) fn zeros_like_layout(rows: usize, cols: usize, like: &JetMat) -> Self {
        JetMat {
            rows,
            cols,
            k1: like.k1,
            kind: like.kind,
            data: vec![0.0; rows * cols * like.k1],
        }
    }

    /// Real (order-0) matrix from row-major data.
    pub fn from_real(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        JetMat {
            rows,
            cols,
            k1: 1,
            kind: RingKind::Series,
            data,
        }
    }

    pub fn scalar(v: f64) -> Self {
        JetMat::from_real(1, 1, vec![v])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Coefficient count per entry (`K+1`).
    pub fn k1(&self) -> usize {
        self.k1
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1 && self.k1 == 1
    }

    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize, k: usize) -> f64 {
        self.data[(r * self.cols + c) * self.k1 + k]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, k: usize, v: f64) {
        self.data[(r * self.cols + c) * self.k1 + k] = v;
    }

    /// Entry `(r, c)` as a coefficient slice of length `k1`.
    #[inline]
    pub fn entry(&self, r: usize, c: usize) -> &[f64] {
        let base = (r * self.cols + c) * self.k1;
        &self.data[base..base + self.k1]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// View with columns and coefficients flattened: `rows × (cols·k1)`.
    pub(crate) fn flat_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows, self.cols * self.k1), &self.data).unwrap()
    }

    pub(crate) fn flat_view_mut(&mut self) -> ArrayViewMut2<'_, f64> {
        ArrayViewMut2::from_shape((self.rows, self.cols * self.k1), &mut self.data).unwrap()
    }
}

/// `y = w · x` where `w` is real `(m × n)` and `x` is `(n × B)` of jets.
pub(crate) fn matmul(w: &JetMat, x: &JetMat) -> JetMat {
    assert_eq!(w.k1, 1, "left matmul operand must be real");
    assert_eq!(w.cols, x.rows, "matmul dimension mismatch");
    let mut y = JetMat::zeros_like_layout(w.rows, x.cols, x);
    ndarray::linalg::general_mat_mul(1.0, &w.flat_view(), &x.flat_view(), 0.0, &mut y.flat_view_mut());
    y
}

/// `xbar += wᵀ · ybar`.
pub(crate) fn matmul_xgrad_acc(w: &JetMat, ybar: &JetMat, xbar: &mut JetMat) {
    ndarray::linalg::general_mat_mul(
        1.0,
        &w.flat_view().t(),
        &ybar.flat_view(),
        1.0,
        &mut xbar.flat_view_mut(),
    );
}

/// `wbar += Σ_{b,k} ybar[·,b,k] · x[·,b,k]ᵀ` (contraction over batch and coefficients).
pub(crate) fn matmul_wgrad_acc(ybar: &JetMat, x: &JetMat, wbar: &mut JetMat) {
    debug_assert_eq!(wbar.k1, 1);
    ndarray::linalg::general_mat_mul(
        1.0,
        &ybar.flat_view(),
        &x.flat_view().t(),
        1.0,
        &mut wbar.flat_view_mut(),
    );
}

/// Elementwise ring product. Operands must share `rows × cols`; a `k1 = 1`
/// operand broadcasts as a constant.
pub(crate) fn ew_mul(a: &JetMat, b: &JetMat) -> JetMat {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "elementwise shape mismatch");
    assert!(
        a.k1 == b.k1 || a.k1 == 1 || b.k1 == 1,
        "incompatible jet orders {} vs {}",
        a.k1,
        b.k1
    );
    let n = a.rows * a.cols;
    if a.k1 == b.k1 {
        assert!(a.k1 == 1 || a.kind == b.kind, "mixed ring kinds");
        let k1 = a.k1;
        let mut out = JetMat::zeros_like_layout(a.rows, a.cols, a);
        // constant-length inner loops per coefficient count so they unroll
        let body = |k1: usize, out: &mut JetMat| {
            for e in 0..n {
                ring_mul(
                    a.kind,
                    &a.data[e * k1..(e + 1) * k1],
                    &b.data[e * k1..(e + 1) * k1],
                    &mut out.data[e * k1..(e + 1) * k1],
                );
            }
        };
        match k1 {
            1 => body(1, &mut out),
            2 => body(2, &mut out),
            3 => body(3, &mut out),
            4 => body(4, &mut out),
            5 => body(5, &mut out),
            6 => body(6, &mut out),
            k => body(k, &mut out),
        }
        out
    } else {
        let (jets, reals, jk) = if a.k1 > b.k1 { (a, b, a.k1) } else { (b, a, b.k1) };
        let mut out = JetMat::zeros_like_layout(a.rows, a.cols, jets);
        for e in 0..n {
            let c = reals.data[e];
            for k in 0..jk {
                out.data[e * jk + k] = jets.data[e * jk + k] * c;
            }
        }
        out
    }
}

/// VJP of `ew_mul` into the `a` side: `abar += adj(b)·ybar`.
pub(crate) fn ew_mul_vjp_acc(b: &JetMat, ybar: &JetMat, abar: &mut JetMat) {
    let n = abar.rows * abar.cols;
    let yk = ybar.k1;
    if abar.k1 == yk && b.k1 == yk {
        let body = |yk: usize, abar: &mut JetMat| {
            for e in 0..n {
                ring_corr_acc(
                    ybar.kind,
                    &b.data[e * yk..(e + 1) * yk],
                    &ybar.data[e * yk..(e + 1) * yk],
                    &mut abar.data[e * yk..(e + 1) * yk],
                );
            }
        };
        match yk {
            1 => body(1, abar),
            2 => body(2, abar),
            3 => body(3, abar),
            4 => body(4, abar),
            5 => body(5, abar),
            6 => body(6, abar),
            k => body(k, abar),
        }
    } else if abar.k1 == yk && b.k1 == 1 {
        for e in 0..n {
            let c = b.data[e];
            for k in 0..yk {
                abar.data[e * yk + k] += c * ybar.data[e * yk + k];
            }
        }
    } else if abar.k1 == 1 && b.k1 == yk {
        // real operand of a jet product: gradient contracts over coefficients
        for e in 0..n {
            let mut s = 0.0;
            for k in 0..yk {
                s += b.data[e * yk + k] * ybar.data[e * yk + k];
            }
            abar.data[e] += s;
        }
    } else {
        unreachable!("ew_mul_vjp: inconsistent coefficient counts");
    }
}
