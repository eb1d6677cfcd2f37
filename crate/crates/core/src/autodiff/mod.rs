//! Nested differentiation engine.
//!
//! Input derivatives come from forward Taylor-jet propagation (one pass per
//! coordinate axis); parameter gradients come from a reverse sweep recorded
//! through the jet arithmetic. Tape nodes are batched jet matrices and ops
//! are layer-granular, so the reverse sweep is a handful of GEMMs and
//! elementwise kernels rather than a scalar graph walk.
//!
//! A tape lives for one batch: record the loss, take gradients, drop it.

mod params;

pub use params::{ParamLayout, ParamVector, Segment};

use crate::error::{Error, Result};
use crate::jet::{ring_apply_unary, UnaryFn};
use crate::tensor::{
    ew_mul, ew_mul_vjp_acc, matmul, matmul_wgrad_acc, matmul_xgrad_acc, JetMat,
};

/// Index of a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Debug)]
enum Op {
    /// Constant leaf: inputs, targets, fixed embedding matrices.
    Const,
    /// Parameter leaf tied to a layout segment.
    Param { seg: usize },
    /// `w · x` with real `w`.
    MatMul { w: NodeId, x: NodeId },
    /// Broadcast add of a real column vector onto coefficient 0.
    AddBias { x: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Elementwise ring product.
    Mul { a: NodeId, b: NodeId },
    /// `mul·x + add` (the constant lands on coefficient 0).
    AffineConst { x: NodeId, mul: f64, add: f64 },
    /// Rows of `x` scaled by a real column vector.
    ScaleRows { x: NodeId, s: NodeId },
    /// Whole tensor scaled by a real scalar node.
    ScaleByScalar { x: NodeId, s: NodeId },
    /// Elementwise analytic function; `dval` holds `f'(x)` for the reverse sweep.
    Unary { f: UnaryFn, x: NodeId, dval: JetMat },
    /// Identity forward, zero adjoint into the subgraph.
    StopGrad { x: NodeId },
    /// Extract coefficient `j` as a real matrix.
    Coeff { x: NodeId, j: usize },
    ConcatRows { a: NodeId, b: NodeId },
    SliceCols { x: NodeId, start: usize },
    SliceRows { x: NodeId, start: usize },
    /// Mean over all entries of a real matrix.
    MeanAll { x: NodeId },
    SumAll { x: NodeId },
}

struct Node {
    op: Op,
    value: JetMat,
}

/// Append-only record of one loss evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::with_capacity(128) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &JetMat {
        &self.nodes[id.0].value
    }

    /// Value of a scalar node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert!(self.nodes[id.0].value.is_scalar());
        self.nodes[id.0].value.data[0]
    }

    fn push(&mut self, op: Op, value: JetMat) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: JetMat) -> NodeId {
        self.push(Op::Const, value)
    }

    pub fn constant_scalar(&mut self, v: f64) -> NodeId {
        self.constant(JetMat::scalar(v))
    }

    /// Parameter leaf holding a copy of the segment, viewed `rows × cols`.
    pub fn param(&mut self, seg_id: usize, layout: &ParamLayout, params: &ParamVector) -> NodeId {
        let seg = layout.segment(seg_id);
        let value = JetMat::from_real(seg.rows, seg.cols, params.segment(seg_id).to_vec());
        self.push(Op::Param { seg: seg_id }, value)
    }

    pub fn matmul(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let value = matmul(self.value(w), self.value(x));
        self.push(Op::MatMul { w, x }, value)
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> NodeId {
        let (xv, bv) = (self.value(x), self.value(b));
        assert_eq!(bv.k1, 1, "bias must be real");
        assert_eq!(bv.cols, 1, "bias must be a column");
        assert_eq!(bv.rows, xv.rows);
        let mut out = xv.clone();
        for r in 0..out.rows {
            let add = bv.data[r];
            for c in 0..out.cols {
                out.data[(r * out.cols + c) * out.k1] += add;
            }
        }
        self.push(Op::AddBias { x, b }, out)
    }

    fn add_sub(&mut self, a: NodeId, b: NodeId, sign: f64) -> JetMat {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols), "shape mismatch");
        assert!(av.k1 == bv.k1 || bv.k1 == 1, "order mismatch");
        let mut out = av.clone();
        if av.k1 == bv.k1 {
            for (o, v) in out.data.iter_mut().zip(&bv.data) {
                *o += sign * v;
            }
        } else {
            for e in 0..av.rows * av.cols {
                out.data[e * av.k1] += sign * bv.data[e];
            }
        }
        out
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.add_sub(a, b, 1.0);
        self.push(Op::Add { a, b }, value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.add_sub(a, b, -1.0);
        self.push(Op::Sub { a, b }, value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = ew_mul(self.value(a), self.value(b));
        self.push(Op::Mul { a, b }, value)
    }

    pub fn affine_const(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let xv = self.value(x);
        let mut out = xv.clone();
        for v in out.data.iter_mut() {
            *v *= mul;
        }
        if add != 0.0 {
            for e in 0..out.rows * out.cols {
                out.data[e * out.k1] += add;
            }
        }
        self.push(Op::AffineConst { x, mul, add }, out)
    }

    pub fn scale_rows(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let (xv, sv) = (self.value(x), self.value(s));
        assert_eq!(sv.k1, 1, "row scale must be real");
        assert_eq!((sv.rows, sv.cols), (xv.rows, 1));
        let mut out = xv.clone();
        let stride = out.cols * out.k1;
        for r in 0..out.rows {
            let c = sv.data[r];
            for v in out.data[r * stride..(r + 1) * stride].iter_mut() {
                *v *= c;
            }
        }
        self.push(Op::ScaleRows { x, s }, out)
    }

    pub fn scale_by_scalar(&mut self, x: NodeId, s: NodeId) -> NodeId {
        let sv = self.value(s);
        assert!(sv.is_scalar(), "scale operand must be a real scalar node");
        let c = sv.data[0];
        let mut out = self.value(x).clone();
        for v in out.data.iter_mut() {
            *v *= c;
        }
        self.push(Op::ScaleByScalar { x, s }, out)
    }

    /// Elementwise analytic function. `layer` names the network stage for
    /// overflow reports; the input is scanned for non-finite values while the
    /// composition runs.
    pub fn unary(&mut self, f: UnaryFn, x: NodeId, layer: &str) -> Result<NodeId> {
        let xv = self.value(x);
        let k1 = xv.k1;
        let kind = xv.kind;
        let n = xv.rows * xv.cols;
        let mut val = JetMat::zeros_like_layout(xv.rows, xv.cols, xv);
        let mut dval = JetMat::zeros_like_layout(xv.rows, xv.cols, xv);
        let mut ok = true;
        for e in 0..n {
            let a = &xv.data[e * k1..(e + 1) * k1];
            for &c in a {
                ok &= c.is_finite();
            }
            ring_apply_unary(
                kind,
                f,
                a,
                &mut val.data[e * k1..(e + 1) * k1],
                &mut dval.data[e * k1..(e + 1) * k1],
            );
        }
        if !ok {
            return Err(Error::NumericalOverflow {
                layer: layer.to_string(),
            });
        }
        Ok(self.push(Op::Unary { f, x, dval }, val))
    }

    /// Value passes through unchanged; the reverse sweep treats the subgraph
    /// as constant.
    pub fn stop_gradient(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).clone();
        self.push(Op::StopGrad { x }, value)
    }

    pub fn coeff(&mut self, x: NodeId, j: usize) -> NodeId {
        let xv = self.value(x);
        assert!(j < xv.k1, "coefficient {j} out of range for order {}", xv.k1 - 1);
        let mut out = JetMat::zeros(xv.rows, xv.cols, 1);
        for e in 0..xv.rows * xv.cols {
            out.data[e] = xv.data[e * xv.k1 + j];
        }
        self.push(Op::Coeff { x, j }, out)
    }

    pub fn concat_rows(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.cols, bv.cols);
        assert_eq!(av.k1, bv.k1);
        let mut out = JetMat::zeros_like_layout(av.rows + bv.rows, av.cols, av);
        out.data[..av.data.len()].copy_from_slice(&av.data);
        out.data[av.data.len()..].copy_from_slice(&bv.data);
        self.push(Op::ConcatRows { a, b }, out)
    }

    pub fn slice_rows(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let xv = self.value(x);
        assert!(start + len <= xv.rows);
        let stride = xv.cols * xv.k1;
        let mut out = JetMat::zeros_like_layout(len, xv.cols, xv);
        out.data
            .copy_from_slice(&xv.data[start * stride..(start + len) * stride]);
        self.push(Op::SliceRows { x, start }, out)
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let xv = self.value(x);
        assert!(start + len <= xv.cols);
        let mut out = JetMat::zeros_like_layout(xv.rows, len, xv);
        for r in 0..xv.rows {
            let src = (r * xv.cols + start) * xv.k1;
            let dst = r * len * xv.k1;
            out.data[dst..dst + len * xv.k1].copy_from_slice(&xv.data[src..src + len * xv.k1]);
        }
        self.push(Op::SliceCols { x, start }, out)
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.k1, 1, "reductions operate on real matrices");
        let n = xv.data.len();
        let mean = xv.data.iter().sum::<f64>() / n as f64;
        self.push(Op::MeanAll { x }, JetMat::scalar(mean))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let xv = self.value(x);
        assert_eq!(xv.k1, 1, "reductions operate on real matrices");
        let sum = xv.data.iter().sum::<f64>();
        self.push(Op::SumAll { x }, JetMat::scalar(sum))
    }

    /// Mean of squared entries: the workhorse for MSE losses.
    pub fn mean_square(&mut self, x: NodeId) -> NodeId {
        let sq = self.mul(x, x);
        self.mean_all(sq)
    }

    /// Recompute a node's value from the leaves, ignoring stored values.
    /// The tape is topologically ordered, so one forward walk suffices.
    pub fn replay(&self, id: NodeId) -> Vec<JetMat> {
        let mut values: Vec<JetMat> = Vec::with_capacity(id.0 + 1);
        for i in 0..=id.0 {
            let v = match &self.nodes[i].op {
                Op::Const | Op::Param { .. } => self.nodes[i].value.clone(),
                Op::MatMul { w, x } => matmul(&values[w.0], &values[x.0]),
                Op::AddBias { x, b } => {
                    let (xv, bv) = (&values[x.0], &values[b.0]);
                    let mut out = xv.clone();
                    for r in 0..out.rows {
                        for c in 0..out.cols {
                            let idx = (r * out.cols + c) * out.k1;
                            out.data[idx] += bv.data[r];
                        }
                    }
                    out
                }
                Op::Add { a, b } | Op::Sub { a, b } => {
                    let sign = if matches!(self.nodes[i].op, Op::Sub { .. }) { -1.0 } else { 1.0 };
                    let (av, bv) = (&values[a.0], &values[b.0]);
                    let mut out = av.clone();
                    if av.k1 == bv.k1 {
                        for (o, v) in out.data.iter_mut().zip(&bv.data) {
                            *o += sign * v;
                        }
                    } else {
                        for e in 0..av.rows * av.cols {
                            out.data[e * av.k1] += sign * bv.data[e];
                        }
                    }
                    out
                }
                Op::Mul { a, b } => ew_mul(&values[a.0], &values[b.0]),
                Op::AffineConst { x, mul, add } => {
                    let mut out = values[x.0].clone();
                    for v in out.data.iter_mut() {
                        *v *= mul;
                    }
                    for e in 0..out.rows * out.cols {
                        out.data[e * out.k1] += add;
                    }
                    out
                }
                Op::ScaleRows { x, s } => {
                    let (xv, sv) = (&values[x.0], &values[s.0]);
                    let mut out = xv.clone();
                    let stride = out.cols * out.k1;
                    for r in 0..out.rows {
                        for v in out.data[r * stride..(r + 1) * stride].iter_mut() {
                            *v *= sv.data[r];
                        }
                    }
                    out
                }
                Op::ScaleByScalar { x, s } => {
                    let c = values[s.0].data[0];
                    let mut out = values[x.0].clone();
                    for v in out.data.iter_mut() {
                        *v *= c;
                    }
                    out
                }
                Op::Unary { f, x, .. } => {
                    let xv = &values[x.0];
                    let k1 = xv.k1;
                    let mut val = JetMat::zeros_like_layout(xv.rows, xv.cols, xv);
                    let mut dval = JetMat::zeros_like_layout(xv.rows, xv.cols, xv);
                    for e in 0..xv.rows * xv.cols {
                        ring_apply_unary(
                            xv.kind,
                            *f,
                            &xv.data[e * k1..(e + 1) * k1],
                            &mut val.data[e * k1..(e + 1) * k1],
                            &mut dval.data[e * k1..(e + 1) * k1],
                        );
                    }
                    val
                }
                Op::StopGrad { x } => values[x.0].clone(),
                Op::Coeff { x, j } => {
                    let xv = &values[x.0];
                    let mut out = JetMat::zeros(xv.rows, xv.cols, 1);
                    for e in 0..xv.rows * xv.cols {
                        out.data[e] = xv.data[e * xv.k1 + j];
                    }
                    out
                }
                Op::ConcatRows { a, b } => {
                    let (av, bv) = (&values[a.0], &values[b.0]);
                    let mut out = JetMat::zeros_like_layout(av.rows + bv.rows, av.cols, av);
                    out.data[..av.data.len()].copy_from_slice(&av.data);
                    out.data[av.data.len()..].copy_from_slice(&bv.data);
                    out
                }
                Op::SliceRows { x, start } => {
                    let xv = &values[x.0];
                    let len = self.nodes[i].value.rows;
                    let stride = xv.cols * xv.k1;
                    let mut out = JetMat::zeros_like_layout(len, xv.cols, xv);
                    out.data.copy_from_slice(&xv.data[start * stride..(start + len) * stride]);
                    out
                }
                Op::SliceCols { x, start } => {
                    let xv = &values[x.0];
                    let len = self.nodes[i].value.cols;
                    let mut out = JetMat::zeros_like_layout(xv.rows, len, xv);
                    for r in 0..xv.rows {
                        let src = (r * xv.cols + start) * xv.k1;
                        let dst = r * len * xv.k1;
                        out.data[dst..dst + len * xv.k1]
                            .copy_from_slice(&xv.data[src..src + len * xv.k1]);
                    }
                    out
                }
                Op::MeanAll { x } => {
                    let xv = &values[x.0];
                    JetMat::scalar(xv.data.iter().sum::<f64>() / xv.data.len() as f64)
                }
                Op::SumAll { x } => JetMat::scalar(values[x.0].data.iter().sum::<f64>()),
            };
            values.push(v);
        }
        values
    }

    /// Reverse sweep from a scalar node. Returns per-node adjoints.
    pub fn backward(&self, root: NodeId) -> Result<Adjoints> {
        let node = self
            .nodes
            .get(root.0)
            .ok_or(Error::InvalidNode(root.0))?;
        if !node.value.is_scalar() {
            return Err(Error::InvalidNode(root.0));
        }
        let mut adj: Vec<Option<JetMat>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[root.0] = Some(JetMat::scalar(1.0));

        for i in (0..=root.0).rev() {
            let Some(ybar) = adj[i].take() else { continue };
            self.pull_back(i, &ybar, &mut adj);
            adj[i] = Some(ybar);
        }
        Ok(Adjoints { adj })
    }

    /// Propagate `ybar` (adjoint of node `i`) into the operands of node `i`.
    fn pull_back(&self, i: usize, ybar: &JetMat, adj: &mut [Option<JetMat>]) {
        let ensure = |adj: &mut [Option<JetMat>], id: NodeId, like: &JetMat| {
            if adj[id.0].is_none() {
                adj[id.0] = Some(JetMat::zeros_like_layout(like.rows, like.cols, like));
            }
        };
        match &self.nodes[i].op {
            Op::Const | Op::Param { .. } => {}
            Op::MatMul { w, x } => {
                let (wv, xv) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
                ensure(adj, *x, xv);
                matmul_xgrad_acc(wv, ybar, adj[x.0].as_mut().unwrap());
                ensure(adj, *w, wv);
                matmul_wgrad_acc(ybar, xv, adj[w.0].as_mut().unwrap());
            }
            Op::AddBias { x, b } => {
                let (xv, bv) = (&self.nodes[x.0].value, &self.nodes[b.0].value);
                ensure(adj, *x, xv);
                acc_all(adj[x.0].as_mut().unwrap(), ybar, 1.0);
                ensure(adj, *b, bv);
                let bbar = adj[b.0].as_mut().unwrap();
                for r in 0..ybar.rows {
                    let mut s = 0.0;
                    for c in 0..ybar.cols {
                        s += ybar.data[(r * ybar.cols + c) * ybar.k1];
                    }
                    bbar.data[r] += s;
                }
            }
            Op::Add { a, b } | Op::Sub { a, b } => {
                let sign = if matches!(self.nodes[i].op, Op::Sub { .. }) {
                    -1.0
                } else {
                    1.0
                };
                let av = &self.nodes[a.0].value;
                ensure(adj, *a, av);
                acc_all(adj[a.0].as_mut().unwrap(), ybar, 1.0);
                let bv = &self.nodes[b.0].value;
                ensure(adj, *b, bv);
                let bbar = adj[b.0].as_mut().unwrap();
                if bbar.k1 == ybar.k1 {
                    acc_all(bbar, ybar, sign);
                } else {
                    // real operand of a jet add: only coefficient 0 flows back
                    for e in 0..bbar.rows * bbar.cols {
                        bbar.data[e] += sign * ybar.data[e * ybar.k1];
                    }
                }
            }
            Op::Mul { a, b } => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                ensure(adj, *a, av);
                ew_mul_vjp_acc(bv, ybar, adj[a.0].as_mut().unwrap());
                ensure(adj, *b, bv);
                ew_mul_vjp_acc(av, ybar, adj[b.0].as_mut().unwrap());
            }
            Op::AffineConst { x, mul, .. } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                acc_all(adj[x.0].as_mut().unwrap(), ybar, *mul);
            }
            Op::ScaleRows { x, s } => {
                let (xv, sv) = (&self.nodes[x.0].value, &self.nodes[s.0].value);
                ensure(adj, *x, xv);
                {
                    let xbar = adj[x.0].as_mut().unwrap();
                    let stride = xv.cols * xv.k1;
                    for r in 0..xv.rows {
                        let c = sv.data[r];
                        for (o, y) in xbar.data[r * stride..(r + 1) * stride]
                            .iter_mut()
                            .zip(&ybar.data[r * stride..(r + 1) * stride])
                        {
                            *o += c * y;
                        }
                    }
                }
                ensure(adj, *s, sv);
                let sbar = adj[s.0].as_mut().unwrap();
                let stride = xv.cols * xv.k1;
                for r in 0..xv.rows {
                    let mut acc = 0.0;
                    for (xval, y) in xv.data[r * stride..(r + 1) * stride]
                        .iter()
                        .zip(&ybar.data[r * stride..(r + 1) * stride])
                    {
                        acc += xval * y;
                    }
                    sbar.data[r] += acc;
                }
            }
            Op::ScaleByScalar { x, s } => {
                let (xv, sv) = (&self.nodes[x.0].value, &self.nodes[s.0].value);
                let c = sv.data[0];
                ensure(adj, *x, xv);
                acc_all(adj[x.0].as_mut().unwrap(), ybar, c);
                ensure(adj, *s, sv);
                let dot: f64 = xv.data.iter().zip(&ybar.data).map(|(a, b)| a * b).sum();
                adj[s.0].as_mut().unwrap().data[0] += dot;
            }
            Op::Unary { x, dval, .. } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                ew_mul_vjp_acc(dval, ybar, adj[x.0].as_mut().unwrap());
            }
            Op::StopGrad { .. } => {}
            Op::Coeff { x, j } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                let xbar = adj[x.0].as_mut().unwrap();
                for e in 0..xv.rows * xv.cols {
                    xbar.data[e * xv.k1 + j] += ybar.data[e];
                }
            }
            Op::ConcatRows { a, b } => {
                let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                ensure(adj, *a, av);
                let na = av.data.len();
                for (o, y) in adj[a.0].as_mut().unwrap().data.iter_mut().zip(&ybar.data[..na]) {
                    *o += y;
                }
                ensure(adj, *b, bv);
                for (o, y) in adj[b.0].as_mut().unwrap().data.iter_mut().zip(&ybar.data[na..]) {
                    *o += y;
                }
            }
            Op::SliceRows { x, start } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                let stride = xv.cols * xv.k1;
                let xbar = adj[x.0].as_mut().unwrap();
                for (o, y) in xbar.data[start * stride..].iter_mut().zip(&ybar.data) {
                    *o += y;
                }
            }
            Op::SliceCols { x, start } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                let len = ybar.cols;
                let xbar = adj[x.0].as_mut().unwrap();
                for r in 0..xv.rows {
                    let dst = (r * xv.cols + start) * xv.k1;
                    let src = r * len * xv.k1;
                    for k in 0..len * xv.k1 {
                        xbar.data[dst + k] += ybar.data[src + k];
                    }
                }
            }
            Op::MeanAll { x } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                let c = ybar.data[0] / xv.data.len() as f64;
                for o in adj[x.0].as_mut().unwrap().data.iter_mut() {
                    *o += c;
                }
            }
            Op::SumAll { x } => {
                let xv = &self.nodes[x.0].value;
                ensure(adj, *x, xv);
                let c = ybar.data[0];
                for o in adj[x.0].as_mut().unwrap().data.iter_mut() {
                    *o += c;
                }
            }
        }
    }

    /// Exact reverse-mode gradient of a recorded scalar with respect to every
    /// parameter leaf. Parameters not reached carry zero.
    pub fn loss_grad(&self, root: NodeId, layout: &std::sync::Arc<ParamLayout>) -> Result<ParamVector> {
        let adjoints = self.backward(root)?;
        Ok(self.gather_param_grad(&adjoints, layout))
    }

    pub fn gather_param_grad(
        &self,
        adjoints: &Adjoints,
        layout: &std::sync::Arc<ParamLayout>,
    ) -> ParamVector {
        let mut grad = ParamVector::zeros(layout.clone());
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { seg } = node.op {
                if let Some(a) = &adjoints.adj[i] {
                    for (g, v) in grad.segment_mut(seg).iter_mut().zip(&a.data) {
                        *g += v;
                    }
                }
            }
        }
        grad
    }
}

#[inline]
fn acc_all(out: &mut JetMat, src: &JetMat, c: f64) {
    debug_assert_eq!(out.data.len(), src.data.len());
    for (o, s) in out.data.iter_mut().zip(&src.data) {
        *o += c * s;
    }
}

/// Per-node adjoints from one reverse sweep.
pub struct Adjoints {
    adj: Vec<Option<JetMat>>,
}

impl Adjoints {
    /// Adjoint of an arbitrary node (e.g. an input leaf), if it was reached.
    pub fn node(&self, id: NodeId) -> Option<&JetMat> {
        self.adj[id.0].as_ref()
    }
}
