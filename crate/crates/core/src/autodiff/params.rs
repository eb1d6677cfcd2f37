//! Flat parameter storage with a stable named-segment layout.
//!
//! Segment names follow the checkpoint convention `<layer>.<tensor>`
//! (e.g. `layer_0.w`, `layer_2.s`, `enc_u.b`, `embed.log_p_t`). The layout is
//! fixed at network construction and never changes across a training run,
//! which is what makes checkpoints and optimizer moments compatible.

use std::sync::Arc;

/// One named parameter tensor inside the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    total: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> usize {
        let seg = Segment {
            name: name.into(),
            rows,
            cols,
            offset: self.total,
        };
        debug_assert!(
            !self.segments.iter().any(|s| s.name == seg.name),
            "duplicate segment {}",
            seg.name
        );
        self.total += seg.len();
        self.segments.push(seg);
        self.segments.len() - 1
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, id: usize) -> &Segment {
        &self.segments[id]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.name == name)
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    /// Order-sensitive digest of names and shapes, used as the checkpoint
    /// compatibility guard.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for s in &self.segments {
            eat(s.name.as_bytes());
            eat(&(s.rows as u64).to_le_bytes());
            eat(&(s.cols as u64).to_le_bytes());
        }
        h
    }
}

/// Flat f64 vector with a shared layout: parameters, gradients, Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    layout: Arc<ParamLayout>,
    data: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: Arc<ParamLayout>) -> Self {
        let n = layout.total_len();
        ParamVector {
            layout,
            data: vec![0.0; n],
        }
    }

    pub fn from_data(layout: Arc<ParamLayout>, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), layout.total_len());
        ParamVector { layout, data }
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn segment(&self, id: usize) -> &[f64] {
        let s = self.layout.segment(id);
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn segment_mut(&mut self, id: usize) -> &mut [f64] {
        let s = self.layout.segment(id);
        let (o, l) = (s.offset, s.len());
        &mut self.data[o..o + l]
    }

    pub fn segment_by_name(&self, name: &str) -> Option<&[f64]> {
        self.layout.index_of(name).map(|i| {
            let s = self.layout.segment(i);
            &self.data[s.offset..s.offset + s.len()]
        })
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &ParamVector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}
