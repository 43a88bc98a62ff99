//! Frame matrices and the vector primitives shared by every other module.
//!
//! Values are stored and computed in `f64`; the on-disk container uses `f32`.

use crate::error::{Error, Result};

/// Norms below this are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

/// Default feature frame rate.
pub const DEFAULT_FRAME_RATE_HZ: f64 = 50.0;

/// A `T x D` matrix of frame features sampled at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    data: Vec<f64>,
    n_frames: usize,
    dim: usize,
    frame_rate_hz: f64,
    utt_id: String,
}

impl FrameMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(data: Vec<f64>, dim: usize, frame_rate_hz: f64, utt_id: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
        }
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("frame rate must be positive, got {frame_rate_hz}")));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: data.len() % dim });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { n_frames: data.len() / dim, data, dim, frame_rate_hz, utt_id: utt_id.into() })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_rate_hz: f64, utt_id: impl Into<String>) -> Result<Self> {
        let dim = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim, frame_rate_hz, utt_id)
    }

    /// An empty (`T = 0`) matrix of the given width.
    pub fn empty(dim: usize, frame_rate_hz: f64, utt_id: impl Into<String>) -> Result<Self> {
        Self::new(Vec::new(), dim, frame_rate_hz, utt_id)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn utt_id(&self) -> &str {
        &self.utt_id
    }

    pub fn set_utt_id(&mut self, utt_id: impl Into<String>) {
        self.utt_id = utt_id.into();
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }

    /// Duration covered by the frames, in seconds.
    pub fn duration_s(&self) -> f64 {
        self.n_frames as f64 / self.frame_rate_hz
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copy with every row scaled to unit L2 norm (zero rows stay zero).
    pub fn l2_normalized(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            data.extend(l2_normalize(row));
        }
        Self { data, ..self.clone() }
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Scales `v` to unit length; vectors with norm at or below [`NORM_EPS`] map to zero.
pub fn l2_normalize(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n > NORM_EPS {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}

/// Cosine similarity clamped to `[-1, 1]`. Zero-norm inputs give 0.
pub fn cosine_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    Ok(cosine_unchecked(u, v))
}

pub(crate) fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let nu = norm(u);
    let nv = norm(v);
    if nu < NORM_EPS || nv < NORM_EPS {
        return 0.0;
    }
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0)
}

/// Dense symmetric `T x T` cosine similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Vec<f64>,
    size: usize,
}

impl SimilarityMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }
}

/// Pairwise cosine similarity between all frames.
pub fn similarity_matrix(frames: &FrameMatrix) -> SimilarityMatrix {
    let t = frames.n_frames();
    let norms: Vec<f64> = frames.rows().map(norm).collect();
    let mut values = vec![0.0; t * t];
    for i in 0..t {
        for j in i..t {
            let s = if norms[i] < NORM_EPS || norms[j] < NORM_EPS {
                0.0
            } else {
                (dot(frames.row(i), frames.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            values[i * t + j] = s;
            values[j * t + i] = s;
        }
    }
    SimilarityMatrix { values, size: t }
}

/// Running sum of vectors, used to track segment centroids.
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    sum: Vec<f64>,
    count: usize,
}

impl Accumulator {
    pub(crate) fn new(dim: usize) -> Self {
        Self { sum: vec![0.0; dim], count: 0 }
    }

    pub(crate) fn push(&mut self, v: &[f64]) {
        for (s, x) in self.sum.iter_mut().zip(v) {
            *s += x;
        }
        self.count += 1;
    }

    pub(crate) fn absorb(&mut self, other: &Accumulator) {
        for (s, x) in self.sum.iter_mut().zip(&other.sum) {
            *s += x;
        }
        self.count += other.count;
    }

    pub(crate) fn mean(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    pub(crate) fn mean_into(&self, out: &mut [f64]) {
        let n = self.count.max(1) as f64;
        for (o, s) in out.iter_mut().zip(&self.sum) {
            *o = s / n;
        }
    }

    pub(crate) fn reset(&mut self) {
        self.sum.iter_mut().for_each(|s| *s = 0.0);
        self.count = 0;
    }
}
