//! Boundary extraction from per-frame boundary probabilities, and the
//! binary targets a boundary detector is trained against.

use crate::error::{Error, Result};
use crate::segmenter::SegmentSet;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` inside [`bce_loss`].
pub const BCE_EPS: f64 = 1e-7;

/// Per-frame boundary probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    probs: Vec<f64>,
}

impl BoundaryTrace {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && (0.0..=1.0).contains(p))) {
            return Err(Error::InvalidArgument(format!(
                "boundary probability at {i} is {} (must be in [0, 1])",
                probs[i]
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Thresholds for accepting a local maximum as a boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// Peaks below this height are never boundaries.
    pub min_peak: f64,
    /// A peak is accepted if its prominence exceeds this...
    pub min_prominence: f64,
    /// ...or if its height exceeds this.
    pub hard_prob: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self { min_peak: 0.2, min_prominence: 0.05, hard_prob: 0.8 }
    }
}

impl PeakConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("min_peak", self.min_peak), ("min_prominence", self.min_prominence), ("hard_prob", self.hard_prob)]
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn accepts(&self, height: f64, prominence: f64) -> bool {
        height >= self.min_peak && (prominence > self.min_prominence || height > self.hard_prob)
    }
}

/// Local maxima of `x`. A flat run counts once, at its leftmost index, when
/// both sides drop strictly. Trace edges are never peaks.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Topographic prominence of the peak at `peak`: its height above the higher
/// of the two lowest points separating it from strictly higher ground on
/// either side. Trace edges stand in for higher ground.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Indices of accepted peaks.
pub fn detect_peaks(trace: &BoundaryTrace, cfg: &PeakConfig) -> Vec<usize> {
    let x = trace.probs();
    local_maxima(x).into_iter().filter(|&i| cfg.accepts(x[i], prominence(x, i))).collect()
}

/// Accepted peaks become segment starts; frame 0 always starts a segment.
pub fn detect_boundaries(trace: &BoundaryTrace, cfg: &PeakConfig) -> SegmentSet {
    let t = trace.len();
    if t == 0 {
        return SegmentSet::empty();
    }
    let mut starts = vec![0];
    starts.extend(detect_peaks(trace, cfg));
    SegmentSet::from_starts(&starts, t).expect("peaks are strictly increasing interior indices")
}

/// 1 at every segment start (including frame 0), 0 elsewhere.
pub fn boundary_targets(segs: &SegmentSet) -> BoundaryTrace {
    let mut probs = vec![0.0; segs.total_frames()];
    for s in segs {
        probs[s.start] = 1.0;
    }
    BoundaryTrace { probs }
}

/// Mean binary cross-entropy of `pred` against `target`.
pub fn bce_loss(pred: &BoundaryTrace, target: &BoundaryTrace) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::FrameCountMismatch { expected: target.len(), actual: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::Empty("boundary trace"));
    }
    let total: f64 = pred
        .probs()
        .iter()
        .zip(target.probs())
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / pred.len() as f64)
}
