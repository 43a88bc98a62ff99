//! Unsupervised segmentation of frame sequences.
//!
//! The greedy sweep groups adjacent frames whose cosine similarity to the
//! running segment centroid reaches a merge threshold. Refinement then folds
//! short segments into a sufficiently similar neighbor.

use crate::error::{Error, Result};
use crate::linalg::{cosine_unchecked, Accumulator, FrameMatrix};

pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.8;
pub const DEFAULT_REFINE_THRESHOLD: f64 = 0.7;
pub const DEFAULT_REFINE_MIN_MS: f64 = 80.0;

/// Half-open frame range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn duration_frames(&self) -> usize {
        self.end - self.start
    }

    pub fn duration_ms(&self, frame_rate_hz: f64) -> f64 {
        self.duration_frames() as f64 * 1000.0 / frame_rate_hz
    }
}

/// Contiguous, exhaustive partition of `[0, total_frames)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentSet {
    segments: Vec<Segment>,
    total_frames: usize,
}

impl SegmentSet {
    pub fn new(segments: Vec<Segment>, total_frames: usize) -> Result<Self> {
        let mut expected_start = 0;
        for (k, s) in segments.iter().enumerate() {
            if s.start != expected_start {
                return Err(Error::InvalidSegments(format!(
                    "segment {k} starts at {} but previous ended at {expected_start}",
                    s.start
                )));
            }
            if s.end <= s.start {
                return Err(Error::InvalidSegments(format!("segment {k} is empty ({}..{})", s.start, s.end)));
            }
            expected_start = s.end;
        }
        if expected_start != total_frames {
            return Err(Error::InvalidSegments(format!(
                "segments cover {expected_start} frames, expected {total_frames}"
            )));
        }
        Ok(Self { segments, total_frames })
    }

    /// Builds a partition from segment start indices. `starts` must begin at 0
    /// (unless `total_frames` is 0) and be strictly increasing.
    pub fn from_starts(starts: &[usize], total_frames: usize) -> Result<Self> {
        if total_frames == 0 {
            return if starts.is_empty() {
                Ok(Self::empty())
            } else {
                Err(Error::InvalidSegments("starts given for zero frames".into()))
            };
        }
        if starts.first() != Some(&0) {
            return Err(Error::InvalidSegments("first segment must start at frame 0".into()));
        }
        let segments = starts
            .iter()
            .zip(starts.iter().skip(1).chain(std::iter::once(&total_frames)))
            .map(|(&s, &e)| Segment::new(s, e))
            .collect();
        Self::new(segments, total_frames)
    }

    pub(crate) fn from_vec_unchecked(segments: Vec<Segment>, total_frames: usize) -> Self {
        debug_assert!(Self::new(segments.clone(), total_frames).is_ok());
        Self { segments, total_frames }
    }

    pub fn from_durations(durations: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut segments = Vec::with_capacity(durations.len());
        for &d in durations {
            segments.push(Segment::new(start, start + d));
            start += d;
        }
        Self::new(segments, start)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// A single segment covering everything.
    pub fn whole(total_frames: usize) -> Self {
        if total_frames == 0 {
            return Self::empty();
        }
        Self { segments: vec![Segment::new(0, total_frames)], total_frames }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Segment> {
        self.segments.iter()
    }

    pub fn starts(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.start).collect()
    }

    pub fn durations(&self) -> Vec<usize> {
        self.segments.iter().map(Segment::duration_frames).collect()
    }

    /// Segment start times in seconds. The start at frame 0 is dropped unless
    /// `include_initial` is set.
    pub fn boundary_times_s(&self, frame_rate_hz: f64, include_initial: bool) -> Vec<f64> {
        self.segments
            .iter()
            .filter(|s| include_initial || s.start > 0)
            .map(|s| s.start as f64 / frame_rate_hz)
            .collect()
    }

    pub(crate) fn check_frames(&self, frames: &FrameMatrix) -> Result<()> {
        if frames.n_frames() != self.total_frames {
            return Err(Error::FrameCountMismatch { expected: self.total_frames, actual: frames.n_frames() });
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a SegmentSet {
    type Item = &'a Segment;
    type IntoIter = std::slice::Iter<'a, Segment>;

    fn into_iter(self) -> Self::IntoIter {
        self.segments.iter()
    }
}

/// Single left-to-right sweep: a frame joins the current segment when its
/// cosine similarity to the segment centroid is at least `merge_threshold`.
pub fn greedy_segment(frames: &FrameMatrix, merge_threshold: f64) -> SegmentSet {
    let t = frames.n_frames();
    if t == 0 {
        return SegmentSet::empty();
    }
    let mut acc = Accumulator::new(frames.dim());
    let mut centroid = vec![0.0; frames.dim()];
    let mut segments = Vec::new();
    let mut start = 0;
    acc.push(frames.row(0));
    for i in 1..t {
        let frame = frames.row(i);
        acc.mean_into(&mut centroid);
        if cosine_unchecked(frame, &centroid) >= merge_threshold {
            acc.push(frame);
        } else {
            segments.push(Segment::new(start, i));
            start = i;
            acc.reset();
            acc.push(frame);
        }
    }
    segments.push(Segment::new(start, t));
    SegmentSet::from_vec_unchecked(segments, t)
}

/// Reference implementation of [`greedy_segment`] that recomputes the
/// centroid from scratch at every step. Quadratic; meant for tests.
pub fn oracle_segment(frames: &FrameMatrix, merge_threshold: f64) -> SegmentSet {
    let t = frames.n_frames();
    let d = frames.dim();
    let mut starts = Vec::new();
    if t > 0 {
        starts.push(0);
    }
    let mut start = 0;
    for i in 1..t {
        let mut centroid = vec![0.0; d];
        for j in start..i {
            for (c, x) in centroid.iter_mut().zip(frames.row(j)) {
                *c += x;
            }
        }
        let n = (i - start) as f64;
        for c in &mut centroid {
            *c /= n;
        }
        let x = frames.row(i);
        let mut xy = 0.0;
        let mut xx = 0.0;
        let mut yy = 0.0;
        for k in 0..d {
            xy += x[k] * centroid[k];
            xx += x[k] * x[k];
            yy += centroid[k] * centroid[k];
        }
        let (nx, ny) = (xx.sqrt(), yy.sqrt());
        let sim = if nx < 1e-12 || ny < 1e-12 { 0.0 } else { (xy / (nx * ny)).clamp(-1.0, 1.0) };
        if sim < merge_threshold {
            starts.push(i);
            start = i;
        }
    }
    SegmentSet::from_starts(&starts, t).expect("oracle produces a valid partition")
}

struct Span {
    start: usize,
    end: usize,
    acc: Accumulator,
}

impl Span {
    fn duration_ms(&self, frame_rate_hz: f64) -> f64 {
        (self.end - self.start) as f64 * 1000.0 / frame_rate_hz
    }
}

fn spans(segs: &SegmentSet, frames: &FrameMatrix) -> Vec<Span> {
    segs.iter()
        .map(|s| {
            let mut acc = Accumulator::new(frames.dim());
            for i in s.start..s.end {
                acc.push(frames.row(i));
            }
            Span { start: s.start, end: s.end, acc }
        })
        .collect()
}

fn into_set(spans: Vec<Span>, total: usize) -> SegmentSet {
    SegmentSet::from_vec_unchecked(spans.into_iter().map(|s| Segment::new(s.start, s.end)).collect(), total)
}

/// Similarity of span `i` to its left and right neighbors.
fn neighbor_sims(spans: &[Span], i: usize) -> (Option<f64>, Option<f64>) {
    let c = spans[i].acc.mean();
    let left = (i > 0).then(|| cosine_unchecked(&c, &spans[i - 1].acc.mean()));
    let right = (i + 1 < spans.len()).then(|| cosine_unchecked(&c, &spans[i + 1].acc.mean()));
    (left, right)
}

/// Merges span `i` into the neighbor selected by `pick`. Returns the index of
/// the merged span.
fn merge_into(spans: &mut Vec<Span>, i: usize, into_left: bool) -> usize {
    let removed = spans.remove(i);
    if into_left {
        let target = &mut spans[i - 1];
        target.end = removed.end;
        target.acc.absorb(&removed.acc);
        i - 1
    } else {
        let target = &mut spans[i];
        target.start = removed.start;
        target.acc.absorb(&removed.acc);
        i
    }
}

/// Picks the more similar neighbor (`true` = left); ties go left.
fn best_neighbor(left: Option<f64>, right: Option<f64>) -> Option<(bool, f64)> {
    match (left, right) {
        (Some(l), Some(r)) if r > l => Some((false, r)),
        (Some(l), _) => Some((true, l)),
        (None, Some(r)) => Some((false, r)),
        (None, None) => None,
    }
}

/// One refinement sweep. Returns whether anything merged.
fn refine_sweep(spans: &mut Vec<Span>, refine_threshold: f64, min_ms: f64, frame_rate_hz: f64) -> bool {
    let mut changed = false;
    let mut i = 0;
    while i < spans.len() {
        if spans[i].duration_ms(frame_rate_hz) < min_ms {
            let (l, r) = neighbor_sims(spans, i);
            if let Some((into_left, sim)) = best_neighbor(l, r) {
                if sim > refine_threshold {
                    i = merge_into(spans, i, into_left);
                    changed = true;
                    continue;
                }
            }
        }
        i += 1;
    }
    changed
}

/// Like [`refine`], also reporting how many sweeps ran (including the final
/// sweep that found nothing to merge).
pub fn refine_counting_sweeps(
    segs: &SegmentSet,
    frames: &FrameMatrix,
    refine_threshold: f64,
    min_ms: f64,
) -> Result<(SegmentSet, usize)> {
    segs.check_frames(frames)?;
    let rate = frames.frame_rate_hz();
    let mut spans = spans(segs, frames);
    let mut sweeps = 1;
    while refine_sweep(&mut spans, refine_threshold, min_ms, rate) {
        sweeps += 1;
    }
    Ok((into_set(spans, segs.total_frames()), sweeps))
}

/// Folds every segment shorter than `min_ms` into its more similar neighbor
/// when that similarity exceeds `refine_threshold`; repeats to a fixed point.
pub fn refine(segs: &SegmentSet, frames: &FrameMatrix, refine_threshold: f64, min_ms: f64) -> Result<SegmentSet> {
    refine_counting_sweeps(segs, frames, refine_threshold, min_ms).map(|(s, _)| s)
}

/// Unconditionally merges every segment shorter than `min_ms` into its more
/// similar neighbor. Evaluation-only; the codec path keeps all segments.
pub fn filter_min_duration(segs: &SegmentSet, frames: &FrameMatrix, min_ms: f64) -> Result<SegmentSet> {
    segs.check_frames(frames)?;
    if segs.len() <= 1 {
        return Ok(segs.clone());
    }
    let rate = frames.frame_rate_hz();
    let mut spans = spans(segs, frames);
    let mut i = 0;
    while i < spans.len() && spans.len() > 1 {
        if spans[i].duration_ms(rate) < min_ms {
            let (l, r) = neighbor_sims(&spans, i);
            let (into_left, _) = best_neighbor(l, r).expect("at least two spans");
            i = merge_into(&mut spans, i, into_left);
        } else {
            i += 1;
        }
    }
    Ok(into_set(spans, segs.total_frames()))
}

/// Greedy sweep followed by refinement, as used to produce distillation targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmenterConfig {
    pub merge_threshold: f64,
    pub refine_threshold: f64,
    pub refine_min_ms: f64,
    /// L2-normalize frames before the sweep.
    pub normalize: bool,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            merge_threshold: DEFAULT_MERGE_THRESHOLD,
            refine_threshold: DEFAULT_REFINE_THRESHOLD,
            refine_min_ms: DEFAULT_REFINE_MIN_MS,
            normalize: false,
        }
    }
}

impl SegmenterConfig {
    pub fn segment(&self, frames: &FrameMatrix) -> SegmentSet {
        let normalized;
        let frames = if self.normalize {
            normalized = frames.l2_normalized();
            &normalized
        } else {
            frames
        };
        let segs = greedy_segment(frames, self.merge_threshold);
        refine(&segs, frames, self.refine_threshold, self.refine_min_ms).expect("segments built from these frames")
    }
}
