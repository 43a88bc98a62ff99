//! Real-time-factor measurement of the encode/decode pipeline, broken down
//! by stage.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{detect_boundaries, BoundaryTrace, PeakConfig};
use crate::codec::{assemble, decode_expand, pool_segments, TokenStream, WSegPETemplate};
use crate::error::{Error, Result};
use crate::linalg::FrameMatrix;
use crate::segmenter::{SegmentSet, SegmenterConfig};

/// How segments are obtained during encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentationMode {
    Greedy(SegmenterConfig),
    Peaks(PeakConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: SegmentationMode,
    pub template: WSegPETemplate,
    pub warmup_runs: usize,
    pub measured_runs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: SegmentationMode::Greedy(SegmenterConfig::default()),
            template: WSegPETemplate::sinusoidal(16, 0),
            warmup_runs: 3,
            measured_runs: 10,
        }
    }
}

/// One utterance of pipeline input. `trace` is required in peak mode.
#[derive(Debug, Clone)]
pub struct BenchInput {
    pub content: FrameMatrix,
    pub acoustic: FrameMatrix,
    pub trace: Option<BoundaryTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub content: f64,
    pub segmentation: f64,
    pub acoustic: f64,
    pub total_encode: f64,
    pub decode: f64,
    pub e2e: f64,
}

impl StageTimes {
    fn scaled(&self, k: f64) -> Self {
        Self {
            content: self.content * k,
            segmentation: self.segmentation * k,
            acoustic: self.acoustic * k,
            total_encode: self.total_encode * k,
            decode: self.decode * k,
            e2e: self.e2e * k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtfReport {
    pub audio_seconds: f64,
    pub batch_size: usize,
    pub measured_runs: usize,
    pub stage_seconds: StageTimes,
    pub rtf: StageTimes,
}

fn segment_one(input: &BenchInput, mode: &SegmentationMode) -> Result<SegmentSet> {
    match mode {
        SegmentationMode::Greedy(cfg) => Ok(cfg.segment(&input.content)),
        SegmentationMode::Peaks(cfg) => {
            let trace = input
                .trace
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("peak mode needs a boundary trace per input".into()))?;
            if trace.len() != input.content.n_frames() {
                return Err(Error::FrameCountMismatch { expected: input.content.n_frames(), actual: trace.len() });
            }
            Ok(detect_boundaries(trace, cfg))
        }
    }
}

/// Maps `f` over a batch, in parallel when the batch holds more than one item.
fn run_batch<T, U, F>(items: &[T], f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if items.len() > 1 {
        items.par_iter().map(&f).collect()
    } else {
        items.iter().map(&f).collect()
    }
}

/// Times every stage once over all inputs.
fn time_once(inputs: &[BenchInput], cfg: &PipelineConfig, batch_size: usize) -> Result<StageTimes> {
    let mut t = StageTimes::default();
    for batch in inputs.chunks(batch_size) {
        let start = Instant::now();
        let segs = run_batch(batch, |x| segment_one(x, &cfg.mode))?;
        t.segmentation += start.elapsed().as_secs_f64();

        let pairs: Vec<(&BenchInput, &SegmentSet)> = batch.iter().zip(&segs).collect();
        let start = Instant::now();
        let content = run_batch(&pairs, |(x, s)| pool_segments(&x.content, s))?;
        t.content += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let acoustic = run_batch(&pairs, |(x, s)| pool_segments(&x.acoustic, s))?;
        let streams: Vec<TokenStream> = pairs
            .iter()
            .zip(content.into_iter().zip(acoustic))
            .map(|((x, s), (c, a))| {
                assemble(s, c, a, x.content.dim(), x.acoustic.dim(), x.content.frame_rate_hz(), x.content.utt_id())
            })
            .collect::<Result<_>>()?;
        t.acoustic += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let decoded = run_batch(&streams, |s| decode_expand(s, &cfg.template))?;
        t.decode += start.elapsed().as_secs_f64();
        std::hint::black_box(decoded);
    }
    t.total_encode = t.content + t.segmentation + t.acoustic;
    t.e2e = t.total_encode + t.decode;
    Ok(t)
}

/// Runs warmups, then reports the measured run with the median end-to-end
/// time. Reporting a single run keeps `e2e = total_encode + decode` exact.
pub fn bench_rtf(cfg: &PipelineConfig, inputs: &[BenchInput], batch_size: usize) -> Result<RtfReport> {
    if inputs.is_empty() {
        return Err(Error::Empty("benchmark input set"));
    }
    if cfg.measured_runs == 0 {
        return Err(Error::InvalidArgument("at least one measured run required".into()));
    }
    let batch_size = batch_size.max(1);
    for input in inputs {
        if input.content.n_frames() != input.acoustic.n_frames() {
            return Err(Error::FrameCountMismatch {
                expected: input.content.n_frames(),
                actual: input.acoustic.n_frames(),
            });
        }
    }
    for _ in 0..cfg.warmup_runs {
        time_once(inputs, cfg, batch_size)?;
    }
    let mut runs = (0..cfg.measured_runs).map(|_| time_once(inputs, cfg, batch_size)).collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| a.e2e.total_cmp(&b.e2e));
    let median = runs[runs.len() / 2];
    let audio_seconds: f64 = inputs.iter().map(|x| x.content.duration_s()).sum();
    Ok(RtfReport {
        audio_seconds,
        batch_size,
        measured_runs: cfg.measured_runs,
        stage_seconds: median,
        rtf: median.scaled(1.0 / audio_seconds),
    })
}
