//! Distillation-target math: EMA teacher tracking, segment-averaged targets,
//! frame-wise MSE and the merge-threshold curriculum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::FrameMatrix;
use crate::segmenter::SegmentSet;

pub const DEFAULT_EMA_DECAY: f64 = 0.999;

/// Teacher parameters tracked as an exponential moving average of the student.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    teacher: Vec<f64>,
    decay: f64,
}

impl EmaState {
    pub fn new(teacher: Vec<f64>, decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidArgument(format!("EMA decay must be in (0, 1), got {decay}")));
        }
        if let Some(i) = teacher.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { teacher, decay })
    }

    pub fn teacher(&self) -> &[f64] {
        &self.teacher
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `teacher <- decay * teacher + (1 - decay) * student`
    pub fn update(&mut self, student: &[f64]) -> Result<()> {
        if student.len() != self.teacher.len() {
            return Err(Error::DimensionMismatch { expected: self.teacher.len(), actual: student.len() });
        }
        let d = self.decay;
        for (t, s) in self.teacher.iter_mut().zip(student) {
            *t = d * *t + (1.0 - d) * s;
        }
        Ok(())
    }
}

/// Functional form of [`EmaState::update`].
pub fn ema_update(state: &EmaState, student: &[f64]) -> Result<EmaState> {
    let mut next = state.clone();
    next.update(student)?;
    Ok(next)
}

/// Replaces every frame by the mean of its segment.
pub fn segment_average_targets(teacher: &FrameMatrix, segs: &SegmentSet) -> Result<FrameMatrix> {
    segs.check_frames(teacher)?;
    let d = teacher.dim();
    let mut data = Vec::with_capacity(teacher.as_slice().len());
    let mut mean = vec![0.0; d];
    for s in segs {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for i in s.start..s.end {
            for (m, x) in mean.iter_mut().zip(teacher.row(i)) {
                *m += x;
            }
        }
        let n = s.duration_frames() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        for _ in s.start..s.end {
            data.extend_from_slice(&mean);
        }
    }
    FrameMatrix::new(data, d, teacher.frame_rate_hz(), teacher.utt_id())
}

/// Mean squared error over all `T x D` entries.
pub fn framewise_mse(student: &FrameMatrix, target: &FrameMatrix) -> Result<f64> {
    if student.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), actual: student.dim() });
    }
    if student.n_frames() != target.n_frames() {
        return Err(Error::FrameCountMismatch { expected: target.n_frames(), actual: student.n_frames() });
    }
    if student.is_empty() {
        return Err(Error::Empty("frame matrix"));
    }
    let a = student.as_slice();
    let b = target.as_slice();
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Which target the student regresses in a training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Frame-wise teacher features.
    FrameWise,
    /// Segment-averaged teacher features from greedy segmentation with refinement.
    SegmentAveraged,
    /// Segment-averaged features with segments from the boundary detector.
    DetectorSegments,
}

/// Curriculum settings for one training stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub stage: u8,
    pub merge_threshold_range: (f64, f64),
    pub refine_threshold: f64,
}

impl StageConfig {
    /// Preset for stages 2 and 3; stage 4 keeps the stage-3 thresholds for
    /// the teacher segments its boundary detector learns from.
    pub fn curriculum(stage: u8) -> Result<Self> {
        match stage {
            2 => Ok(Self { stage, merge_threshold_range: (0.5, 0.7), refine_threshold: 0.5 }),
            3 | 4 => Ok(Self { stage, merge_threshold_range: (0.7, 0.9), refine_threshold: 0.7 }),
            1 => Err(Error::InvalidArgument("stage 1 uses frame-wise targets and no segmentation".into())),
            _ => Err(Error::InvalidArgument(format!("stage must be 1-4, got {stage}"))),
        }
    }

    pub fn target_kind(stage: u8) -> Result<TargetKind> {
        match stage {
            1 => Ok(TargetKind::FrameWise),
            2 | 3 => Ok(TargetKind::SegmentAveraged),
            4 => Ok(TargetKind::DetectorSegments),
            _ => Err(Error::InvalidArgument(format!("stage must be 1-4, got {stage}"))),
        }
    }
}

/// Uniform draw from the stage's merge-threshold range, deterministic per seed.
pub fn sample_merge_threshold(cfg: &StageConfig, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_merge_threshold_with(cfg, &mut rng)
}

pub fn sample_merge_threshold_with<R: Rng>(cfg: &StageConfig, rng: &mut R) -> Result<f64> {
    let (lo, hi) = cfg.merge_threshold_range;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidArgument(format!("invalid merge threshold range [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(lo);
    }
    Ok(rng.gen_range(lo..=hi))
}
