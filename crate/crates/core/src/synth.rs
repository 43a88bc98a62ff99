//! Synthetic utterances with block-structured features and known segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::boundary::BoundaryTrace;
use crate::linalg::{l2_normalize, FrameMatrix, DEFAULT_FRAME_RATE_HZ};
use crate::segmenter::SegmentSet;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_segments: usize,
    pub mean_dur_frames: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub frame_rate_hz: f64,
    /// Probability that a segment is drawn from `short_dur_frames` instead.
    pub short_prob: f64,
    pub short_dur_frames: (usize, usize),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_segments: 50,
            mean_dur_frames: 10,
            dim: 64,
            noise_sigma: 0.01,
            seed: 0,
            frame_rate_hz: DEFAULT_FRAME_RATE_HZ,
            short_prob: 0.0,
            short_dur_frames: (2, 3),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub frames: FrameMatrix,
    pub segments: SegmentSet,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let u = l2_normalize(&v);
        if u.iter().any(|x| *x != 0.0) {
            return u;
        }
    }
}

/// Durations in `[max(2, mean/2), max(lo, 3 mean / 2)]` whose regular
/// (non-short) part sums to exactly `mean` per segment.
fn durations(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mean = cfg.mean_dur_frames.max(1);
    let lo = (mean / 2).max(2).min(mean);
    let hi = (mean * 3 / 2).max(lo);
    let (slo, shi) = (cfg.short_dur_frames.0.max(1), cfg.short_dur_frames.1.max(cfg.short_dur_frames.0.max(1)));
    let mut short = vec![false; cfg.n_segments];
    let mut d = vec![0; cfg.n_segments];
    for k in 0..cfg.n_segments {
        if cfg.short_prob > 0.0 && rng.gen_bool(cfg.short_prob.min(1.0)) {
            short[k] = true;
            d[k] = rng.gen_range(slo..=shi);
        } else {
            d[k] = rng.gen_range(lo..=hi);
        }
    }
    let regular: Vec<usize> = (0..cfg.n_segments).filter(|&k| !short[k]).collect();
    if regular.is_empty() {
        return d;
    }
    let target = (regular.len() * mean) as i64;
    let mut diff = target - regular.iter().map(|&k| d[k] as i64).sum::<i64>();
    while diff != 0 {
        let k = regular[rng.gen_range(0..regular.len())];
        if diff > 0 && d[k] < hi {
            d[k] += 1;
            diff -= 1;
        } else if diff < 0 && d[k] > lo {
            d[k] -= 1;
            diff += 1;
        }
    }
    d
}

/// Piecewise-constant random unit vectors per segment plus i.i.d. Gaussian noise.
pub fn generate(cfg: &SynthConfig) -> SynthUtterance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.dim.max(1);
    let durs = durations(cfg, &mut rng);
    let total: usize = durs.iter().sum();
    let mut data = Vec::with_capacity(total * dim);
    for &d in &durs {
        let center = unit_vector(&mut rng, dim);
        for _ in 0..d {
            for &c in &center {
                let noise: f64 = if cfg.noise_sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    cfg.noise_sigma * z
                } else {
                    0.0
                };
                data.push(c + noise);
            }
        }
    }
    let frames = FrameMatrix::new(data, dim, cfg.frame_rate_hz, format!("synth{:04}", cfg.seed))
        .expect("generated frames are finite");
    let segments = SegmentSet::from_durations(&durs).expect("durations are positive");
    SynthUtterance { frames, segments }
}

/// Convenience wrapper at 50 Hz with no planted short segments.
pub fn gen_synthetic(
    n_segments: usize,
    mean_dur_frames: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> (FrameMatrix, SegmentSet) {
    let u = generate(&SynthConfig { n_segments, mean_dur_frames, dim, noise_sigma, seed, ..Default::default() });
    (u.frames, u.segments)
}

/// A noisy boundary-probability trace with a clear peak at each segment start.
pub fn synthetic_trace(segs: &SegmentSet, seed: u64) -> BoundaryTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<f64> = (0..segs.total_frames()).map(|_| rng.gen_range(0.0..0.1)).collect();
    for s in segs.iter().skip(1) {
        p[s.start] = rng.gen_range(0.85..1.0);
    }
    BoundaryTrace::new(p).expect("probabilities in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cosine_sim;

    #[test]
    fn noiseless_blocks_are_exactly_constant() {
        let (f, s) = gen_synthetic(8, 10, 16, 0.0, 3);
        for seg in &s {
            for i in seg.start..seg.end {
                assert!((cosine_sim(f.row(seg.start), f.row(i)).unwrap() - 1.0).abs() < 1e-12);
                assert_eq!(f.row(seg.start), f.row(i));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(20, 10, 8, 0.05, 9);
        let b = gen_synthetic(20, 10, 8, 0.05, 9);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_ne!(a.0, gen_synthetic(20, 10, 8, 0.05, 10).0);
    }

    #[test]
    fn total_duration_is_exact() {
        for seed in 0..20 {
            let (f, s) = gen_synthetic(37, 10, 4, 0.01, seed);
            assert_eq!(f.n_frames(), 370);
            assert_eq!(s.len(), 37);
            assert!(s.durations().iter().all(|&d| (5..=15).contains(&d)));
        }
    }

    #[test]
    fn planted_short_segments() {
        let u = generate(&SynthConfig { n_segments: 200, short_prob: 0.3, seed: 1, ..Default::default() });
        let short = u.segments.durations().iter().filter(|&&d| d <= 3).count();
        assert!(short > 30 && short < 100, "{short}");
    }

    #[test]
    fn trace_peaks_at_starts() {
        let (_, s) = gen_synthetic(10, 10, 4, 0.0, 2);
        let t = synthetic_trace(&s, 2);
        let segs = crate::boundary::detect_boundaries(&t, &Default::default());
        assert_eq!(segs, s);
    }
}
