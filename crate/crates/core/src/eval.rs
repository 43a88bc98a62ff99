//! Boundary detection scoring: hit matching within a time tolerance,
//! precision / recall / F1, R-value and corpus aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE_S: f64 = 0.05;

/// Slack added to the tolerance to absorb rounding in frame-to-second conversion.
const TOLERANCE_SLACK_S: f64 = 1e-9;

/// Reference boundary times for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAnnotation {
    pub utt_id: String,
    pub boundaries_s: Vec<f64>,
}

impl BoundaryAnnotation {
    pub fn new(utt_id: impl Into<String>, boundaries_s: Vec<f64>) -> Result<Self> {
        let a = Self { utt_id: utt_id.into(), boundaries_s };
        a.validate()?;
        Ok(a)
    }

    /// Times must be finite, non-negative, strictly increasing.
    pub fn validate(&self) -> Result<()> {
        if self.boundaries_s.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument(format!("{}: boundary times must be finite and >= 0", self.utt_id)));
        }
        if self.boundaries_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("{}: boundary times must be strictly increasing", self.utt_id)));
        }
        Ok(())
    }

    /// Boundary times with the utterance-initial boundary (t = 0) removed.
    pub fn without_initial(&self) -> Vec<f64> {
        self.boundaries_s.iter().copied().filter(|t| *t > TOLERANCE_SLACK_S).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub n_hit: usize,
    pub n_ref: usize,
    pub n_hyp: usize,
}

/// Greedy one-to-one matching in time order: each reference boundary takes the
/// nearest unmatched hypothesis within `tolerance_s` (ties go to the earlier one).
pub fn match_boundaries(ref_s: &[f64], hyp_s: &[f64], tolerance_s: f64) -> MatchCounts {
    let tol = tolerance_s + TOLERANCE_SLACK_S;
    let mut used = vec![false; hyp_s.len()];
    let mut n_hit = 0;
    // hypotheses before `lo` are too early for this and all later references
    let mut lo = 0;
    for &r in ref_s {
        while lo < hyp_s.len() && hyp_s[lo] < r - tol {
            lo += 1;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &h) in hyp_s.iter().enumerate().skip(lo) {
            if h > r + tol {
                break;
            }
            if used[j] {
                continue;
            }
            let d = (h - r).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            n_hit += 1;
        }
    }
    MatchCounts { n_hit, n_ref: ref_s.len(), n_hyp: hyp_s.len() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Precision, recall and their harmonic mean; zero denominators give 0.
pub fn prf(n_hit: usize, n_ref: usize, n_hyp: usize) -> Prf {
    let precision = ratio(n_hit as f64, n_hyp as f64);
    let recall = ratio(n_hit as f64, n_ref as f64);
    Prf { precision, recall, f1: f1_score(precision, recall) }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

/// Segmentation R-value from precision and recall (fractions).
///
/// With hit rate `HR = 100 Re` and over-segmentation `OS = 100 (Re / Pr - 1)`:
/// `R = 1 - (sqrt((100 - HR)^2 + OS^2) + |(HR - OS - 100) / sqrt 2|) / 200`,
/// floored at 0.
pub fn r_value(precision: f64, recall: f64) -> Result<f64> {
    if precision.is_nan() || precision <= 0.0 {
        return Err(Error::InvalidArgument("R-value is undefined for zero precision".into()));
    }
    let hr = 100.0 * recall;
    let os = 100.0 * (recall / precision - 1.0);
    Ok(r_from_hr_os(hr, os))
}

fn r_from_hr_os(hr: f64, os: f64) -> f64 {
    let r1 = ((100.0 - hr).powi(2) + os.powi(2)).sqrt();
    let r2 = (-os + hr - 100.0) / std::f64::consts::SQRT_2;
    (1.0 - (r1.abs() + r2.abs()) / 200.0).max(0.0)
}

/// R-value from raw counts. Agrees with [`r_value`] whenever there is at least
/// one hit, and stays defined when there are none. Returns 0 without references.
pub fn r_value_from_counts(c: &MatchCounts) -> f64 {
    if c.n_ref == 0 {
        return 0.0;
    }
    let hr = 100.0 * c.n_hit as f64 / c.n_ref as f64;
    let os = 100.0 * (c.n_hyp as f64 / c.n_ref as f64 - 1.0);
    r_from_hr_os(hr, os)
}

/// Scores for one utterance or an aggregate. Metric fields are fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utt_id: Option<String>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub r_value: f64,
    pub n_ref: usize,
    pub n_hyp: usize,
    pub n_hit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokfreq_hz: Option<f64>,
}

impl EvalReport {
    pub fn from_counts(c: MatchCounts) -> Self {
        let p = prf(c.n_hit, c.n_ref, c.n_hyp);
        Self {
            utt_id: None,
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
            r_value: r_value_from_counts(&c),
            n_ref: c.n_ref,
            n_hyp: c.n_hyp,
            n_hit: c.n_hit,
            n_tokens: None,
            audio_seconds: None,
            tokfreq_hz: None,
        }
    }

    pub fn with_utt_id(mut self, utt_id: impl Into<String>) -> Self {
        self.utt_id = Some(utt_id.into());
        self
    }

    /// Attaches token statistics.
    pub fn with_tokens(mut self, n_tokens: u64, audio_seconds: f64) -> Self {
        self.n_tokens = Some(n_tokens);
        self.audio_seconds = Some(audio_seconds);
        self.tokfreq_hz = (audio_seconds > 0.0).then(|| n_tokens as f64 / audio_seconds);
        self
    }

    pub fn counts(&self) -> MatchCounts {
        MatchCounts { n_hit: self.n_hit, n_ref: self.n_ref, n_hyp: self.n_hyp }
    }
}

/// Scores one utterance. The boundary at t = 0 is dropped from both sides
/// unless `include_initial` is set.
pub fn evaluate(
    reference: &BoundaryAnnotation,
    hypothesis: &BoundaryAnnotation,
    tolerance_s: f64,
    include_initial: bool,
) -> EvalReport {
    let (r, h) = if include_initial {
        (reference.boundaries_s.clone(), hypothesis.boundaries_s.clone())
    } else {
        (reference.without_initial(), hypothesis.without_initial())
    };
    EvalReport::from_counts(match_boundaries(&r, &h, tolerance_s)).with_utt_id(reference.utt_id.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Metrics recomputed from summed counts.
    #[default]
    Pooled,
    /// Unweighted mean of per-utterance metrics.
    Macro,
}

pub fn aggregate(reports: &[EvalReport], mode: Aggregation) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    let counts = reports.iter().fold(MatchCounts::default(), |acc, r| MatchCounts {
        n_hit: acc.n_hit + r.n_hit,
        n_ref: acc.n_ref + r.n_ref,
        n_hyp: acc.n_hyp + r.n_hyp,
    });
    let mut out = match mode {
        Aggregation::Pooled => EvalReport::from_counts(counts),
        Aggregation::Macro => {
            let n = reports.len() as f64;
            let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
            EvalReport {
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f1: mean(|r| r.f1),
                r_value: mean(|r| r.r_value),
                ..EvalReport::from_counts(counts)
            }
        }
    };
    if reports.len() == 1 {
        out.utt_id = reports[0].utt_id.clone();
    }
    let tokens: Option<u64> = reports.iter().map(|r| r.n_tokens).sum();
    let seconds: Option<f64> = reports.iter().map(|r| r.audio_seconds).sum();
    if let (Some(n), Some(s)) = (tokens, seconds) {
        out = out.with_tokens(n, s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Maximum bipartite matching (Kuhn's augmenting paths).
    fn optimal_hits(r: &[f64], h: &[f64], tol: f64) -> usize {
        fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    if owner[j].is_none_or(|o| augment(o, adj, seen, owner)) {
                        owner[j] = Some(i);
                        return true;
                    }
                }
            }
            false
        }
        let adj: Vec<Vec<usize>> =
            r.iter().map(|a| (0..h.len()).filter(|&j| (h[j] - a).abs() <= tol + 1e-9).collect()).collect();
        let mut owner = vec![None; h.len()];
        (0..r.len()).filter(|&i| augment(i, &adj, &mut vec![false; h.len()], &mut owner)).count()
    }

    #[test]
    fn identical_lists_all_hit() {
        let r = [0.2, 0.5, 0.9];
        assert_eq!(match_boundaries(&r, &r, 0.05), MatchCounts { n_hit: 3, n_ref: 3, n_hyp: 3 });
    }

    #[test]
    fn shifted_within_tolerance() {
        let r = [0.2, 0.5, 0.9, 1.3];
        let h: Vec<f64> = r.iter().map(|t| t + 0.04).collect();
        assert_eq!(match_boundaries(&r, &h, 0.05).n_hit, 4);
        let far: Vec<f64> = r.iter().map(|t| t + 0.06).collect();
        assert_eq!(match_boundaries(&r, &far, 0.05).n_hit, 0);
    }

    #[test]
    fn one_to_one_and_tie_break() {
        // two references share one hypothesis
        assert_eq!(match_boundaries(&[0.50, 0.54], &[0.52], 0.05).n_hit, 1);
        // equidistant hypotheses: the earlier one is taken, the later stays free
        assert_eq!(match_boundaries(&[0.50, 0.56], &[0.48, 0.52], 0.05).n_hit, 2);
        assert_eq!(match_boundaries(&[], &[0.1], 0.05), MatchCounts { n_hit: 0, n_ref: 0, n_hyp: 1 });
    }

    #[test]
    fn greedy_equals_optimal_on_separated_references() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..500 {
            let n = rng.gen_range(0..=12);
            let mut r = Vec::new();
            let mut t = rng.gen_range(0.0..0.2);
            for _ in 0..n {
                t += rng.gen_range(0.101..0.4);
                r.push(t);
            }
            let mut h = Vec::new();
            for t in &r {
                if rng.gen_bool(0.8) {
                    h.push(t + rng.gen_range(-0.05..=0.05));
                }
            }
            for _ in 0..rng.gen_range(0..4) {
                h.push(rng.gen_range(0.0..t + 0.5));
            }
            h.sort_by(f64::total_cmp);
            h.dedup();
            let got = match_boundaries(&r, &h, 0.05).n_hit;
            assert_eq!(got, optimal_hits(&r, &h, 0.05), "ref {r:?} hyp {h:?}");
        }
    }

    #[test]
    fn prf_examples() {
        assert!((f1_score(0.766, 0.683) * 100.0 - 72.2).abs() < 0.05);
        assert!((f1_score(0.662, 0.835) * 100.0 - 73.9).abs() < 0.05);
        let p = prf(5, 5, 5);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let z = prf(0, 0, 0);
        assert_eq!((z.precision, z.recall, z.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn r_value_examples() {
        assert!((r_value(0.766, 0.683).unwrap() - 0.759).abs() < 0.002);
        assert!((r_value(0.662, 0.835).unwrap() - 0.695).abs() < 0.002);
        assert!((r_value(1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(r_value(0.0, 0.5).is_err());
    }

    #[test]
    fn r_value_counts_agree_with_fractions() {
        let c = MatchCounts { n_hit: 37, n_ref: 50, n_hyp: 61 };
        let p = prf(c.n_hit, c.n_ref, c.n_hyp);
        assert!((r_value(p.precision, p.recall).unwrap() - r_value_from_counts(&c)).abs() < 1e-12);
    }

    #[test]
    fn initial_boundary_excluded_by_default() {
        let r = BoundaryAnnotation::new("u", vec![0.0, 0.3]).unwrap();
        let h = BoundaryAnnotation::new("u", vec![0.0, 0.6]).unwrap();
        assert_eq!(evaluate(&r, &h, 0.05, false).counts(), MatchCounts { n_hit: 0, n_ref: 1, n_hyp: 1 });
        assert_eq!(evaluate(&r, &h, 0.05, true).counts(), MatchCounts { n_hit: 1, n_ref: 2, n_hyp: 2 });
    }

    #[test]
    fn annotation_validation() {
        assert!(BoundaryAnnotation::new("u", vec![0.3, 0.3]).is_err());
        assert!(BoundaryAnnotation::new("u", vec![-0.1]).is_err());
        assert!(BoundaryAnnotation::new("u", vec![]).is_ok());
    }

    fn report(hit: usize, r: usize, h: usize) -> EvalReport {
        EvalReport::from_counts(MatchCounts { n_hit: hit, n_ref: r, n_hyp: h })
    }

    #[test]
    fn aggregate_cases() {
        assert!(aggregate(&[], Aggregation::Pooled).is_err());
        let one = report(3, 4, 5).with_utt_id("a").with_tokens(10, 2.0);
        assert_eq!(aggregate(std::slice::from_ref(&one), Aggregation::Pooled).unwrap(), one);
        let two = aggregate(&[report(3, 4, 5), report(3, 4, 5)], Aggregation::Pooled).unwrap();
        assert_eq!((two.precision, two.recall, two.f1), (0.6, 0.75, report(3, 4, 5).f1));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rs: Vec<EvalReport> = (0..5)
            .map(|_| {
                let r = rng.gen_range(1..30);
                let h = rng.gen_range(1..30);
                report(rng.gen_range(0..=r.min(h)), r, h).with_tokens(rng.gen_range(1..100), rng.gen_range(1.0..20.0))
            })
            .collect();
        let pooled = aggregate(&rs, Aggregation::Pooled).unwrap();
        let (mut hit, mut r, mut h, mut tok, mut sec) = (0, 0, 0, 0, 0.0);
        for x in &rs {
            hit += x.n_hit;
            r += x.n_ref;
            h += x.n_hyp;
            tok += x.n_tokens.unwrap();
            sec += x.audio_seconds.unwrap();
        }
        assert_eq!((pooled.n_hit, pooled.n_ref, pooled.n_hyp), (hit, r, h));
        assert!((pooled.precision - hit as f64 / h as f64).abs() < 1e-12);
        assert!((pooled.tokfreq_hz.unwrap() - tok as f64 / sec).abs() < 1e-12);
        let macro_ = aggregate(&rs, Aggregation::Macro).unwrap();
        let mean_p = rs.iter().map(|x| x.precision).sum::<f64>() / 5.0;
        assert!((macro_.precision - mean_p).abs() < 1e-12);
    }

    fn sorted_times(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 0..max_len).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        })
    }

    proptest! {
        #[test]
        fn metric_ranges(r in sorted_times(30), h in sorted_times(30)) {
            let rep = EvalReport::from_counts(match_boundaries(&r, &h, 0.05));
            prop_assert!(rep.n_hit <= rep.n_ref.min(rep.n_hyp));
            for v in [rep.precision, rep.recall, rep.f1, rep.r_value] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if rep.precision > 0.0 && rep.recall > 0.0 {
                prop_assert!(rep.f1 >= rep.precision.min(rep.recall) - 1e-12);
                prop_assert!(rep.f1 <= rep.precision.max(rep.recall) + 1e-12);
            }
        }

        #[test]
        fn f1_equals_pr_when_equal(p in 0.01f64..1.0) {
            prop_assert!((f1_score(p, p) - p).abs() < 1e-12);
        }

        #[test]
        fn shift_within_tolerance_keeps_hits(n in 1usize..20, delta in -0.05f64..0.05, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = 0.1;
            let r: Vec<f64> = (0..n).map(|_| { t += rng.gen_range(0.11..0.5); t }).collect();
            let h: Vec<f64> = r.iter().map(|x| x + delta).collect();
            prop_assert_eq!(match_boundaries(&r, &h, 0.05).n_hit, n);
        }

        #[test]
        fn spurious_and_deleted_hypotheses(r in sorted_times(20), h in sorted_times(20), extra in 0.0f64..10.0) {
            let base = prf(match_boundaries(&r, &h, 0.05).n_hit, r.len(), h.len());
            if !h.contains(&extra) {
                let mut more = h.clone();
                more.push(extra);
                more.sort_by(f64::total_cmp);
                let c = match_boundaries(&r, &more, 0.05);
                let added = prf(c.n_hit, c.n_ref, c.n_hyp);
                // only meaningful when the extra boundary cannot steal a true match
                if c.n_hit == match_boundaries(&r, &h, 0.05).n_hit {
                    prop_assert!(added.precision <= base.precision + 1e-12);
                }
            }
            if !h.is_empty() {
                let fewer = &h[1..];
                let c = match_boundaries(&r, fewer, 0.05);
                prop_assert!(prf(c.n_hit, c.n_ref, c.n_hyp).recall <= base.recall + 1e-12);
            }
        }
    }
}
