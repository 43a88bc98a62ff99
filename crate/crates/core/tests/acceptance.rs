//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use syltok::bench::{bench_rtf, BenchInput, PipelineConfig, SegmentationMode};
use syltok::boundary::{detect_boundaries, BoundaryTrace, PeakConfig};
use syltok::codec::{decode_expand, encode, token_frequency, WSegPETemplate};
use syltok::distill::{framewise_mse, segment_average_targets, EmaState};
use syltok::eval::{aggregate, f1_score, match_boundaries, r_value, Aggregation, EvalReport};
use syltok::linalg::FrameMatrix;
use syltok::segmenter::{filter_min_duration, greedy_segment, oracle_segment, SegmentSet, SegmenterConfig};
use syltok::synth::{gen_synthetic, generate, SynthConfig};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f1_formula() -> Outcome {
    let mut detail = Vec::new();
    for (pr, re, want) in [(76.6, 68.3, 72.2), (66.2, 83.5, 73.9)] {
        let got = 100.0 * f1_score(pr / 100.0, re / 100.0);
        ensure((got - want).abs() <= 0.05, || format!("F1({pr}, {re}) = {got:.4}, want {want} +- 0.05"))?;
        detail.push(format!("{got:.3}"));
    }
    Ok(format!("F1 = {}", detail.join(", ")))
}

fn r_value_formula() -> Outcome {
    let mut detail = Vec::new();
    for (pr, re, want) in [(76.6, 68.3, 75.9), (66.2, 83.5, 69.5)] {
        let got = 100.0 * r_value(pr / 100.0, re / 100.0).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 0.2, || format!("R({pr}, {re}) = {got:.4}, want {want} +- 0.2"))?;
        detail.push(format!("{got:.3}"));
    }
    Ok(format!("R = {}", detail.join(", ")))
}

/// Random sequences: block-structured, smoothly drifting, or i.i.d.
fn random_sequence(rng: &mut ChaCha8Rng) -> FrameMatrix {
    let t = rng.gen_range(1..=200);
    let d = rng.gen_range(1..=16);
    let mut data = Vec::with_capacity(t * d);
    match rng.gen_range(0..3) {
        0 => {
            let sigma = [0.0, 0.05, 0.3][rng.gen_range(0..3)];
            let mut center: Vec<f64> = Vec::new();
            for i in 0..t {
                if i == 0 || rng.gen_bool(0.12) {
                    center = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                }
                for c in &center {
                    let z: f64 = StandardNormal.sample(rng);
                    data.push(c + sigma * z);
                }
            }
        }
        1 => {
            let mut x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            for _ in 0..t {
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += 0.3 * z;
                }
                data.extend_from_slice(&x);
            }
        }
        _ => {
            for _ in 0..t * d {
                data.push(StandardNormal.sample(rng));
            }
        }
    }
    FrameMatrix::new(data, d, 50.0, "r").unwrap()
}

fn segmentation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut total_segments = 0;
    for case in 0..200 {
        let f = random_sequence(&mut rng);
        let thr = rng.gen_range(0.0..1.0);
        let fast = greedy_segment(&f, thr);
        let slow = oracle_segment(&f, thr);
        ensure(fast == slow, || {
            format!(
                "case {case} (T={}, D={}, thr={thr:.3}): {:?} vs {:?}",
                f.n_frames(),
                f.dim(),
                fast.starts(),
                slow.starts()
            )
        })?;
        total_segments += fast.len();
    }
    Ok(format!("200 sequences equal, {total_segments} segments total"))
}

fn codec_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.gen_range(1..40);
        let (content, segs) = gen_synthetic(n, rng.gen_range(1..12), rng.gen_range(1..24), 0.0, 1000 + case);
        // acoustic features share the content segmentation
        let da = rng.gen_range(1..8);
        let mut adata = Vec::new();
        for s in &segs {
            let v: Vec<f64> = (0..da).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for _ in s.start..s.end {
                adata.extend_from_slice(&v);
            }
        }
        let acoustic = FrameMatrix::new(adata, da, 50.0, "a").unwrap();
        let stream = encode(&content, &acoustic, &segs).map_err(|e| e.to_string())?;
        let total: u64 = stream.tokens().iter().map(|t| u64::from(t.duration_frames)).sum();
        ensure(total == content.n_frames() as u64, || {
            format!("case {case}: durations sum {total} != {}", content.n_frames())
        })?;
        let template = WSegPETemplate::sinusoidal(rng.gen_range(0..10), case);
        let dec = decode_expand(&stream, &template).map_err(|e| e.to_string())?;
        ensure(dec.n_frames() == content.n_frames(), || format!("case {case}: decoded length differs"))?;
        let (dc, da) = (content.dim(), acoustic.dim());
        for i in 0..content.n_frames() {
            let row = dec.row(i);
            for (a, b) in row[..dc].iter().zip(content.row(i)).chain(row[dc..dc + da].iter().zip(acoustic.row(i))) {
                worst = worst.max((a - b).abs());
            }
        }
        ensure(worst <= 1e-6, || format!("case {case}: max deviation {worst:e}"))?;

        // any segmentation, including a noisy one, partitions all frames
        let (noisy, _) = gen_synthetic(n, 6, 8, 0.3, 9000 + case);
        let segs = SegmenterConfig::default().segment(&noisy);
        let stream = encode(&noisy, &noisy, &segs).map_err(|e| e.to_string())?;
        ensure(stream.total_frames() == noisy.n_frames() as u64, || {
            format!("case {case}: noisy durations do not sum to T")
        })?;
    }
    Ok(format!("100 fixtures, max deviation {worst:.1e}"))
}

/// Leftmost index of every strict local-maximum plateau not touching an edge.
fn oracle_peaks(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut out = Vec::new();
    let mut a = 0;
    while a < n {
        let mut b = a;
        while b + 1 < n && x[b + 1] == x[a] {
            b += 1;
        }
        if a > 0 && b + 1 < n && x[a - 1] < x[a] && x[b + 1] < x[a] {
            out.push(a);
        }
        a = b + 1;
    }
    out
}

/// Key col = highest of the lowest points on paths to any strictly higher
/// sample; virtual edges count as higher ground.
fn oracle_prominence(x: &[f64], i: usize) -> f64 {
    let n = x.len() as isize;
    let h = x[i];
    let mut key = f64::NEG_INFINITY;
    for j in -1..=n {
        let higher = j < 0 || j >= n || x[j as usize] > h;
        if !higher || j == i as isize {
            continue;
        }
        let (lo, hi) = if j < i as isize { (j + 1, i as isize) } else { (i as isize, j - 1) };
        let m = (lo..=hi).map(|k| x[k as usize]).fold(f64::INFINITY, f64::min);
        key = key.max(m);
    }
    h - key
}

fn random_trace(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = rng.gen_range(1..=500);
    let quantized = rng.gen_bool(0.5);
    (0..t)
        .map(|_| {
            let v: f64 = if rng.gen_bool(0.1) { rng.gen_range(0.5..1.0) } else { rng.gen_range(0.0..0.4) };
            if quantized {
                (v * 20.0).round() / 20.0
            } else {
                v
            }
        })
        .collect()
}

fn peak_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = PeakConfig::default();
    let mut n_boundaries = 0;
    for case in 0..100 {
        let x = random_trace(&mut rng);
        let mut starts = vec![0];
        starts.extend(oracle_peaks(&x).into_iter().filter(|&i| {
            let (h, p) = (x[i], oracle_prominence(&x, i));
            h >= cfg.min_peak && (p > cfg.min_prominence || h > cfg.hard_prob)
        }));
        let got = detect_boundaries(&BoundaryTrace::new(x.clone()).unwrap(), &cfg).starts();
        ensure(got == starts, || format!("case {case} (T={}): {got:?} vs {starts:?}", x.len()))?;
        n_boundaries += got.len() - 1;
    }
    Ok(format!("100 traces equal, {n_boundaries} boundaries total"))
}

fn ema_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t0: Vec<f64> = (0..32).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let s: Vec<f64> = (0..32).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut ema = EmaState::new(t0.clone(), 0.999).map_err(|e| e.to_string())?;
    for _ in 0..1000 {
        ema.update(&s).map_err(|e| e.to_string())?;
    }
    let k = 0.999f64.powi(1000);
    let mut worst: f64 = 0.0;
    for ((got, t), s) in ema.teacher().iter().zip(&t0).zip(&s) {
        let want = s + (t - s) * k;
        worst = worst.max((got - want).abs() / want.abs().max(f64::MIN_POSITIVE));
    }
    ensure(worst <= 1e-9, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.1e}"))
}

fn distillation_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (teacher, segs) = gen_synthetic(30, 8, 12, 0.2, 17);
    let target = segment_average_targets(&teacher, &segs).map_err(|e| e.to_string())?;
    let best = framewise_mse(&target, &teacher).map_err(|e| e.to_string())?;
    let dim = teacher.dim();
    let mut min_gain = f64::INFINITY;
    for trial in 0..1000 {
        let mut cand = target.as_slice().to_vec();
        // shift one or more segment constants by a random nonzero offset
        for _ in 0..rng.gen_range(1..4) {
            let s = segs.segments()[rng.gen_range(0..segs.len())];
            let delta: Vec<f64> =
                (0..dim).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(-rng.gen_range(0..4))).collect();
            for i in s.start..s.end {
                for (c, d) in cand[i * dim..(i + 1) * dim].iter_mut().zip(&delta) {
                    *c += d;
                }
            }
        }
        let cand = FrameMatrix::new(cand, dim, teacher.frame_rate_hz(), "c").unwrap();
        let loss = framewise_mse(&cand, &teacher).map_err(|e| e.to_string())?;
        ensure(loss >= best, || format!("trial {trial}: loss {loss} < {best}"))?;
        min_gain = min_gain.min(loss - best);
    }
    Ok(format!("baseline {best:.4e}, smallest increase {min_gain:.2e}"))
}

fn synthetic_end_to_end() -> Outcome {
    let seg_cfg = SegmenterConfig::default();
    let mut reports = Vec::new();
    for seed in 0..10 {
        // 10 frames per segment at 50 Hz = 5 segments per second
        let (f, truth) = gen_synthetic(100, 10, 64, 0.01, seed);
        let segs = seg_cfg.segment(&f);
        let stream = encode(&f, &f, &segs).map_err(|e| e.to_string())?;
        let rate = f.frame_rate_hz();
        let c = match_boundaries(&truth.boundary_times_s(rate, false), &segs.boundary_times_s(rate, false), 0.05);
        reports.push(EvalReport::from_counts(c).with_tokens(stream.len() as u64, stream.duration_s()));
        let hz = token_frequency(&stream).map_err(|e| e.to_string())?;
        ensure((hz - 5.0).abs() <= 0.1, || format!("seed {seed}: {hz:.4} Hz"))?;
    }
    let total = aggregate(&reports, Aggregation::Pooled).map_err(|e| e.to_string())?;
    let hz = total.tokfreq_hz.unwrap_or(f64::NAN);
    ensure((hz - 5.0).abs() <= 0.1, || format!("corpus token frequency {hz:.4} Hz"))?;
    ensure(total.f1 > 0.99, || format!("boundary F1 {:.4}", total.f1))?;
    Ok(format!("{hz:.3} Hz, F1 {:.4}", total.f1))
}

fn scaling_input(t: usize) -> BenchInput {
    let (f, _) = gen_synthetic(t / 10, 10, 32, 0.01, 99);
    BenchInput { acoustic: f.clone(), content: f, trace: None }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn linear_scaling() -> Outcome {
    let cfg = PipelineConfig {
        mode: SegmentationMode::Greedy(SegmenterConfig::default()),
        warmup_runs: 1,
        measured_runs: 3,
        ..Default::default()
    };
    let inputs = [[scaling_input(100_000)], [scaling_input(200_000)]];
    // interleaved rounds so that machine-load drift hits both sizes alike
    let mut times = [Vec::new(), Vec::new()];
    for _ in 0..3 {
        for (k, input) in inputs.iter().enumerate() {
            let r = bench_rtf(&cfg, input, 1).map_err(|e| e.to_string())?;
            let s = r.stage_seconds;
            ensure((s.e2e - (s.total_encode + s.decode)).abs() <= 0.01 * s.e2e, || {
                "stage accounting off by > 1%".into()
            })?;
            times[k].push(s.total_encode);
        }
    }
    let [base, double] = times.map(median);
    let ratio = double / base;
    ensure(ratio <= 3.0, || format!("encode time ratio at 2T is {ratio:.2}"))?;
    // RTF is time per audio second, so linear time keeps it flat
    Ok(format!("encode {base:.3}s at T, {double:.3}s at 2T, ratio {ratio:.2} (RTF ratio {:.2})", ratio / 2.0))
}

fn min_duration_sweep() -> Outcome {
    let sweep: Vec<f64> = (0..=12).map(|k| 10.0 * k as f64).chain([140.0, 160.0, 200.0]).collect();
    let mut detail = String::new();
    for seed in 0..8 {
        let u =
            generate(&SynthConfig { n_segments: 300, short_prob: 0.3, noise_sigma: 0.05, seed, ..Default::default() });
        let rate = u.frames.frame_rate_hz();
        let truth = u.segments.boundary_times_s(rate, false);
        let raw = greedy_segment(&u.frames, 0.8);
        let mut prev: Option<(usize, f64, f64)> = None;
        for &ms in &sweep {
            let segs: SegmentSet = filter_min_duration(&raw, &u.frames, ms).map_err(|e| e.to_string())?;
            let c = match_boundaries(&truth, &segs.boundary_times_s(rate, false), 0.05);
            let recall = c.n_hit as f64 / c.n_ref as f64;
            if let Some((n, r, pms)) = prev {
                ensure(segs.len() <= n, || {
                    format!("seed {seed}: count rose {n} -> {} from {pms} to {ms} ms", segs.len())
                })?;
                ensure(recall <= r, || {
                    format!("seed {seed}: recall rose {r:.4} -> {recall:.4} from {pms} to {ms} ms")
                })?;
            }
            prev = Some((segs.len(), recall, ms));
        }
        if seed == 0 {
            let (n, r, _) = prev.unwrap();
            detail = format!("seed 0: {} -> {n} segments, recall -> {r:.3}", raw.len());
        }
    }
    Ok(format!("8 corpora, {} thresholds; {detail}", sweep.len()))
}

fn main() {
    let criteria = [
        Criterion { name: "f1-formula", budget: Some(Duration::from_secs(1)), run: f1_formula },
        Criterion { name: "r-value-formula", budget: Some(Duration::from_secs(1)), run: r_value_formula },
        Criterion { name: "segmentation-oracle", budget: Some(Duration::from_secs(10)), run: segmentation_oracle },
        Criterion { name: "codec-roundtrip", budget: Some(Duration::from_secs(10)), run: codec_roundtrip },
        Criterion { name: "peak-oracle", budget: Some(Duration::from_secs(10)), run: peak_oracle },
        Criterion { name: "ema-closed-form", budget: None, run: ema_closed_form },
        Criterion { name: "distillation-optimality", budget: None, run: distillation_optimality },
        Criterion { name: "synthetic-end-to-end", budget: None, run: synthetic_end_to_end },
        Criterion { name: "linear-scaling", budget: Some(Duration::from_secs(60)), run: linear_scaling },
        Criterion { name: "min-duration-sweep", budget: None, run: min_duration_sweep },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(budget)) = (&outcome, c.budget) {
            if elapsed > budget {
                outcome = Err(format!("took {elapsed:.2?}, budget {budget:?}"));
            }
        }
        match outcome {
            Ok(msg) => println!("PASS {:<24} {msg} [{elapsed:.2?}]", c.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:<24} {msg} [{elapsed:.2?}]", c.name);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
