//! Command-line front end.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data error.
//! `-` names stdin or stdout wherever a path is expected.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bench::{bench_rtf, BenchInput, PipelineConfig, SegmentationMode};
use crate::boundary::{detect_boundaries, BoundaryTrace, PeakConfig};
use crate::codec::{decode_expand, encode, TokenStream, WSegPETemplate};
use crate::error::Error;
use crate::eval::{aggregate, evaluate, Aggregation, BoundaryAnnotation, EvalReport};
use crate::format::{self, FrameReader, KIND_FRAMES, KIND_TOKENS};
use crate::linalg::{FrameMatrix, DEFAULT_FRAME_RATE_HZ};
use crate::segmenter::{
    filter_min_duration, SegmentSet, SegmenterConfig, DEFAULT_MERGE_THRESHOLD, DEFAULT_REFINE_MIN_MS,
    DEFAULT_REFINE_THRESHOLD,
};
use crate::synth::{generate, synthetic_trace, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Overrides `--jobs` when set.
pub const JOBS_ENV: &str = "SYLTOK_JOBS";

const SIG_DIGITS: usize = 6;
const STDIO: &str = "-";

#[derive(Debug, Parser)]
#[command(name = "syltok", version, about = "Syllabic speech tokenization toolkit")]
pub struct Cli {
    /// Worker threads for per-utterance work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment frame files into syllable-like spans.
    Segment(SegmentArgs),
    /// Pool frames into syllabic tokens.
    Encode(EncodeArgs),
    /// Expand token files back to frame rate.
    Decode(DecodeArgs),
    /// Score hypothesis boundaries against references.
    EvalBoundaries(EvalArgs),
    /// Report tokens per second.
    Tokfreq(TokfreqArgs),
    /// Measure per-stage real-time factors.
    Bench(BenchArgs),
    /// Generate synthetic utterances with known segments.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Greedy,
    Peaks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Jsonl,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregateArg {
    Pooled,
    Macro,
}

#[derive(Debug, Clone, Args)]
struct SegmentOpts {
    #[arg(long, value_enum, default_value = "greedy")]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_MERGE_THRESHOLD)]
    merge_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_REFINE_THRESHOLD)]
    refine_threshold: f64,
    /// Segments shorter than this are merged during refinement.
    #[arg(long, default_value_t = DEFAULT_REFINE_MIN_MS)]
    refine_min_ms: f64,
    /// Unconditionally merge segments shorter than this after segmentation.
    #[arg(long)]
    min_dur_ms: Option<f64>,
    /// L2-normalize frames before the greedy sweep.
    #[arg(long)]
    normalize: bool,
    /// Boundary-probability file (SYL2 frames, dim 1) per input, in input order.
    #[arg(long = "trace")]
    traces: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    min_peak: f64,
    #[arg(long, default_value_t = 0.05)]
    min_prominence: f64,
    #[arg(long, default_value_t = 0.8)]
    hard_prob: f64,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// SYL2 frame files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    opts: SegmentOpts,
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// SYL2 content frame files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Acoustic frame file per input, in input order (default: the content frames).
    #[arg(long = "acoustic")]
    acoustic: Vec<PathBuf>,
    /// Segment JSONL produced by `segment`; segments are computed when absent.
    #[arg(long)]
    segments: Option<PathBuf>,
    #[command(flatten)]
    opts: SegmentOpts,
    /// Output file for a single input, directory otherwise.
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// SYL2 token files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    template_seed: u64,
    #[arg(long, default_value_t = 16)]
    template_dim: usize,
    /// Output file for a single input, directory otherwise.
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Reference annotations (JSONL).
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Hypothesis annotations (JSONL), e.g. `segment` output.
    #[arg(long)]
    hyp: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    tolerance_ms: f64,
    /// Score the boundary at t = 0 as well.
    #[arg(long)]
    include_initial: bool,
    #[arg(long, value_enum, default_value = "pooled")]
    aggregate: AggregateArg,
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct TokfreqArgs {
    /// SYL2 token files, or frame files which are segmented first.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    opts: SegmentOpts,
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// SYL2 frame files; a synthetic set is generated when none are given.
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    opts: SegmentOpts,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    template_seed: u64,
    #[arg(long, default_value_t = 16)]
    template_dim: usize,
    /// Synthetic utterances to generate.
    #[arg(long, default_value_t = 8)]
    synth_count: usize,
    /// Segments per synthetic utterance.
    #[arg(long, default_value_t = 500)]
    synth_segments: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 50)]
    n_segments: usize,
    #[arg(long, default_value_t = 10)]
    mean_dur_frames: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE_HZ)]
    frame_rate: f64,
    /// Probability of planting a 2-3 frame segment.
    #[arg(long, default_value_t = 0.0)]
    short_prob: f64,
    /// Seed of the first utterance; utterance k uses seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a boundary-probability trace per utterance.
    #[arg(long)]
    traces: bool,
    /// Reference-annotation JSONL (written into the output directory when --count > 1).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Frame file for --count 1, directory otherwise.
    #[arg(long, short, default_value = STDIO)]
    output: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// One line of `segment` output. Parses as a [`BoundaryAnnotation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub utt_id: String,
    pub frame_rate_hz: f64,
    pub n_frames: usize,
    /// Segment start times, including t = 0.
    pub boundaries_s: Vec<f64>,
    pub durations: Vec<usize>,
}

impl SegmentRecord {
    pub fn new(utt_id: &str, frame_rate_hz: f64, segs: &SegmentSet) -> Self {
        Self {
            utt_id: utt_id.to_string(),
            frame_rate_hz,
            n_frames: segs.total_frames(),
            boundaries_s: segs.boundary_times_s(frame_rate_hz, true),
            durations: segs.durations(),
        }
    }

    pub fn segment_set(&self) -> crate::Result<SegmentSet> {
        let segs = SegmentSet::from_durations(&self.durations)?;
        if segs.total_frames() != self.n_frames {
            return Err(Error::InvalidSegments(format!(
                "{}: durations sum to {}, n_frames is {}",
                self.utt_id,
                segs.total_frames(),
                self.n_frames
            )));
        }
        Ok(segs)
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn jobs(flag: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var(JOBS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| usage(format!("{JOBS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs(cli.jobs)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::EvalBoundaries(a) => cmd_eval(a),
        Command::Tokfreq(a) => cmd_tokfreq(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
    })
}

fn is_stdio(p: &Path) -> bool {
    p.as_os_str() == STDIO
}

fn open_input(p: &Path) -> CliResult<Box<dyn Read>> {
    if is_stdio(p) {
        Ok(Box::new(io::stdin().lock()))
    } else {
        Ok(Box::new(BufReader::new(File::open(p).map_err(|e| io_context(p, e))?)))
    }
}

fn open_output(p: &Path) -> CliResult<Box<dyn Write>> {
    if is_stdio(p) {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| io_context(p, e))?)))
    }
}

fn io_context(p: &Path, e: io::Error) -> CliError {
    CliError::Data(Error::Io(io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
}

fn stem(p: &Path) -> String {
    if is_stdio(p) {
        "stdin".to_string()
    } else {
        p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

fn read_frames_at(p: &Path) -> CliResult<FrameMatrix> {
    Ok(FrameReader::new(open_input(p)?)?.read_all(stem(p))?)
}

fn read_tokens_at(p: &Path) -> CliResult<TokenStream> {
    Ok(format::read_tokens_from(open_input(p)?, stem(p))?)
}

fn stdin_at_most_once(inputs: &[PathBuf]) -> CliResult<()> {
    if inputs.iter().filter(|p| is_stdio(p)).count() > 1 {
        return Err(usage("stdin can be read only once"));
    }
    Ok(())
}

/// Rounds every float in `v` to six significant digits.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses");
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn to_rounded_value<T: Serialize>(x: &T) -> CliResult<Value> {
    let mut v = serde_json::to_value(x)?;
    round_numbers(&mut v);
    Ok(v)
}

/// Writes `whole` as one JSON document, or `lines` as JSONL.
fn write_json<T: Serialize, L: Serialize>(out: &Path, fmt: OutFormat, whole: &T, lines: &[L]) -> CliResult<()> {
    let mut w = open_output(out)?;
    match fmt {
        OutFormat::Json => {
            serde_json::to_writer_pretty(&mut w, &to_rounded_value(whole)?)?;
            writeln!(w)?;
        }
        OutFormat::Jsonl => {
            for l in lines {
                serde_json::to_writer(&mut w, &to_rounded_value(l)?)?;
                writeln!(w)?;
            }
        }
        OutFormat::Binary => return Err(usage("binary output is not available for this command")),
    }
    w.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(p: &Path) -> CliResult<Vec<T>> {
    let r = BufReader::new(open_input(p)?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(Error::InvalidArgument(format!("{}:{}: {e}", p.display(), k + 1))))?;
        out.push(v);
    }
    Ok(out)
}

impl SegmentOpts {
    fn peak_config(&self) -> CliResult<PeakConfig> {
        let cfg =
            PeakConfig { min_peak: self.min_peak, min_prominence: self.min_prominence, hard_prob: self.hard_prob };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    fn segmenter_config(&self) -> CliResult<SegmenterConfig> {
        for (name, v) in [("--merge-threshold", self.merge_threshold), ("--refine-threshold", self.refine_threshold)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(usage(format!("{name} must be in [-1, 1], got {v}")));
            }
        }
        for (name, v) in [("--refine-min-ms", Some(self.refine_min_ms)), ("--min-dur-ms", self.min_dur_ms)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(usage(format!("{name} must be a non-negative number, got {v}")));
                }
            }
        }
        Ok(SegmenterConfig {
            merge_threshold: self.merge_threshold,
            refine_threshold: self.refine_threshold,
            refine_min_ms: self.refine_min_ms,
            normalize: self.normalize,
        })
    }

    fn mode(&self) -> CliResult<SegmentationMode> {
        Ok(match self.mode {
            Mode::Greedy => SegmentationMode::Greedy(self.segmenter_config()?),
            Mode::Peaks => SegmentationMode::Peaks(self.peak_config()?),
        })
    }

    /// Traces aligned with `n_inputs`, loaded only in peak mode.
    fn load_traces(&self, n_inputs: usize) -> CliResult<Vec<Option<BoundaryTrace>>> {
        if self.mode == Mode::Greedy {
            if !self.traces.is_empty() {
                return Err(usage("--trace requires --mode peaks"));
            }
            return Ok(vec![None; n_inputs]);
        }
        if self.traces.len() != n_inputs {
            return Err(usage(format!(
                "--mode peaks needs one --trace per input ({} given, {n_inputs} inputs)",
                self.traces.len()
            )));
        }
        self.traces.iter().map(|p| read_trace(p).map(Some)).collect()
    }

    fn segment(&self, frames: &FrameMatrix, trace: Option<&BoundaryTrace>) -> CliResult<SegmentSet> {
        let segs = match self.mode()? {
            SegmentationMode::Greedy(cfg) => cfg.segment(frames),
            SegmentationMode::Peaks(cfg) => {
                let trace = trace.ok_or_else(|| usage("--mode peaks needs --trace"))?;
                if trace.len() != frames.n_frames() {
                    return Err(Error::FrameCountMismatch { expected: frames.n_frames(), actual: trace.len() }.into());
                }
                detect_boundaries(trace, &cfg)
            }
        };
        match self.min_dur_ms {
            Some(ms) => Ok(filter_min_duration(&segs, frames, ms)?),
            None => Ok(segs),
        }
    }
}

fn read_trace(p: &Path) -> CliResult<BoundaryTrace> {
    let f = read_frames_at(p)?;
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, actual: f.dim() }.into());
    }
    Ok(BoundaryTrace::new(f.into_vec())?)
}

/// Applies `f` to every item on the worker pool, keeping input order.
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> CliResult<U> + Sync) -> CliResult<Vec<U>> {
    items.par_iter().map(&f).collect()
}

fn sort_by_utt<T>(v: &mut [T], key: impl Fn(&T) -> &str) {
    v.sort_by(|a, b| key(a).cmp(key(b)));
}

fn cmd_segment(a: SegmentArgs) -> CliResult<()> {
    stdin_at_most_once(&a.inputs)?;
    a.opts.mode()?;
    let traces = a.opts.load_traces(a.inputs.len())?;
    let jobs: Vec<_> = a.inputs.iter().zip(traces).collect();
    let mut records = par_map(&jobs, |(p, tr)| {
        let frames = read_frames_at(p)?;
        let segs = a.opts.segment(&frames, tr.as_ref())?;
        Ok(SegmentRecord::new(frames.utt_id(), frames.frame_rate_hz(), &segs))
    })?;
    sort_by_utt(&mut records, |r| &r.utt_id);
    write_json(&a.output, a.format, &records, &records)
}

/// Destination path for one of several outputs.
fn output_for(out: &Path, n_inputs: usize, utt_id: &str) -> CliResult<PathBuf> {
    if n_inputs == 1 {
        return Ok(out.to_path_buf());
    }
    if is_stdio(out) {
        return Err(usage("multiple inputs need --output DIR"));
    }
    fs::create_dir_all(out).map_err(|e| io_context(out, e))?;
    Ok(out.join(format!("{utt_id}.syl2")))
}

fn check_unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> CliResult<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidArgument(format!("duplicate utterance id {id:?}")).into());
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TokenSummary {
    utt_id: String,
    n_tokens: usize,
    n_frames: u64,
    frame_rate_hz: f64,
    content_dim: usize,
    acoustic_dim: usize,
    durations: Vec<u32>,
}

impl TokenSummary {
    fn new(s: &TokenStream) -> Self {
        Self {
            utt_id: s.utt_id().to_string(),
            n_tokens: s.len(),
            n_frames: s.total_frames(),
            frame_rate_hz: s.frame_rate_hz(),
            content_dim: s.content_dim(),
            acoustic_dim: s.acoustic_dim(),
            durations: s.tokens().iter().map(|t| t.duration_frames).collect(),
        }
    }
}

fn cmd_encode(a: EncodeArgs) -> CliResult<()> {
    stdin_at_most_once(&a.inputs)?;
    if !a.acoustic.is_empty() && a.acoustic.len() != a.inputs.len() {
        return Err(usage("give one --acoustic file per input, or none"));
    }
    if a.inputs.len() > 1 && a.format == OutFormat::Binary && is_stdio(&a.output) {
        return Err(usage("multiple inputs need --output DIR"));
    }
    let given: Option<Vec<SegmentRecord>> = a.segments.as_deref().map(read_jsonl).transpose()?;
    let given: Option<BTreeMap<String, SegmentRecord>> =
        given.map(|v| v.into_iter().map(|r| (r.utt_id.clone(), r)).collect());
    if given.is_none() {
        a.opts.mode()?;
    }
    let traces = if given.is_some() { vec![None; a.inputs.len()] } else { a.opts.load_traces(a.inputs.len())? };
    let jobs: Vec<_> = a.inputs.iter().enumerate().zip(traces).collect();
    let mut streams = par_map(&jobs, |((k, p), tr)| {
        let content = read_frames_at(p)?;
        let acoustic = match a.acoustic.get(*k) {
            Some(q) => read_frames_at(q)?,
            None => content.clone(),
        };
        let segs = match &given {
            Some(map) => {
                let rec = map
                    .get(content.utt_id())
                    .or_else(|| (map.len() == 1 && a.inputs.len() == 1).then(|| map.values().next()).flatten())
                    .ok_or_else(|| Error::InvalidArgument(format!("no segments for {:?}", content.utt_id())))?;
                rec.segment_set()?
            }
            None => a.opts.segment(&content, tr.as_ref())?,
        };
        Ok(encode(&content, &acoustic, &segs)?)
    })?;
    sort_by_utt(&mut streams, |s| s.utt_id());
    check_unique_ids(streams.iter().map(|s| s.utt_id()))?;
    if a.format != OutFormat::Binary {
        let summaries: Vec<TokenSummary> = streams.iter().map(TokenSummary::new).collect();
        return write_json(&a.output, a.format, &summaries, &summaries);
    }
    for s in &streams {
        let dest = output_for(&a.output, streams.len(), s.utt_id())?;
        format::write_tokens_to(s, open_output(&dest)?)?;
    }
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> CliResult<()> {
    stdin_at_most_once(&a.inputs)?;
    if a.format != OutFormat::Binary {
        return Err(usage("decode writes binary frames only"));
    }
    if a.inputs.len() > 1 && is_stdio(&a.output) {
        return Err(usage("multiple inputs need --output DIR"));
    }
    let template = WSegPETemplate::sinusoidal(a.template_dim, a.template_seed);
    let mut frames = par_map(&a.inputs, |p| Ok(decode_expand(&read_tokens_at(p)?, &template)?))?;
    sort_by_utt(&mut frames, |f| f.utt_id());
    check_unique_ids(frames.iter().map(|f| f.utt_id()))?;
    for f in &frames {
        let dest = output_for(&a.output, frames.len(), f.utt_id())?;
        format::write_frames_to(f, open_output(&dest)?)?;
    }
    Ok(())
}

/// Metrics scaled to percentages for display.
#[derive(Debug, Serialize)]
struct EvalView {
    #[serde(skip_serializing_if = "Option::is_none")]
    utt_id: Option<String>,
    precision: f64,
    recall: f64,
    f1: f64,
    r_value: f64,
    n_ref: usize,
    n_hyp: usize,
    n_hit: usize,
}

impl From<&EvalReport> for EvalView {
    fn from(r: &EvalReport) -> Self {
        Self {
            utt_id: r.utt_id.clone(),
            precision: 100.0 * r.precision,
            recall: 100.0 * r.recall,
            f1: 100.0 * r.f1,
            r_value: 100.0 * r.r_value,
            n_ref: r.n_ref,
            n_hyp: r.n_hyp,
            n_hit: r.n_hit,
        }
    }
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    aggregation: Aggregation,
    tolerance_ms: f64,
    n_utterances: usize,
    overall: EvalView,
    utterances: Vec<EvalView>,
}

fn annotations_by_id(p: &Path) -> CliResult<BTreeMap<String, BoundaryAnnotation>> {
    let mut map = BTreeMap::new();
    for a in read_jsonl::<BoundaryAnnotation>(p)? {
        a.validate()?;
        let id = a.utt_id.clone();
        if map.insert(id.clone(), a).is_some() {
            return Err(Error::InvalidArgument(format!("{}: duplicate utterance id {id:?}", p.display())).into());
        }
    }
    Ok(map)
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    if !(a.tolerance_ms.is_finite() && a.tolerance_ms >= 0.0) {
        return Err(usage(format!("--tolerance-ms must be non-negative, got {}", a.tolerance_ms)));
    }
    if is_stdio(&a.reference) && is_stdio(&a.hyp) {
        return Err(usage("stdin can be read only once"));
    }
    let refs = annotations_by_id(&a.reference)?;
    let hyps = annotations_by_id(&a.hyp)?;
    if refs.is_empty() {
        return Err(Error::Empty("reference annotations").into());
    }
    if let Some(id) = hyps.keys().find(|k| !refs.contains_key(*k)) {
        return Err(Error::InvalidArgument(format!("hypothesis {id:?} has no reference")).into());
    }
    let pairs: Vec<(&BoundaryAnnotation, &BoundaryAnnotation)> = refs
        .values()
        .map(|r| {
            hyps.get(&r.utt_id)
                .map(|h| (r, h))
                .ok_or_else(|| Error::InvalidArgument(format!("reference {:?} has no hypothesis", r.utt_id)).into())
        })
        .collect::<CliResult<_>>()?;
    let tol = a.tolerance_ms / 1000.0;
    let reports = par_map(&pairs, |(r, h)| Ok(evaluate(r, h, tol, a.include_initial)))?;
    let mode = match a.aggregate {
        AggregateArg::Pooled => Aggregation::Pooled,
        AggregateArg::Macro => Aggregation::Macro,
    };
    let mut overall = aggregate(&reports, mode)?;
    overall.utt_id = None;
    let views: Vec<EvalView> = reports.iter().map(EvalView::from).collect();
    let out = EvalOutput {
        aggregation: mode,
        tolerance_ms: a.tolerance_ms,
        n_utterances: reports.len(),
        overall: EvalView::from(&overall),
        utterances: views,
    };
    write_json(&a.output, a.format, &out, &out.utterances)
}

#[derive(Debug, Serialize)]
struct FreqLine {
    utt_id: String,
    n_tokens: u64,
    audio_seconds: f64,
    tokfreq_hz: f64,
}

#[derive(Debug, Serialize)]
struct FreqOutput {
    n_utterances: usize,
    n_tokens: u64,
    audio_seconds: f64,
    tokfreq_hz: f64,
    utterances: Vec<FreqLine>,
}

fn peek_kind(p: &Path) -> CliResult<u32> {
    if is_stdio(p) {
        return Err(usage("tokfreq reads files, not stdin"));
    }
    format::file_kind(p).map_err(|e| match e {
        Error::Io(io) => io_context(p, io),
        e => CliError::Data(e),
    })
}

fn cmd_tokfreq(a: TokfreqArgs) -> CliResult<()> {
    let traces = a.opts.load_traces(a.inputs.len())?;
    a.opts.mode()?;
    let jobs: Vec<_> = a.inputs.iter().zip(traces).collect();
    let mut lines = par_map(&jobs, |(p, tr)| {
        let (utt_id, n_tokens, audio_seconds) = match peek_kind(p)? {
            KIND_TOKENS => {
                let s = read_tokens_at(p)?;
                (s.utt_id().to_string(), s.len() as u64, s.duration_s())
            }
            KIND_FRAMES => {
                let f = read_frames_at(p)?;
                let segs = a.opts.segment(&f, tr.as_ref())?;
                (f.utt_id().to_string(), segs.len() as u64, f.duration_s())
            }
            k => return Err(Error::WrongKind { expected: KIND_TOKENS, found: k }.into()),
        };
        let tokfreq_hz = if audio_seconds > 0.0 { n_tokens as f64 / audio_seconds } else { 0.0 };
        Ok(FreqLine { utt_id, n_tokens, audio_seconds, tokfreq_hz })
    })?;
    sort_by_utt(&mut lines, |l| &l.utt_id);
    let n_tokens: u64 = lines.iter().map(|l| l.n_tokens).sum();
    let audio_seconds: f64 = lines.iter().map(|l| l.audio_seconds).sum();
    if audio_seconds <= 0.0 {
        return Err(Error::Empty("audio").into());
    }
    let out = FreqOutput {
        n_utterances: lines.len(),
        n_tokens,
        audio_seconds,
        tokfreq_hz: n_tokens as f64 / audio_seconds,
        utterances: lines,
    };
    write_json(&a.output, a.format, &out, &out.utterances)
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let mode = a.opts.mode()?;
    let inputs: Vec<BenchInput> = if a.inputs.is_empty() {
        (0..a.synth_count.max(1) as u64)
            .map(|k| {
                let u = generate(&SynthConfig {
                    n_segments: a.synth_segments.max(1),
                    seed: a.seed + k,
                    ..Default::default()
                });
                let trace =
                    matches!(mode, SegmentationMode::Peaks(_)).then(|| synthetic_trace(&u.segments, a.seed + k));
                BenchInput { acoustic: u.frames.clone(), content: u.frames, trace }
            })
            .collect()
    } else {
        stdin_at_most_once(&a.inputs)?;
        let traces = a.opts.load_traces(a.inputs.len())?;
        a.inputs
            .iter()
            .zip(traces)
            .map(|(p, trace)| {
                let f = read_frames_at(p)?;
                Ok(BenchInput { acoustic: f.clone(), content: f, trace })
            })
            .collect::<CliResult<_>>()?
    };
    let cfg = PipelineConfig {
        mode,
        template: WSegPETemplate::sinusoidal(a.template_dim, a.template_seed),
        warmup_runs: a.warmup,
        measured_runs: a.runs,
    };
    let report = bench_rtf(&cfg, &inputs, a.batch_size)?;
    write_json(&a.output, a.format, &report, std::slice::from_ref(&report))
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    if a.count == 0 || a.n_segments == 0 || a.mean_dur_frames == 0 || a.dim == 0 {
        return Err(usage("--count, --n-segments, --mean-dur-frames and --dim must be positive"));
    }
    if !(a.noise_sigma.is_finite() && a.noise_sigma >= 0.0) {
        return Err(usage("--noise-sigma must be non-negative"));
    }
    if !(a.frame_rate.is_finite() && a.frame_rate > 0.0) {
        return Err(usage("--frame-rate must be positive"));
    }
    if !(0.0..=1.0).contains(&a.short_prob) {
        return Err(usage("--short-prob must be in [0, 1]"));
    }
    let multi = a.count > 1;
    if multi && is_stdio(&a.output) {
        return Err(usage("--count > 1 needs --output DIR"));
    }
    if !multi && a.traces && is_stdio(&a.output) {
        return Err(usage("--traces needs a file --output"));
    }
    if multi {
        fs::create_dir_all(&a.output).map_err(|e| io_context(&a.output, e))?;
    }
    let seeds: Vec<u64> = (0..a.count as u64).map(|k| a.seed + k).collect();
    let mut refs = par_map(&seeds, |&seed| {
        let u = generate(&SynthConfig {
            n_segments: a.n_segments,
            mean_dur_frames: a.mean_dur_frames,
            dim: a.dim,
            noise_sigma: a.noise_sigma,
            seed,
            frame_rate_hz: a.frame_rate,
            short_prob: a.short_prob,
            ..Default::default()
        });
        let id = if multi || is_stdio(&a.output) { u.frames.utt_id().to_string() } else { stem(&a.output) };
        let dest = if multi { a.output.join(format!("{id}.syl2")) } else { a.output.clone() };
        format::write_frames_to(&u.frames, open_output(&dest)?)?;
        if a.traces {
            let trace = synthetic_trace(&u.segments, seed);
            let tf = FrameMatrix::new(trace.probs().to_vec(), 1, a.frame_rate, id.clone())?;
            let tdest =
                if multi { a.output.join(format!("{id}.trace.syl2")) } else { dest.with_extension("trace.syl2") };
            format::write_frames_to(&tf, open_output(&tdest)?)?;
        }
        Ok(SegmentRecord::new(&id, a.frame_rate, &u.segments))
    })?;
    sort_by_utt(&mut refs, |r| &r.utt_id);
    let ref_path = match (&a.reference, multi) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(a.output.join("reference.jsonl")),
        (None, false) => None,
    };
    if let Some(p) = ref_path {
        if is_stdio(&p) && is_stdio(&a.output) {
            return Err(usage("frames and reference cannot both go to stdout"));
        }
        write_json(&p, OutFormat::Jsonl, &refs, &refs)?;
    }
    Ok(())
}
