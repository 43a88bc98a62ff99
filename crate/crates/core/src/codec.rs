//! Syllabic tokens: mean-pooled content and acoustic embeddings with a
//! duration, and the duration-based expansion back to frame rate.

use crate::error::{Error, Result};
use crate::linalg::FrameMatrix;
use crate::segmenter::SegmentSet;

/// Number of entries in a within-segment positional encoding template.
pub const WSEGPE_ENTRIES: usize = 11;

/// Default embedding width of content and acoustic tokens.
pub const DEFAULT_EMBED_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SyllabicToken {
    pub duration_frames: u32,
    pub content: Vec<f64>,
    pub acoustic: Vec<f64>,
}

/// An utterance as a sequence of syllabic tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    tokens: Vec<SyllabicToken>,
    content_dim: usize,
    acoustic_dim: usize,
    frame_rate_hz: f64,
    utt_id: String,
}

impl TokenStream {
    pub fn new(
        tokens: Vec<SyllabicToken>,
        content_dim: usize,
        acoustic_dim: usize,
        frame_rate_hz: f64,
        utt_id: impl Into<String>,
    ) -> Result<Self> {
        if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("frame rate must be positive, got {frame_rate_hz}")));
        }
        for (k, tok) in tokens.iter().enumerate() {
            if tok.duration_frames == 0 {
                return Err(Error::InvalidArgument(format!("token {k} has zero duration")));
            }
            if tok.content.len() != content_dim {
                return Err(Error::DimensionMismatch { expected: content_dim, actual: tok.content.len() });
            }
            if tok.acoustic.len() != acoustic_dim {
                return Err(Error::DimensionMismatch { expected: acoustic_dim, actual: tok.acoustic.len() });
            }
            if tok.content.iter().chain(&tok.acoustic).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
        }
        Ok(Self { tokens, content_dim, acoustic_dim, frame_rate_hz, utt_id: utt_id.into() })
    }

    pub fn tokens(&self) -> &[SyllabicToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn content_dim(&self) -> usize {
        self.content_dim
    }

    pub fn acoustic_dim(&self) -> usize {
        self.acoustic_dim
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

    pub fn total_frames(&self) -> u64 {
        self.tokens.iter().map(|t| u64::from(t.duration_frames)).sum()
    }

    pub fn duration_s(&self) -> f64 {
        self.total_frames() as f64 / self.frame_rate_hz
    }

    /// The segment partition implied by the token durations.
    pub fn segments(&self) -> SegmentSet {
        let durs: Vec<usize> = self.tokens.iter().map(|t| t.duration_frames as usize).collect();
        SegmentSet::from_durations(&durs).expect("token durations are positive")
    }

    /// Frames per token.
    pub fn compression_ratio(&self) -> Option<f64> {
        (!self.is_empty()).then(|| self.total_frames() as f64 / self.len() as f64)
    }
}

/// Interpolated positional template indexed by relative position in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSegPETemplate {
    entries: Vec<Vec<f64>>,
}

impl WSegPETemplate {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        if entries.len() != WSEGPE_ENTRIES {
            return Err(Error::InvalidArgument(format!(
                "template needs {WSEGPE_ENTRIES} entries, got {}",
                entries.len()
            )));
        }
        let dim = entries[0].len();
        if let Some(e) = entries.iter().find(|e| e.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: e.len() });
        }
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("template entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    /// Deterministic sinusoidal table. Entry `k` uses position `k + 11 * seed`
    /// in the usual sine/cosine positional code.
    pub fn sinusoidal(dim: usize, seed: u64) -> Self {
        let entries = (0..WSEGPE_ENTRIES)
            .map(|k| {
                let pos = (k as u64 + WSEGPE_ENTRIES as u64 * seed) as f64;
                (0..dim)
                    .map(|j| {
                        let rate = 1.0 / 10_000f64.powf((2 * (j / 2)) as f64 / dim.max(1) as f64);
                        if j % 2 == 0 {
                            (pos * rate).sin()
                        } else {
                            (pos * rate).cos()
                        }
                    })
                    .collect()
            })
            .collect();
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries[0].len()
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Writes the encoding for relative position `p` (clamped to `[0, 1]`).
    pub fn lookup_into(&self, p: f64, out: &mut [f64]) {
        let last = (WSEGPE_ENTRIES - 1) as f64;
        let q = p.clamp(0.0, 1.0) * last;
        let lo = q.floor();
        let frac = q - lo;
        let lo = lo as usize;
        let hi = (q.ceil() as usize).min(WSEGPE_ENTRIES - 1);
        for ((o, a), b) in out.iter_mut().zip(&self.entries[lo]).zip(&self.entries[hi]) {
            *o = (1.0 - frac) * a + frac * b;
        }
    }
}

/// Relative position of frame `i` within a segment of `duration` frames.
pub fn relative_position(i: usize, duration: usize) -> f64 {
    if duration <= 1 {
        0.0
    } else {
        i as f64 / (duration - 1) as f64
    }
}

/// Positional rows for one segment: `duration x template.dim()`.
pub fn wsegpe(duration: usize, template: &WSegPETemplate) -> Vec<Vec<f64>> {
    (0..duration)
        .map(|i| {
            let mut row = vec![0.0; template.dim()];
            template.lookup_into(relative_position(i, duration), &mut row);
            row
        })
        .collect()
}

/// Per-segment mean rows of `frames`.
pub fn pool_segments(frames: &FrameMatrix, segs: &SegmentSet) -> Result<Vec<Vec<f64>>> {
    segs.check_frames(frames)?;
    Ok(segs.iter().map(|s| segment_mean(frames, s.start, s.end)).collect())
}

/// Assembles a stream from segments and already pooled embeddings.
pub fn assemble(
    segs: &SegmentSet,
    content: Vec<Vec<f64>>,
    acoustic: Vec<Vec<f64>>,
    content_dim: usize,
    acoustic_dim: usize,
    frame_rate_hz: f64,
    utt_id: impl Into<String>,
) -> Result<TokenStream> {
    if content.len() != segs.len() || acoustic.len() != segs.len() {
        return Err(Error::InvalidArgument("one embedding per segment required".into()));
    }
    let tokens = segs
        .iter()
        .zip(content.into_iter().zip(acoustic))
        .map(|(s, (content, acoustic))| {
            let duration_frames = u32::try_from(s.duration_frames())
                .map_err(|_| Error::InvalidArgument("segment longer than u32::MAX frames".into()))?;
            Ok(SyllabicToken { duration_frames, content, acoustic })
        })
        .collect::<Result<Vec<_>>>()?;
    TokenStream::new(tokens, content_dim, acoustic_dim, frame_rate_hz, utt_id)
}

fn segment_mean(frames: &FrameMatrix, start: usize, end: usize) -> Vec<f64> {
    let mut mean = vec![0.0; frames.dim()];
    for i in start..end {
        for (m, x) in mean.iter_mut().zip(frames.row(i)) {
            *m += x;
        }
    }
    let n = (end - start) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// One token per segment, holding the per-segment means of both feature streams.
pub fn encode(content: &FrameMatrix, acoustic: &FrameMatrix, segs: &SegmentSet) -> Result<TokenStream> {
    segs.check_frames(content)?;
    segs.check_frames(acoustic)?;
    if content.frame_rate_hz() != acoustic.frame_rate_hz() {
        return Err(Error::InvalidArgument(format!(
            "content ({} Hz) and acoustic ({} Hz) frame rates differ",
            content.frame_rate_hz(),
            acoustic.frame_rate_hz()
        )));
    }
    assemble(
        segs,
        pool_segments(content, segs)?,
        pool_segments(acoustic, segs)?,
        content.dim(),
        acoustic.dim(),
        content.frame_rate_hz(),
        content.utt_id(),
    )
}

/// Repeats each token for its duration; every row is
/// `[content | acoustic | wsegpe(position)]`.
pub fn decode_expand(stream: &TokenStream, template: &WSegPETemplate) -> Result<FrameMatrix> {
    if stream.is_empty() {
        return Err(Error::Empty("token stream"));
    }
    let (dc, da, dp) = (stream.content_dim, stream.acoustic_dim, template.dim());
    let width = dc + da + dp;
    let total = stream.total_frames() as usize;
    let mut data = vec![0.0; total * width];
    let mut rows = data.chunks_exact_mut(width);
    for tok in &stream.tokens {
        let d = tok.duration_frames as usize;
        for i in 0..d {
            let row = rows.next().expect("row count matches total duration");
            row[..dc].copy_from_slice(&tok.content);
            row[dc..dc + da].copy_from_slice(&tok.acoustic);
            template.lookup_into(relative_position(i, d), &mut row[dc + da..]);
        }
    }
    FrameMatrix::new(data, width, stream.frame_rate_hz, stream.utt_id.clone())
}

/// Tokens per second of audio.
pub fn token_frequency(stream: &TokenStream) -> Result<f64> {
    if stream.is_empty() {
        return Err(Error::Empty("token stream"));
    }
    Ok(stream.len() as f64 / stream.duration_s())
}
