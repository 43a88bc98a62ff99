//! `SYL2` binary container for frame matrices and token streams.
//!
//! All fields are little-endian.
//!
//! Frames (kind 0), 28-byte header:
//!
//! | offset | type    | field          |
//! |--------|---------|----------------|
//! | 0      | [u8; 4] | magic `SYL2`   |
//! | 4      | u32     | version = 1    |
//! | 8      | u32     | kind = 0       |
//! | 12     | f32     | frame_rate_hz  |
//! | 16     | u32     | dim            |
//! | 20     | u64     | n_frames       |
//!
//! followed by `n_frames * dim` f32 values, row-major.
//!
//! Tokens (kind 1), 32-byte header: the same first 16 bytes, then
//! `content_dim: u32`, `acoustic_dim: u32`, `n_tokens: u64`, followed by
//! `n_tokens` records of `duration: u32, content: [f32; content_dim],
//! acoustic: [f32; acoustic_dim]`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::codec::{SyllabicToken, TokenStream};
use crate::error::{Error, Result};
use crate::linalg::FrameMatrix;

pub const MAGIC: [u8; 4] = *b"SYL2";
pub const VERSION: u32 = 1;
pub const KIND_FRAMES: u32 = 0;
pub const KIND_TOKENS: u32 = 1;
pub const FRAMES_HEADER_LEN: usize = 28;
pub const TOKENS_HEADER_LEN: usize = 32;

/// Values decoded per read call while streaming payloads.
const CHUNK_VALUES: usize = 16 * 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramesHeader {
    pub frame_rate_hz: f32,
    pub dim: u32,
    pub n_frames: u64,
}

impl FramesHeader {
    pub fn payload_bytes(&self) -> u64 {
        self.n_frames * u64::from(self.dim) * 4
    }

    pub fn to_bytes(&self) -> [u8; FRAMES_HEADER_LEN] {
        let mut b = [0u8; FRAMES_HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8..12].copy_from_slice(&KIND_FRAMES.to_le_bytes());
        b[12..16].copy_from_slice(&self.frame_rate_hz.to_le_bytes());
        b[16..20].copy_from_slice(&self.dim.to_le_bytes());
        b[20..28].copy_from_slice(&self.n_frames.to_le_bytes());
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokensHeader {
    pub frame_rate_hz: f32,
    pub content_dim: u32,
    pub acoustic_dim: u32,
    pub n_tokens: u64,
}

impl TokensHeader {
    pub fn record_bytes(&self) -> u64 {
        4 + 4 * (u64::from(self.content_dim) + u64::from(self.acoustic_dim))
    }

    pub fn to_bytes(&self) -> [u8; TOKENS_HEADER_LEN] {
        let mut b = [0u8; TOKENS_HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..8].copy_from_slice(&VERSION.to_le_bytes());
        b[8..12].copy_from_slice(&KIND_TOKENS.to_le_bytes());
        b[12..16].copy_from_slice(&self.frame_rate_hz.to_le_bytes());
        b[16..20].copy_from_slice(&self.content_dim.to_le_bytes());
        b[20..24].copy_from_slice(&self.acoustic_dim.to_le_bytes());
        b[24..32].copy_from_slice(&self.n_tokens.to_le_bytes());
        b
    }
}

/// Reads as many bytes as available up to `buf.len()`.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

/// Reads and checks the 16-byte common prefix, returning the kind and frame rate.
fn read_prefix<R: Read>(r: &mut R) -> Result<(u32, f32)> {
    let mut b = [0u8; 16];
    if read_full(r, &mut b)? < 16 {
        return Err(Error::TruncatedHeader);
    }
    let magic: [u8; 4] = b[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u32_at(&b, 4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rate = f32::from_le_bytes(b[12..16].try_into().unwrap());
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidArgument(format!("frame rate in header is {rate}")));
    }
    Ok((u32_at(&b, 8), rate))
}

fn expect_kind(found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::WrongKind { expected, found });
    }
    Ok(())
}

/// Decodes little-endian f32 values into `out`, checking finiteness.
/// `offset` is the element index of `out[0]` within the payload.
fn read_f32s<R: Read>(
    r: &mut R,
    out: &mut [f64],
    offset: u64,
    expected_bytes: u64,
    read_so_far: &mut u64,
) -> Result<()> {
    let mut bytes = vec![0u8; 4 * CHUNK_VALUES.min(out.len().max(1))];
    let mut done = 0;
    while done < out.len() {
        let n = (out.len() - done).min(CHUNK_VALUES);
        let got = read_full(r, &mut bytes[..4 * n])?;
        *read_so_far += got as u64;
        if got < 4 * n {
            return Err(Error::TruncatedPayload { expected: expected_bytes, actual: *read_so_far });
        }
        for (k, (o, c)) in out[done..done + n].iter_mut().zip(bytes.chunks_exact(4)).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFinitePayload(offset + (done + k) as u64));
            }
            *o = f64::from(v);
        }
        done += n;
    }
    Ok(())
}

fn ensure_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    if read_full(r, &mut probe)? != 0 {
        return Err(Error::TrailingBytes);
    }
    Ok(())
}

/// Streaming reader over the rows of a kind-0 file.
pub struct FrameReader<R: Read> {
    inner: R,
    header: FramesHeader,
    next_row: u64,
    bytes_read: u64,
}

impl FrameReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> FrameReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let (kind, frame_rate_hz) = read_prefix(&mut inner)?;
        expect_kind(kind, KIND_FRAMES)?;
        let mut b = [0u8; 12];
        if read_full(&mut inner, &mut b)? < 12 {
            return Err(Error::TruncatedHeader);
        }
        let header = FramesHeader { frame_rate_hz, dim: u32_at(&b, 0), n_frames: u64_at(&b, 4) };
        if header.dim == 0 {
            return Err(Error::InvalidArgument("dim in header is 0".into()));
        }
        Ok(Self { inner, header, next_row: 0, bytes_read: 0 })
    }

    pub fn header(&self) -> &FramesHeader {
        &self.header
    }

    pub fn remaining(&self) -> u64 {
        self.header.n_frames - self.next_row
    }

    /// Fills `row` (length `dim`) with the next frame. Returns `false` at the end.
    pub fn read_row(&mut self, row: &mut [f64]) -> Result<bool> {
        if self.next_row == self.header.n_frames {
            return Ok(false);
        }
        let dim = self.header.dim as usize;
        if row.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: row.len() });
        }
        let offset = self.next_row * u64::from(self.header.dim);
        read_f32s(&mut self.inner, row, offset, self.header.payload_bytes(), &mut self.bytes_read)?;
        self.next_row += 1;
        Ok(true)
    }

    /// Decodes the rest of the payload into a matrix with a single allocation.
    pub fn read_all(mut self, utt_id: impl Into<String>) -> Result<FrameMatrix> {
        let dim = self.header.dim as usize;
        let n = usize::try_from(self.remaining() * u64::from(self.header.dim))
            .map_err(|_| Error::InvalidArgument("payload too large for this platform".into()))?;
        let mut data = Vec::new();
        data.try_reserve_exact(n)
            .map_err(|_| Error::TruncatedPayload { expected: self.header.payload_bytes(), actual: 0 })?;
        data.resize(n, 0.0);
        let offset = self.next_row * u64::from(self.header.dim);
        read_f32s(&mut self.inner, &mut data, offset, self.header.payload_bytes(), &mut self.bytes_read)?;
        ensure_eof(&mut self.inner)?;
        FrameMatrix::new(data, dim, f64::from(self.header.frame_rate_hz), utt_id)
    }
}

/// Incremental kind-0 writer. The frame count is fixed up front.
pub struct FrameWriter<W: Write> {
    inner: W,
    header: FramesHeader,
    written: u64,
    buf: Vec<u8>,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut inner: W, header: FramesHeader) -> Result<Self> {
        if header.dim == 0 {
            return Err(Error::InvalidArgument("dim must be >= 1".into()));
        }
        inner.write_all(&header.to_bytes())?;
        Ok(Self { inner, header, written: 0, buf: Vec::with_capacity(header.dim as usize * 4) })
    }

    pub fn write_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.header.dim as usize {
            return Err(Error::DimensionMismatch { expected: self.header.dim as usize, actual: row.len() });
        }
        if self.written == self.header.n_frames {
            return Err(Error::InvalidArgument("more rows than declared in header".into()));
        }
        self.buf.clear();
        for &v in row {
            self.buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        self.inner.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.n_frames {
            return Err(Error::InvalidArgument(format!(
                "declared {} rows, wrote {}",
                self.header.n_frames, self.written
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub fn write_frames_to<W: Write>(frames: &FrameMatrix, w: W) -> Result<W> {
    let header = FramesHeader {
        frame_rate_hz: frames.frame_rate_hz() as f32,
        dim: u32::try_from(frames.dim()).map_err(|_| Error::InvalidArgument("dim exceeds u32".into()))?,
        n_frames: frames.n_frames() as u64,
    };
    let mut fw = FrameWriter::new(w, header)?;
    for row in frames.rows() {
        fw.write_row(row)?;
    }
    fw.finish()
}

pub fn read_frames_from<R: Read>(r: R, utt_id: impl Into<String>) -> Result<FrameMatrix> {
    FrameReader::new(r)?.read_all(utt_id)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads a frame file; the utterance id is the file stem.
pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameMatrix> {
    let path = path.as_ref();
    FrameReader::open(path)?.read_all(stem(path))
}

pub fn write_frames(frames: &FrameMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_frames_to(frames, BufWriter::new(File::create(path)?))?;
    Ok(())
}

pub fn write_tokens_to<W: Write>(stream: &TokenStream, mut w: W) -> Result<W> {
    let dim = |d: usize| u32::try_from(d).map_err(|_| Error::InvalidArgument("dim exceeds u32".into()));
    let header = TokensHeader {
        frame_rate_hz: stream.frame_rate_hz() as f32,
        content_dim: dim(stream.content_dim())?,
        acoustic_dim: dim(stream.acoustic_dim())?,
        n_tokens: stream.len() as u64,
    };
    w.write_all(&header.to_bytes())?;
    let mut buf = Vec::with_capacity(header.record_bytes() as usize);
    for tok in stream.tokens() {
        buf.clear();
        buf.extend_from_slice(&tok.duration_frames.to_le_bytes());
        for &v in tok.content.iter().chain(&tok.acoustic) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(w)
}

pub fn read_tokens_from<R: Read>(mut r: R, utt_id: impl Into<String>) -> Result<TokenStream> {
    let (kind, frame_rate_hz) = read_prefix(&mut r)?;
    expect_kind(kind, KIND_TOKENS)?;
    let mut b = [0u8; 16];
    if read_full(&mut r, &mut b)? < 16 {
        return Err(Error::TruncatedHeader);
    }
    let header = TokensHeader {
        frame_rate_hz,
        content_dim: u32_at(&b, 0),
        acoustic_dim: u32_at(&b, 4),
        n_tokens: u64_at(&b, 8),
    };
    let (dc, da) = (header.content_dim as usize, header.acoustic_dim as usize);
    let expected = header.n_tokens * header.record_bytes();
    let mut read_so_far = 0u64;
    let mut tokens = Vec::new();
    let mut vals = vec![0.0; dc + da];
    for k in 0..header.n_tokens {
        let mut d = [0u8; 4];
        let got = read_full(&mut r, &mut d)?;
        read_so_far += got as u64;
        if got < 4 {
            return Err(Error::TruncatedPayload { expected, actual: read_so_far });
        }
        let offset = k * (dc + da) as u64;
        read_f32s(&mut r, &mut vals, offset, expected, &mut read_so_far)?;
        tokens.push(SyllabicToken {
            duration_frames: u32::from_le_bytes(d),
            content: vals[..dc].to_vec(),
            acoustic: vals[dc..].to_vec(),
        });
    }
    ensure_eof(&mut r)?;
    TokenStream::new(tokens, dc, da, f64::from(frame_rate_hz), utt_id)
}

pub fn read_tokens(path: impl AsRef<Path>) -> Result<TokenStream> {
    let path = path.as_ref();
    read_tokens_from(BufReader::new(File::open(path)?), stem(path))
}

pub fn write_tokens(stream: &TokenStream, path: impl AsRef<Path>) -> Result<()> {
    write_tokens_to(stream, BufWriter::new(File::create(path)?))?;
    Ok(())
}

/// Peeks the payload kind of a file.
pub fn file_kind(path: impl AsRef<Path>) -> Result<u32> {
    let mut f = File::open(path)?;
    read_prefix(&mut f).map(|(kind, _)| kind)
}
