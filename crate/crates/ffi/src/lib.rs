//! C ABI over the syltok library.
//!
//! Every fallible function returns a [`SyltokStatus`] and writes results
//! through out-pointers. On failure the message for the calling thread is
//! available from [`syltok_last_error_message`]. Handles are opaque and must
//! be released with the matching `*_free` function; freeing NULL is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use syltok::boundary::{detect_boundaries, BoundaryTrace, PeakConfig};
use syltok::codec::{decode_expand, encode, token_frequency, TokenStream, WSegPETemplate};
use syltok::eval::{prf, r_value};
use syltok::format;
use syltok::linalg::FrameMatrix;
use syltok::segmenter::{greedy_segment, refine, SegmentSet, SegmenterConfig};
use syltok::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyltokStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

/// Row-major frame matrix.
pub struct SyltokFrames(FrameMatrix);

/// Partition of a frame sequence into contiguous segments.
pub struct SyltokSegments(SegmentSet);

/// Syllabic token stream.
pub struct SyltokTokens(TokenStream);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("interior NULs removed")));
}

fn status_of(e: &Error) -> SyltokStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::FrameCountMismatch { .. } => SyltokStatus::DimensionMismatch,
        Error::Io(_) => SyltokStatus::Io,
        Error::BadMagic(_)
        | Error::UnsupportedVersion(_)
        | Error::WrongKind { .. }
        | Error::TruncatedHeader
        | Error::TruncatedPayload { .. }
        | Error::NonFinitePayload(_)
        | Error::TrailingBytes
        | Error::Json(_) => SyltokStatus::Format,
        _ => SyltokStatus::InvalidArgument,
    }
}

struct Failure(SyltokStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(SyltokStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> FfiResult) -> SyltokStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SyltokStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SyltokStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(SyltokStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message describing the last failure on this thread, or NULL if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn syltok_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `n_frames * dim` row-major values into a new frame matrix.
///
/// # Safety
/// `data` must point to `n_frames * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_new(
    data: *const f64,
    n_frames: usize,
    dim: usize,
    frame_rate_hz: f64,
    out: *mut *mut SyltokFrames,
) -> SyltokStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = n_frames
            .checked_mul(dim)
            .ok_or_else(|| Failure(SyltokStatus::InvalidArgument, "n_frames * dim overflows".into()))?;
        let values = slice_arg(data, len, "data")?.to_vec();
        let m = FrameMatrix::new(values, dim, frame_rate_hz, "")?;
        *out = boxed(SyltokFrames(m));
        Ok(())
    })
}

/// Reads a SYL2 frame file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_read(path: *const c_char, out: *mut *mut SyltokFrames) -> SyltokStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = format::read_frames(path_arg(path)?)?;
        *out = boxed(SyltokFrames(m));
        Ok(())
    })
}

/// Writes a SYL2 frame file.
///
/// # Safety
/// `frames` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_write(frames: *const SyltokFrames, path: *const c_char) -> SyltokStatus {
    guard(|| {
        let f = deref(frames, "frames")?;
        format::write_frames(&f.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `frames` must be a live handle; `n_frames` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_shape(
    frames: *const SyltokFrames,
    n_frames: *mut usize,
    dim: *mut usize,
) -> SyltokStatus {
    guard(|| {
        let f = deref(frames, "frames")?;
        *out_ptr(n_frames, "n_frames")? = f.0.n_frames();
        *out_ptr(dim, "dim")? = f.0.dim();
        Ok(())
    })
}

/// Copies the row-major values into `out`, which must hold exactly
/// `n_frames * dim` doubles.
///
/// # Safety
/// `frames` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_copy_data(
    frames: *const SyltokFrames,
    out: *mut f64,
    len: usize,
) -> SyltokStatus {
    guard(|| {
        let f = deref(frames, "frames")?;
        let src = f.0.as_slice();
        if len != src.len() {
            return Err(Error::DimensionMismatch { expected: src.len(), actual: len }.into());
        }
        if len > 0 {
            if out.is_null() {
                return Err(null("out"));
            }
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(src);
        }
        Ok(())
    })
}

/// # Safety
/// `frames` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn syltok_frames_free(frames: *mut SyltokFrames) {
    if !frames.is_null() {
        drop(Box::from_raw(frames));
    }
}

/// Single greedy centroid sweep.
///
/// # Safety
/// `frames` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_greedy_segment(
    frames: *const SyltokFrames,
    merge_threshold: f64,
    out: *mut *mut SyltokSegments,
) -> SyltokStatus {
    guard(|| {
        let f = deref(frames, "frames")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(SyltokSegments(greedy_segment(&f.0, merge_threshold)));
        Ok(())
    })
}

/// Greedy sweep followed by refinement.
///
/// # Safety
/// `frames` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_segment(
    frames: *const SyltokFrames,
    merge_threshold: f64,
    refine_threshold: f64,
    refine_min_ms: f64,
    out: *mut *mut SyltokSegments,
) -> SyltokStatus {
    guard(|| {
        let f = deref(frames, "frames")?;
        let out = out_ptr(out, "out")?;
        let cfg = SegmenterConfig { merge_threshold, refine_threshold, refine_min_ms, normalize: false };
        *out = boxed(SyltokSegments(cfg.segment(&f.0)));
        Ok(())
    })
}

/// Merges short segments into similar neighbors.
///
/// # Safety
/// `segments` and `frames` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_refine(
    segments: *const SyltokSegments,
    frames: *const SyltokFrames,
    refine_threshold: f64,
    min_ms: f64,
    out: *mut *mut SyltokSegments,
) -> SyltokStatus {
    guard(|| {
        let s = deref(segments, "segments")?;
        let f = deref(frames, "frames")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(SyltokSegments(refine(&s.0, &f.0, refine_threshold, min_ms)?));
        Ok(())
    })
}

/// Segments from peaks of a boundary-probability trace.
///
/// # Safety
/// `probs` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_detect_boundaries(
    probs: *const f64,
    len: usize,
    min_peak: f64,
    min_prominence: f64,
    hard_prob: f64,
    out: *mut *mut SyltokSegments,
) -> SyltokStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = PeakConfig { min_peak, min_prominence, hard_prob };
        cfg.validate()?;
        let trace = BoundaryTrace::new(slice_arg(probs, len, "probs")?.to_vec())?;
        *out = boxed(SyltokSegments(detect_boundaries(&trace, &cfg)));
        Ok(())
    })
}

/// Number of segments; 0 for NULL.
///
/// # Safety
/// `segments` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn syltok_segments_len(segments: *const SyltokSegments) -> usize {
    segments.as_ref().map_or(0, |s| s.0.len())
}

/// Half-open frame range `[start, end)` of segment `index`.
///
/// # Safety
/// `segments` must be a live handle; `start` and `end` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_segments_get(
    segments: *const SyltokSegments,
    index: usize,
    start: *mut usize,
    end: *mut usize,
) -> SyltokStatus {
    guard(|| {
        let s = deref(segments, "segments")?;
        let seg = s.0.segments().get(index).ok_or_else(|| {
            Failure(SyltokStatus::InvalidArgument, format!("segment index {index} out of range ({})", s.0.len()))
        })?;
        *out_ptr(start, "start")? = seg.start;
        *out_ptr(end, "end")? = seg.end;
        Ok(())
    })
}

/// # Safety
/// `segments` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn syltok_segments_free(segments: *mut SyltokSegments) {
    if !segments.is_null() {
        drop(Box::from_raw(segments));
    }
}

/// One token per segment from mean-pooled content and acoustic frames.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_encode(
    content: *const SyltokFrames,
    acoustic: *const SyltokFrames,
    segments: *const SyltokSegments,
    out: *mut *mut SyltokTokens,
) -> SyltokStatus {
    guard(|| {
        let c = deref(content, "content")?;
        let a = deref(acoustic, "acoustic")?;
        let s = deref(segments, "segments")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(SyltokTokens(encode(&c.0, &a.0, &s.0)?));
        Ok(())
    })
}

/// Expands tokens to frame rate with a sinusoidal positional template of
/// `template_dim` columns.
///
/// # Safety
/// `tokens` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_decode(
    tokens: *const SyltokTokens,
    template_dim: usize,
    template_seed: u64,
    out: *mut *mut SyltokFrames,
) -> SyltokStatus {
    guard(|| {
        let t = deref(tokens, "tokens")?;
        let out = out_ptr(out, "out")?;
        let template = WSegPETemplate::sinusoidal(template_dim, template_seed);
        *out = boxed(SyltokFrames(decode_expand(&t.0, &template)?));
        Ok(())
    })
}

/// Tokens per second of audio.
///
/// # Safety
/// `tokens` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_token_frequency(tokens: *const SyltokTokens, out: *mut f64) -> SyltokStatus {
    guard(|| {
        let t = deref(tokens, "tokens")?;
        *out_ptr(out, "out")? = token_frequency(&t.0)?;
        Ok(())
    })
}

/// Number of tokens; 0 for NULL.
///
/// # Safety
/// `tokens` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn syltok_tokens_len(tokens: *const SyltokTokens) -> usize {
    tokens.as_ref().map_or(0, |t| t.0.len())
}

/// Duration in frames of token `index`.
///
/// # Safety
/// `tokens` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_tokens_duration(
    tokens: *const SyltokTokens,
    index: usize,
    out: *mut u32,
) -> SyltokStatus {
    guard(|| {
        let t = deref(tokens, "tokens")?;
        let tok = t.0.tokens().get(index).ok_or_else(|| {
            Failure(SyltokStatus::InvalidArgument, format!("token index {index} out of range ({})", t.0.len()))
        })?;
        *out_ptr(out, "out")? = tok.duration_frames;
        Ok(())
    })
}

/// Reads a SYL2 token file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_tokens_read(path: *const c_char, out: *mut *mut SyltokTokens) -> SyltokStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(SyltokTokens(format::read_tokens(path_arg(path)?)?));
        Ok(())
    })
}

/// Writes a SYL2 token file.
///
/// # Safety
/// `tokens` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn syltok_tokens_write(tokens: *const SyltokTokens, path: *const c_char) -> SyltokStatus {
    guard(|| {
        let t = deref(tokens, "tokens")?;
        format::write_tokens(&t.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `tokens` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn syltok_tokens_free(tokens: *mut SyltokTokens) {
    if !tokens.is_null() {
        drop(Box::from_raw(tokens));
    }
}

/// Precision, recall and F1 (fractions) from match counts.
///
/// # Safety
/// Out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_prf(
    n_hit: usize,
    n_ref: usize,
    n_hyp: usize,
    precision: *mut f64,
    recall: *mut f64,
    f1: *mut f64,
) -> SyltokStatus {
    guard(|| {
        if n_hit > n_ref.min(n_hyp) {
            return Err(Failure(SyltokStatus::InvalidArgument, "n_hit exceeds n_ref or n_hyp".into()));
        }
        let p = prf(n_hit, n_ref, n_hyp);
        *out_ptr(precision, "precision")? = p.precision;
        *out_ptr(recall, "recall")? = p.recall;
        *out_ptr(f1, "f1")? = p.f1;
        Ok(())
    })
}

/// R-value from precision and recall (fractions).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn syltok_r_value(precision: f64, recall: f64, out: *mut f64) -> SyltokStatus {
    guard(|| {
        *out_ptr(out, "out")? = r_value(precision, recall)?;
        Ok(())
    })
}
