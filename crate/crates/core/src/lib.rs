//! Syllabic speech tokens.
//!
//! Frame-level speech features are grouped into variable-length,
//! syllable-like segments. Each segment becomes one token carrying its
//! duration together with mean-pooled content and acoustic embeddings; the
//! decoder repeats tokens back to frame rate and appends a within-segment
//! positional code. Around the codec sit the segmentation algorithms, the
//! distillation-target math, boundary scoring and a timing harness.

pub mod bench;
pub mod boundary;
pub mod cli;
pub mod codec;
pub mod distill;
pub mod error;
pub mod eval;
pub mod format;
pub mod linalg;
pub mod segmenter;
pub mod synth;

pub use boundary::{bce_loss, boundary_targets, detect_boundaries, BoundaryTrace, PeakConfig};
pub use codec::{decode_expand, encode, token_frequency, wsegpe, SyllabicToken, TokenStream, WSegPETemplate};
pub use distill::{ema_update, framewise_mse, sample_merge_threshold, segment_average_targets, EmaState, StageConfig};
pub use error::{Error, Result};
pub use eval::{aggregate, match_boundaries, prf, r_value, Aggregation, BoundaryAnnotation, EvalReport};
pub use linalg::{cosine_sim, l2_normalize, similarity_matrix, FrameMatrix, SimilarityMatrix};
pub use segmenter::{filter_min_duration, greedy_segment, oracle_segment, refine, Segment, SegmentSet};
