//! Posterior sources the decoder queries frame by frame.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::vocab::{FrameIndex, TokenId, Vocabulary};

pub mod lattice;
pub mod synthetic;

pub use lattice::{Lattice, LatticeError, LatticeSource};
pub use synthetic::{SyntheticSource, SyntheticSourceSpec, SyntheticSpecError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoringError {
    #[error("frame {frame} out of range, source has {frame_count} frames")]
    FrameOutOfRange { frame: FrameIndex, frame_count: usize },
}

/// Frame-conditional next-token distribution.
///
/// `score_next` returns natural-log probabilities over the full vocabulary
/// (blank included), one entry per token id. The distribution may depend on
/// at most the last `context_order()` tokens of `context`; callers may pass
/// the full emitted sequence or any suffix containing that tail. Sources are
/// immutable after construction and safe to share across threads.
pub trait ScoringSource<S: Scalar>: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    /// Number of frames in the stream. Queries accept frames `1..=frame_count`.
    fn frame_count(&self) -> usize;

    /// Maximum number of trailing context tokens the distribution can see.
    fn context_order(&self) -> usize;

    /// Log-probability row for `frame` given the emitted non-blank context.
    fn score_next(&self, frame: FrameIndex, context: &[TokenId]) -> Result<Vec<S>, ScoringError>;
}

/// The context tail a source may condition on: the last `order` tokens.
pub(crate) fn context_tail(context: &[TokenId], order: usize) -> &[TokenId] {
    &context[context.len().saturating_sub(order)..]
}

#[cfg(test)]
pub(crate) fn assert_normalized<S: Scalar>(row: &[S], tol: f64) {
    let sum: f64 = row.iter().map(|&l| crate::scalar::to_f64(l).exp()).sum();
    assert!(
        (sum - 1.0).abs() <= tol,
        "distribution sums to {sum}, outside 1 +/- {tol}"
    );
}
