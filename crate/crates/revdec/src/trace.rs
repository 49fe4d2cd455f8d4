//! Commit history of one streaming decode.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::Hypothesis;
use crate::config::DecoderConfig;
use crate::scalar::Scalar;
use crate::vocab::{FrameIndex, TokenId};

/// One display update: at the end of `frame`, the consumer-visible output is
/// replaced wholesale by `displayed` (start token already stripped).
///
/// For zero-frame streams the single forced commit carries frame 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitEvent {
    #[serde(rename = "frame")]
    pub frame_index: FrameIndex,
    #[serde(rename = "tokens")]
    pub displayed: Vec<TokenId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("trace must contain at least one commit")]
    NoCommits,
    #[error("commit frames must be strictly increasing: frame {later} follows frame {earlier}")]
    NonMonotoneCommits { earlier: FrameIndex, later: FrameIndex },
    #[error("last commit must display the final hypothesis")]
    FinalMismatch,
    #[error("source_frames {source_frames} is smaller than last commit frame {last_commit}")]
    FramesBeforeLastCommit { source_frames: usize, last_commit: FrameIndex },
    #[error("final hypothesis token/emission lengths differ: {tokens} vs {emit_frames}")]
    EmissionLengthMismatch { tokens: usize, emit_frames: usize },
    #[error("final hypothesis emission frames must be non-decreasing")]
    EmissionsNotMonotone,
}

/// Everything observable about one decode: the commit sequence, the final
/// hypothesis, and the settings that produced them. Metrics are pure
/// functions of this record.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeTrace<S> {
    pub config: DecoderConfig,
    pub commits: Vec<CommitEvent>,
    pub final_hypothesis: Hypothesis<S>,
    pub source_frames: usize,
    pub reference: Option<Vec<String>>,
}

impl<S: Scalar> DecodeTrace<S> {
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.commits.is_empty() {
            return Err(TraceError::NoCommits);
        }
        for pair in self.commits.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(TraceError::NonMonotoneCommits {
                    earlier: pair[0].frame_index,
                    later: pair[1].frame_index,
                });
            }
        }
        let last = self.commits.last().expect("non-empty checked above");
        if last.displayed != self.final_hypothesis.displayed() {
            return Err(TraceError::FinalMismatch);
        }
        if self.source_frames < last.frame_index {
            return Err(TraceError::FramesBeforeLastCommit {
                source_frames: self.source_frames,
                last_commit: last.frame_index,
            });
        }
        let h = &self.final_hypothesis;
        if h.tokens.len() != h.emit_frames.len() {
            return Err(TraceError::EmissionLengthMismatch {
                tokens: h.tokens.len(),
                emit_frames: h.emit_frames.len(),
            });
        }
        if h.emit_frames.windows(2).any(|w| w[1] < w[0]) {
            return Err(TraceError::EmissionsNotMonotone);
        }
        Ok(())
    }
}
