//! Decoder knobs shared by the streaming decoder, the oracle, and the CLI.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("beam_size must be >= 1")]
    ZeroBeam,
    #[error("chunk_size must be >= 1")]
    ZeroChunk,
    #[error("max_symbols_per_frame must be >= 1")]
    ZeroSymbolCap,
    #[error("frame_span_ms must be finite and > 0")]
    BadFrameSpan,
    #[error("word_reward must be finite")]
    BadWordReward,
}

/// Decode-time configuration.
///
/// `revision_window` is the number of trailing displayed tokens later output
/// may still revise; `None` leaves revisions unconstrained. `word_reward` is
/// added once per emitted non-blank token and never to blank steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub beam_size: usize,
    pub chunk_size: usize,
    pub revision_window: Option<usize>,
    pub word_reward: f64,
    pub max_symbols_per_frame: usize,
    pub frame_span_ms: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            beam_size: 7,
            chunk_size: 4,
            revision_window: None,
            word_reward: 1.0,
            max_symbols_per_frame: 5,
            frame_span_ms: 40.0,
        }
    }
}

impl DecoderConfig {
    /// Default word reward paired with a revision constraint: rewarding
    /// length is useful when free revision can undo greedy overcommitment,
    /// counterproductive when trailing output is locked down.
    pub fn default_word_reward(revision_window: Option<usize>) -> f64 {
        if revision_window.is_some() {
            0.0
        } else {
            1.0
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.beam_size == 0 {
            return Err(ConfigError::ZeroBeam);
        }
        if self.chunk_size == 0 {
            return Err(ConfigError::ZeroChunk);
        }
        if self.max_symbols_per_frame == 0 {
            return Err(ConfigError::ZeroSymbolCap);
        }
        if !(self.frame_span_ms.is_finite() && self.frame_span_ms > 0.0) {
            return Err(ConfigError::BadFrameSpan);
        }
        if !self.word_reward.is_finite() {
            return Err(ConfigError::BadWordReward);
        }
        Ok(())
    }
}
