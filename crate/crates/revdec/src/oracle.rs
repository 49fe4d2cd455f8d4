//! Exhaustive reference decoders for validating the beam search on tiny
//! instances.
//!
//! The oracle shares the scoring source and the ranking comparator with the
//! streaming decoder (so scores accumulate in the identical floating-point
//! order), but enumerates complete emission paths directly, with no beam,
//! merging, or truncation.

use std::collections::HashMap;

use thiserror::Error;

use crate::beam::{compare_ranked, Hypothesis};
use crate::config::DecoderConfig;
use crate::decoder::{self, blank_step, emit_step, CommitPolicy, DecodeError, PrunePolicy};
use crate::metrics::normalized_erasure;
use crate::scalar::{self, Scalar};
use crate::scoring::{ScoringError, ScoringSource};
use crate::vocab::{FrameIndex, TokenId};

/// Hard ceiling on `vocab_size ^ (frames * max_symbols_per_frame)`, the
/// upper bound on enumerated paths.
pub const SEARCH_SPACE_LIMIT: f64 = 1e7;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("search space bound {bound:.3e} exceeds limit {limit:.0e}; refusing exhaustive enumeration")]
    SearchSpaceTooLarge { bound: f64, limit: f64 },
    #[error("scoring: {0}")]
    Scoring(#[from] ScoringError),
    #[error("decode: {0}")]
    Decode(DecodeError),
}

fn check_bound(src_vocab: usize, frames: usize, symbol_cap: usize) -> Result<(), OracleError> {
    let bound = (src_vocab as f64).powf((frames * symbol_cap) as f64);
    if bound > SEARCH_SPACE_LIMIT {
        return Err(OracleError::SearchSpaceTooLarge { bound, limit: SEARCH_SPACE_LIMIT });
    }
    Ok(())
}

/// The best hypothesis over *all* legal emission paths, under the decoder's
/// exact scoring and tie-break. Refuses instances whose path bound exceeds
/// [`SEARCH_SPACE_LIMIT`].
pub fn exhaustive_best<S: Scalar>(
    src: &dyn ScoringSource<S>,
    cfg: &DecoderConfig,
) -> Result<Hypothesis<S>, OracleError> {
    check_bound(src.vocab().size(), src.frame_count(), cfg.max_symbols_per_frame)?;
    let mut walker = Walker {
        src,
        frame_count: src.frame_count(),
        symbol_cap: cfg.max_symbols_per_frame,
        word_reward: scalar::from_f64(cfg.word_reward),
        blank: src.vocab().blank_id() as usize,
        rows: HashMap::new(),
        best: None,
    };
    let mut tokens = vec![src.vocab().bos_id()];
    let mut emit_frames = vec![0];
    walker.walk(1, 0, &mut tokens, &mut emit_frames, S::zero())?;
    Ok(walker.best.expect("the all-blank path always exists"))
}

struct Walker<'a, S: Scalar> {
    src: &'a dyn ScoringSource<S>,
    frame_count: usize,
    symbol_cap: usize,
    word_reward: S,
    blank: usize,
    rows: HashMap<(FrameIndex, Vec<TokenId>), Vec<S>>,
    best: Option<Hypothesis<S>>,
}

impl<S: Scalar> Walker<'_, S> {
    fn row(&mut self, frame: FrameIndex, context: &[TokenId]) -> Result<Vec<S>, ScoringError> {
        let tail_start = context.len().saturating_sub(self.src.context_order());
        let key = (frame, context[tail_start..].to_vec());
        if let Some(row) = self.rows.get(&key) {
            return Ok(row.clone());
        }
        let row = self.src.score_next(frame, &key.1)?;
        self.rows.insert(key, row.clone());
        Ok(row)
    }

    fn walk(
        &mut self,
        frame: FrameIndex,
        emitted: usize,
        tokens: &mut Vec<TokenId>,
        emit_frames: &mut Vec<FrameIndex>,
        score: S,
    ) -> Result<(), ScoringError> {
        if frame > self.frame_count {
            let candidate = Hypothesis {
                tokens: tokens.clone(),
                log_score: score,
                emit_frames: emit_frames.clone(),
            };
            let better = match &self.best {
                None => true,
                Some(best) => compare_ranked(&candidate, best) == std::cmp::Ordering::Less,
            };
            if better {
                self.best = Some(candidate);
            }
            return Ok(());
        }
        let row = self.row(frame, tokens)?;
        self.walk(frame + 1, 0, tokens, emit_frames, blank_step(score, row[self.blank]))?;
        if emitted < self.symbol_cap {
            for (tok, &logp) in row.iter().enumerate() {
                if tok == self.blank {
                    continue;
                }
                tokens.push(tok as TokenId);
                emit_frames.push(frame);
                self.walk(
                    frame,
                    emitted + 1,
                    tokens,
                    emit_frames,
                    emit_step(score, logp, self.word_reward),
                )?;
                tokens.pop();
                emit_frames.pop();
            }
        }
        Ok(())
    }
}

/// One point of the revision/stability frontier: the erasure rate and final
/// score of a full decode run at a given window.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint<S> {
    pub revision_window: usize,
    pub ne: f64,
    pub final_score: S,
}

/// Decodes once per revision window in `0..=L`, where `L` is the final
/// length of the unconstrained decode, and reports (window, erasure rate,
/// final score) for each. Subject to the same size refusal as
/// [`exhaustive_best`] since it is an exhaustive sweep utility for tiny
/// instances.
pub fn revision_frontier<S: Scalar>(
    src: &dyn ScoringSource<S>,
    cfg: &DecoderConfig,
    commit: CommitPolicy,
) -> Result<Vec<FrontierPoint<S>>, OracleError> {
    check_bound(src.vocab().size(), src.frame_count(), cfg.max_symbols_per_frame)?;
    let unconstrained = decoder::decode_stream(src, cfg, commit, PrunePolicy::None, None)
        .map_err(OracleError::Decode)?;
    let max_window = unconstrained.final_hypothesis.displayed().len();
    let mut points = Vec::with_capacity(max_window + 1);
    for window in 0..=max_window {
        let mut windowed_cfg = cfg.clone();
        windowed_cfg.revision_window = Some(window);
        let trace =
            decoder::decode_stream(src, &windowed_cfg, commit, PrunePolicy::RevisionWindow, None)
                .map_err(OracleError::Decode)?;
        points.push(FrontierPoint {
            revision_window: window,
            ne: normalized_erasure(&trace),
            final_score: trace.final_hypothesis.log_score,
        });
    }
    Ok(points)
}
