//! Frame-synchronous streaming beam decoder with commit scheduling and
//! revision-window pruning.
//!
//! Per frame, every hypothesis is expanded over all legal emission sequences
//! for that frame: zero or more non-blank tokens (each re-queries the source
//! at the same frame with the grown context, capped at
//! `max_symbols_per_frame`), closed by exactly one blank that advances to
//! the next frame. The expanded pool is merged by token sequence, ranked,
//! and truncated to the beam size.
//!
//! Commits replace the consumer-visible output with the current top-1. The
//! commit schedule never touches the beam; only revision-window pruning
//! does, and only at commit points, after ranking.

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{Beam, BeamError, Hypothesis};
use crate::config::{ConfigError, DecoderConfig};
use crate::scalar::{self, Scalar};
use crate::scoring::{ScoringError, ScoringSource};
use crate::trace::{CommitEvent, DecodeTrace};
use crate::vocab::{FrameIndex, TokenId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("scoring: {0}")]
    Scoring(#[from] ScoringError),
    #[error("beam: {0}")]
    Beam(#[from] BeamError),
    #[error("revision_window prune policy requires revision_window in the config")]
    MissingRevisionWindow,
}

/// When the display is updated with the current top-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitPolicy {
    /// Commit after every frame.
    EveryFrame,
    /// Commit after frames that are multiples of `chunk_size`, plus a forced
    /// commit at the last frame.
    Chunk,
}

/// Whether the beam is filtered at commit points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrunePolicy {
    None,
    /// Drop ranked candidates whose tokens disagree with the just-committed
    /// top-1 outside its last `revision_window` tokens.
    RevisionWindow,
}

impl CommitPolicy {
    fn fires(self, frame: FrameIndex, chunk_size: usize) -> bool {
        match self {
            CommitPolicy::EveryFrame => true,
            CommitPolicy::Chunk => frame.is_multiple_of(chunk_size),
        }
    }
}

/// Per-emission score step, shared with the oracle so both accumulate in the
/// exact same order.
#[inline]
pub(crate) fn emit_step<S: Scalar>(score: S, log_p: S, word_reward: S) -> S {
    score + log_p + word_reward
}

/// Blank (frame-advance) score step. Blank never receives the word reward.
#[inline]
pub(crate) fn blank_step<S: Scalar>(score: S, log_p: S) -> S {
    score + log_p
}

/// True when `candidate` agrees with `best` on everything except `best`'s
/// last `revision_window` tokens: candidate[..L] == best[..L] for
/// L = max(0, |best| - revision_window). A candidate shorter than L cannot
/// agree. `best` always accepts itself.
pub fn accept(candidate: &[TokenId], best: &[TokenId], revision_window: usize) -> bool {
    let locked = best.len().saturating_sub(revision_window);
    candidate.len() >= locked && candidate[..locked] == best[..locked]
}

/// Keeps the ranked entries accepted against the beam's own top-1. The top-1
/// survives by construction, so the result is never empty; it may hold fewer
/// than `beam.capacity()` entries.
pub fn prune_revision_window<S: Scalar>(beam: &Beam<S>, revision_window: usize) -> Beam<S> {
    let best = beam.best().tokens.clone();
    let survivors: Vec<Hypothesis<S>> = beam
        .entries()
        .iter()
        .filter(|h| accept(&h.tokens, &best, revision_window))
        .cloned()
        .collect();
    beam.with_entries(survivors)
        .expect("top-1 accepts itself, survivors are never empty")
}

/// Expands every hypothesis over one frame and returns the merged, ranked,
/// truncated beam. Pure with respect to the source: rows for repeated
/// (frame, context-tail) queries are memoized per call.
pub fn expand_frame<S: Scalar>(
    beam: &Beam<S>,
    src: &dyn ScoringSource<S>,
    frame: FrameIndex,
    cfg: &DecoderConfig,
) -> Result<Beam<S>, DecodeError> {
    cfg.validate()?;
    let mut cache: RowCache<S> = HashMap::new();
    let mut pool: Vec<Hypothesis<S>> = Vec::new();
    let word_reward: S = scalar::from_f64(cfg.word_reward);
    for hyp in beam.entries() {
        let mut tokens = hyp.tokens.clone();
        let mut emit_frames = hyp.emit_frames.clone();
        walk_emissions(
            src,
            frame,
            cfg.max_symbols_per_frame,
            word_reward,
            &mut tokens,
            &mut emit_frames,
            hyp.log_score,
            0,
            &mut cache,
            &mut pool,
        )?;
    }
    Ok(Beam::from_hypotheses(pool, cfg.beam_size)?)
}

type RowCache<S> = HashMap<Vec<TokenId>, Rc<Vec<S>>>;

fn cached_row<S: Scalar>(
    src: &dyn ScoringSource<S>,
    frame: FrameIndex,
    context: &[TokenId],
    cache: &mut RowCache<S>,
) -> Result<Rc<Vec<S>>, ScoringError> {
    let tail_start = context.len().saturating_sub(src.context_order());
    let tail = &context[tail_start..];
    if let Some(row) = cache.get(tail) {
        return Ok(row.clone());
    }
    let row = Rc::new(src.score_next(frame, tail)?);
    cache.insert(tail.to_vec(), row.clone());
    Ok(row)
}

#[allow(clippy::too_many_arguments)]
fn walk_emissions<S: Scalar>(
    src: &dyn ScoringSource<S>,
    frame: FrameIndex,
    symbol_cap: usize,
    word_reward: S,
    tokens: &mut Vec<TokenId>,
    emit_frames: &mut Vec<FrameIndex>,
    score: S,
    emitted: usize,
    cache: &mut RowCache<S>,
    pool: &mut Vec<Hypothesis<S>>,
) -> Result<(), ScoringError> {
    let row = cached_row(src, frame, tokens, cache)?;
    let blank = src.vocab().blank_id() as usize;

    pool.push(Hypothesis {
        tokens: tokens.clone(),
        log_score: blank_step(score, row[blank]),
        emit_frames: emit_frames.clone(),
    });

    if emitted < symbol_cap {
        for tok in 0..src.vocab().size() {
            if tok == blank {
                continue;
            }
            tokens.push(tok as TokenId);
            emit_frames.push(frame);
            walk_emissions(
                src,
                frame,
                symbol_cap,
                word_reward,
                tokens,
                emit_frames,
                emit_step(score, row[tok], word_reward),
                emitted + 1,
                cache,
                pool,
            )?;
            tokens.pop();
            emit_frames.pop();
        }
    }
    Ok(())
}

/// Runs the full streaming decode and records every commit.
///
/// Commits fire per `commit` (with a forced final commit at the last frame)
/// and always carry the current top-1 in full; the display semantics is
/// replacement, never blind append. With `PrunePolicy::None` the commit
/// schedule provably cannot alter beam evolution. A zero-frame stream yields
/// one empty commit at frame 0 and an empty final hypothesis.
pub fn decode_stream<S: Scalar>(
    src: &dyn ScoringSource<S>,
    cfg: &DecoderConfig,
    commit: CommitPolicy,
    prune: PrunePolicy,
    reference: Option<Vec<String>>,
) -> Result<DecodeTrace<S>, DecodeError> {
    cfg.validate()?;
    let revision_window = match prune {
        PrunePolicy::None => None,
        PrunePolicy::RevisionWindow => {
            Some(cfg.revision_window.ok_or(DecodeError::MissingRevisionWindow)?)
        }
    };

    let frame_count = src.frame_count();
    let mut beam = Beam::initial(src.vocab(), cfg.beam_size)?;
    let mut commits: Vec<CommitEvent> = Vec::new();

    for frame in 1..=frame_count {
        beam = expand_frame(&beam, src, frame, cfg)?;
        if commit.fires(frame, cfg.chunk_size) || frame == frame_count {
            commits.push(CommitEvent {
                frame_index: frame,
                displayed: beam.best().displayed().to_vec(),
            });
            if let Some(rw) = revision_window {
                beam = prune_revision_window(&beam, rw);
            }
        }
    }

    if frame_count == 0 {
        commits.push(CommitEvent { frame_index: 0, displayed: Vec::new() });
    }

    Ok(DecodeTrace {
        config: cfg.clone(),
        commits,
        final_hypothesis: beam.best().clone(),
        source_frames: frame_count,
        reference,
    })
}
