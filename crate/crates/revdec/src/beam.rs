//! Hypotheses and the ranked, deduplicated beam.

use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

use crate::scalar::Scalar;
use crate::vocab::{FrameIndex, TokenId, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BeamError {
    #[error("beam must hold at least one hypothesis")]
    Empty,
    #[error("beam capacity must be >= 1")]
    ZeroCapacity,
}

/// One partial decode: the emitted token sequence (leading start token, no
/// blanks), its accumulated log score, and per-token emission frames.
///
/// `emit_frames[t]` is the frame at which `tokens[t]` was emitted on this
/// path; the start token carries frame 0. Both vectors always have equal
/// length and `emit_frames` is non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<S> {
    pub tokens: Vec<TokenId>,
    pub log_score: S,
    pub emit_frames: Vec<FrameIndex>,
}

impl<S: Scalar> Hypothesis<S> {
    /// Seed hypothesis: just the start token, log score 0.
    pub fn initial(vocab: &Vocabulary) -> Self {
        Self {
            tokens: vec![vocab.bos_id()],
            log_score: S::zero(),
            emit_frames: vec![0],
        }
    }

    /// The tokens shown to a consumer: everything after the start token.
    pub fn displayed(&self) -> &[TokenId] {
        if self.tokens.is_empty() {
            &[]
        } else {
            &self.tokens[1..]
        }
    }

    /// Emission frames aligned with [`Self::displayed`].
    pub fn displayed_emit_frames(&self) -> &[FrameIndex] {
        if self.emit_frames.is_empty() {
            &[]
        } else {
            &self.emit_frames[1..]
        }
    }
}

/// Deterministic beam order: log score descending, then token sequence
/// ascending, then emission frames ascending. A non-comparable score (NaN)
/// falls through to the structural tie-breaks so the order stays total.
pub fn compare_ranked<S: Scalar>(a: &Hypothesis<S>, b: &Hypothesis<S>) -> Ordering {
    match b.log_score.partial_cmp(&a.log_score) {
        Some(Ordering::Less) => Ordering::Less,
        Some(Ordering::Greater) => Ordering::Greater,
        Some(Ordering::Equal) | None => a
            .tokens
            .cmp(&b.tokens)
            .then_with(|| a.emit_frames.cmp(&b.emit_frames)),
    }
}

/// Ranked set of hypotheses, at most `capacity` of them, distinct by token
/// sequence. Always non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Beam<S> {
    entries: Vec<Hypothesis<S>>,
    capacity: usize,
}

impl<S: Scalar> Beam<S> {
    /// Beam holding only the seed hypothesis.
    pub fn initial(vocab: &Vocabulary, capacity: usize) -> Result<Self, BeamError> {
        Self::from_hypotheses(vec![Hypothesis::initial(vocab)], capacity)
    }

    /// Merges duplicate token sequences (best-ranked survives), sorts, and
    /// truncates to `capacity`.
    pub fn from_hypotheses(candidates: Vec<Hypothesis<S>>, capacity: usize) -> Result<Self, BeamError> {
        if capacity == 0 {
            return Err(BeamError::ZeroCapacity);
        }
        if candidates.is_empty() {
            return Err(BeamError::Empty);
        }
        let mut by_tokens: HashMap<Vec<TokenId>, Hypothesis<S>> = HashMap::with_capacity(candidates.len());
        for cand in candidates {
            match by_tokens.get_mut(&cand.tokens) {
                Some(kept) => {
                    if compare_ranked(&cand, kept) == Ordering::Less {
                        *kept = cand;
                    }
                }
                None => {
                    by_tokens.insert(cand.tokens.clone(), cand);
                }
            }
        }
        let mut entries: Vec<Hypothesis<S>> = by_tokens.into_values().collect();
        entries.sort_by(compare_ranked);
        entries.truncate(capacity);
        Ok(Self { entries, capacity })
    }

    /// Replaces the entry list with an already-ranked subset. The subset must
    /// be non-empty and is assumed to preserve the ranked order.
    pub(crate) fn with_entries(&self, entries: Vec<Hypothesis<S>>) -> Result<Self, BeamError> {
        if entries.is_empty() {
            return Err(BeamError::Empty);
        }
        Ok(Self { entries, capacity: self.capacity })
    }

    pub fn entries(&self) -> &[Hypothesis<S>] {
        &self.entries
    }

    pub fn best(&self) -> &Hypothesis<S> {
        &self.entries[0]
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyp(tokens: &[TokenId], score: f64) -> Hypothesis<f64> {
        Hypothesis {
            tokens: tokens.to_vec(),
            log_score: score,
            emit_frames: vec![0; tokens.len()],
        }
    }

    #[test]
    fn orders_by_score_then_tokens() {
        let beam = Beam::from_hypotheses(
            vec![hyp(&[1, 3], -2.0), hyp(&[1, 2], -2.0), hyp(&[1, 4], -1.0)],
            8,
        )
        .unwrap();
        let toks: Vec<_> = beam.entries().iter().map(|h| h.tokens.clone()).collect();
        assert_eq!(toks, vec![vec![1, 4], vec![1, 2], vec![1, 3]]);
    }

    #[test]
    fn merges_duplicates_keeping_best_score() {
        let beam = Beam::from_hypotheses(vec![hyp(&[1, 2], -3.0), hyp(&[1, 2], -1.5)], 8).unwrap();
        assert_eq!(beam.len(), 1);
        assert_eq!(beam.best().log_score, -1.5);
    }

    #[test]
    fn merge_tie_prefers_earlier_emission() {
        let mut a = hyp(&[1, 2], -1.0);
        a.emit_frames = vec![0, 3];
        let mut b = hyp(&[1, 2], -1.0);
        b.emit_frames = vec![0, 2];
        let beam = Beam::from_hypotheses(vec![a, b], 8).unwrap();
        assert_eq!(beam.best().emit_frames, vec![0, 2]);
    }

    #[test]
    fn truncates_to_capacity() {
        let beam = Beam::from_hypotheses(
            vec![hyp(&[1, 2], -1.0), hyp(&[1, 3], -2.0), hyp(&[1, 4], -3.0)],
            2,
        )
        .unwrap();
        assert_eq!(beam.len(), 2);
        assert_eq!(beam.entries()[1].tokens, vec![1, 3]);
    }

    #[test]
    fn rejects_empty_and_zero_capacity() {
        assert_eq!(Beam::<f64>::from_hypotheses(vec![], 4).unwrap_err(), BeamError::Empty);
        assert_eq!(
            Beam::from_hypotheses(vec![hyp(&[1], 0.0)], 0).unwrap_err(),
            BeamError::ZeroCapacity
        );
    }

    #[test]
    fn resorting_a_beam_is_a_noop() {
        let beam = Beam::from_hypotheses(
            vec![hyp(&[1, 2, 2], -2.0), hyp(&[1, 2], -2.0), hyp(&[1, 9], -0.5)],
            8,
        )
        .unwrap();
        let mut again = beam.entries().to_vec();
        again.sort_by(compare_ranked);
        assert_eq!(again, beam.entries());
    }

    #[test]
    fn nan_scores_fall_back_to_structural_order() {
        let beam = Beam::from_hypotheses(vec![hyp(&[1, 9], f64::NAN), hyp(&[1, 2], f64::NAN)], 8).unwrap();
        assert_eq!(beam.best().tokens, vec![1, 2]);
    }

    #[test]
    fn displayed_strips_start_token() {
        let h = hyp(&[1, 5, 7], -1.0);
        assert_eq!(h.displayed(), &[5, 7]);
        let seed = Hypothesis::<f64>::initial(&Vocabulary::synthetic(4));
        assert_eq!(seed.displayed(), &[] as &[TokenId]);
        assert_eq!(seed.emit_frames, vec![0]);
    }
}
