//! Stability, latency, and quality metrics over decode traces.
//!
//! All metrics are pure functions of a [`DecodeTrace`], so recomputing them
//! from a serialized trace reproduces the decode-time report bit for bit.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::trace::DecodeTrace;
use crate::vocab::{longest_common_prefix, FrameIndex, TokenId, Vocabulary};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("average lagging is undefined for an empty final output")]
    EmptyFinal,
}

/// Tokens of `prev` that `next` withdraws: everything in `prev` past the
/// longest common prefix of the two displays.
pub fn erasure(prev: &[TokenId], next: &[TokenId]) -> usize {
    prev.len() - longest_common_prefix(prev, next)
}

/// Total withdrawn tokens across adjacent commits.
pub fn erased_total<S: Scalar>(trace: &DecodeTrace<S>) -> usize {
    trace
        .commits
        .windows(2)
        .map(|pair| erasure(&pair[0].displayed, &pair[1].displayed))
        .sum()
}

/// Withdrawn tokens per token of final output. An empty final with no
/// erasure is a clean empty decode (0); an empty final after erasing
/// something is degenerate and reported as +infinity.
pub fn normalized_erasure<S: Scalar>(trace: &DecodeTrace<S>) -> f64 {
    let erased = erased_total(trace);
    let final_len = trace.final_hypothesis.displayed().len();
    if final_len > 0 {
        erased as f64 / final_len as f64
    } else if erased == 0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Erasure sizes across adjacent commits, bucketed by size. Zero-erasure
/// transitions land in bucket 0; a single-commit trace has no transitions
/// and yields an empty histogram.
pub fn revision_histogram<S: Scalar>(trace: &DecodeTrace<S>) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for pair in trace.commits.windows(2) {
        *hist.entry(erasure(&pair[0].displayed, &pair[1].displayed)).or_insert(0) += 1;
    }
    hist
}

/// Frame at which each final token was finalized: the earliest commit from
/// which the token is continuously displayed, at its position and with its
/// final value, through the end of the stream. A token that was shown,
/// withdrawn, and shown again counts from its last reappearance.
pub fn finalization_frames<S: Scalar>(trace: &DecodeTrace<S>) -> Result<Vec<FrameIndex>, MetricsError> {
    let final_tokens = trace.final_hypothesis.displayed();
    if final_tokens.is_empty() {
        return Err(MetricsError::EmptyFinal);
    }
    let mut frames = Vec::with_capacity(final_tokens.len());
    for (pos, &tok) in final_tokens.iter().enumerate() {
        let mut frame = trace
            .commits
            .last()
            .expect("a trace with a non-empty final has commits")
            .frame_index;
        for commit in trace.commits.iter().rev() {
            if commit.displayed.len() > pos && commit.displayed[pos] == tok {
                frame = commit.frame_index;
            } else {
                break;
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Average lagging of one decode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lagging {
    pub frames: f64,
    pub ms: f64,
}

/// Mean finalization delay against an ideal decoder that emits at a constant
/// rate of `final_length / source_frames` tokens per frame:
///
/// al_frames = (1/tau) * sum_{t=1..tau} (g(t) - (t-1)/r)
///
/// where g(t) is the finalization frame of token t, r the constant rate, and
/// tau the first position finalized only when the stream ended (or the full
/// length if none was). Milliseconds scale by the config's frame span.
pub fn average_lagging<S: Scalar>(trace: &DecodeTrace<S>) -> Result<Lagging, MetricsError> {
    let g = finalization_frames(trace)?;
    let m = g.len();
    let total_frames = trace.source_frames;
    let rate = m as f64 / total_frames as f64;
    let tau = g
        .iter()
        .position(|&gf| gf == total_frames)
        .map(|i| i + 1)
        .unwrap_or(m);
    let mut sum = 0.0;
    for (idx, &gf) in g.iter().take(tau).enumerate() {
        sum += gf as f64 - idx as f64 / rate;
    }
    let frames = sum / tau as f64;
    Ok(Lagging { frames, ms: frames * trace.config.frame_span_ms })
}

/// Maximum n-gram order of [`bleu`].
pub const BLEU_MAX_ORDER: usize = 4;

/// Corpus-of-one BLEU with add-1 smoothing on orders >= 2 and the standard
/// brevity penalty. Scores are on the 0..=100 scale; an empty candidate
/// scores 0. The reference must be non-empty.
pub fn bleu<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> f64 {
    assert!(!reference.is_empty(), "reference must be non-empty");
    if candidate.is_empty() {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 1..=BLEU_MAX_ORDER {
        let total = candidate.len().saturating_sub(n - 1);
        let matched = clipped_matches(candidate, reference, n);
        let (num, den) = if n >= 2 {
            ((matched + 1) as f64, (total + 1) as f64)
        } else {
            (matched as f64, total as f64)
        };
        product *= num / den;
    }
    let bp = (1.0 - reference.len() as f64 / candidate.len() as f64).exp().min(1.0);
    100.0 * bp * product.powf(1.0 / BLEU_MAX_ORDER as f64)
}

fn clipped_matches<T: AsRef<str>>(candidate: &[T], reference: &[T], n: usize) -> usize {
    if candidate.len() < n {
        return 0;
    }
    let mut ref_counts: HashMap<Vec<&str>, usize> = HashMap::new();
    if reference.len() >= n {
        for gram in reference.windows(n) {
            *ref_counts
                .entry(gram.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    let mut cand_counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for gram in candidate.windows(n) {
        *cand_counts
            .entry(gram.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum()
}

/// Flat metrics summary of one decode. Serializes with exactly these keys in
/// this order; non-finite values (degenerate erasure, lagging of an empty
/// output) serialize as null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ne: f64,
    pub al_ms: f64,
    pub al_frames: f64,
    pub revision_histogram: BTreeMap<usize, usize>,
    pub bleu: Option<f64>,
    pub erased_total: usize,
    pub final_length: usize,
    /// True when something was erased yet the final output is empty, making
    /// `ne` an infinity sentinel. Not part of the serialized report.
    #[serde(skip)]
    pub degenerate_erasure: bool,
}

impl MetricsReport {
    /// Computes the full report. `vocab` is needed to map the final token
    /// ids to strings for BLEU; without it (or without a reference in the
    /// trace) `bleu` is null.
    pub fn from_trace<S: Scalar>(trace: &DecodeTrace<S>, vocab: Option<&Vocabulary>) -> Self {
        let ne = normalized_erasure(trace);
        let lagging = average_lagging(trace).unwrap_or(Lagging { frames: f64::NAN, ms: f64::NAN });
        let bleu_score = match (&trace.reference, vocab) {
            (Some(reference), Some(v)) if !reference.is_empty() => {
                let candidate = v.strings_for(trace.final_hypothesis.displayed());
                Some(bleu(&candidate, reference))
            }
            _ => None,
        };
        Self {
            ne,
            al_ms: lagging.ms,
            al_frames: lagging.frames,
            revision_histogram: revision_histogram(trace),
            bleu: bleu_score,
            erased_total: erased_total(trace),
            final_length: trace.final_hypothesis.displayed().len(),
            degenerate_erasure: ne.is_infinite(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::Hypothesis;
    use crate::config::DecoderConfig;
    use crate::trace::CommitEvent;

    fn commit(frame: FrameIndex, displayed: &[TokenId]) -> CommitEvent {
        CommitEvent { frame_index: frame, displayed: displayed.to_vec() }
    }

    fn trace_of(commits: Vec<CommitEvent>, source_frames: usize) -> DecodeTrace<f64> {
        let displayed = commits.last().map(|c| c.displayed.clone()).unwrap_or_default();
        let mut tokens = vec![1u32];
        tokens.extend_from_slice(&displayed);
        DecodeTrace {
            config: DecoderConfig::default(),
            commits,
            final_hypothesis: Hypothesis {
                tokens: tokens.clone(),
                log_score: -1.0,
                emit_frames: (0..tokens.len()).collect(),
            },
            source_frames,
            reference: None,
        }
    }

    #[test]
    fn erasure_counts_withdrawn_suffix() {
        assert_eq!(erasure(&[7, 3, 2], &[7, 3, 2, 9]), 0);
        assert_eq!(erasure(&[1, 2, 3], &[1, 9, 3]), 2);
        assert_eq!(erasure(&[5], &[6, 7, 8]), 1);
        assert_eq!(erasure(&[], &[1]), 0);
    }

    #[test]
    fn mixed_revision_stream_worked_example() {
        // Four commits: a 1-token guess fully replaced, a pure extension,
        // then a full 5-token rewrite into the 9-token final.
        let c1 = commit(1, &[2]);
        let c2 = commit(2, &[3, 4, 5]);
        let c3 = commit(3, &[3, 4, 5, 6, 7]);
        let c4 = commit(4, &[8, 9, 7, 10, 11, 12, 13, 4, 5]);
        let t = trace_of(vec![c1, c2, c3, c4], 4);
        assert_eq!(t.validate(), Ok(()));
        assert_eq!(erased_total(&t), 6);
        let ne = normalized_erasure(&t);
        assert!((ne - 2.0 / 3.0).abs() <= 1e-9, "ne = {ne}");
        let hist = revision_histogram(&t);
        assert_eq!(hist, BTreeMap::from([(0, 1), (1, 1), (5, 1)]));
        let report = MetricsReport::from_trace(&t, None);
        assert_eq!(report.erased_total, 6);
        assert_eq!(report.final_length, 9);
        assert!(!report.degenerate_erasure);
    }

    #[test]
    fn ne_zero_for_pure_prefix_chain_and_empty_decode() {
        let t = trace_of(vec![commit(2, &[4]), commit(4, &[4, 5])], 4);
        assert_eq!(normalized_erasure(&t), 0.0);
        let empty = trace_of(vec![commit(0, &[])], 0);
        assert_eq!(normalized_erasure(&empty), 0.0);
    }

    #[test]
    fn ne_degenerate_empty_final_after_erasure() {
        let t = trace_of(vec![commit(1, &[4, 5]), commit(2, &[])], 2);
        assert!(normalized_erasure(&t).is_infinite());
        let report = MetricsReport::from_trace(&t, None);
        assert!(report.degenerate_erasure);
        // Infinity has no JSON representation; the sentinel serializes null.
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"ne\":null"), "{json}");
    }

    #[test]
    fn lagging_hand_example() {
        // Two tokens over four frames, finalized at frames 2 and 4, 40 ms
        // per frame: lag = ((2 - 0/0.5) + (4 - 1/0.5)) / 2 = 2 frames.
        let t = trace_of(vec![commit(2, &[2]), commit(4, &[2, 3])], 4);
        let lag = average_lagging(&t).unwrap();
        assert!((lag.frames - 2.0).abs() <= 1e-9);
        assert!((lag.ms - 80.0).abs() <= 1e-9);
    }

    #[test]
    fn lagging_everything_at_stream_end() {
        // All ten tokens appear only at the last frame of a 10-frame stream:
        // tau = 1 and the lag is the full stream length.
        let toks: Vec<TokenId> = (2..12).collect();
        let t = trace_of(vec![commit(10, &toks)], 10);
        let lag = average_lagging(&t).unwrap();
        assert!((lag.frames - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn lagging_constant_rate_decoder() {
        // g(t) = t * (T / m) gives a constant lag of T / m frames.
        let t = trace_of(
            vec![
                commit(2, &[2]),
                commit(4, &[2, 3]),
                commit(6, &[2, 3, 4]),
                commit(8, &[2, 3, 4, 5]),
            ],
            8,
        );
        let lag = average_lagging(&t).unwrap();
        assert!((lag.frames - 2.0).abs() <= 1e-9);
    }

    #[test]
    fn lagging_scales_with_frame_span() {
        let mut t = trace_of(vec![commit(2, &[2]), commit(4, &[2, 3])], 4);
        t.config.frame_span_ms = 80.0;
        let lag = average_lagging(&t).unwrap();
        assert!((lag.ms - 160.0).abs() <= 1e-9);
    }

    #[test]
    fn lagging_empty_final_is_an_error() {
        let t = trace_of(vec![commit(0, &[])], 0);
        assert_eq!(average_lagging(&t), Err(MetricsError::EmptyFinal));
        let report = MetricsReport::from_trace(&t, None);
        assert!(report.al_frames.is_nan() && report.al_ms.is_nan());
    }

    #[test]
    fn finalization_uses_last_stable_appearance() {
        // Token shown at frame 1, withdrawn at 2, shown again at 3: it
        // counts as finalized at 3.
        let t = trace_of(vec![commit(1, &[5]), commit(2, &[]), commit(3, &[5])], 3);
        assert_eq!(finalization_frames(&t).unwrap(), vec![3]);
    }

    #[test]
    fn histogram_of_single_commit_is_empty() {
        let t = trace_of(vec![commit(3, &[2, 3])], 3);
        assert!(revision_histogram(&t).is_empty());
    }

    #[test]
    fn histogram_counts_transitions() {
        let t = trace_of(
            vec![commit(1, &[2]), commit(2, &[2, 3]), commit(3, &[2, 4]), commit(4, &[2, 4, 5])],
            4,
        );
        let hist = revision_histogram(&t);
        assert_eq!(hist, BTreeMap::from([(0, 2), (1, 1)]));
        let transitions: usize = hist.values().sum();
        assert_eq!(transitions, t.commits.len() - 1);
    }

    fn words(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bleu_hand_example() {
        // p1 = 3/4, smoothed p2 = 3/4, p3 = 2/3, p4 = 1/2, BP = 1.
        let score = bleu(&words(&["a", "b", "c", "d"]), &words(&["a", "b", "c", "e"]));
        assert!((score - 65.80).abs() <= 0.05, "bleu = {score}");
        let exact = 100.0 * (0.75f64 * 0.75 * (2.0 / 3.0) * 0.5).powf(0.25);
        assert!((score - exact).abs() <= 1e-12);
    }

    #[test]
    fn bleu_identity_and_empty() {
        let r = words(&["x", "y", "z", "w", "v"]);
        assert!((bleu(&r, &r) - 100.0).abs() <= 1e-9);
        assert_eq!(bleu(&words(&[]), &r), 0.0);
    }

    #[test]
    fn bleu_brevity_penalty_applies() {
        let long_ref = words(&["a", "b", "c", "d", "e", "f"]);
        let short_cand = words(&["a", "b", "c"]);
        let with_bp = bleu(&short_cand, &long_ref);
        let bp = (1.0f64 - 6.0 / 3.0).exp();
        // Same n-gram precisions, penalized by exp(1 - |ref|/|cand|).
        assert!(with_bp < 100.0 * bp + 1e-9);
        assert!(with_bp > 0.0);
    }

    #[test]
    fn bleu_invariant_under_token_renaming() {
        let cand = words(&["a", "b", "a", "c"]);
        let reference = words(&["a", "b", "c", "c"]);
        let renamed_cand = words(&["q", "r", "q", "s"]);
        let renamed_ref = words(&["q", "r", "s", "s"]);
        assert_eq!(bleu(&cand, &reference), bleu(&renamed_cand, &renamed_ref));
    }

    #[test]
    fn bleu_clips_repeated_ngrams() {
        // Candidate repeats "a" five times, reference has it twice: clipped
        // unigram matches = 2.
        let cand = words(&["a", "a", "a", "a", "a"]);
        let reference = words(&["a", "a", "b"]);
        let score = bleu(&cand, &reference);
        let p1: f64 = 2.0 / 5.0;
        let p2: f64 = (1.0 + 1.0) / (4.0 + 1.0); // "a a" appears once in ref
        let p3: f64 = 1.0 / 4.0;
        let p4: f64 = 1.0 / 3.0;
        let expected = 100.0 * (p1 * p2 * p3 * p4).powf(0.25);
        assert!((score - expected).abs() <= 1e-12, "{score} vs {expected}");
    }

    #[test]
    fn report_serializes_in_contract_order() {
        // Single commit: the histogram is empty, so every quoted name in the
        // JSON is a top-level key.
        let t = trace_of(vec![commit(4, &[2, 3])], 4);
        let report = MetricsReport::from_trace(&t, None);
        let json = serde_json::to_string(&report).unwrap();
        let keys: Vec<&str> = json
            .match_indices('"')
            .collect::<Vec<_>>()
            .chunks(2)
            .filter_map(|pair| {
                let start = pair[0].0 + 1;
                let end = pair[1].0;
                let key = &json[start..end];
                json[end + 1..].starts_with(':').then_some(key)
            })
            .collect();
        assert_eq!(
            keys,
            vec!["ne", "al_ms", "al_frames", "revision_histogram", "bleu", "erased_total", "final_length"]
        );
    }

    #[test]
    fn report_bleu_needs_reference_and_vocab() {
        let vocab = Vocabulary::synthetic(6);
        let mut t = trace_of(vec![commit(2, &[2]), commit(4, &[2, 3])], 4);
        assert_eq!(MetricsReport::from_trace(&t, Some(&vocab)).bleu, None);
        t.reference = Some(words(&["w2", "w3"]));
        let report = MetricsReport::from_trace(&t, Some(&vocab));
        assert!((report.bleu.unwrap() - 100.0).abs() <= 1e-9);
        assert_eq!(MetricsReport::from_trace(&t, None).bleu, None);
    }
}
