//! Trace files: one decode as JSON Lines.
//!
//! Line 1 is a header with the decoder config, the full vocabulary, its
//! fingerprint, the frame count, and the reference if one was attached.
//! Each middle line is one commit event. The last line carries the final
//! hypothesis with its emission frames and accumulated score, so a stored
//! trace reproduces the in-memory one exactly and `metrics` can recompute
//! the same report bit for bit.
//!
//! The score is written as a JSON number when finite. A path whose every
//! alternative hits a zero-probability entry ends at minus infinity, which
//! JSON cannot carry; that case is stored as null and read back as -inf.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use revdec::{
    CommitEvent, DecodeTrace64, DecoderConfig, FrameIndex, Hypothesis64, TokenId, Vocabulary,
};

#[derive(Debug, Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    blank_id: TokenId,
    bos_id: TokenId,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: DecoderConfig,
    vocab: VocabRepr,
    vocab_hash: String,
    frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FinalLine {
    #[serde(rename = "final")]
    tokens: Vec<TokenId>,
    emit_frames: Vec<FrameIndex>,
    score: Option<f64>,
}

pub fn to_jsonl(trace: &DecodeTrace64, vocab: &Vocabulary) -> String {
    let header = Header {
        config: trace.config.clone(),
        vocab: VocabRepr {
            tokens: vocab.tokens().to_vec(),
            blank_id: vocab.blank_id(),
            bos_id: vocab.bos_id(),
        },
        vocab_hash: format!("{:016x}", vocab.fingerprint()),
        frames: trace.source_frames,
        reference: trace.reference.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for commit in &trace.commits {
        out.push_str(&serde_json::to_string(commit).expect("commit serializes"));
        out.push('\n');
    }
    let score = trace.final_hypothesis.log_score;
    let last = FinalLine {
        tokens: trace.final_hypothesis.displayed().to_vec(),
        emit_frames: trace.final_hypothesis.displayed_emit_frames().to_vec(),
        score: score.is_finite().then_some(score),
    };
    out.push_str(&serde_json::to_string(&last).expect("final line serializes"));
    out.push('\n');
    out
}

pub fn from_jsonl(text: &str) -> Result<(DecodeTrace64, Vocabulary)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = match lines.next() {
        Some(line) => line,
        None => bail!("trace is empty"),
    };
    let header: Header =
        serde_json::from_str(first).context("trace line 1: invalid header")?;
    let vocab = Vocabulary::new(header.vocab.tokens, header.vocab.blank_id, header.vocab.bos_id)
        .context("trace header: invalid vocabulary")?;
    let expected_hash = format!("{:016x}", vocab.fingerprint());
    if header.vocab_hash != expected_hash {
        bail!(
            "trace header: vocab_hash {} does not match the stored vocabulary ({})",
            header.vocab_hash,
            expected_hash
        );
    }

    let mut commits: Vec<CommitEvent> = Vec::new();
    let mut final_line: Option<FinalLine> = None;
    for (idx, line) in lines {
        if final_line.is_some() {
            bail!("trace line {}: content after the final line", idx + 1);
        }
        if line.contains("\"final\"") {
            final_line = Some(
                serde_json::from_str(line)
                    .with_context(|| format!("trace line {}: invalid final line", idx + 1))?,
            );
        } else {
            commits.push(
                serde_json::from_str(line)
                    .with_context(|| format!("trace line {}: invalid commit", idx + 1))?,
            );
        }
    }
    let last = match final_line {
        Some(l) => l,
        None => bail!("trace has no final line"),
    };

    let mut tokens = Vec::with_capacity(last.tokens.len() + 1);
    tokens.push(vocab.bos_id());
    tokens.extend_from_slice(&last.tokens);
    let mut emit_frames = Vec::with_capacity(last.emit_frames.len() + 1);
    emit_frames.push(0);
    emit_frames.extend_from_slice(&last.emit_frames);

    let trace = DecodeTrace64 {
        config: header.config,
        commits,
        final_hypothesis: Hypothesis64 {
            tokens,
            log_score: last.score.unwrap_or(f64::NEG_INFINITY),
            emit_frames,
        },
        source_frames: header.frames,
        reference: header.reference,
    };
    trace.validate().context("trace fails validation")?;
    Ok((trace, vocab))
}

pub fn write_trace(path: &Path, trace: &DecodeTrace64, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, to_jsonl(trace, vocab))
        .with_context(|| format!("cannot write trace {}", path.display()))
}

pub fn read_trace(path: &Path) -> Result<(DecodeTrace64, Vocabulary)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read trace {}", path.display()))?;
    from_jsonl(&text).with_context(|| format!("in trace file {}", path.display()))
}
