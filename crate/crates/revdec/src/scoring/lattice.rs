//! Text lattice files: replayable frame-by-frame posterior rows.
//!
//! Format (UTF-8, one record per line):
//!
//! ```text
//! LATTICE v1 N=<vocab> T=<frames> K=<context order> BLANK=<id> BOS=<id>
//! VOCAB <token 0> <token 1> ...
//! DEFAULT <p0> <p1> ...
//! ROW f=<frame> ctx=<ids comma-separated, or -> <p0> <p1> ...
//! ```
//!
//! Probabilities are decimal and each row (DEFAULT included) must sum to 1
//! within 1e-6. Lookups fall back to the DEFAULT row when no ROW matches the
//! query's context tail exactly. The writer emits rows sorted by (frame,
//! context), so `save(load(f)) == f` for files this module wrote.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::scalar::{self, Scalar};
use crate::vocab::{FrameIndex, TokenId, VocabError, Vocabulary};

use super::{context_tail, ScoringError, ScoringSource};

const NORMALIZATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: entry {entry}: {msg}")]
    Entry { line: usize, entry: usize, msg: String },
    #[error("line {line}: row sums to {sum}, must be 1 within {tol}")]
    NotNormalized { line: usize, sum: f64, tol: f64 },
    #[error("line {line}: duplicate row for frame {frame}, context {ctx:?}")]
    DuplicateRow { line: usize, frame: FrameIndex, ctx: Vec<TokenId> },
    #[error("line {line}: unknown directive {directive:?}")]
    UnknownDirective { line: usize, directive: String },
    #[error("missing {0} line")]
    MissingSection(&'static str),
    #[error("invalid vocabulary: {0}")]
    Vocab(#[from] VocabError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> LatticeError {
    LatticeError::Parse { line, msg: msg.into() }
}

/// Parsed lattice: vocabulary, context order, stored probability rows, and
/// the default row. Probabilities are kept as written so the canonical
/// writer round-trips exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    vocab: Vocabulary,
    frame_count: usize,
    context_order: usize,
    default_row: Vec<f64>,
    rows: BTreeMap<(FrameIndex, Vec<TokenId>), Vec<f64>>,
}

impl Lattice {
    pub fn new(
        vocab: Vocabulary,
        frame_count: usize,
        context_order: usize,
        default_row: Vec<f64>,
        rows: Vec<(FrameIndex, Vec<TokenId>, Vec<f64>)>,
    ) -> Result<Self, LatticeError> {
        let mut lat = Self {
            vocab,
            frame_count,
            context_order,
            default_row,
            rows: BTreeMap::new(),
        };
        check_row(&lat.default_row, lat.vocab.size(), 0)?;
        for (frame, ctx, probs) in rows {
            lat.insert_row(frame, ctx, probs, 0)?;
        }
        Ok(lat)
    }

    fn insert_row(
        &mut self,
        frame: FrameIndex,
        ctx: Vec<TokenId>,
        probs: Vec<f64>,
        line: usize,
    ) -> Result<(), LatticeError> {
        if frame == 0 || frame > self.frame_count {
            return Err(parse_err(line, format!("frame {frame} out of range 1..={}", self.frame_count)));
        }
        if ctx.len() > self.context_order {
            return Err(parse_err(
                line,
                format!("context has {} tokens, order is {}", ctx.len(), self.context_order),
            ));
        }
        for &t in &ctx {
            if (t as usize) >= self.vocab.size() {
                return Err(parse_err(line, format!("context token {t} out of range")));
            }
            if t == self.vocab.blank_id() {
                return Err(parse_err(line, "context must not contain the blank token".to_owned()));
            }
        }
        check_row(&probs, self.vocab.size(), line)?;
        if self.rows.contains_key(&(frame, ctx.clone())) {
            return Err(LatticeError::DuplicateRow { line, frame, ctx });
        }
        self.rows.insert((frame, ctx), probs);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, LatticeError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(LatticeError::MissingSection("LATTICE header"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("LATTICE") || fields.next() != Some("v1") {
            return Err(parse_err(hline, "expected `LATTICE v1 ...`"));
        }
        let mut n = None;
        let mut t = None;
        let mut k = None;
        let mut blank = None;
        let mut bos = None;
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(hline, format!("malformed header field {field:?}")))?;
            let parsed: usize = value
                .parse()
                .map_err(|_| parse_err(hline, format!("header field {key}={value} is not an integer")))?;
            match key {
                "N" => n = Some(parsed),
                "T" => t = Some(parsed),
                "K" => k = Some(parsed),
                "BLANK" => blank = Some(parsed),
                "BOS" => bos = Some(parsed),
                other => return Err(parse_err(hline, format!("unknown header field {other:?}"))),
            }
        }
        let n = n.ok_or_else(|| parse_err(hline, "header missing N"))?;
        let frame_count = t.ok_or_else(|| parse_err(hline, "header missing T"))?;
        let context_order = k.ok_or_else(|| parse_err(hline, "header missing K"))?;
        let blank = blank.ok_or_else(|| parse_err(hline, "header missing BLANK"))? as TokenId;
        let bos = bos.ok_or_else(|| parse_err(hline, "header missing BOS"))? as TokenId;

        let (vline, vocab_line) = lines.next().ok_or(LatticeError::MissingSection("VOCAB"))?;
        let mut vf = vocab_line.split_whitespace();
        if vf.next() != Some("VOCAB") {
            return Err(parse_err(vline, "expected VOCAB line"));
        }
        let tokens: Vec<String> = vf.map(str::to_owned).collect();
        if tokens.len() != n {
            return Err(parse_err(vline, format!("VOCAB has {} tokens, header says N={n}", tokens.len())));
        }
        let vocab = Vocabulary::new(tokens, blank, bos)?;

        let (dline, default_line) = lines.next().ok_or(LatticeError::MissingSection("DEFAULT"))?;
        let mut df = default_line.split_whitespace();
        if df.next() != Some("DEFAULT") {
            return Err(parse_err(dline, "expected DEFAULT line"));
        }
        let default_row = parse_probs(df, n, dline)?;
        check_row(&default_row, n, dline)?;

        let mut lat = Self {
            vocab,
            frame_count,
            context_order,
            default_row,
            rows: BTreeMap::new(),
        };

        for (lno, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let directive = fields.next().expect("non-empty line has a first field");
            if directive != "ROW" {
                return Err(LatticeError::UnknownDirective { line: lno, directive: directive.to_owned() });
            }
            let fspec = fields
                .next()
                .ok_or_else(|| parse_err(lno, "ROW missing f=<frame>"))?;
            let frame: FrameIndex = fspec
                .strip_prefix("f=")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| parse_err(lno, format!("malformed frame field {fspec:?}")))?;
            let cspec = fields
                .next()
                .ok_or_else(|| parse_err(lno, "ROW missing ctx=<ids>"))?;
            let ctx_body = cspec
                .strip_prefix("ctx=")
                .ok_or_else(|| parse_err(lno, format!("malformed context field {cspec:?}")))?;
            let ctx: Vec<TokenId> = if ctx_body == "-" {
                Vec::new()
            } else {
                ctx_body
                    .split(',')
                    .map(|v| {
                        v.parse()
                            .map_err(|_| parse_err(lno, format!("context id {v:?} is not an integer")))
                    })
                    .collect::<Result<_, _>>()?
            };
            let probs = parse_probs(fields, n, lno)?;
            lat.insert_row(frame, ctx, probs, lno)?;
        }
        Ok(lat)
    }

    pub fn load(path: &Path) -> Result<Self, LatticeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form: rows sorted by (frame, context), probabilities
    /// in shortest round-trip decimal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "LATTICE v1 N={} T={} K={} BLANK={} BOS={}",
            self.vocab.size(),
            self.frame_count,
            self.context_order,
            self.vocab.blank_id(),
            self.vocab.bos_id()
        )
        .expect("string write");
        writeln!(out, "VOCAB {}", self.vocab.tokens().join(" ")).expect("string write");
        writeln!(out, "DEFAULT {}", join_probs(&self.default_row)).expect("string write");
        for ((frame, ctx), probs) in &self.rows {
            let ctx_body = if ctx.is_empty() {
                "-".to_owned()
            } else {
                ctx.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
            };
            writeln!(out, "ROW f={frame} ctx={ctx_body} {}", join_probs(probs)).expect("string write");
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), LatticeError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn context_order(&self) -> usize {
        self.context_order
    }

    pub fn stored_row(&self, frame: FrameIndex, ctx: &[TokenId]) -> Option<&[f64]> {
        self.rows.get(&(frame, ctx.to_vec())).map(Vec::as_slice)
    }

    pub fn default_row(&self) -> &[f64] {
        &self.default_row
    }

    /// Probability row for a query: the stored row for the exact context
    /// tail, or the default row verbatim.
    pub fn probability_row(&self, frame: FrameIndex, context: &[TokenId]) -> &[f64] {
        self.stored_row(frame, context_tail(context, self.context_order))
            .unwrap_or(&self.default_row)
    }
}

fn parse_probs<'a>(
    fields: impl Iterator<Item = &'a str>,
    n: usize,
    line: usize,
) -> Result<Vec<f64>, LatticeError> {
    let mut probs = Vec::with_capacity(n);
    for (i, field) in fields.enumerate() {
        let p: f64 = field.parse().map_err(|_| LatticeError::Entry {
            line,
            entry: i + 1,
            msg: format!("{field:?} is not a number"),
        })?;
        probs.push(p);
    }
    if probs.len() != n {
        return Err(parse_err(line, format!("row has {} probabilities, expected {n}", probs.len())));
    }
    Ok(probs)
}

fn check_row(probs: &[f64], n: usize, line: usize) -> Result<(), LatticeError> {
    if probs.len() != n {
        return Err(parse_err(line, format!("row has {} probabilities, expected {n}", probs.len())));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !(p.is_finite() && p >= 0.0) {
            return Err(LatticeError::Entry {
                line,
                entry: i + 1,
                msg: format!("probability {p} must be finite and >= 0"),
            });
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(LatticeError::NotNormalized { line, sum, tol: NORMALIZATION_TOL });
    }
    Ok(())
}

fn join_probs(probs: &[f64]) -> String {
    probs.iter().map(|p| format!("{p}")).collect::<Vec<_>>().join(" ")
}

/// Lattice wrapped as a [`ScoringSource`]: rows pre-converted to natural
/// logs in the scalar type.
pub struct LatticeSource<S> {
    lattice: Lattice,
    default_log: Vec<S>,
    log_rows: BTreeMap<(FrameIndex, Vec<TokenId>), Vec<S>>,
}

impl<S: Scalar> LatticeSource<S> {
    pub fn new(lattice: Lattice) -> Self {
        let to_log = |probs: &[f64]| -> Vec<S> {
            probs.iter().map(|&p| scalar::from_f64::<S>(p).ln()).collect()
        };
        let default_log = to_log(&lattice.default_row);
        let log_rows = lattice
            .rows
            .iter()
            .map(|(k, v)| (k.clone(), to_log(v)))
            .collect();
        Self { lattice, default_log, log_rows }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }
}

impl<S: Scalar> ScoringSource<S> for LatticeSource<S> {
    fn vocab(&self) -> &Vocabulary {
        self.lattice.vocab()
    }

    fn frame_count(&self) -> usize {
        self.lattice.frame_count()
    }

    fn context_order(&self) -> usize {
        self.lattice.context_order()
    }

    fn score_next(&self, frame: FrameIndex, context: &[TokenId]) -> Result<Vec<S>, ScoringError> {
        if frame == 0 || frame > self.lattice.frame_count() {
            return Err(ScoringError::FrameOutOfRange { frame, frame_count: self.lattice.frame_count() });
        }
        let tail = context_tail(context, self.lattice.context_order());
        Ok(self
            .log_rows
            .get(&(frame, tail.to_vec()))
            .unwrap_or(&self.default_log)
            .clone())
    }
}
