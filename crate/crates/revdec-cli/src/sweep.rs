//! Grid sweeps over scenarios.
//!
//! A manifest lists scenario files plus an optional grid of overrides:
//!
//! ```json
//! {
//!   "scenarios": ["a.json", "b.json"],
//!   "grid": {
//!     "beam": [1, 7],
//!     "chunk": [4],
//!     "rw": [null, 0, 3],
//!     "commit": ["chunk"],
//!     "word_reward": [null]
//!   }
//! }
//! ```
//!
//! `rw: null` means no pruning. A `word_reward` of `null` pairs the reward
//! with the cell's window (1.0 unconstrained, 0.0 windowed); omitting the
//! axis entirely keeps each scenario's own reward unless an `rw` axis is
//! present, in which case pairing applies. Cells run in parallel but rows
//! keep manifest order, so the CSV and the JSON summary are deterministic.
//! Failed cells keep their row with the message in the `error` column.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use revdec::metrics::erasure;
use revdec::{decode_stream, CommitPolicy, MetricsReport, ScoringSource};

use crate::scenario::{Overrides, Scenario};

#[derive(Debug, Deserialize)]
pub struct Manifest {
    pub scenarios: Vec<PathBuf>,
    #[serde(default)]
    pub grid: Grid,
}

#[derive(Debug, Default, Deserialize)]
pub struct Grid {
    #[serde(default)]
    pub beam: Option<Vec<usize>>,
    #[serde(default)]
    pub chunk: Option<Vec<usize>>,
    #[serde(default)]
    pub rw: Option<Vec<RwEntry>>,
    #[serde(default)]
    pub commit: Option<Vec<CommitPolicy>>,
    #[serde(default)]
    pub word_reward: Option<Vec<Option<f64>>>,
}

/// One rw axis entry: a window size, JSON null, or the string "none".
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RwEntry {
    Window(usize),
    Word(Option<String>),
}

impl RwEntry {
    fn resolve(&self) -> Result<Option<usize>> {
        match self {
            RwEntry::Window(k) => Ok(Some(*k)),
            RwEntry::Word(None) => Ok(None),
            RwEntry::Word(Some(w)) if w.eq_ignore_ascii_case("none") => Ok(None),
            RwEntry::Word(Some(w)) => {
                anyhow::bail!("rw axis entry {w:?} is not a window size, null, or \"none\"")
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct CellMetrics {
    ne: f64,
    al_ms: f64,
    al_frames: f64,
    harness_bleu: Option<f64>,
    max_erasure: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    id: String,
    b: Option<usize>,
    u: Option<usize>,
    rw: Option<usize>,
    commit_mode: Option<String>,
    word_reward: Option<f64>,
    #[serde(flatten)]
    metrics: Option<CellMetrics>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct GroupSummary {
    b: usize,
    u: usize,
    rw: Option<usize>,
    commit_mode: String,
    word_reward: f64,
    count: usize,
    errors: usize,
    mean_ne: Option<f64>,
    mean_al_ms: Option<f64>,
    mean_al_frames: Option<f64>,
    mean_bleu: Option<f64>,
    max_erasure: Option<usize>,
}

pub struct SweepOutput {
    pub csv: String,
    pub json: String,
    pub failures: usize,
}

fn commit_mode_name(c: CommitPolicy) -> &'static str {
    match c {
        CommitPolicy::EveryFrame => "frame",
        CommitPolicy::Chunk => "chunk",
    }
}

struct Cell {
    scenario: Arc<Scenario>,
    source: Arc<dyn ScoringSource<f64>>,
    beam: usize,
    chunk: usize,
    rw: Option<usize>,
    commit: CommitPolicy,
    word_reward: f64,
}

impl Cell {
    fn run(&self) -> SweepRow {
        let overrides = Overrides {
            beam: Some(self.beam),
            chunk: Some(self.chunk),
            rw: Some(self.rw),
            word_reward: Some(self.word_reward),
            commit: Some(self.commit),
            max_symbols: None,
        };
        let scenario = overrides.apply(&self.scenario);
        let mut row = SweepRow {
            id: scenario.id.clone(),
            b: Some(self.beam),
            u: Some(self.chunk),
            rw: self.rw,
            commit_mode: Some(commit_mode_name(self.commit).to_string()),
            word_reward: Some(self.word_reward),
            metrics: None,
            error: None,
        };
        match decode_stream(
            self.source.as_ref(),
            &scenario.config,
            scenario.commit,
            scenario.prune,
            scenario.reference.clone(),
        ) {
            Ok(trace) => {
                let report = MetricsReport::from_trace(&trace, Some(self.source.vocab()));
                let max_erasure = trace
                    .commits
                    .windows(2)
                    .map(|w| erasure(&w[0].displayed, &w[1].displayed))
                    .max()
                    .unwrap_or(0);
                row.metrics = Some(CellMetrics {
                    ne: report.ne,
                    al_ms: report.al_ms,
                    al_frames: report.al_frames,
                    harness_bleu: report.bleu,
                    max_erasure,
                });
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

/// Expand the manifest into cells, keeping scenario-major, then beam, chunk,
/// rw, commit, word_reward order. Scenarios that fail to load contribute a
/// single error row in place of their cells. Scenario ids must be unique
/// within the manifest: rows and group means are keyed by id, so a repeat
/// would silently merge two different scenarios.
pub fn run(manifest_path: &Path) -> Result<SweepOutput> {
    let text = fs::read_to_string(manifest_path)
        .with_context(|| format!("cannot read manifest {}", manifest_path.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .with_context(|| format!("invalid manifest JSON in {}", manifest_path.display()))?;
    let rw_axis: Option<Vec<Option<usize>>> = manifest
        .grid
        .rw
        .as_ref()
        .map(|axis| axis.iter().map(RwEntry::resolve).collect())
        .transpose()
        .with_context(|| format!("invalid grid in {}", manifest_path.display()))?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new("."));

    let mut load_errors: Vec<SweepRow> = Vec::new();
    let mut cells: Vec<Cell> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for rel in &manifest.scenarios {
        let path = if rel.is_absolute() { rel.clone() } else { base_dir.join(rel) };
        let prepared = Scenario::load(&path).and_then(|s| {
            let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let source = s.build_source(&dir)?;
            Ok((Arc::new(s), source))
        });
        let (scenario, source) = match prepared {
            Ok(pair) => pair,
            Err(e) => {
                // Load failures keep the path as the row id; that cannot
                // collide with a real scenario id worth guarding.
                load_errors.push(SweepRow {
                    id: rel.display().to_string(),
                    b: None,
                    u: None,
                    rw: None,
                    commit_mode: None,
                    word_reward: None,
                    metrics: None,
                    error: Some(format!("{e:#}")),
                });
                continue;
            }
        };
        if !seen_ids.insert(scenario.id.clone()) {
            anyhow::bail!(
                "duplicate scenario id {:?} in manifest {}",
                scenario.id,
                manifest_path.display()
            );
        }

        let beams = manifest.grid.beam.clone().unwrap_or_else(|| vec![scenario.config.beam_size]);
        let chunks = manifest.grid.chunk.clone().unwrap_or_else(|| vec![scenario.config.chunk_size]);
        let windows = rw_axis.clone().unwrap_or_else(|| vec![scenario.config.revision_window]);
        let commits = manifest.grid.commit.clone().unwrap_or_else(|| vec![scenario.commit]);
        let rewards = match &manifest.grid.word_reward {
            Some(axis) => axis.clone(),
            // An rw axis without a reward axis pairs the reward per cell.
            None if rw_axis.is_some() => vec![None],
            None => vec![Some(scenario.config.word_reward)],
        };

        for &b in &beams {
            for &u in &chunks {
                for &rw in &windows {
                    for &commit in &commits {
                        for &reward in &rewards {
                            cells.push(Cell {
                                scenario: Arc::clone(&scenario),
                                source: Arc::clone(&source),
                                beam: b,
                                chunk: u,
                                rw,
                                commit,
                                word_reward: reward
                                    .unwrap_or_else(|| revdec::DecoderConfig::default_word_reward(rw)),
                            });
                        }
                    }
                }
            }
        }
    }

    let mut rows: Vec<SweepRow> = cells.par_iter().map(Cell::run).collect();
    rows.extend(load_errors);

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(SweepOutput { csv: to_csv(&rows)?, json: to_json(&rows), failures })
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id", "b", "u", "rw", "commit_mode", "ne", "al_ms", "harness_bleu", "max_erasure", "error",
    ])?;
    for row in rows {
        let rw = match (&row.error, row.rw) {
            (Some(_), None) if row.b.is_none() => String::new(),
            (_, Some(k)) => k.to_string(),
            (_, None) => "none".to_string(),
        };
        let m = row.metrics.as_ref();
        w.write_record([
            row.id.clone(),
            fmt_opt(&row.b),
            fmt_opt(&row.u),
            rw,
            row.commit_mode.clone().unwrap_or_default(),
            fmt_opt(&m.map(|m| m.ne)),
            fmt_opt(&m.map(|m| m.al_ms)),
            fmt_opt(&m.and_then(|m| m.harness_bleu)),
            fmt_opt(&m.map(|m| m.max_erasure)),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// (b, u, rw, commit_mode, word_reward bits): one grid combination.
type GroupKey = (usize, usize, Option<usize>, String, u64);

fn to_json(rows: &[SweepRow]) -> String {
    // Group key is the full override combination; groups keep first-appearance
    // order so reruns emit identical bytes.
    let mut order: Vec<GroupKey> = Vec::new();
    let mut buckets: BTreeMap<GroupKey, Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        let (Some(b), Some(u), Some(cm), Some(wr)) =
            (row.b, row.u, row.commit_mode.clone(), row.word_reward)
        else {
            continue;
        };
        let key = (b, u, row.rw, cm, wr.to_bits());
        if !buckets.contains_key(&key) {
            order.push(key.clone());
        }
        buckets.entry(key).or_default().push(row);
    }

    let mut groups = Vec::with_capacity(order.len());
    for key in order {
        let members = &buckets[&key];
        let ok: Vec<&CellMetrics> =
            members.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let mean = |f: &dyn Fn(&CellMetrics) -> f64| -> Option<f64> {
            if ok.is_empty() {
                None
            } else {
                Some(ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64)
            }
        };
        let with_bleu: Vec<f64> = ok.iter().filter_map(|m| m.harness_bleu).collect();
        groups.push(GroupSummary {
            b: key.0,
            u: key.1,
            rw: key.2,
            commit_mode: key.3.clone(),
            word_reward: f64::from_bits(key.4),
            count: members.len(),
            errors: members.iter().filter(|r| r.error.is_some()).count(),
            mean_ne: mean(&|m| m.ne),
            mean_al_ms: mean(&|m| m.al_ms),
            mean_al_frames: mean(&|m| m.al_frames),
            mean_bleu: if with_bleu.is_empty() {
                None
            } else {
                Some(with_bleu.iter().sum::<f64>() / with_bleu.len() as f64)
            },
            max_erasure: ok.iter().map(|m| m.max_erasure).max(),
        });
    }

    let summary = serde_json::json!({ "rows": rows, "groups": groups });
    let mut out = serde_json::to_string_pretty(&summary).expect("summary serializes");
    out.push('\n');
    out
}
