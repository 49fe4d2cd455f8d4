//! Scenario files: a self-contained description of one decode run.
//!
//! A scenario pins the scoring source, the decoder configuration, the commit
//! and prune policies, and an optional reference translation. Serialized as
//! JSON so runs are reproducible from a single file:
//!
//! ```json
//! {
//!   "id": "synth-s42-v6-t8",
//!   "source": { "synthetic": { "seed": 42, "vocab_size": 6, ... } },
//!   "config": { "beam_size": 7, "chunk_size": 4, ... },
//!   "commit": "chunk",
//!   "prune": "none",
//!   "reference": ["w2", "w3"]
//! }
//! ```
//!
//! Lattice paths are resolved relative to the directory containing the
//! scenario file, so a scenario and its lattice can move together.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use revdec::{
    CommitPolicy, DecoderConfig, Lattice, LatticeSource64, PrunePolicy, ScoringSource,
    SyntheticSource64, SyntheticSourceSpec,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum SourceSpec {
    Synthetic(SyntheticSourceSpec),
    Lattice { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub source: SourceSpec,
    pub config: DecoderConfig,
    pub commit: CommitPolicy,
    pub prune: PrunePolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<String>>,
}

impl Scenario {
    /// Parse a scenario file and check internal consistency.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .with_context(|| format!("invalid scenario JSON in {}", path.display()))?;
        scenario.check()?;
        Ok(scenario)
    }

    pub fn check(&self) -> Result<()> {
        match (&self.prune, self.config.revision_window) {
            (PrunePolicy::RevisionWindow, None) => {
                bail!("scenario {:?}: prune is revision_window but config.revision_window is null", self.id)
            }
            (PrunePolicy::None, Some(_)) => {
                bail!("scenario {:?}: config.revision_window is set but prune is none", self.id)
            }
            _ => {}
        }
        if let SourceSpec::Synthetic(spec) = &self.source {
            spec.validate()
                .with_context(|| format!("scenario {:?}: invalid synthetic source", self.id))?;
        }
        self.config
            .validate()
            .with_context(|| format!("scenario {:?}: invalid decoder config", self.id))?;
        Ok(())
    }

    /// Build the scoring source. `base_dir` anchors relative lattice paths;
    /// pass the directory of the file the scenario was read from.
    pub fn build_source(&self, base_dir: &Path) -> Result<Arc<dyn ScoringSource<f64>>> {
        match &self.source {
            SourceSpec::Synthetic(spec) => Ok(Arc::new(SyntheticSource64::new(spec.clone())?)),
            SourceSpec::Lattice { path } => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let lattice = Lattice::load(&resolved)
                    .with_context(|| format!("cannot load lattice {}", resolved.display()))?;
                Ok(Arc::new(LatticeSource64::new(lattice)))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }
}

/// Command-line overrides applied on top of a stored scenario.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub beam: Option<usize>,
    pub chunk: Option<usize>,
    /// `Some(None)` disables pruning, `Some(Some(k))` sets a window of k.
    pub rw: Option<Option<usize>>,
    pub word_reward: Option<f64>,
    pub commit: Option<CommitPolicy>,
    pub max_symbols: Option<usize>,
}

impl Overrides {
    /// Fold the overrides into a scenario, keeping prune and
    /// config.revision_window consistent with each other.
    pub fn apply(&self, scenario: &Scenario) -> Scenario {
        let mut out = scenario.clone();
        if let Some(b) = self.beam {
            out.config.beam_size = b;
        }
        if let Some(u) = self.chunk {
            out.config.chunk_size = u;
        }
        if let Some(rw) = self.rw {
            out.config.revision_window = rw;
            out.prune = match rw {
                Some(_) => PrunePolicy::RevisionWindow,
                None => PrunePolicy::None,
            };
        }
        if let Some(w) = self.word_reward {
            out.config.word_reward = w;
        }
        if let Some(c) = self.commit {
            out.commit = c;
        }
        if let Some(m) = self.max_symbols {
            out.config.max_symbols_per_frame = m;
        }
        out
    }
}
