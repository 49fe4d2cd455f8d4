//! `revdec`: scenario harness for the streaming decoder.
//!
//! Subcommands:
//! - `gen`     write a scenario file (synthetic stream or lattice replay)
//! - `decode`  run one scenario, write its trace, print the metrics report
//! - `metrics` recompute the report from a stored trace
//! - `sweep`   run a manifest's scenario grid, write CSV and JSON summaries
//!
//! Exit codes: 0 success, 1 sweep finished but some cells failed, 2 bad
//! input (flags, files, or configuration).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

use revdec::{decode_stream, CommitPolicy, DecoderConfig, MetricsReport, PrunePolicy, SyntheticSourceSpec};

use revdec_cli::scenario::{Overrides, Scenario, SourceSpec};
use revdec_cli::{sweep, trace_io};

#[derive(Parser)]
#[command(name = "revdec", version, about = "Streaming beam-search decoding harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a scenario file describing one decode run
    Gen(GenArgs),
    /// Decode a scenario, write the trace, print the metrics report
    Decode(DecodeArgs),
    /// Recompute the metrics report from a stored trace
    Metrics(MetricsArgs),
    /// Run every scenario/grid combination from a manifest
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CommitArg {
    /// Commit after every frame
    Frame,
    /// Commit on chunk boundaries plus the stream end
    Chunk,
}

impl From<CommitArg> for CommitPolicy {
    fn from(c: CommitArg) -> Self {
        match c {
            CommitArg::Frame => CommitPolicy::EveryFrame,
            CommitArg::Chunk => CommitPolicy::Chunk,
        }
    }
}

/// Revision window argument: a token count or the word `none`.
#[derive(Clone, Copy)]
struct RwValue(Option<usize>);

fn parse_rw(s: &str) -> Result<RwValue, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(RwValue(None));
    }
    s.parse::<usize>()
        .map(|k| RwValue(Some(k)))
        .map_err(|_| "expected a non-negative integer or 'none'".to_string())
}

fn parse_instability(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| (0.0..=1.0).contains(v))
        .ok_or_else(|| "instability must be in [0,1]".to_string())
}

fn parse_blank_bias(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| (0.0..=1.0).contains(v))
        .ok_or_else(|| "blank-bias must be in [0,1]".to_string())
}

#[derive(Args)]
struct GenArgs {
    /// Synthetic stream seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synthetic vocabulary size, including blank and the start token
    #[arg(long, default_value_t = 6)]
    vocab: usize,
    /// Number of source frames
    #[arg(long, default_value_t = 8)]
    frames: usize,
    /// Trailing context tokens the synthetic distribution conditions on
    #[arg(long, default_value_t = 2)]
    context_order: usize,
    /// Row peakiness; 0 gives uniform rows
    #[arg(long, default_value_t = 5.0)]
    concentration: f64,
    /// Per-frame probability of a persistent ranking swap
    #[arg(long, default_value_t = 0.3, value_parser = parse_instability)]
    instability: f64,
    /// Fraction of each row's mass moved onto blank
    #[arg(long, default_value_t = 0.5, value_parser = parse_blank_bias)]
    blank_bias: f64,
    /// Replay this lattice file instead of a synthetic stream. The path is
    /// stored verbatim and later resolved relative to the scenario file.
    /// Synthetic flags are ignored.
    #[arg(long, value_name = "FILE")]
    from_lattice: Option<PathBuf>,
    /// Scenario id; derived from the source when absent
    #[arg(long)]
    id: Option<String>,
    /// Space-separated reference translation for BLEU
    #[arg(long)]
    reference: Option<String>,
    #[command(flatten)]
    decoder: DecoderFlags,
    /// Commit policy
    #[arg(long, value_enum, default_value_t = CommitArg::Chunk)]
    commit: CommitArg,
    /// Output path; stdout when absent
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DecoderFlags {
    /// Beam size
    #[arg(long, default_value_t = 7)]
    beam: usize,
    /// Commit chunk size in frames
    #[arg(long, default_value_t = 4)]
    chunk: usize,
    /// Revision window in tokens, or 'none' for unconstrained revision
    #[arg(long, value_name = "N|none", default_value = "none", value_parser = parse_rw)]
    rw: RwValue,
    /// Per-token emission reward; defaults to 1.0 without a window, 0.0 with
    #[arg(long)]
    word_reward: Option<f64>,
    /// Maximum non-blank emissions per frame
    #[arg(long, default_value_t = 5)]
    max_symbols: usize,
    /// Wall-clock span of one frame, for lagging in milliseconds
    #[arg(long, default_value_t = 40.0)]
    frame_span_ms: f64,
}

#[derive(Args)]
struct DecodeArgs {
    /// Scenario file to run
    scenario: PathBuf,
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    chunk: Option<usize>,
    /// Override the revision window ('none' lifts it)
    #[arg(long, value_name = "N|none", value_parser = parse_rw)]
    rw: Option<RwValue>,
    #[arg(long)]
    word_reward: Option<f64>,
    #[arg(long)]
    max_symbols: Option<usize>,
    #[arg(long, value_enum)]
    commit: Option<CommitArg>,
    /// Trace output path; defaults to the scenario path with a
    /// .trace.jsonl extension
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Trace file written by `decode`
    trace: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Manifest listing scenario files and the override grid
    manifest: PathBuf,
    /// CSV output path; defaults to the manifest path with a .csv extension
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON summary path; defaults to a .summary.json extension
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Decode(args) => cmd_decode(args),
        Cmd::Metrics(args) => cmd_metrics(args),
        Cmd::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let rw = args.decoder.rw.0;
    let config = DecoderConfig {
        beam_size: args.decoder.beam,
        chunk_size: args.decoder.chunk,
        revision_window: rw,
        word_reward: args
            .decoder
            .word_reward
            .unwrap_or_else(|| DecoderConfig::default_word_reward(rw)),
        max_symbols_per_frame: args.decoder.max_symbols,
        frame_span_ms: args.decoder.frame_span_ms,
    };
    let (source, default_id) = match args.from_lattice {
        Some(path) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            let id = format!("lat-{}", stem.unwrap_or_else(|| "stream".into()));
            (SourceSpec::Lattice { path }, id)
        }
        None => {
            let spec = SyntheticSourceSpec {
                seed: args.seed,
                vocab_size: args.vocab,
                frame_count: args.frames,
                context_order: args.context_order,
                concentration: args.concentration,
                instability: args.instability,
                blank_bias: args.blank_bias,
            };
            let id = format!("synth-s{}-v{}-t{}", spec.seed, spec.vocab_size, spec.frame_count);
            (SourceSpec::Synthetic(spec), id)
        }
    };
    let scenario = Scenario {
        id: args.id.unwrap_or(default_id),
        source,
        config,
        commit: args.commit.into(),
        prune: if rw.is_some() { PrunePolicy::RevisionWindow } else { PrunePolicy::None },
        reference: args
            .reference
            .map(|r| r.split_whitespace().map(str::to_owned).collect()),
    };
    scenario.check()?;
    let json = scenario.to_json();
    match args.output {
        Some(path) => fs::write(&path, json)
            .map_err(|e| anyhow::anyhow!("cannot write scenario {}: {e}", path.display()))?,
        None => print!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_decode(args: DecodeArgs) -> Result<ExitCode> {
    let stored = Scenario::load(&args.scenario)?;
    let overrides = Overrides {
        beam: args.beam,
        chunk: args.chunk,
        rw: args.rw.map(|v| v.0),
        word_reward: args.word_reward,
        commit: args.commit.map(CommitPolicy::from),
        max_symbols: args.max_symbols,
    };
    let scenario = overrides.apply(&stored);
    scenario.check()?;
    let base_dir = args.scenario.parent().unwrap_or(Path::new("."));
    let source = scenario.build_source(base_dir)?;
    let trace = decode_stream(
        source.as_ref(),
        &scenario.config,
        scenario.commit,
        scenario.prune,
        scenario.reference.clone(),
    )?;
    let trace_path = args
        .output
        .unwrap_or_else(|| args.scenario.with_extension("trace.jsonl"));
    trace_io::write_trace(&trace_path, &trace, source.vocab())?;
    let report = MetricsReport::from_trace(&trace, Some(source.vocab()));
    println!("{}", serde_json::to_string(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_metrics(args: MetricsArgs) -> Result<ExitCode> {
    let (trace, vocab) = trace_io::read_trace(&args.trace)?;
    let report = MetricsReport::from_trace(&trace, Some(&vocab));
    println!("{}", serde_json::to_string(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let out = sweep::run(&args.manifest)?;
    let csv_path = args.csv.unwrap_or_else(|| args.manifest.with_extension("csv"));
    let json_path = args.json.unwrap_or_else(|| args.manifest.with_extension("summary.json"));
    fs::write(&csv_path, &out.csv)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", csv_path.display()))?;
    fs::write(&json_path, &out.json)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", json_path.display()))?;
    if out.failures > 0 {
        eprintln!(
            "{} sweep cell(s) failed; see the error column in {}",
            out.failures,
            csv_path.display()
        );
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
