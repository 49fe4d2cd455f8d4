//! Streaming frame-synchronous beam decoding with revision control.
//!
//! A transducer-style beam search consumes a posterior stream frame by
//! frame, periodically committing its top hypothesis to a display whose
//! updates replace earlier output. Two orthogonal knobs govern the stream of
//! commits:
//!
//! * the commit schedule (every frame, or once per chunk of frames), which
//!   never changes what the beam explores, and
//! * revision-window pruning, which at each commit drops hypotheses that
//!   would revise anything but the last `revision_window` committed tokens.
//!   A window of 0 makes the display strictly append-only.
//!
//! [`metrics`] quantifies the resulting behavior (normalized erasure,
//! average lagging, revision histograms, a harness BLEU), [`oracle`] checks
//! the search against exhaustive enumeration on tiny instances, and
//! [`scoring`] provides two deterministic posterior sources: a seeded
//! synthetic stream and a replayable text lattice.
//!
//! Score arithmetic is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiation used by the CLI and the test
//! suites.

pub mod beam;
pub mod config;
pub mod decoder;
pub mod metrics;
pub mod oracle;
pub mod scalar;
pub mod scoring;
pub mod trace;
pub mod vocab;

pub use beam::{Beam, Hypothesis};
pub use config::DecoderConfig;
pub use decoder::{accept, decode_stream, expand_frame, CommitPolicy, DecodeError, PrunePolicy};
pub use metrics::MetricsReport;
pub use scalar::Scalar;
pub use scoring::{Lattice, LatticeSource, ScoringSource, SyntheticSource, SyntheticSourceSpec};
pub use trace::{CommitEvent, DecodeTrace};
pub use vocab::{longest_common_prefix, FrameIndex, TokenId, Vocabulary};

/// `f64` hypothesis, the precision all frozen expectations use.
pub type Hypothesis64 = Hypothesis<f64>;
/// `f32` hypothesis.
pub type Hypothesis32 = Hypothesis<f32>;
/// `f64` beam.
pub type Beam64 = Beam<f64>;
/// `f32` beam.
pub type Beam32 = Beam<f32>;
/// `f64` decode trace.
pub type DecodeTrace64 = DecodeTrace<f64>;
/// `f32` decode trace.
pub type DecodeTrace32 = DecodeTrace<f32>;
/// `f64` synthetic source.
pub type SyntheticSource64 = SyntheticSource<f64>;
/// `f64` lattice source.
pub type LatticeSource64 = LatticeSource<f64>;
