//! Library side of the `revdec` harness binary: scenario files, trace
//! serialization, and sweep execution. The binary in `main.rs` is a thin
//! clap wrapper over these.

pub mod scenario;
pub mod sweep;
pub mod trace_io;
