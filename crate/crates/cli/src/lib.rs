//! Library surface of the command-line tool: the flat instance format, the
//! solver dispatch and CSV schema, the benchmark harness, and the oracle
//! verifier. The binary in `main.rs` is a thin argument layer over these.

pub mod bench;
pub mod format;
pub mod runner;
pub mod verify;
