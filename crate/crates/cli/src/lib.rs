//! Command implementations behind the `omgs` binary and its HTTP surface.
//!
//! Every command is a plain function taking a serde request struct, so the
//! CLI, the server and the tests drive the same code.

pub mod audit;
pub mod backend_spec;
pub mod csvio;
pub mod error;
pub mod ingest;
pub mod replay;
pub mod run;
pub mod score;
pub mod serve;
pub mod stats;
pub mod usage;
