//! Analytical performance model for large-language-model inference on
//! parameterized multi-accelerator platforms.
//!
//! The crate predicts time-to-first-token, time-per-output-token, end-to-end
//! latency, throughput, and memory pressure for a transformer workload placed
//! on a platform of NPUs, and inverts the same model to answer "what hardware
//! would this SLO need".
//!
//! Module map:
//! - [`model`]: model catalog, parameter counting, per-layer operator graphs,
//!   KV-cache sizing.
//! - [`workload`]: use cases (token budgets + SLOs), precision, parallelism
//!   degrees, workload assembly.
//! - [`roofline`]: single-NPU two-tier roofline timing of one operator graph.
//! - [`platform`]: interconnect collectives, TP/PP sharding, whole-model time.
//! - [`analyzer`]: end-to-end metrics, batch sweeps, parallelism comparison,
//!   platform-characteristic sweeps.
//! - [`requirements`]: SLO-driven inversion (capacity / FLOPS / bandwidth).
//! - [`report`]: CSV / JSON / Markdown emission with stable byte output.
//! - [`cli`]: command-line front end used by the `genza` binary.

pub mod analyzer;
pub mod cli;
pub mod error;
pub mod model;
pub mod platform;
pub mod report;
pub mod requirements;
pub mod roofline;
pub mod workload;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
