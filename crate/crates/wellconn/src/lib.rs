//! Connected components for graphs with a known (or obliviously discovered)
//! spectral gap, executed on a simulated massively-parallel runtime with
//! explicit per-machine memory and round accounting.
//!
//! Pipeline: regularize the input via a replacement product with certified
//! small expander clouds, randomize each component with layered-graph random
//! walks, grow components by repeated leader election and contraction, then
//! extract and verify a spanning forest against the original edges. A
//! gap-oblivious driver re-runs the pipeline on a decreasing gap schedule,
//! and a sublinear-memory variant sketches contracted vertices to finish
//! below-linear space budgets.

pub mod cli;
pub mod engine;
pub mod error;
pub mod graph;
pub mod pipeline;
pub mod components;
pub mod randwalk;
pub mod sketch;
pub mod regularize;
pub mod rng;
pub mod spectral;

pub use cli::cli_main;
pub use error::{Error, Result};
