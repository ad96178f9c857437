//! Experiment harness over the core library.
//!
//! Turns a strict-JSON [`config::ExperimentConfig`] into a persisted,
//! bit-reproducible artifact: `results.csv` with a fixed per-kind schema
//! (every row carrying validity flags) and `manifest.json` holding the
//! config, its hash, the solved constants, and the reference-law choice —
//! enough to re-run the table byte-for-byte with [`runner::rerun`].

pub mod config;
pub mod output;
pub mod runner;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, Kind, ModelRef};
pub use output::{
    canonical_config_json, config_hash, load_manifest, Cell, Manifest, ReferenceNote, ResultTable,
    RunOutput,
};
pub use runner::{rerun, run, RunError, RunOptions};
