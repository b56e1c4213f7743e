//! Config-driven experiment runner shared by the `hycirc` binary and the tests.

pub mod config;
pub mod experiments;
mod run;

pub use config::{
    parse_config, CollapseConfig, DemoParams, ExperimentConfig, ExperimentKind, SffParams, StochasticParams, TmatParams,
};
pub use run::{effective_workers, preset, run, RunOptions, RunSummary, PRESETS};
