//! Experiment presets, configuration files, deterministic random initial
//! data, and the run loop that writes CSV/JSON output.

pub mod config;
pub mod output;
pub mod rng;
pub mod run;
pub mod scenario;

pub use config::{apply_override, parse_config, parse_config_str, ConfigError};
pub use run::{run, simulate, summarize, HarnessError, RunStats, RunSummary, VariantResult};
pub use scenario::{build_initial, preset, InitialCondition, Layout, Scenario, Study, Variant, PRESETS};
