//! Scenario files, preset runs and their artifacts for the multibeam simulator.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod presets;
pub mod runner;
pub mod scenario;

pub use error::CliError;
pub use runner::{run, Manifest};
pub use scenario::{parse_scenario, parse_scenario_with, Overrides, Preset, Scenario};
