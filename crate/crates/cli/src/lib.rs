//! Scenario files, command dispatch and tube output for the `reachdec`
//! binary.

pub mod commands;
pub mod emit;
pub mod error;
pub mod formula;
pub mod scenario;

pub use commands::{run, Command, RunOptions};
pub use emit::{emit_tube, format_csv, parse_csv, tube_rows, Format, TubeRow};
pub use error::{exit, CliError};
pub use scenario::{parse_scenario, parse_scenario_str, Scenario};
