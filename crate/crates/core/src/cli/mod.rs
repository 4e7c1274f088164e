//! Command-line front end: configuration, task execution and CSV output.

mod config;
mod run;
mod table;

pub use config::{
    parse_config, parse_matrix, parse_operator, parse_state, ModelConfig, Numerics, RunConfig, Scenario, Task,
    TaskConfig,
};
pub use run::{run, RunOutcome, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, VALIDATION_Z_MAX, VERSION};
pub use table::ResultTable;
