//! Config-driven experiment drivers behind the `covest` binary.

pub mod checks;
pub mod config;
pub mod output;
pub mod runners;
pub mod sigma;

pub use checks::CheckResult;
pub use config::{ConfigError, ErrorTarget, ExperimentConfig, ExperimentKind, SigmaKind};
pub use output::{read_rows, write_rows, CsvError, ResultRow, CSV_HEADER};
pub use runners::{run, RunOutput};
