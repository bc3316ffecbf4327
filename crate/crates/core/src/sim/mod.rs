//! Monte-Carlo experiment driver: configuration, per-trial detection,
//! SNR sweeps, training runs, result files and configuration self-checks.

mod config;
mod oracle;
mod pipeline;
mod sweep;
mod trial;

pub use config::{DetectorKind, SimConfig, SEED_ENV};
pub use oracle::{run_oracle_suite, OracleCheck};
pub use pipeline::{train_from_config, TrainReport};
pub use sweep::{
    abs_errors, aggregate, emit_results, median_sorted, rows_from_json, rows_to_csv, rows_to_json,
    run_point, run_sweep, OutputFormat, ResultRow, SweepOutcome, CSV_HEADER,
};
pub use trial::{trial_rng, DetectorOutput, Simulator, TrialOutcome};
