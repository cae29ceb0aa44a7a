//! Experiment specs, seed ensembles, CSV output and verification suites.

pub mod experiment;
pub mod spec;
pub mod sweep;
pub mod verify;

pub use experiment::{
    run_experiment, run_experiment_on, summary_columns, BoundCheck, ExperimentOutcome, ExperimentSummary, RunOptions,
    Series, SUMMARY_COLUMNS, TRACE_COLUMNS,
};
pub use spec::{load_spec, parse_spec, Algorithm, ExperimentSpec, LogregSource, ProblemSpec};
pub use sweep::{run_sweep, run_sweep_on, SweepAxis, SweepOutcome, SweepPoint};
pub use verify::{verify, CheckOutcome, Suite, VerifyReport};
