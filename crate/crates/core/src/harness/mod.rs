//! Experiment configs, rate sweeps and result output.

mod config;
mod io;
mod sweep;
mod verify;

pub use config::ExperimentConfig;
pub use io::{
    emit_results, rate_rows, read_json, read_rates_csv, write_json, write_predictions, write_rates_csv,
    RateRow,
};
pub use sweep::{
    fit_line, run_dimension_comparison, run_feedback_comparison, run_rate_sweep,
    run_rate_sweep_modes, trial_intrinsic_params, trial_seed, DimensionComparison,
    FeedbackComparison, RatePoint, RateResult,
};
pub use verify::{run_verification, VerifyReport, LEMMA1_M, LEMMA1_P};
