//! Parameter sweeps, scaling fits and verdicts against the closed-form
//! predictions.

mod fit;
mod predictions;
mod report;
mod sweep;

pub use fit::{fit_scaling, FitModel, ScalingFit};
pub use predictions::{
    bounded_regime, crossover, r2f, rational_p, theorem_predictions, EtaLaw, PredictionTable, Quantity, Regime, Side,
    TheoremPrediction,
};
pub use report::{format_float, parse_report, report_json, rows_csv, verify_report, VerifySummary, CSV_HEADER};
pub use sweep::{
    relation_for, run_sweep, run_sweep_with, sweep_targets, validate_sweep, Check, FitRecord, Method, Relation, RowKind,
    SweepHost, SweepResult, SweepRow, SweepSettings, SweepSpec, Verdict,
};
