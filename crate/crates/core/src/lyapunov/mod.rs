//! Lyapunov candidates, drift checks and regime classification.

pub mod chain;
pub mod drift;
pub mod function;
pub mod model4;
pub mod region;

pub use chain::{choose_lambda, lambda_criterion, one_enzyme_drift, scan_drift_tail, TailScan};
pub use drift::{
    check_crn_linear_bound, check_population_drift, scan_linear_diagonal, BoundForm, DriftReport,
    ExceptionalRegion, Violation,
};
pub use function::CandidateFunction;
pub use model4::{
    classify_regime, closed_form_drift_model4, Certificate, Classification, PrCondition, Regime,
};
pub use region::RegionSpec;
