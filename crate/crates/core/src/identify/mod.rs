//! Direct prediction-error identification of a MIMO predictor model.
//!
//! The predictor is `ε(t, θ) = H̄(q, θ)^{-1} [w_Y(t) - Ḡ(q, θ) w_D(t)]` with a
//! monic noise model `H̄`. The parameter vector `θ` stacks the free module
//! entries (row-major over outputs and inputs) followed by the free noise
//! entries; the innovation covariance is not part of `θ` and is estimated as
//! the sample covariance of the residuals.

mod criterion;
mod diagnostics;
mod optimize;
mod predictor;
mod structure;

pub use criterion::{criterion_ml_det, criterion_wls, nonsingular_covariance};
pub use diagnostics::{excitation_diagnostic, ljung_box, ExcitationDiagnostic, LjungBox};
pub use optimize::{
    criterion_gradient, criterion_value, estimate, extract_module, initial_parameters, Criterion, EstimateOptions,
    EstimationResult, ModuleEstimate, OptimizerDiagnostics, StartSummary,
};
pub use predictor::{predict_errors, residual_channels, sample_covariance};
pub use structure::{
    build_model_structure, miso_structure, EntryKind, ModelStructure, ModuleOrders, NoiseOrders, OrderSpec,
    ParamEntry,
};
