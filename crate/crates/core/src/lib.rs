//! Local module identification in dynamic networks with correlated process
//! noise.
//!
//! The crate covers the whole pipeline for one target module `G[j,i]`:
//! network description and simulation ([`network`], [`simulate`]),
//! structural signal selection ([`graph`]), frequency-grid verification of
//! the immersed noise structure ([`immersion`]) and the direct
//! prediction-error estimator ([`identify`]).

pub mod config;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod grid;
pub mod identify;
pub mod immersion;
pub mod network;
pub mod report;
pub mod signal;
pub mod simulate;
pub mod spectral;
pub mod tf;

pub use error::{Error, Result};
pub use grid::FrequencyGrid;
pub use num_complex::Complex64;
pub use network::{NetworkModel, NoiseConvention, ValidationReport, Violation};
pub use signal::SignalRecord;
pub use simulate::{SimulationPlan, StabilityReport};
pub use tf::TransferFunction;
