//! Frequency grids on which transfer-matrix algebra is evaluated numerically.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const MIN_GRID_POINTS: usize = 32;
pub const DEFAULT_GRID_POINTS: usize = 256;
pub const DEFAULT_GRID_LOW: f64 = 1e-3;

/// Ordered frequencies in `(0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < MIN_GRID_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_GRID_POINTS} points, got {}",
                omegas.len()
            )));
        }
        if omegas.iter().any(|w| !(*w > 0.0 && *w <= PI)) {
            return Err(Error::InvalidGrid("frequencies must lie in (0, pi]".into()));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        Ok(Self { omegas })
    }

    /// `m` logarithmically spaced points from `low` to pi inclusive.
    pub fn log_spaced(m: usize, low: f64) -> Result<Self> {
        if m < 2 || !(low > 0.0 && low < PI) {
            return Err(Error::InvalidGrid(format!("bad log grid (m = {m}, low = {low})")));
        }
        let (a, b) = (low.ln(), PI.ln());
        let mut omegas: Vec<f64> = (0..m)
            .map(|k| (a + (b - a) * k as f64 / (m - 1) as f64).exp())
            .collect();
        omegas[m - 1] = PI;
        Self::new(omegas)
    }

    /// 256 log-spaced points in `[1e-3, pi]`.
    pub fn default_log() -> Self {
        Self::log_spaced(DEFAULT_GRID_POINTS, DEFAULT_GRID_LOW).expect("default grid is valid")
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}
