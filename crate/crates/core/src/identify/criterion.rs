use nalgebra::DMatrix;

use super::predictor::sample_covariance;
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a residual covariance is singular.
const DEGENERATE_RATIO: f64 = 1e-12;

fn check_weight(w: &DMatrix<f64>, ny: usize) -> Result<()> {
    if w.nrows() != ny || w.ncols() != ny {
        return Err(Error::NonPdWeight);
    }
    let sym = (0..ny).all(|r| (0..ny).all(|c| (w[(r, c)] - w[(c, r)]).abs() <= 1e-12 * (1.0 + w[(r, c)].abs())));
    if !sym || w.clone().cholesky().is_none() {
        return Err(Error::NonPdWeight);
    }
    Ok(())
}

/// `(1/N) Σ ε(t)^T W ε(t)`.
pub fn criterion_wls(eps: &[Vec<f64>], weight: &DMatrix<f64>) -> Result<f64> {
    check_weight(weight, eps.len())?;
    let c = sample_covariance(eps);
    Ok(c.component_mul(weight).sum())
}

/// Sample covariance, refused when (numerically) singular.
pub fn nonsingular_covariance(eps: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let c = sample_covariance(eps);
    let eig = c.clone().symmetric_eigenvalues();
    let max = eig.max();
    if !(max > 0.0) || eig.min() <= DEGENERATE_RATIO * max {
        return Err(Error::DegenerateResiduals);
    }
    Ok(c)
}

/// `det((1/N) Σ ε(t) ε(t)^T)`.
pub fn criterion_ml_det(eps: &[Vec<f64>]) -> Result<f64> {
    Ok(nonsingular_covariance(eps)?.determinant())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residuals_give_zero() {
        let eps = vec![vec![0.0; 10]; 2];
        assert_eq!(criterion_wls(&eps, &DMatrix::identity(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_cases_agree() {
        let eps = vec![vec![1.0, -2.0, 0.5, 3.0]];
        let ms = (1.0 + 4.0 + 0.25 + 9.0) / 4.0;
        assert!((criterion_wls(&eps, &DMatrix::identity(1, 1)).unwrap() - ms).abs() < 1e-15);
        assert!((criterion_ml_det(&eps).unwrap() - ms).abs() < 1e-15);
    }

    #[test]
    fn weight_must_be_positive_definite() {
        let eps = vec![vec![1.0; 4]; 2];
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(criterion_wls(&eps, &w), Err(Error::NonPdWeight)));
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(criterion_wls(&eps, &w), Err(Error::NonPdWeight)));
    }

    #[test]
    fn correlated_channels_are_degenerate() {
        let a: Vec<f64> = (0..50).map(|k| (k as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(criterion_ml_det(&[a, b]), Err(Error::DegenerateResiduals)));
    }
}
