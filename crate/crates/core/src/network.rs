//! Ground-truth dynamic network `w = G w + r + H e` with `cov(e) = Λ`.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CMatrix, FrequencyGrid};
use crate::simulate::{stability_check, StabilityReport};
use crate::tf::TransferFunction;

const PSD_TOL: f64 = 1e-10;

/// How the noise model is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseConvention {
    /// `H` monic, the white noise `e` has covariance `Λ`.
    #[default]
    Monic,
    /// `H` carries the scaling and `cov(e) = I`.
    Scaled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    size: usize,
    modules: Vec<Vec<TransferFunction>>,
    noise: Vec<Vec<TransferFunction>>,
    covariance: DMatrix<f64>,
    excitation: Vec<bool>,
    labels: Vec<String>,
    convention: NoiseConvention,
}

/// One structural problem found by [`NetworkModel::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonzeroDiagonal { node: usize },
    DelayAssumption,
    Unstable { margin: f64 },
    UnstableModule { row: usize, col: usize },
    UnstableNoiseFilter { row: usize, col: usize },
    NonSymmetricCovariance,
    NonPsdCovariance,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal { node } => {
                write!(f, "nonzero diagonal: G[{0},{0}] must be zero", node + 1)
            }
            Violation::DelayAssumption => write!(
                f,
                "delay assumption: some module has direct feedthrough while the innovation covariance is not diagonal"
            ),
            Violation::Unstable { margin } => write!(f, "instability: loop margin {margin:.3e}"),
            Violation::UnstableModule { row, col } => {
                write!(f, "instability: module G[{},{}] has a pole outside the unit disc", row + 1, col + 1)
            }
            Violation::UnstableNoiseFilter { row, col } => {
                write!(f, "instability: noise filter H[{},{}] has a pole outside the unit disc", row + 1, col + 1)
            }
            Violation::NonSymmetricCovariance => write!(f, "noise covariance is not symmetric"),
            Violation::NonPsdCovariance => write!(f, "noise covariance is not positive semidefinite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub stability: Option<StabilityReport>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

impl NetworkModel {
    /// Assembles a network. Only dimensions are checked here; use
    /// [`NetworkModel::validate`] for the structural assumptions.
    pub fn new(
        modules: Vec<Vec<TransferFunction>>,
        noise: Vec<Vec<TransferFunction>>,
        covariance: DMatrix<f64>,
        excitation: Vec<bool>,
        labels: Vec<String>,
        convention: NoiseConvention,
    ) -> Result<Self> {
        let size = modules.len();
        if size == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        let square = |m: &Vec<Vec<TransferFunction>>| m.len() == size && m.iter().all(|r| r.len() == size);
        if !square(&modules) || !square(&noise) {
            return Err(Error::InvalidNetwork("G and H must be L x L".into()));
        }
        if covariance.nrows() != size || covariance.ncols() != size {
            return Err(Error::InvalidNetwork("covariance must be L x L".into()));
        }
        if excitation.len() != size || labels.len() != size {
            return Err(Error::InvalidNetwork("per-node attributes must have length L".into()));
        }
        Ok(Self {
            size,
            modules,
            noise,
            covariance,
            excitation,
            labels,
            convention,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn module(&self, row: usize, col: usize) -> &TransferFunction {
        &self.modules[row][col]
    }

    pub fn noise_filter(&self, row: usize, col: usize) -> &TransferFunction {
        &self.noise[row][col]
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn excitation(&self) -> &[bool] {
        &self.excitation
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn convention(&self) -> NoiseConvention {
        self.convention
    }

    pub fn set_excitation(&mut self, node: usize, present: bool) {
        self.excitation[node] = present;
    }

    /// Indices `k` with `G[j][k] != 0`.
    pub fn in_neighbors(&self, j: usize) -> BTreeSet<usize> {
        (0..self.size)
            .filter(|&k| !self.modules[j][k].is_zero())
            .collect()
    }

    pub fn has_module(&self, row: usize, col: usize) -> bool {
        row < self.size && col < self.size && !self.modules[row][col].is_zero()
    }

    pub fn all_strictly_proper(&self) -> bool {
        self.modules.iter().flatten().all(|m| m.strictly_proper())
    }

    /// `G(e^{i omega})`.
    pub fn modules_at(&self, omega: f64) -> Result<CMatrix> {
        eval_matrix(&self.modules, omega)
    }

    /// `H(e^{i omega})`.
    pub fn noise_at(&self, omega: f64) -> Result<CMatrix> {
        eval_matrix(&self.noise, omega)
    }

    /// Lower-triangular `F` with `F F^T = Λ`, tolerating semidefinite `Λ`.
    pub fn covariance_factor(&self) -> Result<DMatrix<f64>> {
        psd_cholesky(&self.covariance)
    }

    /// Zero-lag innovation covariance `H(∞) Λ H(∞)^T`.
    pub fn innovation_covariance(&self) -> DMatrix<f64> {
        let h0 = DMatrix::from_fn(self.size, self.size, |r, c| self.noise[r][c].feedthrough());
        &h0 * &self.covariance * h0.transpose()
    }

    /// Noise edges `e_k -> w_j` for unit-covariance sources: the nonzero
    /// pattern of `H F` where `F` factors `Λ`.
    pub fn noise_edge_pattern(&self) -> Result<Vec<Vec<bool>>> {
        let f = self.covariance_factor()?;
        let l = self.size;
        Ok((0..l)
            .map(|j| {
                (0..l)
                    .map(|k| (0..l).any(|m| !self.noise[j][m].is_zero() && f[(m, k)] != 0.0))
                    .collect()
            })
            .collect())
    }

    /// Structural nonzero pattern of `Φ_v = H Λ H^*`.
    pub fn disturbance_correlation(&self) -> Vec<Vec<bool>> {
        let l = self.size;
        let mut out = vec![vec![false; l]; l];
        for a in 0..l {
            for b in 0..l {
                out[a][b] = (0..l).any(|m| {
                    !self.noise[a][m].is_zero()
                        && (0..l).any(|n| self.covariance[(m, n)] != 0.0 && !self.noise[b][n].is_zero())
                });
            }
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let l = self.size;
        for j in 0..l {
            if !self.modules[j][j].is_zero() {
                violations.push(Violation::NonzeroDiagonal { node: j });
            }
        }
        let sym = (0..l).all(|r| (0..l).all(|c| (self.covariance[(r, c)] - self.covariance[(c, r)]).abs() <= 1e-12));
        if !sym {
            violations.push(Violation::NonSymmetricCovariance);
        }
        let psd = self.covariance_factor().is_ok();
        if !psd {
            violations.push(Violation::NonPsdCovariance);
        }
        if !self.all_strictly_proper() && !is_diagonal(&self.innovation_covariance()) {
            violations.push(Violation::DelayAssumption);
        }
        for r in 0..l {
            for c in 0..l {
                if !self.modules[r][c].is_zero() && !self.modules[r][c].is_stable() {
                    violations.push(Violation::UnstableModule { row: r, col: c });
                }
                if !self.noise[r][c].is_zero() && !self.noise[r][c].is_stable() {
                    violations.push(Violation::UnstableNoiseFilter { row: r, col: c });
                }
            }
        }
        let stability = stability_check(self, &FrequencyGrid::default_log()).ok();
        match &stability {
            Some(s) if !s.stable => violations.push(Violation::Unstable { margin: s.margin }),
            None => violations.push(Violation::Unstable { margin: f64::NEG_INFINITY }),
            _ => {}
        }
        ValidationReport { violations, stability }
    }

    /// Returns the model if it is valid, else an error listing all violations.
    pub fn validated(self) -> Result<Self> {
        let report = self.validate();
        if report.is_valid() {
            Ok(self)
        } else {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidNetwork(msgs.join("; ")))
        }
    }

    pub(crate) fn modules_matrix(&self) -> &[Vec<TransferFunction>] {
        &self.modules
    }
}

pub(crate) fn eval_matrix(m: &[Vec<TransferFunction>], omega: f64) -> Result<CMatrix> {
    let n = m.len();
    let mut out = CMatrix::from_element(n, m.first().map_or(0, |r| r.len()), Complex64::new(0.0, 0.0));
    for (r, row) in m.iter().enumerate() {
        for (c, tf) in row.iter().enumerate() {
            out[(r, c)] = tf.response_at(omega)?;
        }
    }
    Ok(out)
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)].abs() <= 1e-14))
}

/// Cholesky factor of a symmetric positive semidefinite matrix. Zero pivots
/// are accepted when the rest of their column vanishes.
pub fn psd_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let tol = PSD_TOL * scale;
    let mut f = DMatrix::<f64>::zeros(n, n);
    for c in 0..n {
        let pivot = m[(c, c)] - (0..c).map(|k| f[(c, k)] * f[(c, k)]).sum::<f64>();
        if pivot < -tol {
            return Err(Error::NonPsdCovariance);
        }
        if pivot <= tol {
            for r in c + 1..n {
                let rest = m[(r, c)] - (0..c).map(|k| f[(r, k)] * f[(c, k)]).sum::<f64>();
                if rest.abs() > tol.sqrt() {
                    return Err(Error::NonPsdCovariance);
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        f[(c, c)] = d;
        for r in c + 1..n {
            let v = m[(r, c)] - (0..c).map(|k| f[(r, k)] * f[(c, k)]).sum::<f64>();
            f[(r, c)] = v / d;
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64], d: usize) -> TransferFunction {
        TransferFunction::new(num.to_vec(), den.to_vec(), d).unwrap()
    }

    fn two_node(g12: TransferFunction, g11: TransferFunction, cov: DMatrix<f64>) -> NetworkModel {
        let z = TransferFunction::zero;
        NetworkModel::new(
            vec![vec![g11, g12], vec![tf(&[0.3], &[1.0], 1), z()]],
            vec![vec![TransferFunction::unit(), z()], vec![z(), TransferFunction::unit()]],
            cov,
            vec![false; 2],
            vec!["w1".into(), "w2".into()],
            NoiseConvention::Monic,
        )
        .unwrap()
    }

    #[test]
    fn nonzero_diagonal_is_reported() {
        let m = two_node(tf(&[0.2], &[1.0], 1), tf(&[0.1], &[1.0], 1), DMatrix::identity(2, 2));
        let r = m.validate();
        assert!(r.has(|v| matches!(v, Violation::NonzeroDiagonal { node: 0 })));
        assert!(r.violations[0].to_string().contains("nonzero diagonal"));
    }

    #[test]
    fn feedthrough_with_correlated_noise_breaks_delay_assumption() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = two_node(tf(&[0.2, 0.1], &[1.0], 0), TransferFunction::zero(), cov.clone());
        let r = m.validate();
        assert!(r.has(|v| *v == Violation::DelayAssumption));
        assert!(r.violations.iter().any(|v| v.to_string().contains("delay assumption")));
        // diagonal covariance makes feedthrough acceptable
        let m = two_node(tf(&[0.2, 0.1], &[1.0], 0), TransferFunction::zero(), DMatrix::identity(2, 2));
        assert!(!m.validate().has(|v| *v == Violation::DelayAssumption));
    }

    #[test]
    fn non_psd_covariance_is_reported() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let m = two_node(tf(&[0.2], &[1.0], 1), TransferFunction::zero(), cov);
        assert!(m.validate().has(|v| *v == Violation::NonPsdCovariance));
    }

    #[test]
    fn psd_cholesky_handles_rank_deficiency() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let f = psd_cholesky(&m).unwrap();
        assert!((&f * f.transpose() - &m).abs().max() < 1e-12);
        assert_eq!(f[(1, 1)], 0.0);
    }

    #[test]
    fn correlation_pattern_follows_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let m = two_node(tf(&[0.2], &[1.0], 1), TransferFunction::zero(), cov);
        let c = m.disturbance_correlation();
        assert!(c[0][1] && c[1][0]);
        let e = m.noise_edge_pattern().unwrap();
        // e_1 drives both nodes once the covariance is factored
        assert!(e[0][0] && e[1][0] && e[1][1] && !e[0][1]);
    }
}
