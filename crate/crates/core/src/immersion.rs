//! Elimination of unmeasured nodes and the structure of the resulting
//! disturbance spectrum, evaluated pointwise on a frequency grid.
//!
//! Retained nodes are ordered `Q, o, B, A` (ascending inside each group).
//! Noise columns of `H̆` keep the natural source order `e_1 .. e_L`.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::NodePartition;
use crate::grid::{CMatrix, FrequencyGrid};
use crate::network::NetworkModel;

/// Relative block norm below which a spectrum block counts as zero.
pub const ZERO_BLOCK_TOL: f64 = 1e-8;

const SINGULAR_TOL: f64 = 1e-10;

/// Position of each group within the retained ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockLayout {
    /// Node indices in retained order.
    pub nodes: Vec<usize>,
    pub q: Range<usize>,
    pub o: Range<usize>,
    pub b: Range<usize>,
    pub a: Range<usize>,
}

impl BlockLayout {
    pub fn new(p: &NodePartition) -> Self {
        let mut nodes: Vec<usize> = p.q.iter().copied().collect();
        let q = 0..nodes.len();
        nodes.extend(p.o);
        let o = q.end..nodes.len();
        nodes.extend(p.b.iter().copied());
        let b = o.end..nodes.len();
        nodes.extend(p.a.iter().copied());
        let a = b.end..nodes.len();
        Self { nodes, q, o, b, a }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Retained positions of the given node indices.
    pub fn positions(&self, group: &[usize]) -> Result<Vec<usize>> {
        group
            .iter()
            .map(|k| {
                self.nodes
                    .iter()
                    .position(|n| n == k)
                    .ok_or_else(|| Error::InvalidPartition(format!("w{} is not a retained node", k + 1)))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ImmersedSystem {
    pub partition: NodePartition,
    pub layout: BlockLayout,
    pub grid: FrequencyGrid,
    /// `Ğ(ω)`, retained × retained.
    pub modules: Vec<CMatrix>,
    /// `H̆(ω)`, retained × L.
    pub noise: Vec<CMatrix>,
    /// Map from external inputs `r` (L columns) to the retained equations.
    pub excitation: Vec<CMatrix>,
    /// Factor `F` with `F F^T = Λ`, used for unit-covariance sources.
    covariance_factor: DMatrix<f64>,
    covariance: DMatrix<f64>,
}

fn select(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Eliminates the unmeasured nodes `Z` of `partition`.
pub fn immerse(model: &NetworkModel, partition: &NodePartition, grid: &FrequencyGrid) -> Result<ImmersedSystem> {
    let l = model.size();
    if partition.size != l {
        return Err(Error::InvalidPartition("partition size differs from the network".into()));
    }
    let layout = BlockLayout::new(partition);
    let retained = &layout.nodes;
    let z: Vec<usize> = partition.z.iter().copied().collect();
    let all: Vec<usize> = (0..l).collect();
    let eliminated_rows = layout.b.start..layout.a.end;
    let eye = CMatrix::identity(l, l);

    let per_freq: Vec<Result<(CMatrix, CMatrix, CMatrix)>> = grid
        .omegas()
        .par_iter()
        .map(|&w| {
            let g = model.modules_at(w)?;
            let h = model.noise_at(w)?;
            let mut gr = select(&g, retained, retained);
            let mut hr = select(&h, retained, &all);
            let mut rr = select(&eye, retained, &all);
            if !z.is_empty() {
                let gzz = select(&g, &z, &z);
                let lu = (CMatrix::identity(z.len(), z.len()) - gzz).lu();
                if lu.determinant().norm() < SINGULAR_TOL {
                    return Err(Error::ImmersionSingular { omega: w });
                }
                let rows: Vec<usize> = retained[eliminated_rows.clone()].to_vec();
                let gxz = select(&g, &rows, &z);
                let solve = |rhs: CMatrix| lu.solve(&rhs).ok_or(Error::ImmersionSingular { omega: w });
                let through_g = &gxz * solve(select(&g, &z, retained))?;
                let through_h = &gxz * solve(select(&h, &z, &all))?;
                let through_r = &gxz * solve(select(&eye, &z, &all))?;
                for (n, r) in eliminated_rows.clone().enumerate() {
                    for c in 0..retained.len() {
                        gr[(r, c)] += through_g[(n, c)];
                    }
                    for c in 0..l {
                        hr[(r, c)] += through_h[(n, c)];
                        rr[(r, c)] += through_r[(n, c)];
                    }
                }
            }
            if gr.iter().chain(hr.iter()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::ImmersionSingular { omega: w });
            }
            Ok((gr, hr, rr))
        })
        .collect();

    let mut modules = Vec::with_capacity(grid.len());
    let mut noise = Vec::with_capacity(grid.len());
    let mut excitation = Vec::with_capacity(grid.len());
    for r in per_freq {
        let (g, h, e) = r?;
        modules.push(g);
        noise.push(h);
        excitation.push(e);
    }
    Ok(ImmersedSystem {
        partition: partition.clone(),
        layout,
        grid: grid.clone(),
        modules,
        noise,
        excitation,
        covariance_factor: model.covariance_factor()?,
        covariance: model.covariance().clone(),
    })
}

impl ImmersedSystem {
    /// `H̆ F` at each grid point: noise responses to unit-covariance sources.
    pub fn unit_noise(&self) -> Vec<CMatrix> {
        let f = complexify(&self.covariance_factor);
        self.noise.iter().map(|h| h * &f).collect()
    }

    /// Spectrum of the retained node signals for independent white
    /// excitation with the given variances (one per node).
    pub fn node_spectrum(&self, excitation_variance: &[f64]) -> Result<Vec<CMatrix>> {
        let n = self.layout.len();
        let lam = complexify(&self.covariance);
        let phi_r = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            excitation_variance.len(),
            excitation_variance.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        self.modules
            .iter()
            .zip(&self.noise)
            .zip(&self.excitation)
            .zip(self.grid.omegas())
            .map(|(((g, h), r), &w)| {
                let t = (CMatrix::identity(n, n) - g)
                    .try_inverse()
                    .ok_or(Error::SingularEvaluation { omega: w })?;
                let inner = h * &lam * h.adjoint() + r * &phi_r * r.adjoint();
                Ok(&t * inner * t.adjoint())
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DisturbanceSpectrum {
    pub layout: BlockLayout,
    pub grid: FrequencyGrid,
    pub values: Vec<CMatrix>,
}

/// `Φ(ω) = H̆ Λ H̆^*` on the grid.
pub fn disturbance_spectrum(sys: &ImmersedSystem, covariance: &DMatrix<f64>) -> DisturbanceSpectrum {
    let lam = complexify(covariance);
    let values = sys.noise.iter().map(|h| h * &lam * h.adjoint()).collect();
    DisturbanceSpectrum {
        layout: sys.layout.clone(),
        grid: sys.grid.clone(),
        values,
    }
}

impl DisturbanceSpectrum {
    /// Largest `‖Φ − Φ^*‖` over the grid.
    pub fn hermitian_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|p| (p - p.adjoint()).norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(min_hermitian_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Smallest eigenvalue of a Hermitian matrix, via the real symmetric
/// embedding `[[Re, -Im], [Im, Re]]`.
pub fn min_hermitian_eigenvalue(p: &CMatrix) -> f64 {
    let n = p.nrows();
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let v = p[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    let m = (&m + m.transpose()) * 0.5;
    m.symmetric_eigenvalues().min()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockNorms {
    pub name: &'static str,
    /// Largest relative norm over the grid.
    pub max_relative: f64,
    pub per_frequency: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub omegas: Vec<f64>,
    pub blocks: Vec<BlockNorms>,
    pub tolerance: f64,
}

impl BlockReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_relative < self.tolerance)
    }

    pub fn block(&self, name: &str) -> Option<&BlockNorms> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

fn block_norm(p: &CMatrix, rows: &Range<usize>, cols: &Range<usize>) -> f64 {
    p.view((rows.start, cols.start), (rows.len(), cols.len())).norm()
}

/// Frobenius norms of the `(Q, A)`, `(o, A)` and `(B, A)` blocks relative to
/// the norm of the whole spectrum.
pub fn check_zero_blocks(spec: &DisturbanceSpectrum) -> BlockReport {
    let lay = &spec.layout;
    let groups = [("QA", &lay.q), ("oA", &lay.o), ("BA", &lay.b)];
    let blocks = groups
        .iter()
        .map(|(name, rows)| {
            let per_frequency: Vec<f64> = spec
                .values
                .iter()
                .map(|p| {
                    let total = p.norm();
                    if total == 0.0 {
                        0.0
                    } else {
                        block_norm(p, rows, &lay.a) / total
                    }
                })
                .collect();
            BlockNorms {
                name,
                max_relative: per_frequency.iter().copied().fold(0.0, f64::max),
                per_frequency,
            }
        })
        .collect();
    BlockReport {
        omegas: spec.grid.omegas().to_vec(),
        blocks,
        tolerance: ZERO_BLOCK_TOL,
    }
}

/// `H̆_{1x} H̆_{2x}^*` for source `x` (unit covariance) and two node groups,
/// one `|g1| × |g2|` matrix per grid point.
pub fn lemma1_product(sys: &ImmersedSystem, x: usize, group1: &[usize], group2: &[usize]) -> Result<Vec<CMatrix>> {
    if x >= sys.partition.size {
        return Err(Error::InvalidPartition(format!("no noise source e{}", x + 1)));
    }
    let r1 = sys.layout.positions(group1)?;
    let r2 = sys.layout.positions(group2)?;
    Ok(sys
        .unit_noise()
        .iter()
        .map(|h| {
            let c1 = CMatrix::from_fn(r1.len(), 1, |r, _| h[(r1[r], x)]);
            let c2 = CMatrix::from_fn(r2.len(), 1, |r, _| h[(r2[r], x)]);
            &c1 * c2.adjoint()
        })
        .collect())
}

/// Largest Frobenius norm in a grid field.
pub fn max_norm(field: &[CMatrix]) -> f64 {
    field.iter().map(|m| m.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_eigenvalue_of_hermitian() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let p = CMatrix::from_row_slice(2, 2, &[one * 2.0, i, -i, one * 2.0]);
        assert!((min_hermitian_eigenvalue(&p) - 1.0).abs() < 1e-12);
    }
}
