use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::criterion::nonsingular_covariance;
use super::predictor::{evaluate, residuals, sample_covariance, Channels, Evaluation};
use super::structure::{EntryKind, ModelStructure};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::signal::SignalRecord;
use crate::simulate::derive_seed;
use crate::tf::{poly_from_roots, TransferFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Weighted least squares `(1/N) Σ ε^T W ε`.
    Wls,
    /// Determinant of the residual sample covariance.
    MlDet,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Wls => "wls",
            Criterion::MlDet => "mldet",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wls" => Ok(Criterion::Wls),
            "mldet" | "ml_det" | "ml-det" => Ok(Criterion::MlDet),
            other => Err(Error::Structure(format!("unknown criterion '{other}' (use wls or mldet)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub criterion: Criterion,
    /// WLS weight; identity when absent.
    pub weight: Option<DMatrix<f64>>,
    pub starts: usize,
    pub max_iterations: usize,
    /// Relative criterion decrease below which a start stops.
    pub tolerance: f64,
    pub seed: u64,
    /// Replaces the least-squares initialization of start 0.
    pub initial: Option<Vec<f64>>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            criterion: Criterion::MlDet,
            weight: None,
            starts: 8,
            max_iterations: 100,
            tolerance: 1e-10,
            seed: 0,
            initial: None,
        }
    }
}

impl EstimateOptions {
    pub fn with_criterion(mut self, criterion: Criterion) -> Self {
        self.criterion = criterion;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts = starts;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub index: usize,
    pub value: Option<f64>,
    pub iterations: usize,
    pub failure: Option<String>,
    /// Criterion after every accepted iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerDiagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub best_start: usize,
    pub starts: Vec<StartSummary>,
    /// Criterion after every accepted iteration of the best start.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub structure: ModelStructure,
    pub theta: Vec<f64>,
    pub criterion: Criterion,
    pub value: f64,
    /// Residual sample covariance at the optimum.
    pub lambda: DMatrix<f64>,
    pub diagnostics: OptimizerDiagnostics,
    pub residuals: SignalRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleEstimate {
    pub row: usize,
    pub col: usize,
    pub tf: TransferFunction,
    pub response: Vec<Complex64>,
}

struct Objective<'a> {
    structure: &'a ModelStructure,
    channels: Channels,
    criterion: Criterion,
    weight: DMatrix<f64>,
}

impl<'a> Objective<'a> {
    fn new(structure: &'a ModelStructure, data: &SignalRecord, opts: &EstimateOptions) -> Result<Self> {
        let ny = structure.outputs.len();
        let weight = opts.weight.clone().unwrap_or_else(|| DMatrix::identity(ny, ny));
        if opts.criterion == Criterion::Wls {
            super::criterion::criterion_wls(&vec![vec![0.0]; ny], &weight)?;
        }
        Ok(Self {
            structure,
            channels: Channels::new(structure, data)?,
            criterion: opts.criterion,
            weight,
        })
    }

    /// Value in optimizer scale (`ln det` for the determinant criterion).
    fn scaled(&self, eps: &[Vec<f64>]) -> Result<f64> {
        match self.criterion {
            Criterion::Wls => Ok(sample_covariance(eps).component_mul(&self.weight).sum()),
            Criterion::MlDet => Ok(nonsingular_covariance(eps)?.determinant().ln()),
        }
    }

    fn unscale(&self, v: f64) -> f64 {
        match self.criterion {
            Criterion::Wls => v,
            Criterion::MlDet => v.exp(),
        }
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.scaled(&residuals(self.structure, theta, &self.channels)?)
    }

    /// Weight of the normal equations at the current residuals.
    fn local_weight(&self, eps: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        match self.criterion {
            Criterion::Wls => Ok(self.weight.clone()),
            Criterion::MlDet => nonsingular_covariance(eps)?
                .try_inverse()
                .ok_or(Error::DegenerateResiduals),
        }
    }

    /// `A = (1/N) Σ ψ^T W ψ` and `g = (1/N) Σ ψ^T W ε`.
    fn normal_equations(&self, ev: &Evaluation, w: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let p = ev.sens.len();
        let ny = ev.eps.len();
        let n = ev.eps.first().map_or(1, |c| c.len()).max(1) as f64;
        let weighted: Vec<Vec<Vec<f64>>> = ev
            .sens
            .par_iter()
            .map(|psi| {
                (0..ny)
                    .map(|a| {
                        let mut out = vec![0.0; psi[0].len()];
                        for b in 0..ny {
                            let wab = w[(a, b)];
                            if wab != 0.0 {
                                for (o, v) in out.iter_mut().zip(&psi[b]) {
                                    *o += wab * v;
                                }
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        let dot = |x: &[Vec<f64>], y: &[Vec<f64>]| -> f64 {
            x.iter()
                .zip(y)
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>())
                .sum::<f64>()
                / n
        };
        let rows: Vec<Vec<f64>> = (0..p)
            .into_par_iter()
            .map(|k| (0..p).map(|l| if l < k { 0.0 } else { dot(&weighted[k], &ev.sens[l]) }).collect())
            .collect();
        let mut a = DMatrix::zeros(p, p);
        for k in 0..p {
            for l in k..p {
                a[(k, l)] = rows[k][l];
                a[(l, k)] = rows[k][l];
            }
        }
        let g = DVector::from_iterator(p, weighted.iter().map(|wk| dot(wk, &ev.eps)));
        (a, g)
    }

    /// Criterion value and its exact gradient.
    fn gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let ev = evaluate(self.structure, theta, &self.channels)?;
        let w = self.local_weight(&ev.eps)?;
        let (_, g) = self.normal_equations(&ev, &w);
        let v = self.unscale(self.scaled(&ev.eps)?);
        // d(ε^T W ε)/dθ = 2 ψ^T W ε; d det R = det R · 2 ε^T R^{-1} ψ / N
        let scale = match self.criterion {
            Criterion::Wls => 2.0,
            Criterion::MlDet => 2.0 * v,
        };
        Ok((v, g * scale))
    }
}

struct StartOutcome {
    theta: Vec<f64>,
    value: f64,
    iterations: usize,
    history: Vec<f64>,
}

fn levenberg_marquardt(obj: &Objective, theta0: Vec<f64>, opts: &EstimateOptions) -> Result<StartOutcome> {
    let mut theta = theta0;
    let mut value = obj.value(&theta)?;
    let mut history = vec![obj.unscale(value)];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let p = theta.len();
    while iterations < opts.max_iterations {
        let ev = evaluate(obj.structure, &theta, &obj.channels)?;
        let w = obj.local_weight(&ev.eps)?;
        let (a, g) = obj.normal_equations(&ev, &w);
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-300);
        let mut accepted = None;
        for _ in 0..40 {
            let mut m = a.clone();
            for k in 0..p {
                m[(k, k)] += lambda * a[(k, k)].max(1e-9 * scale);
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            match obj.value(&cand) {
                Ok(v) if v < value => {
                    accepted = Some((cand, v, step.norm()));
                    break;
                }
                _ => lambda *= 10.0,
            }
            if lambda > 1e12 {
                break;
            }
        }
        let Some((cand, v, step_norm)) = accepted else {
            break;
        };
        iterations += 1;
        let rel = (value - v) / value.abs().max(1e-300);
        theta = cand;
        value = v;
        history.push(obj.unscale(value));
        lambda = (lambda / 10.0).max(1e-12);
        let theta_norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        if rel.abs() < opts.tolerance || step_norm < 1e-12 * (1.0 + theta_norm) {
            break;
        }
    }
    Ok(StartOutcome {
        theta,
        value: obj.unscale(value),
        iterations,
        history,
    })
}

/// Least-squares fit of the module numerators with all denominators at 1
/// and `H̄ = I`.
pub fn initial_parameters(structure: &ModelStructure, data: &SignalRecord) -> Result<Vec<f64>> {
    let ch = Channels::new(structure, data)?;
    let mut theta = vec![0.0; structure.dim];
    for (row_pos, y) in ch.y.iter().enumerate() {
        let entries: Vec<_> = structure.modules.iter().filter(|e| e.row_pos == row_pos).collect();
        let cols: usize = entries.iter().map(|e| e.n_num).sum();
        if cols == 0 {
            continue;
        }
        let n = ch.len;
        let phi = DMatrix::from_fn(n, cols, |t, c| {
            let mut c = c;
            for e in &entries {
                if c < e.n_num {
                    let lag = e.nk + c;
                    return if t >= lag { ch.d[e.col_pos][t - lag] } else { 0.0 };
                }
                c -= e.n_num;
            }
            unreachable!()
        });
        let rhs = DVector::from_column_slice(y);
        let sol = phi
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::EstimationFailed(format!("initial least squares: {e}")))?;
        let mut k = 0;
        for e in &entries {
            theta[e.offset..e.offset + e.n_num].copy_from_slice(&sol.as_slice()[k..k + e.n_num]);
            k += e.n_num;
        }
    }
    Ok(theta)
}

fn random_stable(rng: &mut ChaCha8Rng, order: usize, radius: f64) -> Vec<f64> {
    let roots: Vec<Complex64> = (0..order)
        .map(|_| Complex64::new(rng.random_range(-radius..radius), 0.0))
        .collect();
    poly_from_roots(&roots)[1..].to_vec()
}

fn perturbed_start(structure: &ModelStructure, base: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = base.to_vec();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for e in structure.modules.iter().chain(&structure.noise) {
        for k in 0..e.n_num {
            let v = &mut theta[e.offset + k];
            let spread = match e.kind {
                EntryKind::Module => 0.2 * v.abs().max(0.1),
                _ => 0.3,
            };
            *v += spread * normal.sample(rng);
        }
        let den = random_stable(rng, e.n_den, 0.7);
        theta[e.offset + e.n_num..e.offset + e.len()].copy_from_slice(&den);
    }
    theta
}

fn starting_points(structure: &ModelStructure, data: &SignalRecord, opts: &EstimateOptions) -> Result<Vec<Vec<f64>>> {
    let base = match &opts.initial {
        Some(t) => {
            structure.check_domain(t)?;
            t.clone()
        }
        None => initial_parameters(structure, data)?,
    };
    let mut out = vec![base.clone()];
    for k in 1..opts.starts {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, k as u64));
        out.push(perturbed_start(structure, &base, &mut rng));
    }
    Ok(out)
}

/// Criterion value at `θ`.
pub fn criterion_value(structure: &ModelStructure, theta: &[f64], data: &SignalRecord, opts: &EstimateOptions) -> Result<f64> {
    let obj = Objective::new(structure, data, opts)?;
    Ok(obj.unscale(obj.value(theta)?))
}

/// Criterion value and the gradient used by the optimizer.
pub fn criterion_gradient(
    structure: &ModelStructure,
    theta: &[f64],
    data: &SignalRecord,
    opts: &EstimateOptions,
) -> Result<(f64, DVector<f64>)> {
    Objective::new(structure, data, opts)?.gradient(theta)
}

/// Multi-start minimization of the prediction-error criterion.
pub fn estimate(structure: &ModelStructure, data: &SignalRecord, opts: &EstimateOptions) -> Result<EstimationResult> {
    if structure.dim == 0 {
        return Err(Error::Structure("structure has no free parameters".into()));
    }
    if data.len() < 10 * structure.dim {
        return Err(Error::InvalidSignal(format!(
            "{} samples for {} parameters; at least {} needed",
            data.len(),
            structure.dim,
            10 * structure.dim
        )));
    }
    if opts.starts == 0 {
        return Err(Error::EstimationFailed("at least one start required".into()));
    }
    let obj = Objective::new(structure, data, opts)?;
    let starts = starting_points(structure, data, opts)?;
    let outcomes: Vec<Result<StartOutcome>> = starts
        .into_par_iter()
        .map(|t0| levenberg_marquardt(&obj, t0, opts))
        .collect();

    let summaries: Vec<StartSummary> = outcomes
        .iter()
        .enumerate()
        .map(|(index, o)| match o {
            Ok(s) => StartSummary {
                index,
                value: Some(s.value),
                iterations: s.iterations,
                failure: None,
                history: s.history.clone(),
            },
            Err(e) => StartSummary {
                index,
                value: None,
                iterations: 0,
                failure: Some(e.to_string()),
                history: Vec::new(),
            },
        })
        .collect();
    let best = outcomes
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.as_ref().ok().map(|s| (k, s)))
        .filter(|(_, s)| s.value.is_finite())
        .min_by(|(ka, a), (kb, b)| a.value.total_cmp(&b.value).then(ka.cmp(kb)));
    let Some((best_start, outcome)) = best else {
        let reasons: Vec<String> = summaries.iter().filter_map(|s| s.failure.clone()).collect();
        return Err(Error::EstimationFailed(format!("all starts failed: {}", reasons.join("; "))));
    };

    let (_, grad) = obj.gradient(&outcome.theta)?;
    let eps = residuals(structure, &outcome.theta, &obj.channels)?;
    let lambda = sample_covariance(&eps);
    let names = structure.outputs.iter().map(|k| format!("eps{}", k + 1)).collect();
    Ok(EstimationResult {
        structure: structure.clone(),
        theta: outcome.theta.clone(),
        criterion: opts.criterion,
        value: outcome.value,
        lambda,
        diagnostics: OptimizerDiagnostics {
            iterations: outcome.iterations,
            gradient_norm: grad.norm(),
            best_start,
            starts: summaries,
            history: outcome.history.clone(),
        },
        residuals: SignalRecord::new(names, eps, data.origin())?,
    })
}

/// Estimated module `G[j, i]` (0-based) with its response on `grid`.
pub fn extract_module(result: &EstimationResult, j: usize, i: usize, grid: &FrequencyGrid) -> Result<ModuleEstimate> {
    let e = result
        .structure
        .module_entry(j, i)
        .ok_or(Error::ModuleNotInStructure { j: j + 1, i: i + 1 })?;
    let tf = e.transfer_function(&result.theta);
    let response = tf.frequency_response(grid)?;
    Ok(ModuleEstimate {
        row: j,
        col: i,
        tf,
        response,
    })
}

impl EstimationResult {
    /// Estimated noise-model entries `(row, col, H̄_rc)`.
    pub fn noise_model(&self) -> Vec<(usize, usize, TransferFunction)> {
        self.structure
            .noise
            .iter()
            .map(|e| (e.row, e.col, e.transfer_function(&self.theta)))
            .collect()
    }
}
