use nalgebra::DMatrix;

use super::structure::{ModelStructure, ParamEntry};
use crate::error::{Error, Result};
use crate::signal::SignalRecord;

/// Output and input channels in structure order.
#[derive(Debug, Clone)]
pub(crate) struct Channels {
    pub y: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub len: usize,
}

impl Channels {
    pub fn new(structure: &ModelStructure, data: &SignalRecord) -> Result<Self> {
        let grab = |nodes: &[usize]| -> Result<Vec<Vec<f64>>> {
            nodes.iter().map(|&k| Ok(data.node(k)?.to_vec())).collect()
        };
        Ok(Self {
            y: grab(&structure.outputs)?,
            d: grab(&structure.inputs)?,
            len: data.len(),
        })
    }
}

/// Filters `u` by `num / den` (coefficients by lag, `den[0] = 1`).
fn filter(num: &[f64], den: &[f64], u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    for t in 0..u.len() {
        let mut acc = 0.0;
        for (k, b) in num.iter().enumerate().take(t + 1) {
            acc += b * u[t - k];
        }
        for (k, a) in den.iter().enumerate().skip(1).take(t) {
            acc -= a * y[t - k];
        }
        y[t] = acc;
    }
    y
}

fn shifted(x: &[f64], lag: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if lag < n {
        out[lag..].copy_from_slice(&x[..n - lag]);
    }
    out
}

/// The monic noise model in recursion form.
struct NoiseRecursion {
    ny: usize,
    /// `(row_pos, col_pos, numerator by lag, denominator)`.
    pairs: Vec<(usize, usize, Vec<f64>, Vec<f64>)>,
}

impl NoiseRecursion {
    fn new(structure: &ModelStructure, theta: &[f64]) -> Self {
        Self {
            ny: structure.outputs.len(),
            pairs: structure
                .noise
                .iter()
                .map(|e| (e.row_pos, e.col_pos, e.lag_numerator(theta), e.denominator(theta)))
                .collect(),
        }
    }

    /// Solves `H̄ ε = s` forward in time. Returns `ε` and the filtered
    /// signals `z_ab = H̄_ab ε_b` for every pair.
    fn solve(&self, s: &[Vec<f64>], limit: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let n = s.first().map_or(0, |c| c.len());
        let mut eps = vec![vec![0.0; n]; self.ny];
        let mut z = vec![vec![0.0; n]; self.pairs.len()];
        let mut past = vec![0.0; self.pairs.len()];
        for t in 0..n {
            for (p, (_, b, num, den)) in self.pairs.iter().enumerate() {
                let mut acc = 0.0;
                for (k, c) in num.iter().enumerate().skip(1).take(t) {
                    acc += c * eps[*b][t - k];
                }
                for (k, d) in den.iter().enumerate().skip(1).take(t) {
                    acc -= d * z[p][t - k];
                }
                past[p] = acc;
            }
            for a in 0..self.ny {
                eps[a][t] = s[a][t];
            }
            for (p, (a, _, _, _)) in self.pairs.iter().enumerate() {
                eps[*a][t] -= past[p];
            }
            for a in 0..self.ny {
                if !(eps[a][t].abs() <= limit) {
                    return Err(Error::DomainViolation(format!(
                        "prediction errors diverge at sample {t}: noise model is not stably invertible"
                    )));
                }
            }
            for (p, (_, b, num, _)) in self.pairs.iter().enumerate() {
                z[p][t] = past[p] + num[0] * eps[*b][t];
            }
        }
        Ok((eps, z))
    }
}

pub(crate) struct Evaluation {
    /// `ε`, outputs × samples.
    pub eps: Vec<Vec<f64>>,
    /// `∂ε/∂θ_k`, parameters × outputs × samples.
    pub sens: Vec<Vec<Vec<f64>>>,
}

fn blowup_limit(ch: &Channels) -> f64 {
    let peak = ch
        .y
        .iter()
        .chain(&ch.d)
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    1e8 * (1.0 + peak)
}

fn module_output(e: &ParamEntry, theta: &[f64], u: &[f64]) -> Vec<f64> {
    filter(&e.lag_numerator(theta), &e.denominator(theta), u)
}

/// `w_Y - Ḡ w_D` per output.
fn equation_error(structure: &ModelStructure, theta: &[f64], ch: &Channels) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut s = ch.y.clone();
    let mut outs = Vec::with_capacity(structure.modules.len());
    for e in &structure.modules {
        let y = module_output(e, theta, &ch.d[e.col_pos]);
        for (dst, v) in s[e.row_pos].iter_mut().zip(&y) {
            *dst -= v;
        }
        outs.push(y);
    }
    (s, outs)
}

pub(crate) fn residuals(structure: &ModelStructure, theta: &[f64], ch: &Channels) -> Result<Vec<Vec<f64>>> {
    structure.check_domain(theta)?;
    let (s, _) = equation_error(structure, theta, ch);
    Ok(NoiseRecursion::new(structure, theta).solve(&s, blowup_limit(ch))?.0)
}

/// Residuals and their exact parameter sensitivities.
pub(crate) fn evaluate(structure: &ModelStructure, theta: &[f64], ch: &Channels) -> Result<Evaluation> {
    structure.check_domain(theta)?;
    let limit = blowup_limit(ch);
    let (s, module_outs) = equation_error(structure, theta, ch);
    let rec = NoiseRecursion::new(structure, theta);
    let (eps, z) = rec.solve(&s, limit)?;
    let ny = structure.outputs.len();
    let n = ch.len;
    let mut sens = Vec::with_capacity(structure.dim);
    let propagate = |row: usize, u: Vec<f64>| -> Result<Vec<Vec<f64>>> {
        let mut input = vec![vec![0.0; n]; ny];
        input[row] = u;
        Ok(rec.solve(&input, f64::INFINITY)?.0)
    };

    for (e, y) in structure.modules.iter().zip(&module_outs) {
        let den = e.denominator(theta);
        // ∂y/∂b_m = q^{-nk-m} w / F, ∂y/∂f_m = -q^{-m} y / F; s = w_Y - y
        let x = filter(&[1.0], &den, &ch.d[e.col_pos]);
        for m in 0..e.n_num {
            let u: Vec<f64> = shifted(&x, e.nk + m).iter().map(|v| -v).collect();
            sens.push(propagate(e.row_pos, u)?);
        }
        let yf = filter(&[1.0], &den, y);
        for m in 1..=e.n_den {
            sens.push(propagate(e.row_pos, shifted(&yf, m))?);
        }
    }
    for (p, e) in structure.noise.iter().enumerate() {
        let den = e.denominator(theta);
        // ∂ε = -H̄^{-1} (∂H̄_ab ε_b) on row a
        let g1 = filter(&[1.0], &den, &eps[e.col_pos]);
        for m in 1..=e.n_num {
            let u: Vec<f64> = shifted(&g1, m).iter().map(|v| -v).collect();
            sens.push(propagate(e.row_pos, u)?);
        }
        let g2 = filter(&[1.0], &den, &z[p]);
        for m in 1..=e.n_den {
            sens.push(propagate(e.row_pos, shifted(&g2, m))?);
        }
    }
    debug_assert_eq!(sens.len(), structure.dim);
    Ok(Evaluation { eps, sens })
}

/// Prediction errors `ε(t, θ)` with zero initial conditions, as channels
/// `eps<k>` named after the output nodes.
pub fn predict_errors(structure: &ModelStructure, theta: &[f64], data: &SignalRecord) -> Result<SignalRecord> {
    let ch = Channels::new(structure, data)?;
    let eps = residuals(structure, theta, &ch)?;
    let names = structure.outputs.iter().map(|k| format!("eps{}", k + 1)).collect();
    SignalRecord::new(names, eps, data.origin())
}

/// `(1/N) Σ ε(t) ε(t)^T`.
pub fn sample_covariance(eps: &[Vec<f64>]) -> DMatrix<f64> {
    let ny = eps.len();
    let n = eps.first().map_or(0, |c| c.len()).max(1);
    DMatrix::from_fn(ny, ny, |r, c| {
        eps[r].iter().zip(&eps[c]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    })
}

/// Residual channels of a record in their stored order.
pub fn residual_channels(record: &SignalRecord) -> Vec<Vec<f64>> {
    record
        .names()
        .iter()
        .map(|n| record.channel(n).expect("listed channel").to_vec())
        .collect()
}
