//! Stationary data generation from the ground-truth network.
//!
//! Seeds: the noise stream of a plan with seed `s` is `derive_seed(s, 0)`,
//! the excitation stream is `derive_seed(s, 1)`. Monte Carlo realization `k`
//! under master seed `m` uses plan seed `derive_seed(m, k + 2)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::network::NetworkModel;
use crate::signal::SignalRecord;
use crate::tf::TransferFunction;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_MARGIN_FLOOR: f64 = 1e-3;

/// SplitMix64 step applied to `seed + stream * golden`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// `1 - max_omega rho(G(e^{i omega}))`.
    pub margin: f64,
    pub max_loop_radius: f64,
    pub max_pole_radius: f64,
}

/// Checks loop stability on the grid and pole locations of every module.
pub fn stability_check(model: &NetworkModel, grid: &FrequencyGrid) -> Result<StabilityReport> {
    stability_check_with_floor(model, grid, DEFAULT_MARGIN_FLOOR)
}

pub fn stability_check_with_floor(
    model: &NetworkModel,
    grid: &FrequencyGrid,
    margin_floor: f64,
) -> Result<StabilityReport> {
    let mut max_loop_radius: f64 = 0.0;
    for &w in grid.omegas() {
        max_loop_radius = max_loop_radius.max(spectral_radius(&model.modules_at(w)?));
    }
    let max_pole_radius = model
        .modules_matrix()
        .iter()
        .flatten()
        .filter(|m| !m.is_zero())
        .map(TransferFunction::pole_radius)
        .fold(0.0, f64::max);
    let margin = 1.0 - max_loop_radius;
    Ok(StabilityReport {
        stable: max_loop_radius < 1.0 - margin_floor && max_pole_radius < 1.0,
        margin,
        max_loop_radius,
        max_pole_radius,
    })
}

pub(crate) fn spectral_radius(m: &DMatrix<Complex64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].norm(),
        _ => nalgebra::linalg::Schur::new(m.clone())
            .eigenvalues()
            .map(|ev| ev.iter().fold(0.0, |a: f64, z| a.max(z.norm())))
            .unwrap_or(f64::INFINITY),
    }
}

/// External excitation on one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Excitation {
    White { std: f64 },
    FilteredWhite { std: f64, filter: TransferFunction },
    /// Sum of sinusoids with random phases.
    Multisine { omegas: Vec<f64>, amplitudes: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    #[default]
    Gaussian,
    /// Uniform with unit variance.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub model: NetworkModel,
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// One entry per node; only nodes with excitation present may carry one.
    pub excitation: Vec<Option<Excitation>>,
    pub innovation: Innovation,
}

impl SimulationPlan {
    /// Unit-variance white excitation on every node with excitation present.
    pub fn new(model: NetworkModel, samples: usize, seed: u64) -> Self {
        let excitation = model
            .excitation()
            .iter()
            .map(|&p| p.then_some(Excitation::White { std: 1.0 }))
            .collect();
        Self {
            model,
            samples,
            burn_in: DEFAULT_BURN_IN,
            seed,
            excitation,
            innovation: Innovation::Gaussian,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn without_excitation(mut self) -> Self {
        self.excitation = vec![None; self.model.size()];
        self
    }

    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidSignal("sample count must be positive".into()));
        }
        if self.excitation.len() != self.model.size() {
            return Err(Error::InvalidNetwork("one excitation entry per node required".into()));
        }
        for (k, ex) in self.excitation.iter().enumerate() {
            if ex.is_some() && !self.model.excitation()[k] {
                return Err(Error::InvalidNetwork(format!(
                    "excitation requested on node {} without external input",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    fn total(&self) -> usize {
        self.samples + self.burn_in
    }
}

fn draw_innovations(plan: &SimulationPlan) -> Result<Vec<Vec<f64>>> {
    let l = plan.model.size();
    let factor = plan.model.covariance_factor()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, 0));
    let total = plan.total();
    let mut e = vec![vec![0.0; total]; l];
    let mut n = DVector::<f64>::zeros(l);
    let root3 = 3f64.sqrt();
    for t in 0..total {
        for k in 0..l {
            n[k] = match plan.innovation {
                Innovation::Gaussian => StandardNormal.sample(&mut rng),
                Innovation::Uniform => rng.random_range(-root3..root3),
            };
        }
        let x = &factor * &n;
        for k in 0..l {
            e[k][t] = x[k];
        }
    }
    Ok(e)
}

fn disturbances(model: &NetworkModel, e: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let l = model.size();
    let total = e.first().map_or(0, |c| c.len());
    let mut v = vec![vec![0.0; total]; l];
    for j in 0..l {
        for k in 0..l {
            let h = model.noise_filter(j, k);
            if h.is_zero() {
                continue;
            }
            for (acc, x) in v[j].iter_mut().zip(h.filter(&e[k])) {
                *acc += x;
            }
        }
    }
    v
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_excitation(plan: &SimulationPlan) -> Vec<Vec<f64>> {
    let total = plan.total();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, 1));
    plan.excitation
        .iter()
        .map(|ex| match ex {
            None => vec![0.0; total],
            Some(Excitation::White { std }) => (0..total)
                .map(|_| std * gauss(&mut rng))
                .collect::<Vec<f64>>(),
            Some(Excitation::FilteredWhite { std, filter }) => {
                let u: Vec<f64> = (0..total)
                    .map(|_| std * gauss(&mut rng))
                    .collect();
                filter.filter(&u)
            }
            Some(Excitation::Multisine { omegas, amplitudes }) => {
                let phases: Vec<f64> = omegas
                    .iter()
                    .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                    .collect();
                (0..total)
                    .map(|t| {
                        omegas
                            .iter()
                            .zip(amplitudes)
                            .zip(&phases)
                            .map(|((w, a), p)| a * (w * t as f64 + p).cos())
                            .sum()
                    })
                    .collect()
            }
        })
        .collect()
}

fn channel_names(prefix: &str, l: usize) -> impl Iterator<Item = String> + '_ {
    (1..=l).map(move |k| format!("{prefix}{k}"))
}

/// Innovations `e` and disturbances `v = H e` after burn-in.
pub fn generate_noise(plan: &SimulationPlan) -> Result<SignalRecord> {
    plan.check()?;
    let l = plan.model.size();
    let e = draw_innovations(plan)?;
    let v = disturbances(&plan.model, &e);
    let cut = |c: Vec<f64>| c[plan.burn_in..].to_vec();
    let names = channel_names("e", l).chain(channel_names("v", l)).collect();
    let columns = e.into_iter().chain(v).map(cut).collect();
    SignalRecord::new(names, columns, plan.burn_in)
}

/// Simulates `w = G w + r + H e` sample by sample with zero initial
/// conditions, discarding the first `burn_in` samples.
///
/// The output carries channels `w*`, `e*`, `v*` and `r*`.
pub fn simulate(plan: &SimulationPlan) -> Result<SignalRecord> {
    plan.check()?;
    let model = &plan.model;
    let report = stability_check(model, &FrequencyGrid::default_log())?;
    if !report.stable {
        return Err(Error::Unstable { margin: report.margin });
    }
    let l = model.size();
    let total = plan.total();

    let feed = DMatrix::from_fn(l, l, |j, k| model.module(j, k).feedthrough());
    let solver = if feed.iter().all(|v| *v == 0.0) {
        None
    } else {
        let lu = (DMatrix::identity(l, l) - &feed).lu();
        if !lu.is_invertible() {
            return Err(Error::AlgebraicLoop);
        }
        Some(lu)
    };

    let e = draw_innovations(plan)?;
    let v = disturbances(model, &e);
    let r = draw_excitation(plan);

    let edges: Vec<(usize, usize)> = (0..l)
        .flat_map(|j| (0..l).map(move |k| (j, k)))
        .filter(|&(j, k)| !model.module(j, k).is_zero())
        .collect();
    let mut outputs = vec![vec![0.0; total]; edges.len()];
    let mut past = vec![0.0; edges.len()];
    let mut w = vec![vec![0.0; total]; l];
    let mut rhs = DVector::<f64>::zeros(l);

    for t in 0..total {
        for k in 0..l {
            rhs[k] = r[k][t] + v[k][t];
        }
        for (n, &(j, k)) in edges.iter().enumerate() {
            past[n] = model.module(j, k).past_terms(&w[k], &outputs[n], t);
            rhs[j] += past[n];
        }
        let now = match &solver {
            Some(lu) => lu.solve(&rhs).ok_or(Error::AlgebraicLoop)?,
            None => rhs.clone(),
        };
        for k in 0..l {
            w[k][t] = now[k];
        }
        for (n, &(j, k)) in edges.iter().enumerate() {
            outputs[n][t] = past[n] + feed[(j, k)] * now[k];
        }
    }

    let cut = |c: Vec<f64>| c[plan.burn_in..].to_vec();
    let names = channel_names("w", l)
        .chain(channel_names("e", l))
        .chain(channel_names("v", l))
        .chain(channel_names("r", l))
        .collect();
    let columns = w.into_iter().chain(e).chain(v).chain(r).map(cut).collect();
    SignalRecord::new(names, columns, plan.burn_in)
}

/// Warns when the slowest pole needs more than `burn_in` samples to decay to 1e-8.
pub fn burn_in_warning(model: &NetworkModel, burn_in: usize) -> Option<String> {
    let grid = FrequencyGrid::default_log();
    let report = stability_check(model, &grid).ok()?;
    let slowest = report.max_pole_radius.max(1.0 - report.margin.clamp(0.0, 1.0));
    if slowest <= 0.0 || slowest >= 1.0 {
        return None;
    }
    let needed = ((1e-8f64).ln() / slowest.ln()).ceil() as usize;
    (needed > burn_in).then(|| {
        format!("burn-in of {burn_in} samples may be short; poles near radius {slowest:.3} suggest at least {needed}")
    })
}
