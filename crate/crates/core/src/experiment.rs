//! Monte Carlo consistency experiments comparing the MIMO setup with the
//! naive single-output baseline.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::load_config;
use crate::error::{Error, Result};
use crate::graph::{algorithm_a, select_blocking_set};
use crate::grid::{FrequencyGrid, DEFAULT_GRID_LOW};
use crate::identify::{
    build_model_structure, estimate, extract_module, miso_structure, Criterion, EstimateOptions, ModelStructure,
    OrderSpec,
};
use crate::network::NetworkModel;
use crate::simulate::{derive_seed, simulate, SimulationPlan};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to rerun an experiment. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub config: PathBuf,
    pub target: [usize; 2],
    pub samples: Vec<usize>,
    pub realizations: usize,
    pub criterion: Criterion,
    /// MIMO orders in order-spec syntax; the true orders when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<String>,
    pub starts: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub out_dir: PathBuf,
    pub tool_version: String,
}

impl ExperimentManifest {
    pub fn new(config: impl Into<PathBuf>, target: [usize; 2]) -> Self {
        Self {
            config: config.into(),
            target,
            samples: vec![500, 2000, 8000],
            realizations: 20,
            criterion: Criterion::MlDet,
            orders: None,
            starts: 8,
            seed: 0,
            grid_size: crate::grid::DEFAULT_GRID_POINTS,
            out_dir: PathBuf::from("out"),
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            location: e
                .span()
                .map_or_else(|| "manifest".to_string(), |s| format!("manifest byte {}", s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<()> {
        if self.samples.is_empty() || self.samples.contains(&0) {
            return Err(Error::InvalidSignal("sample counts must be positive".into()));
        }
        if self.starts == 0 {
            return Err(Error::EstimationFailed("at least one start required".into()));
        }
        if self.target[0] == 0 || self.target[1] == 0 {
            return Err(Error::InvalidPartition("target indices are 1-based".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Mimo,
    Miso,
}

impl Setup {
    pub fn name(self) -> &'static str {
        match self {
            Setup::Mimo => "mimo",
            Setup::Miso => "miso",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub setup: Setup,
    pub samples: usize,
    pub realization: usize,
    /// `max |Ĝ - G⁰| / max |G⁰|` over the grid.
    pub error: Option<f64>,
    pub response: Option<Vec<Complex64>>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub setup: Setup,
    pub samples: usize,
    pub realizations: usize,
    pub failed: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub manifest: ExperimentManifest,
    pub grid: FrequencyGrid,
    pub truth: Vec<Complex64>,
    pub records: Vec<RealizationRecord>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl MonteCarloResult {
    fn errors(&self, setup: Setup, samples: usize) -> (Vec<f64>, usize, usize) {
        let rows: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.setup == setup && r.samples == samples)
            .collect();
        let mut errs: Vec<f64> = rows.iter().filter_map(|r| r.error).collect();
        errs.sort_by(f64::total_cmp);
        let failed = rows.len() - errs.len();
        (errs, rows.len(), failed)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out = Vec::new();
        for setup in [Setup::Mimo, Setup::Miso] {
            for &n in &self.manifest.samples {
                let (errs, total, failed) = self.errors(setup, n);
                if total == 0 {
                    continue;
                }
                out.push(SummaryRow {
                    setup,
                    samples: n,
                    realizations: total,
                    failed,
                    median: quantile(&errs, 0.5),
                    q25: quantile(&errs, 0.25),
                    q75: quantile(&errs, 0.75),
                });
            }
        }
        out
    }

    pub fn median(&self, setup: Setup, samples: usize) -> Option<f64> {
        quantile(&self.errors(setup, samples).0, 0.5)
    }

    /// Mean of `Ĝ - G⁰` and root mean square of `|Ĝ - G⁰|` per frequency.
    pub fn bias_curve(&self, setup: Setup, samples: usize) -> Option<(Vec<Complex64>, Vec<f64>)> {
        let responses: Vec<&Vec<Complex64>> = self
            .records
            .iter()
            .filter(|r| r.setup == setup && r.samples == samples)
            .filter_map(|r| r.response.as_ref())
            .collect();
        if responses.is_empty() {
            return None;
        }
        let n = responses.len() as f64;
        let m = self.truth.len();
        let mut bias = vec![Complex64::new(0.0, 0.0); m];
        let mut rms = vec![0.0; m];
        for r in &responses {
            for k in 0..m {
                let d = r[k] - self.truth[k];
                bias[k] += d / n;
                rms[k] += d.norm_sqr() / n;
            }
        }
        Some((bias, rms.into_iter().map(f64::sqrt).collect()))
    }
}

/// The MIMO structure chosen by the selection algorithm and the naive
/// single-output structure for target `(j, i)` (0-based).
pub fn experiment_structures(
    model: &NetworkModel,
    j: usize,
    i: usize,
    orders: Option<&OrderSpec>,
) -> Result<(ModelStructure, ModelStructure)> {
    let partition = select_blocking_set(model, &algorithm_a(model, j, i)?)?;
    let mimo_orders = match orders {
        Some(o) => o.clone(),
        None => OrderSpec::from_model(model, &partition),
    };
    let mimo = build_model_structure(model, &partition, &mimo_orders)?;
    let miso = miso_structure(model, j, i, &OrderSpec::for_miso(model, j))?;
    Ok((mimo, miso))
}

fn relative_sup_error(est: &[Complex64], truth: &[Complex64]) -> f64 {
    let num = est.iter().zip(truth).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    num / truth.iter().fold(0.0f64, |m, b| m.max(b.norm()))
}

/// Runs the experiment on an already loaded model.
pub fn run_montecarlo_on(model: &NetworkModel, manifest: &ExperimentManifest) -> Result<MonteCarloResult> {
    manifest.check()?;
    let (j, i) = (manifest.target[0] - 1, manifest.target[1] - 1);
    let orders = manifest.orders.as_deref().map(str::parse::<OrderSpec>).transpose()?;
    let (mimo, miso) = experiment_structures(model, j, i, orders.as_ref())?;
    let grid = FrequencyGrid::log_spaced(manifest.grid_size, DEFAULT_GRID_LOW)?;
    let truth = model.module(j, i).frequency_response(&grid)?;

    let units: Vec<(usize, usize)> = manifest
        .samples
        .iter()
        .flat_map(|&n| (0..manifest.realizations).map(move |k| (n, k)))
        .collect();
    let records: Vec<RealizationRecord> = units
        .par_iter()
        .flat_map_iter(|&(n, k)| {
            let seed = derive_seed(manifest.seed, k as u64 + 2);
            let data = simulate(&SimulationPlan::new(model.clone(), n, seed));
            [(Setup::Mimo, &mimo), (Setup::Miso, &miso)].map(|(setup, structure)| {
                let outcome = data.as_ref().map_err(|e| e.to_string()).and_then(|d| {
                    let opts = EstimateOptions {
                        criterion: manifest.criterion,
                        starts: manifest.starts,
                        seed,
                        ..EstimateOptions::default()
                    };
                    estimate(structure, d, &opts)
                        .and_then(|r| extract_module(&r, j, i, &grid))
                        .map_err(|e| e.to_string())
                });
                match outcome {
                    Ok(m) => RealizationRecord {
                        setup,
                        samples: n,
                        realization: k,
                        error: Some(relative_sup_error(&m.response, &truth)),
                        response: Some(m.response),
                        failure: None,
                    },
                    Err(msg) => RealizationRecord {
                        setup,
                        samples: n,
                        realization: k,
                        error: None,
                        response: None,
                        failure: Some(msg),
                    },
                }
            })
        })
        .collect();
    let mut records = records;
    records.sort_by_key(|r| (r.setup, r.samples, r.realization));
    Ok(MonteCarloResult {
        manifest: manifest.clone(),
        grid,
        truth,
        records,
    })
}

/// Loads the manifest's config and runs the experiment.
pub fn run_montecarlo(manifest: &ExperimentManifest) -> Result<MonteCarloResult> {
    let (model, _) = load_config(&manifest.config)?;
    run_montecarlo_on(&model, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&[7.0], 0.75), Some(7.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn manifest_round_trips() {
        let mut m = ExperimentManifest::new("configs/example1.cfg", [2, 1]);
        m.orders = Some("g=1,1,1".into());
        assert_eq!(ExperimentManifest::from_toml(&m.to_toml()).unwrap(), m);
        assert!(ExperimentManifest::from_toml("target = 3").is_err());
    }
}
