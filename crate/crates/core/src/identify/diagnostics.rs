use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::graph::NodePartition;
use crate::immersion::min_hermitian_eigenvalue;
use crate::signal::SignalRecord;
use crate::spectral::{bin_frequencies, spectral_matrix, WelchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LjungBox {
    pub statistic: f64,
    pub lags: usize,
    pub p_value: f64,
}

impl LjungBox {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Ljung-Box portmanteau statistic `N(N+2) Σ_k r_k^2 / (N-k)` over lags
/// `1..=lags`, compared with a chi-squared law on `lags` degrees of freedom.
pub fn ljung_box(x: &[f64], lags: usize) -> Result<LjungBox> {
    let n = x.len();
    if lags == 0 || n <= lags + 1 {
        return Err(Error::InvalidSignal(format!("{n} samples are too few for {lags} lags")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = c.iter().map(|v| v * v).sum();
    if c0 <= 0.0 {
        return Err(Error::InvalidSignal("constant signal".into()));
    }
    let nf = n as f64;
    let statistic = nf
        * (nf + 2.0)
        * (1..=lags)
            .map(|k| {
                let r = c[k..].iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / c0;
                r * r / (nf - k as f64)
            })
            .sum::<f64>();
    let chi = ChiSquared::new(lags as f64).map_err(|e| Error::InvalidSignal(e.to_string()))?;
    Ok(LjungBox {
        statistic,
        lags,
        p_value: 1.0 - chi.cdf(statistic),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcitationDiagnostic {
    /// Channels stacked into `κ`, in order.
    pub channels: Vec<String>,
    pub omegas: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
}

impl ExcitationDiagnostic {
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of bins whose smallest eigenvalue exceeds `rel`.
    pub fn positive_bins(&self, rel: f64) -> usize {
        self.min_eigenvalues.iter().filter(|&&v| v > rel).count()
    }
}

/// Empirical spectrum of `κ = [w_D; ξ_Q; w_o]` on the Welch bins, reduced to
/// its smallest eigenvalue per bin after scaling every channel to unit power.
///
/// `ξ_Q` is read from the channels `xi_name(k)` of `data`; on simulated data
/// with innovations driving only their own outputs this is `e<k>`.
pub fn excitation_diagnostic(
    data: &SignalRecord,
    partition: &NodePartition,
    xi_name: impl Fn(usize) -> String,
    opts: WelchOptions,
) -> Result<ExcitationDiagnostic> {
    let mut names: Vec<String> = partition.d.iter().map(|k| format!("w{}", k + 1)).collect();
    names.extend(partition.q.iter().map(|&k| xi_name(k)));
    names.extend(partition.o.iter().map(|k| format!("w{}", k + 1)));
    let channels: Vec<Vec<f64>> = names
        .iter()
        .map(|n| {
            let c = data.require(n)?;
            let p = (c.iter().map(|v| v * v).sum::<f64>() / c.len().max(1) as f64).sqrt();
            if p == 0.0 {
                return Err(Error::InvalidSignal(format!("channel {n} is identically zero")));
            }
            Ok(c.iter().map(|v| v / p).collect())
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = channels.iter().map(|c| c.as_slice()).collect();
    let spectra = spectral_matrix(&refs, opts)?;
    Ok(ExcitationDiagnostic {
        channels: names,
        omegas: bin_frequencies(opts.segment),
        min_eigenvalues: spectra.iter().map(min_hermitian_eigenvalue).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_signal_is_not_white() {
        let x: Vec<f64> = (0..200).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let lb = ljung_box(&x, 5).unwrap();
        assert!(lb.rejects(0.01));
    }

    #[test]
    fn too_short_is_refused() {
        assert!(ljung_box(&[1.0, 2.0, 3.0], 5).is_err());
    }
}
