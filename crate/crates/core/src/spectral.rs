//! Nonparametric spectral estimates from sampled signals (Welch averaging).
//!
//! The cross spectrum is `Φ_ab(ω) = Σ_τ E[a(t+τ) b(t)] e^{-iωτ}`, so a unit
//! variance white signal has `Φ = 1` and `y = G x` gives `Φ_yx = G Φ_x`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WelchOptions {
    pub segment: usize,
    pub overlap: usize,
}

impl Default for WelchOptions {
    fn default() -> Self {
        Self {
            segment: 512,
            overlap: 256,
        }
    }
}

/// Frequencies `2πk/segment`, `k = 0..=segment/2`.
pub fn bin_frequencies(segment: usize) -> Vec<f64> {
    (0..=segment / 2).map(|k| 2.0 * PI * k as f64 / segment as f64).collect()
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Full spectral matrix of several channels at [`bin_frequencies`].
pub fn spectral_matrix(channels: &[&[f64]], opts: WelchOptions) -> Result<Vec<CMatrix>> {
    let n = channels.first().map_or(0, |c| c.len());
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidSignal("channels differ in length".into()));
    }
    let seg = opts.segment;
    if seg < 8 || opts.overlap >= seg || n < seg {
        return Err(Error::InvalidSignal(format!(
            "cannot form Welch segments of {seg} samples from {n} samples"
        )));
    }
    let step = seg - opts.overlap;
    let win = hann(seg);
    let norm: f64 = win.iter().map(|v| v * v).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let m = channels.len();
    let mut acc = vec![CMatrix::zeros(m, m); bins];
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![vec![Complex64::new(0.0, 0.0); seg]; m];
    while start + seg <= n {
        for (c, ch) in channels.iter().enumerate() {
            let mean = ch[start..start + seg].iter().sum::<f64>() / seg as f64;
            for k in 0..seg {
                buf[c][k] = Complex64::new((ch[start + k] - mean) * win[k], 0.0);
            }
            fft.process(&mut buf[c]);
        }
        for (k, a) in acc.iter_mut().enumerate() {
            for r in 0..m {
                for c in 0..m {
                    a[(r, c)] += buf[r][k] * buf[c][k].conj();
                }
            }
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (norm * count as f64);
    for a in &mut acc {
        *a *= Complex64::new(scale, 0.0);
    }
    Ok(acc)
}

/// `Φ_ab` at [`bin_frequencies`].
pub fn cross_spectrum(a: &[f64], b: &[f64], opts: WelchOptions) -> Result<Vec<Complex64>> {
    Ok(spectral_matrix(&[a, b], opts)?.iter().map(|m| m[(0, 1)]).collect())
}

/// `Φ_yx / Φ_x`, the empirical response from `x` to `y`.
pub fn empirical_response(output: &[f64], input: &[f64], opts: WelchOptions) -> Result<Vec<Complex64>> {
    Ok(spectral_matrix(&[output, input], opts)?
        .iter()
        .map(|m| m[(0, 1)] / m[(1, 1)])
        .collect())
}

/// Moving average over `2 * half + 1` neighbouring values, truncated at the
/// ends.
pub fn band_average(values: &[Complex64], half: usize) -> Vec<Complex64> {
    (0..values.len())
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half + 1).min(values.len());
            values[lo..hi].iter().sum::<Complex64>() / (hi - lo) as f64
        })
        .collect()
}
