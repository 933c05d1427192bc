//! Rational discrete-time SISO transfer functions in the delay operator.
//!
//! A transfer function is stored as
//!
//! ```text
//!            b0 + b1 q^-1 + ... + bn q^-n
//! q^-d  ·  --------------------------------
//!            1 + a1 q^-1 + ... + am q^-m
//! ```
//!
//! so every value of this type is proper by construction. The canonical zero
//! has an empty numerator.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Smallest denominator magnitude accepted on the unit circle.
const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    dead_time: usize,
}

impl TransferFunction {
    /// Builds a transfer function. The denominator must start with exactly 1.
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>, dead_time: usize) -> Result<Self> {
        if denominator.is_empty() {
            return Err(Error::InvalidTransferFunction("empty denominator".into()));
        }
        if denominator[0] != 1.0 {
            return Err(Error::InvalidTransferFunction(format!(
                "denominator must have leading coefficient 1, got {}",
                denominator[0]
            )));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction("non-finite coefficient".into()));
        }
        Ok(Self::canonical(numerator, denominator, dead_time))
    }

    fn canonical(mut numerator: Vec<f64>, mut denominator: Vec<f64>, dead_time: usize) -> Self {
        while numerator.last() == Some(&0.0) {
            numerator.pop();
        }
        if numerator.is_empty() {
            return Self::zero();
        }
        while denominator.len() > 1 && denominator.last() == Some(&0.0) {
            denominator.pop();
        }
        Self {
            numerator,
            denominator,
            dead_time,
        }
    }

    pub fn zero() -> Self {
        Self {
            numerator: Vec::new(),
            denominator: vec![1.0],
            dead_time: 0,
        }
    }

    pub fn gain(g: f64) -> Self {
        Self::canonical(vec![g], vec![1.0], 0)
    }

    pub fn unit() -> Self {
        Self::gain(1.0)
    }

    /// Pure delay `q^-k`.
    pub fn delay(k: usize) -> Self {
        Self::canonical(vec![1.0], vec![1.0], k)
    }

    /// FIR filter `b0 + b1 q^-1 + ...`.
    pub fn fir(numerator: Vec<f64>) -> Self {
        Self::canonical(numerator, vec![1.0], 0)
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn dead_time(&self) -> usize {
        self.dead_time
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_empty()
    }

    /// Instantaneous (zero-lag) gain.
    pub fn feedthrough(&self) -> f64 {
        if self.dead_time == 0 {
            self.numerator.first().copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn strictly_proper(&self) -> bool {
        self.feedthrough() == 0.0
    }

    /// Numerator order counted from the first nonzero lag, plus the total lag.
    /// Returns `(nb, nf, nk)`: number of numerator coefficients, denominator
    /// order and input delay, with leading zero numerator taps folded into `nk`.
    pub fn orders(&self) -> (usize, usize, usize) {
        if self.is_zero() {
            return (0, 0, 0);
        }
        let lead = self.numerator.iter().take_while(|c| **c == 0.0).count();
        (
            self.numerator.len() - lead,
            self.denominator.len() - 1,
            self.dead_time + lead,
        )
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self::canonical(
            convolve(&self.numerator, &other.numerator),
            convolve(&self.denominator, &other.denominator),
            self.dead_time + other.dead_time,
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let d = self.dead_time.min(other.dead_time);
        let left = shift(&convolve(&self.numerator, &other.denominator), self.dead_time - d);
        let right = shift(&convolve(&other.numerator, &self.denominator), other.dead_time - d);
        let n = left.len().max(right.len());
        let num = (0..n)
            .map(|k| left.get(k).unwrap_or(&0.0) + right.get(k).unwrap_or(&0.0))
            .collect();
        Self::canonical(num, convolve(&self.denominator, &other.denominator), d)
    }

    pub fn scale(&self, g: f64) -> Self {
        Self::canonical(
            self.numerator.iter().map(|c| c * g).collect(),
            self.denominator.clone(),
            self.dead_time,
        )
    }

    /// Value at `z = e^{i omega}`.
    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        if self.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let zinv = Complex64::from_polar(1.0, -omega);
        let den = poly_eval(&self.denominator, zinv);
        if den.norm() < SINGULAR_EPS {
            return Err(Error::SingularEvaluation { omega });
        }
        Ok(poly_eval(&self.numerator, zinv) / den * zinv.powu(self.dead_time as u32))
    }

    pub fn frequency_response(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        grid.omegas().iter().map(|&w| self.response_at(w)).collect()
    }

    /// Filters `input` with zero initial conditions.
    ///
    /// Unstable filters are applied as well; the output then diverges.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        if self.is_zero() {
            return out;
        }
        for t in 0..input.len() {
            out[t] = self.feedthrough() * input[t] + self.past_terms(input, &out, t);
        }
        out
    }

    /// Contribution at time `t` of all strictly delayed terms:
    /// `sum_{k+d >= 1} b_k u(t-k-d) - sum_{k >= 1} a_k y(t-k)`.
    ///
    /// `y` must hold the filter outputs for times before `t`.
    pub fn past_terms(&self, u: &[f64], y: &[f64], t: usize) -> f64 {
        let mut acc = 0.0;
        let first = if self.dead_time == 0 { 1 } else { 0 };
        for (k, b) in self.numerator.iter().enumerate().skip(first) {
            let lag = k + self.dead_time;
            if lag > t {
                break;
            }
            acc += b * u[t - lag];
        }
        for (k, a) in self.denominator.iter().enumerate().skip(1) {
            if k > t {
                break;
            }
            acc -= a * y[t - k];
        }
        acc
    }

    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut u = vec![0.0; len];
        if len > 0 {
            u[0] = 1.0;
        }
        self.filter(&u)
    }

    /// Largest pole modulus; 0 for FIR filters.
    pub fn pole_radius(&self) -> f64 {
        poly_root_radius(&self.denominator)
    }

    pub fn is_stable(&self) -> bool {
        self.pole_radius() < 1.0
    }

    /// Largest magnitude over the grid.
    pub fn hinf_on(&self, grid: &FrequencyGrid) -> Result<f64> {
        Ok(self
            .frequency_response(grid)?
            .iter()
            .fold(0.0, |m, v| m.max(v.norm())))
    }

    /// Static gain at omega = 0, if the denominator does not vanish there.
    pub fn dc_gain(&self) -> Option<f64> {
        if self.is_zero() {
            return Some(0.0);
        }
        let den: f64 = self.denominator.iter().sum();
        (den.abs() > SINGULAR_EPS).then(|| self.numerator.iter().sum::<f64>() / den)
    }
}

impl Default for TransferFunction {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let poly = |c: &[f64]| {
            c.iter()
                .enumerate()
                .map(|(k, v)| if k == 0 { format!("{v}") } else { format!("{v}q^-{k}") })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        if self.dead_time > 0 {
            write!(f, "q^-{} ", self.dead_time)?;
        }
        write!(f, "({})", poly(&self.numerator))?;
        if self.denominator.len() > 1 {
            write!(f, " / ({})", poly(&self.denominator))?;
        }
        Ok(())
    }
}

pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn shift(c: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    out.extend_from_slice(c);
    out
}

/// Evaluates `c0 + c1 x + c2 x^2 + ...` (Horner).
pub(crate) fn poly_eval(c: &[f64], x: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &v| acc * x + v)
}

/// Largest root modulus of `z^n + c1 z^{n-1} + ... + cn` for a monic
/// delay-operator polynomial `[1, c1, ..., cn]`.
pub fn poly_root_radius(c: &[f64]) -> f64 {
    let n = c.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => c[1].abs(),
        _ => {
            let companion = DMatrix::from_fn(n, n, |r, col| {
                if r == 0 {
                    -c[col + 1]
                } else if r == col + 1 {
                    1.0
                } else {
                    0.0
                }
            });
            companion
                .complex_eigenvalues()
                .iter()
                .fold(0.0, |m, z| m.max(z.norm()))
        }
    }
}

/// Monic delay-operator polynomial with the given real or conjugate-pair roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, v) in c.iter().enumerate() {
            next[k] += v;
            next[k + 1] -= v * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn tf(num: &[f64], den: &[f64], d: usize) -> TransferFunction {
        TransferFunction::new(num.to_vec(), den.to_vec(), d).unwrap()
    }

    #[test]
    fn rejects_non_monic_denominator() {
        assert!(TransferFunction::new(vec![1.0], vec![2.0, 0.5], 0).is_err());
        assert!(TransferFunction::new(vec![1.0], vec![], 0).is_err());
    }

    #[test]
    fn unit_gain_is_one_everywhere() {
        let g = FrequencyGrid::default_log();
        for v in TransferFunction::unit().frequency_response(&g).unwrap() {
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn delay_response_is_phase_shift() {
        let g = FrequencyGrid::default_log();
        let r = TransferFunction::delay(1).frequency_response(&g).unwrap();
        for (w, v) in g.omegas().iter().zip(r) {
            let expect = Complex64::from_polar(1.0, -w);
            assert_abs_diff_eq!((v - expect).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn first_order_at_nyquist() {
        // 0.5 q^-1 / (1 - 0.3 q^-1) at z = -1: 0.5 * (-1) / (1 + 0.3)
        let g = tf(&[0.5], &[1.0, -0.3], 1);
        let v = g.response_at(PI).unwrap();
        let expect = -0.5 / (1.0 + 0.3);
        assert_abs_diff_eq!(v.re, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.re, -0.384_615_384_615, epsilon = 1e-11);
    }

    #[test]
    fn singular_evaluation_on_unit_circle_root() {
        // pole at z = 1
        let g = tf(&[1.0], &[1.0, -1.0], 0);
        assert!(matches!(
            g.response_at(0.0),
            Err(Error::SingularEvaluation { .. })
        ));
    }

    #[test]
    fn delay_filter_shifts_impulse() {
        let y = TransferFunction::delay(1).impulse_response(5);
        assert_eq!(y, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn first_order_impulse_is_geometric() {
        let y = tf(&[1.0], &[1.0, -0.5], 0).impulse_response(20);
        for (k, v) in y.iter().enumerate() {
            assert_abs_diff_eq!(*v, 0.5f64.powi(k as i32), epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_filter_is_absorbing() {
        let u: Vec<f64> = (0..50).map(|k| (k as f64).sin()).collect();
        assert!(TransferFunction::zero().filter(&u).iter().all(|v| *v == 0.0));
        let g = tf(&[0.2, 0.1], &[1.0, -0.4], 2);
        assert!(g.mul(&TransferFunction::zero()).is_zero());
        assert_eq!(g.add(&TransferFunction::zero()), g);
    }

    #[test]
    fn strict_properness() {
        assert!(tf(&[0.0, 1.0], &[1.0], 0).strictly_proper());
        assert!(tf(&[1.0], &[1.0], 1).strictly_proper());
        assert!(!tf(&[1.0], &[1.0, 0.3], 0).strictly_proper());
        assert_eq!(tf(&[0.0, 0.5, 0.2], &[1.0, -0.1], 1).orders(), (2, 1, 2));
    }

    #[test]
    fn sum_matches_pointwise_sum() {
        let a = tf(&[0.3], &[1.0, -0.2], 1);
        let b = tf(&[0.1, 0.4], &[1.0, 0.5], 2);
        let s = a.add(&b);
        for w in [0.01, 0.7, 2.0, PI] {
            let lhs = s.response_at(w).unwrap();
            let rhs = a.response_at(w).unwrap() + b.response_at(w).unwrap();
            assert_abs_diff_eq!((lhs - rhs).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn pole_radius_of_second_order() {
        let den = poly_from_roots(&[Complex64::from_polar(0.8, 0.6), Complex64::from_polar(0.8, -0.6)]);
        let g = tf(&[1.0], &den, 0);
        assert_abs_diff_eq!(g.pole_radius(), 0.8, epsilon = 1e-12);
        assert!(g.is_stable());
        assert!(!tf(&[1.0], &[1.0, -1.1], 0).is_stable());
    }

    #[test]
    fn dc_gain_from_coefficients() {
        let g = tf(&[0.5], &[1.0, -0.5], 1);
        assert_abs_diff_eq!(g.dc_gain().unwrap(), 1.0, epsilon = 1e-15);
    }
}
