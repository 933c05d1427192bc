#![allow(dead_code)]

use std::path::PathBuf;

use netident::config::load_config;
use netident::NetworkModel;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> NetworkModel {
    load_config(config_path(name)).expect("shipped config loads").0
}

pub fn set(v: &[usize]) -> std::collections::BTreeSet<usize> {
    v.iter().map(|k| k - 1).collect()
}

use nalgebra::DMatrix;
use netident::{NoiseConvention, TransferFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

/// A stable random network with 3..=7 nodes, strictly proper first-order
/// modules, dynamic noise couplings and a sparse noise covariance.
pub fn random_model(seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let l = rng.random_range(3..=7usize);
        let mut g = vec![vec![TransferFunction::zero(); l]; l];
        let mut h = vec![vec![TransferFunction::zero(); l]; l];
        for j in 0..l {
            for k in 0..l {
                if j != k && rng.random_bool(0.3) {
                    g[j][k] = TransferFunction::new(
                        vec![signed(&mut rng, 0.1, 0.4)],
                        vec![1.0, signed(&mut rng, 0.05, 0.4)],
                        1,
                    )
                    .unwrap();
                }
                if j == k {
                    h[j][k] = TransferFunction::fir(vec![1.0, signed(&mut rng, 0.1, 0.5)]);
                } else if rng.random_bool(0.2) {
                    h[j][k] = TransferFunction::new(
                        vec![signed(&mut rng, 0.2, 0.6)],
                        vec![1.0, signed(&mut rng, 0.05, 0.4)],
                        1,
                    )
                    .unwrap();
                }
            }
        }
        let mut cov = DMatrix::<f64>::identity(l, l);
        if rng.random_bool(0.5) {
            let a = rng.random_range(0..l);
            let b = (a + rng.random_range(1..l)) % l;
            let rho = signed(&mut rng, 0.3, 0.7);
            cov[(a, b)] = rho;
            cov[(b, a)] = rho;
        }
        if !(0..l).any(|j| (0..l).any(|k| !g[j][k].is_zero())) {
            continue;
        }
        let labels = (1..=l).map(|k| format!("w{k}")).collect();
        let m = NetworkModel::new(g, h, cov, vec![true; l], labels, NoiseConvention::Monic).unwrap();
        if let Ok(m) = m.validated() {
            return m;
        }
    }
}
