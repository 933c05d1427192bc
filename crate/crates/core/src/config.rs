//! Network description files.
//!
//! A config is TOML with the following schema (version 1). Node indices are
//! 1-based.
//!
//! ```toml
//! schema_version = 1
//! name = "example"
//! nodes = 3
//! labels = ["w1", "w2", "w3"]          # optional
//! excitation = [1]                     # nodes with an external input r
//! noise_convention = "monic"           # or "scaled" (H absorbs scaling, cov(e) = I)
//! covariance = [[1.0, 0.0, 0.0],       # optional, identity by default
//!               [0.0, 1.0, 0.0],
//!               [0.0, 0.0, 1.0]]
//!
//! [[module]]                           # G[to, from]
//! to = 2
//! from = 1
//! num = [0.5]                          # b0, b1, ... after the delay
//! den = [1.0, -0.3]                    # leading 1 required; default [1.0]
//! delay = 1                            # default 0
//!
//! [[noise]]                            # H[to, from]; diagonal defaults to 1
//! to = 2
//! from = 2
//! num = [1.0, 0.4]
//! den = [1.0]
//! ```
//!
//! A diagonal noise entry with `num = []` removes the default unit entry.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkModel, NoiseConvention};
use crate::tf::TransferFunction;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default)]
    excitation: Vec<usize>,
    #[serde(default)]
    noise_convention: NoiseConvention,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    covariance: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "module")]
    modules: Vec<RawEntry>,
    #[serde(default, rename = "noise")]
    noise: Vec<RawEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    to: usize,
    from: usize,
    num: Vec<f64>,
    #[serde(default = "unit_den")]
    den: Vec<f64>,
    #[serde(default)]
    delay: usize,
}

fn unit_den() -> Vec<f64> {
    vec![1.0]
}

/// Descriptive data carried next to the model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigMeta {
    pub name: Option<String>,
    pub schema_version: u32,
}

fn config_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        location: location.into(),
        message: message.into(),
    }
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    format!("line {line}, column {col}")
}

/// Parses a config without checking the network assumptions.
pub fn parse_network(text: &str) -> Result<(NetworkModel, ConfigMeta)> {
    if text.trim().is_empty() {
        return Err(config_err("line 1, column 1", "empty config"));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let loc = e
            .span()
            .map(|s| line_col(text, s.start))
            .unwrap_or_else(|| "document".into());
        config_err(loc, e.message().to_string())
    })?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(config_err(
            "schema_version",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    let l = raw.nodes;
    if l == 0 {
        return Err(config_err("nodes", "at least one node required"));
    }
    let labels = match raw.labels {
        Some(v) if v.len() != l => return Err(config_err("labels", format!("expected {l} labels, got {}", v.len()))),
        Some(v) => v,
        None => (1..=l).map(|k| format!("w{k}")).collect(),
    };
    let mut excitation = vec![false; l];
    for (n, &k) in raw.excitation.iter().enumerate() {
        if k == 0 || k > l {
            return Err(config_err(format!("excitation[{n}]"), format!("node {k} out of range 1..={l}")));
        }
        excitation[k - 1] = true;
    }
    let covariance = match raw.covariance {
        None => DMatrix::identity(l, l),
        Some(rows) => {
            if rows.len() != l || rows.iter().any(|r| r.len() != l) {
                return Err(config_err("covariance", format!("expected a {l} x {l} matrix")));
            }
            DMatrix::from_fn(l, l, |r, c| rows[r][c])
        }
    };
    let modules = fill(&raw.modules, l, "module", None)?;
    let noise = fill(&raw.noise, l, "noise", Some(TransferFunction::unit()))?;
    let model = NetworkModel::new(modules, noise, covariance, excitation, labels, raw.noise_convention)?;
    Ok((
        model,
        ConfigMeta {
            name: raw.name,
            schema_version: raw.schema_version,
        },
    ))
}

fn fill(
    entries: &[RawEntry],
    l: usize,
    table: &str,
    diagonal_default: Option<TransferFunction>,
) -> Result<Vec<Vec<TransferFunction>>> {
    let mut m = vec![vec![TransferFunction::zero(); l]; l];
    if let Some(d) = diagonal_default {
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = d.clone();
        }
    }
    let mut seen = vec![vec![false; l]; l];
    for (n, e) in entries.iter().enumerate() {
        let loc = |field: &str| format!("{table}[{n}].{field}");
        for (field, v) in [("to", e.to), ("from", e.from)] {
            if v == 0 || v > l {
                return Err(config_err(loc(field), format!("node {v} out of range 1..={l}")));
            }
        }
        let (r, c) = (e.to - 1, e.from - 1);
        if seen[r][c] {
            return Err(config_err(loc("to"), format!("duplicate entry ({}, {})", e.to, e.from)));
        }
        seen[r][c] = true;
        m[r][c] = TransferFunction::new(e.num.clone(), e.den.clone(), e.delay)
            .map_err(|err| config_err(loc("den"), err.to_string()))?;
    }
    Ok(m)
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<(NetworkModel, ConfigMeta)> {
    let (model, meta) = parse_network(text)?;
    Ok((model.validated()?, meta))
}

pub fn load_config(path: impl AsRef<Path>) -> Result<(NetworkModel, ConfigMeta)> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    parse_config(&text)
}

/// Serializes a model in the config schema. Parsing the result yields an
/// identical model.
pub fn to_config_text(model: &NetworkModel, name: Option<&str>) -> String {
    let l = model.size();
    let entry = |r: usize, c: usize, tf: &TransferFunction| RawEntry {
        to: r + 1,
        from: c + 1,
        num: tf.numerator().to_vec(),
        den: tf.denominator().to_vec(),
        delay: tf.dead_time(),
    };
    let mut modules = Vec::new();
    let mut noise = Vec::new();
    for r in 0..l {
        for c in 0..l {
            let g = model.module(r, c);
            if !g.is_zero() {
                modules.push(entry(r, c, g));
            }
            let h = model.noise_filter(r, c);
            // the diagonal is written even when zero, to override the default
            if r == c || !h.is_zero() {
                noise.push(entry(r, c, h));
            }
        }
    }
    let cov = model.covariance();
    let raw = RawConfig {
        schema_version: SCHEMA_VERSION,
        name: name.map(String::from),
        nodes: l,
        labels: Some(model.labels().to_vec()),
        excitation: (0..l).filter(|&k| model.excitation()[k]).map(|k| k + 1).collect(),
        noise_convention: model.convention(),
        covariance: Some((0..l).map(|r| (0..l).map(|c| cov[(r, c)]).collect()).collect()),
        modules,
        noise,
    };
    toml::to_string(&raw).expect("config schema serializes")
}
