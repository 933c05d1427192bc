//! Flat-file emission of experiment results.
//!
//! Tables are tab-separated with one `#` comment line naming the table and
//! its schema version, followed by a column header. Floats are written in
//! `{:.9e}` form so that identical runs produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{MonteCarloResult, Setup};

pub const SCHEMA_VERSION: u32 = 1;

pub const SUMMARY_FILE: &str = "summary.tsv";
pub const ERRORS_FILE: &str = "errors.tsv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.9e}"))
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

fn header(name: &str, columns: &[&str]) -> String {
    format!("# netident {name} schema {SCHEMA_VERSION}\n{}\n", columns.join("\t"))
}

/// Per-setup, per-N median and quartiles of the module error.
pub fn summary_table(result: &MonteCarloResult) -> String {
    let mut out = header("summary", &["setup", "samples", "realizations", "failed", "median", "q25", "q75"]);
    for r in result.summary() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.setup.name(),
            r.samples,
            r.realizations,
            r.failed,
            num(r.median),
            num(r.q25),
            num(r.q75)
        );
    }
    out
}

/// One row per realization, with a failure marker where estimation failed.
pub fn errors_table(result: &MonteCarloResult) -> String {
    let mut out = header("errors", &["setup", "samples", "realization", "error", "status"]);
    for r in &result.records {
        let status = r.failure.as_deref().map_or_else(|| "ok".to_string(), |f| format!("failed: {}", clean(f)));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.setup.name(),
            r.samples,
            r.realization + 1,
            num(r.error),
            status
        );
    }
    out
}

/// Mean deviation and RMS error of the target response per frequency.
pub fn bias_table(result: &MonteCarloResult, setup: Setup) -> String {
    let mut out = header("bias", &["samples", "omega", "bias_re", "bias_im", "bias_abs", "rms"]);
    for &n in &result.manifest.samples {
        if let Some((bias, rms)) = result.bias_curve(setup, n) {
            for ((w, b), r) in result.grid.omegas().iter().zip(&bias).zip(&rms) {
                let _ = writeln!(
                    out,
                    "{n}\t{w:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{r:.9e}",
                    b.re,
                    b.im,
                    b.norm()
                );
            }
        }
    }
    out
}

pub fn bias_file(setup: Setup) -> String {
    format!("bias_{}.tsv", setup.name())
}

/// All machine-readable outputs as `(file name, contents)`.
pub fn montecarlo_files(result: &MonteCarloResult) -> Vec<(String, String)> {
    vec![
        (MANIFEST_FILE.to_string(), result.manifest.to_toml()),
        (SUMMARY_FILE.to_string(), summary_table(result)),
        (ERRORS_FILE.to_string(), errors_table(result)),
        (bias_file(Setup::Mimo), bias_table(result, Setup::Mimo)),
        (bias_file(Setup::Miso), bias_table(result, Setup::Miso)),
    ]
}

/// Writes `files` into `dir`, creating it when needed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

/// Human-readable digest of a Monte Carlo run.
pub fn montecarlo_text(result: &MonteCarloResult) -> String {
    let m = &result.manifest;
    let mut out = format!(
        "Monte Carlo on {} for G[{},{}]: {} realizations, criterion {}, seed {}\n",
        m.config.display(),
        m.target[0],
        m.target[1],
        m.realizations,
        m.criterion,
        m.seed
    );
    out.push_str("setup  samples  median     q25        q75        failed\n");
    for r in result.summary() {
        let _ = writeln!(
            out,
            "{:<6} {:>7}  {:<10} {:<10} {:<10} {}",
            r.setup.name(),
            r.samples,
            r.median.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.q25.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.q75.map_or("n/a".into(), |v| format!("{v:.4}")),
            r.failed
        );
    }
    out
}
