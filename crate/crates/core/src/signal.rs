//! Multichannel sample records and their flat text format.
//!
//! File layout:
//!
//! ```text
//! # netident-signal v1
//! # samples <N>
//! # origin <t0>
//! w1 w2 ... e1 ...
//! <one whitespace-separated row per sample>
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const SIGNAL_FORMAT_HEADER: &str = "# netident-signal v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    origin: usize,
}

impl SignalRecord {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, origin: usize) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidSignal("one name per channel required".into()));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidSignal("channels differ in length".into()));
            }
        }
        for (n, c) in names.iter().zip(&columns) {
            if n.is_empty() || n.chars().any(char::is_whitespace) {
                return Err(Error::InvalidSignal(format!("bad channel name {n:?}")));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSignal(format!("channel {n} has non-finite samples")));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::InvalidSignal(format!("duplicate channel {dup}")));
        }
        Ok(Self {
            names,
            columns,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.channel(name)
            .ok_or_else(|| Error::InvalidSignal(format!("missing channel {name}")))
    }

    /// Node signal `w_{node+1}`.
    pub fn node(&self, node: usize) -> Result<&[f64]> {
        self.require(&format!("w{}", node + 1))
    }

    /// Keeps the channels whose names satisfy `keep`.
    pub fn select(&self, keep: impl Fn(&str) -> bool) -> Self {
        let (names, columns) = self
            .names
            .iter()
            .zip(&self.columns)
            .filter(|(n, _)| keep(n))
            .map(|(n, c)| (n.clone(), c.clone()))
            .unzip();
        Self {
            names,
            columns,
            origin: self.origin,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SIGNAL_FORMAT_HEADER}");
        let _ = writeln!(out, "# samples {}", self.len());
        let _ = writeln!(out, "# origin {}", self.origin);
        let _ = writeln!(out, "{}", self.names.join(" "));
        for t in 0..self.len() {
            let row: Vec<String> = self.columns.iter().map(|c| format!("{}", c[t])).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::InvalidSignal(format!("line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == SIGNAL_FORMAT_HEADER => {}
            _ => return Err(bad(1, "missing format header")),
        }
        let mut samples = None;
        let mut origin = 0;
        let mut names = None;
        for (k, line) in lines.by_ref() {
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                let mut it = meta.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("samples"), Some(v)) => {
                        samples = Some(v.parse::<usize>().map_err(|_| bad(k + 1, "bad sample count"))?)
                    }
                    (Some("origin"), Some(v)) => {
                        origin = v.parse::<usize>().map_err(|_| bad(k + 1, "bad origin"))?
                    }
                    _ => {}
                }
                continue;
            }
            names = Some(line.split_whitespace().map(String::from).collect::<Vec<_>>());
            break;
        }
        let names = names.ok_or_else(|| bad(1, "missing channel header"))?;
        let mut columns = vec![Vec::new(); names.len()];
        for (k, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0;
            for (c, tok) in line.split_whitespace().enumerate() {
                let v: f64 = tok.parse().map_err(|_| bad(k + 1, "unparsable value"))?;
                columns.get_mut(c).ok_or_else(|| bad(k + 1, "too many columns"))?.push(v);
                count += 1;
            }
            if count != names.len() {
                return Err(bad(k + 1, "wrong number of columns"));
            }
        }
        let rec = Self::new(names, columns, origin)?;
        if let Some(n) = samples {
            if n != rec.len() {
                return Err(Error::InvalidSignal(format!(
                    "header declares {n} samples, found {}",
                    rec.len()
                )));
            }
        }
        Ok(rec)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_text(&text)
    }
}
