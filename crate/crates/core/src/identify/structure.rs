use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodePartition;
use crate::network::{NetworkModel, NoiseConvention};
use crate::tf::{poly_root_radius, TransferFunction};

/// Orders of a parametrized module
/// `q^-nk (b0 + ... + b_{nb-1} q^{-(nb-1)}) / (1 + f1 q^-1 + ... + f_nf q^-nf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleOrders {
    pub nb: usize,
    pub nf: usize,
    pub nk: usize,
}

/// Orders of a noise-model entry. Diagonal entries are
/// `(1 + c1 q^-1 + ... + c_nc q^-nc) / (1 + d1 q^-1 + ... + d_nd q^-nd)`,
/// off-diagonal entries the same without the leading 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseOrders {
    pub nc: usize,
    pub nd: usize,
}

/// Per-entry model orders with defaults. Keys are 0-based `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderSpec {
    pub module_default: ModuleOrders,
    pub noise_diagonal: NoiseOrders,
    pub noise_off_diagonal: NoiseOrders,
    pub modules: BTreeMap<(usize, usize), ModuleOrders>,
    pub noise: BTreeMap<(usize, usize), NoiseOrders>,
}

impl Default for OrderSpec {
    fn default() -> Self {
        Self::uniform(ModuleOrders { nb: 1, nf: 1, nk: 1 }, NoiseOrders { nc: 1, nd: 1 })
    }
}

impl OrderSpec {
    pub fn uniform(module: ModuleOrders, noise: NoiseOrders) -> Self {
        Self {
            module_default: module,
            noise_diagonal: noise,
            noise_off_diagonal: noise,
            modules: BTreeMap::new(),
            noise: BTreeMap::new(),
        }
    }

    /// Orders of the true system for every module in the topology and every
    /// noise entry among the outputs. Entries without a true counterpart keep
    /// the defaults (off-diagonal noise entries that are zero get `nc = 1, nd = 0`).
    pub fn from_model(model: &NetworkModel, partition: &NodePartition) -> Self {
        let mut spec = Self::default();
        let corr = model.disturbance_correlation();
        for &a in &partition.y {
            for &c in &partition.d {
                let g = model.module(a, c);
                if !g.is_zero() {
                    let (nb, nf, nk) = g.orders();
                    spec.modules.insert((a, c), ModuleOrders { nb, nf, nk });
                }
            }
            for &b in partition.y.iter().filter(|&&b| b == a || corr[a][b]) {
                let h = model.noise_filter(a, b);
                let orders = if a == b {
                    let den = h.denominator().len() - 1;
                    let num = if h.dead_time() > 0 || h.is_zero() {
                        0
                    } else {
                        h.numerator().len() - 1
                    };
                    NoiseOrders { nc: num, nd: den }
                } else if h.is_zero() {
                    NoiseOrders { nc: 1, nd: 0 }
                } else {
                    let (nb, nd, nk) = h.orders();
                    NoiseOrders { nc: nk + nb - 1, nd }
                };
                spec.noise.insert((a, b), orders);
            }
        }
        spec
    }

    /// True module orders for the single-output structure of output `j`, with
    /// a scalar noise model of at least first order in both polynomials.
    pub fn for_miso(model: &NetworkModel, j: usize) -> Self {
        let mut spec = Self::default();
        for c in model.in_neighbors(j) {
            let (nb, nf, nk) = model.module(j, c).orders();
            spec.modules.insert((j, c), ModuleOrders { nb, nf, nk });
        }
        let h = model.noise_filter(j, j);
        let (nc, nd) = if h.is_zero() {
            (0, 0)
        } else {
            (h.numerator().len() - 1, h.denominator().len() - 1)
        };
        spec.noise.insert((j, j), NoiseOrders { nc: nc.max(1), nd: nd.max(1) });
        spec
    }

    fn module_orders(&self, row: usize, col: usize) -> ModuleOrders {
        self.modules.get(&(row, col)).copied().unwrap_or(self.module_default)
    }

    fn noise_orders(&self, row: usize, col: usize) -> NoiseOrders {
        self.noise.get(&(row, col)).copied().unwrap_or(if row == col {
            self.noise_diagonal
        } else {
            self.noise_off_diagonal
        })
    }
}

impl fmt::Display for OrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.module_default;
        let (hd, ho) = (self.noise_diagonal, self.noise_off_diagonal);
        write!(f, "g={},{},{} hd={},{} ho={},{}", m.nb, m.nf, m.nk, hd.nc, hd.nd, ho.nc, ho.nd)?;
        for ((r, c), o) in &self.modules {
            write!(f, " g{}:{}={},{},{}", r + 1, c + 1, o.nb, o.nf, o.nk)?;
        }
        for ((r, c), o) in &self.noise {
            write!(f, " h{}:{}={},{}", r + 1, c + 1, o.nc, o.nd)?;
        }
        Ok(())
    }
}

/// Parses whitespace or `;` separated items: `g=nb,nf,nk` (module default),
/// `hd=nc,nd` / `ho=nc,nd` (noise diagonal / off-diagonal defaults),
/// `h=nc,nd` (both), `gJ:I=nb,nf,nk` and `hJ:K=nc,nd` (1-based entries).
impl FromStr for OrderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut spec = Self::default();
        let bad = |item: &str, why: &str| Error::Structure(format!("order spec item '{item}': {why}"));
        for item in s.split(|c: char| c.is_whitespace() || c == ';').filter(|t| !t.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| bad(item, "expected key=value"))?;
            let nums: Vec<usize> = value
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(item, "orders must be non-negative integers"))?;
            let module = |n: &[usize]| match n {
                [nb, nf, nk] => Ok(ModuleOrders { nb: *nb, nf: *nf, nk: *nk }),
                _ => Err(bad(item, "module orders are nb,nf,nk")),
            };
            let noise = |n: &[usize]| match n {
                [nc, nd] => Ok(NoiseOrders { nc: *nc, nd: *nd }),
                _ => Err(bad(item, "noise orders are nc,nd")),
            };
            let entry = |rest: &str| -> Result<(usize, usize)> {
                let (r, c) = rest.split_once(':').ok_or_else(|| bad(item, "entry must be written row:col"))?;
                let parse = |v: &str| match v.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(k - 1),
                    _ => Err(bad(item, "node indices are 1-based integers")),
                };
                Ok((parse(r)?, parse(c)?))
            };
            match key {
                "g" => spec.module_default = module(&nums)?,
                "h" => {
                    spec.noise_diagonal = noise(&nums)?;
                    spec.noise_off_diagonal = spec.noise_diagonal;
                }
                "hd" => spec.noise_diagonal = noise(&nums)?,
                "ho" => spec.noise_off_diagonal = noise(&nums)?,
                k if k.starts_with('g') => {
                    spec.modules.insert(entry(&k[1..])?, module(&nums)?);
                }
                k if k.starts_with('h') => {
                    spec.noise.insert(entry(&k[1..])?, noise(&nums)?);
                }
                _ => return Err(bad(item, "unknown key")),
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Module,
    NoiseDiagonal,
    NoiseOffDiagonal,
}

/// One parametrized transfer function and its slice of `θ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamEntry {
    pub kind: EntryKind,
    /// Node indices (0-based).
    pub row: usize,
    pub col: usize,
    /// Positions of `row` and `col` in the output / input (or output) lists.
    pub row_pos: usize,
    pub col_pos: usize,
    pub offset: usize,
    /// Numerator coefficient count (`nb` or `nc`).
    pub n_num: usize,
    /// Denominator order (`nf` or `nd`).
    pub n_den: usize,
    /// Input delay; modules only.
    pub nk: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.n_num + self.n_den
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn numerator<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset..self.offset + self.n_num]
    }

    pub fn denominator_tail<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.offset + self.n_num..self.offset + self.len()]
    }

    /// `[1, d1, ..., d_n]`.
    pub fn denominator(&self, theta: &[f64]) -> Vec<f64> {
        let mut d = vec![1.0];
        d.extend_from_slice(self.denominator_tail(theta));
        d
    }

    /// Numerator by lag, starting at lag 0.
    pub fn lag_numerator(&self, theta: &[f64]) -> Vec<f64> {
        let num = self.numerator(theta);
        match self.kind {
            EntryKind::Module => {
                let mut v = vec![0.0; self.nk];
                v.extend_from_slice(num);
                v
            }
            EntryKind::NoiseDiagonal => {
                let mut v = vec![1.0];
                v.extend_from_slice(num);
                v
            }
            EntryKind::NoiseOffDiagonal => {
                let mut v = vec![0.0];
                v.extend_from_slice(num);
                v
            }
        }
    }

    pub fn transfer_function(&self, theta: &[f64]) -> TransferFunction {
        let (num, delay) = match self.kind {
            EntryKind::Module => (self.numerator(theta).to_vec(), self.nk),
            EntryKind::NoiseDiagonal => (self.lag_numerator(theta), 0),
            EntryKind::NoiseOffDiagonal => (self.numerator(theta).to_vec(), 1),
        };
        TransferFunction::new(num, self.denominator(theta), delay).expect("monic denominator with finite coefficients")
    }

    fn names(&self) -> Vec<String> {
        let (tag, num, den) = match self.kind {
            EntryKind::Module => ("G", "b", "f"),
            _ => ("H", "c", "d"),
        };
        let first = if self.kind == EntryKind::Module { 0 } else { 1 };
        let head = format!("{tag}{},{}", self.row + 1, self.col + 1);
        (0..self.n_num)
            .map(|k| format!("{head}.{num}{}", k + first))
            .chain((1..=self.n_den).map(|k| format!("{head}.{den}{k}")))
            .collect()
    }
}

/// The parametrized predictor model for one partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStructure {
    pub partition: NodePartition,
    /// Output nodes `Y`, ascending.
    pub outputs: Vec<usize>,
    /// Input nodes `D`, ascending.
    pub inputs: Vec<usize>,
    pub modules: Vec<ParamEntry>,
    pub noise: Vec<ParamEntry>,
    pub dim: usize,
}

fn instantaneous_path(model: &NetworkModel, from: &BTreeSet<usize>, to: &BTreeSet<usize>) -> Option<(usize, usize)> {
    let l = model.size();
    for &s in from {
        let mut seen = vec![false; l];
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..l {
                if !model.module(v, u).strictly_proper() && !seen[v] {
                    if to.contains(&v) {
                        return Some((s, v));
                    }
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    None
}

/// Builds the MIMO predictor structure for a partition. Modules are free
/// where the topology has a module from an input to an output, and on every
/// output/blocking-node pair; noise off-diagonals are free where the
/// disturbances of two outputs are correlated.
pub fn build_model_structure(model: &NetworkModel, partition: &NodePartition, orders: &OrderSpec) -> Result<ModelStructure> {
    partition.check_invariants(model)?;
    let corr = model.disturbance_correlation();
    build(model, partition, orders, |a, b| corr[a][b])
}

/// Single-output structure for output `j` with all its in-neighbours as
/// inputs and a scalar noise model, ignoring disturbance correlation.
pub fn miso_structure(model: &NetworkModel, j: usize, i: usize, orders: &OrderSpec) -> Result<ModelStructure> {
    if !model.has_module(j, i) {
        return Err(Error::TargetAbsent { j: j + 1, i: i + 1 });
    }
    let partition = NodePartition::from_sets(
        model.size(),
        (j, i),
        BTreeSet::from([j]),
        model.in_neighbors(j),
        BTreeSet::new(),
    )?;
    build(model, &partition, orders, |_, _| false)
}

fn build(
    model: &NetworkModel,
    partition: &NodePartition,
    orders: &OrderSpec,
    correlated: impl Fn(usize, usize) -> bool,
) -> Result<ModelStructure> {
    let outputs: Vec<usize> = partition.y.iter().copied().collect();
    let inputs: Vec<usize> = partition.d.iter().copied().collect();
    let mut offset = 0;
    let mut modules = Vec::new();
    for (row_pos, &a) in outputs.iter().enumerate() {
        for (col_pos, &c) in inputs.iter().enumerate() {
            if a == c || !(model.has_module(a, c) || partition.b.contains(&c)) {
                continue;
            }
            let o = orders.module_orders(a, c);
            if o.nb == 0 {
                return Err(Error::Structure(format!("module G[{},{}] needs nb >= 1", a + 1, c + 1)));
            }
            modules.push(ParamEntry {
                kind: EntryKind::Module,
                row: a,
                col: c,
                row_pos,
                col_pos,
                offset,
                n_num: o.nb,
                n_den: o.nf,
                nk: o.nk,
            });
            offset += o.nb + o.nf;
        }
    }
    let mut noise = Vec::new();
    for (row_pos, &a) in outputs.iter().enumerate() {
        for (col_pos, &b) in outputs.iter().enumerate() {
            if a != b && !correlated(a, b) {
                continue;
            }
            let o = orders.noise_orders(a, b);
            if a != b && o.nc == 0 {
                return Err(Error::Structure(format!("noise entry H[{},{}] needs nc >= 1", a + 1, b + 1)));
            }
            noise.push(ParamEntry {
                kind: if a == b { EntryKind::NoiseDiagonal } else { EntryKind::NoiseOffDiagonal },
                row: a,
                col: b,
                row_pos,
                col_pos,
                offset,
                n_num: o.nc,
                n_den: o.nd,
                nk: 0,
            });
            offset += o.nc + o.nd;
        }
    }
    for &(r, c) in orders.modules.keys() {
        if !modules.iter().any(|e| e.row == r && e.col == c) {
            return Err(Error::Structure(format!(
                "order spec for module G[{},{}], which is not part of the structure",
                r + 1,
                c + 1
            )));
        }
    }
    for &(r, c) in orders.noise.keys() {
        if !noise.iter().any(|e| e.row == r && e.col == c) {
            return Err(Error::Structure(format!(
                "order spec for noise entry H[{},{}], which is not part of the structure",
                r + 1,
                c + 1
            )));
        }
    }

    let strictly_proper = model.all_strictly_proper() && modules.iter().all(|e| e.nk >= 1);
    if !strictly_proper {
        let mut qo: BTreeSet<usize> = partition.q.clone();
        qo.extend(partition.o);
        let mut from = qo.clone();
        from.extend(partition.b.iter().copied());
        if let Some((s, t)) = instantaneous_path(model, &from, &qo) {
            return Err(Error::Structure(format!(
                "delay-free path from w{} to w{} while not all modules are strictly proper",
                s + 1,
                t + 1
            )));
        }
    }

    Ok(ModelStructure {
        partition: partition.clone(),
        outputs,
        inputs,
        modules,
        noise,
        dim: offset,
    })
}

fn fit_coefficients(tf: &TransferFunction, n_num: usize, n_den: usize, nk: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut num = vec![0.0; n_num];
    let mut den = vec![0.0; n_den];
    if tf.is_zero() {
        return Some((num, den));
    }
    let tail = &tf.denominator()[1..];
    if tail.len() > n_den {
        return None;
    }
    den[..tail.len()].copy_from_slice(tail);
    for (k, &b) in tf.numerator().iter().enumerate() {
        let lag = k + tf.dead_time();
        if b == 0.0 {
            continue;
        }
        if lag < nk || lag - nk >= n_num {
            return None;
        }
        num[lag - nk] = b;
    }
    Some((num, den))
}

impl ModelStructure {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn module_entry(&self, j: usize, i: usize) -> Option<&ParamEntry> {
        self.modules.iter().find(|e| e.row == j && e.col == i)
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.modules.iter().chain(&self.noise).flat_map(|e| e.names()).collect()
    }

    /// Checks that all denominators of `θ` are stable.
    pub fn check_domain(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Structure(format!(
                "parameter vector has length {}, structure needs {}",
                theta.len(),
                self.dim
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainViolation("non-finite parameter".into()));
        }
        for e in self.modules.iter().chain(&self.noise) {
            let r = poly_root_radius(&e.denominator(theta));
            if r >= 1.0 {
                return Err(Error::DomainViolation(format!(
                    "denominator of {} has a pole at radius {r:.4}",
                    e.names().first().map_or("?", |s| s.split('.').next().unwrap_or("?"))
                )));
            }
        }
        Ok(())
    }

    /// The parameter vector of the data-generating system, when it lies in
    /// the structure. Requires the monic noise convention, an empty blocking
    /// set and output disturbances driven by output sources only.
    pub fn true_parameters(&self, model: &NetworkModel) -> Result<DVector<f64>> {
        if model.convention() != NoiseConvention::Monic {
            return Err(Error::Structure("true parameters need the monic noise convention".into()));
        }
        if !self.partition.b.is_empty() {
            return Err(Error::Structure("true parameters need an empty blocking set".into()));
        }
        let y = &self.partition.y;
        let l = model.size();
        for &a in y {
            for k in (0..l).filter(|k| !y.contains(k)) {
                if !model.noise_filter(a, k).is_zero() || model.covariance()[(a, k)] != 0.0 {
                    return Err(Error::Structure(format!(
                        "disturbance of output w{} depends on source e{} outside the outputs",
                        a + 1,
                        k + 1
                    )));
                }
            }
        }
        let mut theta = vec![0.0; self.dim];
        let mut put = |e: &ParamEntry, tf: &TransferFunction| -> Result<()> {
            let misfit = || {
                Error::Structure(format!(
                    "true entry [{},{}] does not fit the declared orders",
                    e.row + 1,
                    e.col + 1
                ))
            };
            let (num, den) = match e.kind {
                EntryKind::NoiseDiagonal => {
                    if tf.feedthrough() != 1.0 {
                        return Err(Error::Structure(format!("true H[{},{}] is not monic", e.row + 1, e.col + 1)));
                    }
                    let tail = &tf.numerator()[1..];
                    let dtail = &tf.denominator()[1..];
                    if tail.len() > e.n_num || dtail.len() > e.n_den {
                        return Err(misfit());
                    }
                    let mut num = vec![0.0; e.n_num];
                    num[..tail.len()].copy_from_slice(tail);
                    let mut den = vec![0.0; e.n_den];
                    den[..dtail.len()].copy_from_slice(dtail);
                    (num, den)
                }
                EntryKind::NoiseOffDiagonal => fit_coefficients(tf, e.n_num, e.n_den, 1).ok_or_else(misfit)?,
                EntryKind::Module => fit_coefficients(tf, e.n_num, e.n_den, e.nk).ok_or_else(misfit)?,
            };
            theta[e.offset..e.offset + e.n_num].copy_from_slice(&num);
            theta[e.offset + e.n_num..e.offset + e.len()].copy_from_slice(&den);
            Ok(())
        };
        for e in &self.modules {
            put(e, model.module(e.row, e.col))?;
        }
        for e in &self.noise {
            put(e, model.noise_filter(e.row, e.col))?;
        }
        for &a in y {
            for &b in y {
                if a != b && !model.noise_filter(a, b).is_zero() && !self.noise.iter().any(|e| e.row == a && e.col == b) {
                    return Err(Error::Structure(format!("true H[{},{}] is not free", a + 1, b + 1)));
                }
            }
        }
        Ok(DVector::from_vec(theta))
    }
}
