use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::confounder::{find_confounders, ConfounderFinding};
use super::{build_graph, format_path, NetworkGraph, Node, Path};
use crate::error::{Error, Result};
use crate::network::NetworkModel;

/// Upper bound on the number of blocking-set candidates examined.
pub const DEFAULT_CANDIDATE_CAP: usize = 1 << 20;

/// Node sets of the local estimation problem, all 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodePartition {
    pub size: usize,
    /// Target module `G[j, i]` as `(j, i)`.
    pub target: (usize, usize),
    pub y: BTreeSet<usize>,
    pub d: BTreeSet<usize>,
    pub q: BTreeSet<usize>,
    pub a: BTreeSet<usize>,
    pub b: BTreeSet<usize>,
    pub z: BTreeSet<usize>,
    pub o: Option<usize>,
}

impl NodePartition {
    /// Builds the partition from outputs, predictor inputs without blocking
    /// nodes, and the blocking set.
    pub fn from_sets(
        size: usize,
        target: (usize, usize),
        y: BTreeSet<usize>,
        d_without_b: BTreeSet<usize>,
        b: BTreeSet<usize>,
    ) -> Result<Self> {
        let (j, _) = target;
        let q: BTreeSet<usize> = y.intersection(&d_without_b).copied().collect();
        let a: BTreeSet<usize> = d_without_b.difference(&q).copied().collect();
        if let Some(k) = b.iter().find(|k| y.contains(k) || a.contains(k)) {
            return Err(Error::InvalidPartition(format!(
                "blocking node {} lies in Y or A",
                k + 1
            )));
        }
        let d: BTreeSet<usize> = d_without_b.union(&b).copied().collect();
        let z = (0..size).filter(|k| !d.contains(k) && !y.contains(k)).collect();
        let o = (!q.contains(&j)).then_some(j);
        let p = Self {
            size,
            target,
            y,
            d,
            q,
            a,
            b,
            z,
            o,
        };
        p.check_sets()?;
        Ok(p)
    }

    /// The same partition with a different blocking set.
    pub fn with_blocking(&self, b: BTreeSet<usize>) -> Result<Self> {
        let base: BTreeSet<usize> = self.q.union(&self.a).copied().collect();
        Self::from_sets(self.size, self.target, self.y.clone(), base, b)
    }

    /// Unmeasured nodes before any blocking node is added: `L \ (Y ∪ A)`.
    pub fn pre_blocking_unmeasured(&self) -> BTreeSet<usize> {
        (0..self.size)
            .filter(|k| !self.y.contains(k) && !self.a.contains(k))
            .collect()
    }

    /// Measured outputs used as the confounding targets, `Q ∪ {o}` (equals Y).
    pub fn outputs(&self) -> &BTreeSet<usize> {
        &self.y
    }

    fn check_sets(&self) -> Result<()> {
        let (j, i) = self.target;
        let bad = |m: String| Err(Error::InvalidPartition(m));
        if j >= self.size || i >= self.size {
            return bad("target out of range".into());
        }
        if !self.y.contains(&j) {
            return bad(format!("target output {} not in Y", j + 1));
        }
        if !self.d.contains(&i) {
            return bad(format!("target input {} not in D", i + 1));
        }
        if self.y.iter().chain(&self.d).any(|&k| k >= self.size) {
            return bad("node index out of range".into());
        }
        Ok(())
    }

    /// Checks the partition invariants, including that every in-neighbour of
    /// an output is a predictor input.
    pub fn check_invariants(&self, model: &NetworkModel) -> Result<()> {
        self.check_sets()?;
        for &x in &self.y {
            if let Some(k) = model.in_neighbors(x).into_iter().find(|k| !self.d.contains(k)) {
                return Err(Error::InvalidPartition(format!(
                    "in-neighbour w{} of output w{} is not a predictor input",
                    k + 1,
                    x + 1
                )));
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        let s = |set: &BTreeSet<usize>| {
            let v: Vec<String> = set.iter().map(|k| (k + 1).to_string()).collect();
            format!("{{{}}}", v.join(","))
        };
        format!(
            "Y={} D={} Q={} A={} B={} Z={} o={}",
            s(&self.y),
            s(&self.d),
            s(&self.q),
            s(&self.a),
            s(&self.b),
            s(&self.z),
            self.o.map_or("void".to_string(), |o| (o + 1).to_string())
        )
    }
}

/// Grows outputs and predictor inputs to a fixed point, starting from the
/// target output. Nodes are visited in ascending order.
pub fn algorithm_a(model: &NetworkModel, j: usize, i: usize) -> Result<NodePartition> {
    let l = model.size();
    if j >= l || i >= l || !model.has_module(j, i) {
        return Err(Error::TargetAbsent { j: j + 1, i: i + 1 });
    }
    let corr = model.disturbance_correlation();
    let mut y = BTreeSet::from([j]);
    let mut d = BTreeSet::new();
    'grow: loop {
        for x in y.clone() {
            for k in model.in_neighbors(x) {
                d.insert(k);
                if !y.contains(&k) && y.iter().any(|&m| corr[k][m]) {
                    y.insert(k);
                    continue 'grow;
                }
            }
        }
        break;
    }
    NodePartition::from_sets(l, (j, i), y, d, BTreeSet::new())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub description: String,
    pub paths: Vec<Path>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub name: &'static str,
    pub passed: bool,
    /// False when the condition is vacuous for this partition.
    pub applicable: bool,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Property1Report {
    pub blocking: BTreeSet<usize>,
    pub confounders: Vec<ConfounderFinding>,
    pub conditions: Vec<ConditionResult>,
}

impl Property1Report {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.conditions.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn witness(description: String, paths: Vec<Path>) -> Witness {
    let description = format!(
        "{description}: {}",
        paths.iter().map(|p| format_path(p)).collect::<Vec<_>>().join(" ; ")
    );
    Witness { description, paths }
}

/// Evaluates every condition of the blocking property for the blocking set
/// stored in `partition`.
pub fn check_property1(model: &NetworkModel, partition: &NodePartition) -> Result<Property1Report> {
    let g = build_graph(model)?;
    Ok(check_on_graph(&g, partition))
}

pub(crate) fn check_on_graph(g: &NetworkGraph, p: &NodePartition) -> Property1Report {
    let (j, i) = p.target;
    let z0 = p.pre_blocking_unmeasured();
    let confounders = find_confounders(g, &p.a, &p.y, &z0);
    let in_z = |k: usize| p.z.contains(&k);
    let any_conf = !confounders.is_empty();

    let c1 = ConditionResult {
        name: "1",
        passed: any_conf || p.b.is_empty(),
        applicable: !any_conf,
        witnesses: if !any_conf && !p.b.is_empty() {
            vec![Witness {
                description: format!(
                    "no confounders, but B = {:?} is not void",
                    p.b.iter().map(|k| k + 1).collect::<Vec<_>>()
                ),
                paths: vec![],
            }]
        } else {
            vec![]
        },
    };

    let mut w2a = Vec::new();
    if any_conf {
        for c in &confounders {
            for &a in &p.a {
                if let Some(path) = g.find_path(Node::E(c.source), a, in_z) {
                    w2a.push(witness(
                        format!("confounder e{} reaches w{} without passing B", c.source + 1, a + 1),
                        vec![path],
                    ));
                }
            }
        }
    }

    let mut w2b = Vec::new();
    if any_conf && !p.b.is_empty() {
        for e in 0..g.size() {
            let to_b = p.b.iter().find_map(|&b| g.find_path(Node::E(e), b, in_z));
            let to_a = p.a.iter().find_map(|&a| g.find_path(Node::E(e), a, in_z));
            if let (Some(pb), Some(pa)) = (to_b, to_a) {
                w2b.push(witness(
                    format!("e{} reaches B and A through unmeasured nodes only", e + 1),
                    vec![pb, pa],
                ));
            }
        }
    }

    let from_node = |src: usize, label: &str| {
        let mut out = Vec::new();
        if any_conf {
            for &b in &p.b {
                if let Some(path) = g.find_path(Node::W(src), b, in_z) {
                    out.push(witness(format!("{label} w{} reaches w{}", src + 1, b + 1), vec![path]));
                }
            }
        }
        out
    };
    let w2c = from_node(i, "target input");
    let w2d = from_node(j, "target output");

    let mk = |name, w: Vec<Witness>| ConditionResult {
        name,
        passed: w.is_empty(),
        applicable: any_conf,
        witnesses: w,
    };
    Property1Report {
        blocking: p.b.clone(),
        confounders,
        conditions: vec![c1, mk("2a", w2a), mk("2b", w2b), mk("2c", w2c), mk("2d", w2d)],
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            if n - x < k - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Blocking-set candidates of at most `max_size` nodes in search order:
/// by size, then lexicographic.
pub fn blocking_candidates(partition: &NodePartition, max_size: usize) -> Vec<BTreeSet<usize>> {
    let pool: Vec<usize> = partition.pre_blocking_unmeasured().into_iter().collect();
    (0..=max_size.min(pool.len()))
        .flat_map(|k| combinations(pool.len(), k))
        .map(|idx| idx.iter().map(|&x| pool[x]).collect())
        .collect()
}

/// Finds the first blocking set (by size, then lexicographic) for which the
/// blocking property holds.
pub fn select_blocking_set(model: &NetworkModel, partition: &NodePartition) -> Result<NodePartition> {
    select_blocking_set_with_cap(model, partition, DEFAULT_CANDIDATE_CAP)
}

pub fn select_blocking_set_with_cap(
    model: &NetworkModel,
    partition: &NodePartition,
    cap: usize,
) -> Result<NodePartition> {
    let g = build_graph(model)?;
    let pool: Vec<usize> = partition.pre_blocking_unmeasured().into_iter().collect();
    let mut examined = 0usize;
    let mut best: Option<(usize, Vec<usize>, Vec<&'static str>)> = None;
    for k in 0..=pool.len() {
        let mut level = combinations(pool.len(), k);
        let room = cap.saturating_sub(examined);
        let truncated = level.len() > room;
        level.truncate(room);
        examined += level.len();
        let results: Vec<(Vec<usize>, NodePartition, Property1Report)> = level
            .par_iter()
            .map(|idx| {
                let b: Vec<usize> = idx.iter().map(|&x| pool[x]).collect();
                let cand = partition
                    .with_blocking(b.iter().copied().collect())
                    .expect("candidates avoid Y and A");
                let report = check_on_graph(&g, &cand);
                (b, cand, report)
            })
            .collect();
        for (b, cand, report) in results {
            if report.passed() {
                return Ok(cand);
            }
            let failing = report.failing();
            if best.as_ref().is_none_or(|(n, _, _)| failing.len() < *n) {
                best = Some((failing.len(), b, failing));
            }
        }
        if truncated {
            break;
        }
    }
    let (_, b, failing) = best.unwrap_or_default();
    Err(Error::NoValidBlockingSet {
        candidates: examined,
        best: b.into_iter().map(|k| k + 1).collect(),
        failing: failing.into_iter().map(String::from).collect(),
    })
}
