use std::collections::BTreeSet;

use serde::Serialize;

use super::{format_path, NetworkGraph, Node, Path};

/// Witness path pairs retained per confounder.
pub const DEFAULT_WITNESS_CAP: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfounderKind {
    Direct,
    Indirect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfounderFinding {
    /// 0-based noise source index.
    pub source: usize,
    pub output_witness: usize,
    pub input_witness: usize,
    pub kind: ConfounderKind,
    pub output_path: Path,
    pub input_path: Path,
    /// Further `(output path, input path)` pairs, capped.
    pub pairs: Vec<(Path, Path)>,
}

impl ConfounderFinding {
    pub fn describe(&self) -> String {
        format!(
            "e{} ({}) : [{}] and [{}]",
            self.source + 1,
            match self.kind {
                ConfounderKind::Direct => "direct",
                ConfounderKind::Indirect => "indirect",
            },
            format_path(&self.output_path),
            format_path(&self.input_path)
        )
    }
}

fn is_direct(p: &[Node]) -> bool {
    p.len() == 2
}

/// Decides whether `e_source` confounds the estimation problem
/// `inputs -> outputs`: it must reach some input and some (other) output
/// through paths that are either a single noise edge or run through
/// unmeasured nodes (`unmeasured`) only.
pub fn is_confounder(
    g: &NetworkGraph,
    source: usize,
    inputs: &BTreeSet<usize>,
    outputs: &BTreeSet<usize>,
    unmeasured: &BTreeSet<usize>,
) -> Option<ConfounderFinding> {
    is_confounder_capped(g, source, inputs, outputs, unmeasured, DEFAULT_WITNESS_CAP)
}

pub(crate) fn is_confounder_capped(
    g: &NetworkGraph,
    source: usize,
    inputs: &BTreeSet<usize>,
    outputs: &BTreeSet<usize>,
    unmeasured: &BTreeSet<usize>,
    cap: usize,
) -> Option<ConfounderFinding> {
    let from = Node::E(source);
    let allowed = |k: usize| unmeasured.contains(&k);
    let to_inputs: Vec<Path> = inputs
        .iter()
        .flat_map(|&k| g.enumerate_paths(from, k, allowed, cap))
        .collect();
    if to_inputs.is_empty() {
        return None;
    }
    let to_outputs: Vec<Path> = outputs
        .iter()
        .flat_map(|&k| g.enumerate_paths(from, k, allowed, cap))
        .collect();
    let end = |p: &Path| match p.last() {
        Some(Node::W(k)) => *k,
        _ => unreachable!("paths end at a node signal"),
    };
    let mut pairs: Vec<(Path, Path)> = Vec::new();
    let mut direct_pair = None;
    for po in &to_outputs {
        for pi in &to_inputs {
            if end(po) == end(pi) {
                continue;
            }
            if direct_pair.is_none() && is_direct(po) && is_direct(pi) {
                direct_pair = Some((po.clone(), pi.clone()));
            }
            if pairs.len() < cap {
                pairs.push((po.clone(), pi.clone()));
            }
        }
    }
    let (kind, (output_path, input_path)) = match direct_pair {
        Some(p) => (ConfounderKind::Direct, p),
        None => (ConfounderKind::Indirect, pairs.first()?.clone()),
    };
    Some(ConfounderFinding {
        source,
        output_witness: end(&output_path),
        input_witness: end(&input_path),
        kind,
        output_path,
        input_path,
        pairs,
    })
}

/// All confounders of `inputs -> outputs`, ordered by source index.
pub fn find_confounders(
    g: &NetworkGraph,
    inputs: &BTreeSet<usize>,
    outputs: &BTreeSet<usize>,
    unmeasured: &BTreeSet<usize>,
) -> Vec<ConfounderFinding> {
    (0..g.size())
        .filter_map(|e| is_confounder(g, e, inputs, outputs, unmeasured))
        .collect()
}
