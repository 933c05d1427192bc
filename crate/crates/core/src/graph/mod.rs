//! Structural reasoning on the network graph.
//!
//! The graph has one vertex per node signal `w_k` and one per white noise
//! source `e_k` (unit covariance convention). Module edges `w_l -> w_j` follow
//! the nonzero pattern of `G`, noise edges `e_k -> w_j` the nonzero pattern of
//! `H F` with `F F^T = Λ`. Dynamics are ignored.

mod confounder;
mod selection;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::network::NetworkModel;

pub use confounder::{find_confounders, is_confounder, ConfounderFinding, ConfounderKind, DEFAULT_WITNESS_CAP};
pub use selection::{
    algorithm_a, blocking_candidates, check_property1, select_blocking_set, select_blocking_set_with_cap, ConditionResult,
    NodePartition, Property1Report, Witness, DEFAULT_CANDIDATE_CAP,
};

/// A graph vertex. Indices are 0-based; display is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Node {
    W(usize),
    E(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::W(k) => write!(f, "w{}", k + 1),
            Node::E(k) => write!(f, "e{}", k + 1),
        }
    }
}

pub type Path = Vec<Node>;

pub fn format_path(p: &[Node]) -> String {
    p.iter().map(Node::to_string).collect::<Vec<_>>().join(" -> ")
}

/// Intermediate w-nodes of a path (all vertices except the endpoints).
pub fn intermediates(p: &[Node]) -> impl Iterator<Item = usize> + '_ {
    let inner = if p.len() > 2 { &p[1..p.len() - 1] } else { &[][..] };
    inner.iter().filter_map(|n| match n {
        Node::W(k) => Some(*k),
        Node::E(_) => None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    size: usize,
    /// `w_children[l]` lists `j` with an edge `w_l -> w_j`.
    w_children: Vec<Vec<usize>>,
    /// `e_children[k]` lists `j` with an edge `e_k -> w_j`.
    e_children: Vec<Vec<usize>>,
}

pub fn build_graph(model: &NetworkModel) -> Result<NetworkGraph> {
    let l = model.size();
    let noise = model.noise_edge_pattern()?;
    let modules: Vec<Vec<bool>> = (0..l)
        .map(|j| (0..l).map(|k| model.has_module(j, k)).collect())
        .collect();
    Ok(NetworkGraph::from_patterns(&modules, &noise))
}

impl NetworkGraph {
    /// `modules[j][l]` marks `w_l -> w_j`, `noise[j][k]` marks `e_k -> w_j`.
    /// Self-loops in `modules` are dropped.
    pub fn from_patterns(modules: &[Vec<bool>], noise: &[Vec<bool>]) -> Self {
        let size = modules.len();
        let mut w_children = vec![Vec::new(); size];
        let mut e_children = vec![Vec::new(); size];
        for j in 0..size {
            for k in 0..size {
                if modules[j][k] && j != k {
                    w_children[k].push(j);
                }
                if noise[j][k] {
                    e_children[k].push(j);
                }
            }
        }
        Self {
            size,
            w_children,
            e_children,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn children(&self, n: Node) -> &[usize] {
        match n {
            Node::W(k) => &self.w_children[k],
            Node::E(k) => &self.e_children[k],
        }
    }

    pub fn has_edge(&self, from: Node, to: usize) -> bool {
        self.children(from).contains(&to)
    }

    pub fn module_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.size)
            .flat_map(|l| self.w_children[l].iter().map(move |&j| (l, j)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn noise_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.size)
            .flat_map(|k| self.e_children[k].iter().map(move |&j| (k, j)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Whether a directed path leads from `from` to `to` with every
    /// intermediate w-node satisfying `allowed`. A single edge always qualifies.
    pub fn path_exists(&self, from: Node, to: usize, allowed: impl Fn(usize) -> bool) -> bool {
        self.find_path(from, to, allowed).is_some()
    }

    /// Shortest such path, if any.
    pub fn find_path(&self, from: Node, to: usize, allowed: impl Fn(usize) -> bool) -> Option<Path> {
        let mut parent: Vec<Option<usize>> = vec![None; self.size];
        let mut seen = vec![false; self.size];
        let mut queue = VecDeque::new();
        for &c in self.children(from) {
            if c == to {
                return Some(vec![from, Node::W(to)]);
            }
            if allowed(c) && !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &c in &self.w_children[u] {
                if c == to {
                    let mut rev = vec![Node::W(to), Node::W(u)];
                    let mut cur = u;
                    while let Some(p) = parent[cur] {
                        rev.push(Node::W(p));
                        cur = p;
                    }
                    rev.push(from);
                    rev.reverse();
                    return Some(rev);
                }
                if allowed(c) && !seen[c] {
                    seen[c] = true;
                    parent[c] = Some(u);
                    queue.push_back(c);
                }
            }
        }
        None
    }

    /// Simple paths from `from` to `to` whose intermediates satisfy
    /// `allowed`, in depth-first order, at most `cap` of them.
    pub fn enumerate_paths(&self, from: Node, to: usize, allowed: impl Fn(usize) -> bool, cap: usize) -> Vec<Path> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        let mut on_path = vec![false; self.size];
        if let Node::W(k) = from {
            on_path[k] = true;
        }
        self.dfs(from, to, &allowed, cap, &mut stack, &mut on_path, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        at: Node,
        to: usize,
        allowed: &impl Fn(usize) -> bool,
        cap: usize,
        stack: &mut Vec<Node>,
        on_path: &mut [bool],
        out: &mut Vec<Path>,
    ) {
        for &c in self.children(at) {
            if out.len() >= cap {
                return;
            }
            if c == to {
                let mut p = stack.clone();
                p.push(Node::W(c));
                out.push(p);
                continue;
            }
            if on_path[c] || !allowed(c) {
                continue;
            }
            on_path[c] = true;
            stack.push(Node::W(c));
            self.dfs(Node::W(c), to, allowed, cap, stack, on_path, out);
            stack.pop();
            on_path[c] = false;
        }
    }

    /// w-nodes reachable from `from` through intermediates satisfying `allowed`.
    pub fn reachable(&self, from: Node, allowed: impl Fn(usize) -> bool) -> BTreeSet<usize> {
        (0..self.size)
            .filter(|&t| self.path_exists(from, t, &allowed))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> NetworkGraph {
        // w1 -> w2 -> w3, e1 -> w1, e2 -> w2, e2 -> w3
        let mut m = vec![vec![false; 3]; 3];
        m[1][0] = true;
        m[2][1] = true;
        let mut n = vec![vec![false; 3]; 3];
        n[0][0] = true;
        n[1][1] = true;
        n[2][1] = true;
        NetworkGraph::from_patterns(&m, &n)
    }

    #[test]
    fn no_path_to_self_without_loop() {
        let g = chain();
        assert!(!g.path_exists(Node::W(0), 0, |_| false));
        assert!(!g.path_exists(Node::W(0), 0, |_| true));
    }

    #[test]
    fn single_edge_ignores_predicate() {
        let g = chain();
        assert!(g.path_exists(Node::E(1), 1, |_| false));
        assert!(g.path_exists(Node::W(0), 1, |_| false));
    }

    #[test]
    fn intermediates_are_filtered() {
        let g = chain();
        assert!(!g.path_exists(Node::E(0), 2, |_| false));
        assert!(!g.path_exists(Node::E(0), 2, |k| k == 0));
        let p = g.find_path(Node::E(0), 2, |k| k <= 1).unwrap();
        assert_eq!(p, vec![Node::E(0), Node::W(0), Node::W(1), Node::W(2)]);
        assert_eq!(intermediates(&p).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(format_path(&p), "e1 -> w1 -> w2 -> w3");
    }

    #[test]
    fn enumeration_lists_parallel_paths() {
        // e1 -> w1, e1 -> w2, w1 -> w3, w2 -> w3
        let mut m = vec![vec![false; 3]; 3];
        m[2][0] = true;
        m[2][1] = true;
        let mut n = vec![vec![false; 3]; 3];
        n[0][0] = true;
        n[1][0] = true;
        let g = NetworkGraph::from_patterns(&m, &n);
        let paths = g.enumerate_paths(Node::E(0), 2, |_| true, 16);
        assert_eq!(paths.len(), 2);
        assert_eq!(g.enumerate_paths(Node::E(0), 2, |_| true, 1).len(), 1);
        assert!(g.enumerate_paths(Node::E(0), 2, |k| k == 5, 16).is_empty());
    }
}
