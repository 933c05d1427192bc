mod common;

use std::collections::BTreeSet;

use common::{load, set};
use netident::graph::{
    algorithm_a, build_graph, check_property1, find_confounders, is_confounder, select_blocking_set,
    ConfounderKind, NetworkGraph, Node,
};
use netident::Error;
use proptest::prelude::*;

#[test]
fn example1_selection() {
    let m = load("example1.cfg");
    assert_eq!(m.in_neighbors(1), set(&[1, 4]));
    let p = algorithm_a(&m, 1, 0).unwrap();
    assert_eq!(p.y, set(&[2, 4]));
    assert_eq!(p.d, set(&[1, 3, 4]));
    assert_eq!(p.q, set(&[4]));
    assert_eq!(p.a, set(&[1, 3]));
    assert_eq!(p.o, Some(1));
    let report = check_property1(&m, &p).unwrap();
    assert!(report.confounders.is_empty());
    assert!(report.passed());
    let fin = select_blocking_set(&m, &p).unwrap();
    assert!(fin.b.is_empty());
    assert_eq!(fin.z, set(&[5, 6]));
    fin.check_invariants(&m).unwrap();
}

#[test]
fn example2_selection() {
    let m = load("example2.cfg");
    let g = build_graph(&m).unwrap();
    assert!(g.has_edge(Node::W(7), 5) && g.has_edge(Node::W(5), 3));
    let p = algorithm_a(&m, 0, 1).unwrap();
    assert_eq!(p.y, set(&[1, 2, 3]));
    assert_eq!(p.d, set(&[2, 3, 4, 5]));
    assert_eq!(p.q, set(&[2, 3]));
    assert_eq!(p.a, set(&[4, 5]));
    assert_eq!(p.o, Some(0));

    let z0 = p.pre_blocking_unmeasured();
    assert_eq!(z0, set(&[6, 7, 8]));
    assert!(g.path_exists(Node::E(7), 3, |k| z0.contains(&k)));
    let conf = find_confounders(&g, &p.a, &p.y, &z0);
    assert_eq!(conf.iter().map(|c| c.source).collect::<Vec<_>>(), vec![7]);

    let fin = select_blocking_set(&m, &p).unwrap();
    assert_eq!(fin.b, set(&[8]));
    assert_eq!(fin.z, set(&[6, 7]));
    assert!(check_property1(&m, &fin).unwrap().passed());

    let forced = p.with_blocking(set(&[6])).unwrap();
    let report = check_property1(&m, &forced).unwrap();
    assert_eq!(report.failing(), vec!["2b", "2c"]);
    let w2b = &report.condition("2b").unwrap().witnesses;
    assert!(w2b.iter().any(|w| w.paths[0][0] == Node::E(3)));
    let w2c = &report.condition("2c").unwrap().witnesses[0];
    assert_eq!(w2c.paths[0], vec![Node::W(1), Node::W(5)]);

    let report7 = check_property1(&m, &p.with_blocking(set(&[7])).unwrap()).unwrap();
    assert!(report7.failing().contains(&"2a"));
}

#[test]
fn witnesses_are_verifiable() {
    let m = load("example2.cfg");
    let g = build_graph(&m).unwrap();
    let p = algorithm_a(&m, 0, 1).unwrap();
    for b in [set(&[]), set(&[6]), set(&[7]), set(&[6, 7])] {
        let cand = p.with_blocking(b).unwrap();
        let report = check_property1(&m, &cand).unwrap();
        for c in &report.conditions {
            for w in &c.witnesses {
                for path in &w.paths {
                    let to = match path.last().unwrap() {
                        Node::W(k) => *k,
                        Node::E(_) => unreachable!(),
                    };
                    for pair in path.windows(2) {
                        let Node::W(t) = pair[1] else { unreachable!() };
                        assert!(g.has_edge(pair[0], t));
                    }
                    assert!(g.path_exists(path[0], to, |k| cand.z.contains(&k)));
                }
            }
        }
    }
}

#[test]
fn three_node_confounders() {
    let m = load("confounders3.cfg");
    let g = build_graph(&m).unwrap();
    let (inputs, outputs, z) = (set(&[2]), set(&[1]), set(&[3]));
    let e2 = is_confounder(&g, 1, &inputs, &outputs, &z).unwrap();
    assert_eq!(e2.kind, ConfounderKind::Direct);
    let e3 = is_confounder(&g, 2, &inputs, &outputs, &z).unwrap();
    assert_eq!(e3.kind, ConfounderKind::Indirect);
    assert_eq!(e3.output_path, vec![Node::E(2), Node::W(2), Node::W(0)]);
    let all = find_confounders(&g, &inputs, &outputs, &z);
    assert_eq!(all.iter().map(|c| c.source).collect::<Vec<_>>(), vec![1, 2]);
}

#[test]
fn diagonal_noise_has_no_confounders() {
    let m = load("example1.cfg");
    let l = m.size();
    let modules: Vec<Vec<bool>> = (0..l).map(|j| (0..l).map(|k| m.has_module(j, k)).collect()).collect();
    let noise: Vec<Vec<bool>> = (0..l).map(|j| (0..l).map(|k| j == k).collect()).collect();
    let g = NetworkGraph::from_patterns(&modules, &noise);
    assert_eq!(g.noise_edges(), (0..l).map(|k| (k, k)).collect::<Vec<_>>());
    assert!(find_confounders(&g, &set(&[1, 4]), &set(&[2]), &set(&[3, 5, 6])).is_empty());
}

#[test]
fn uncorrelated_noise_keeps_single_output() {
    let text = std::fs::read_to_string(common::config_path("example1.cfg"))
        .unwrap()
        .replace("[0.0, 1.0, 0.0, 0.5,", "[0.0, 1.0, 0.0, 0.0,")
        .replace("[0.0, 0.5, 0.0, 1.0,", "[0.0, 0.0, 0.0, 1.0,");
    let text = text.split("[[noise]]").next().unwrap().to_string();
    let (m, _) = netident::config::parse_config(&text).unwrap();
    let p = algorithm_a(&m, 1, 0).unwrap();
    assert_eq!(p.y, set(&[2]));
    assert_eq!(p.d, m.in_neighbors(1));
    assert!(p.q.is_empty());
    assert_eq!(p.o, Some(1));
}

#[test]
fn absent_target_is_refused() {
    let m = load("example1.cfg");
    assert!(algorithm_a(&m, 0, 1).is_ok());
    assert!(matches!(algorithm_a(&m, 3, 0), Err(Error::TargetAbsent { j: 4, i: 1 })));
}

/// Exhaustive oracle: no subset of the candidate pool satisfies all
/// conditions, so the search must fail.
#[test]
fn no_blocking_set_counterexample() {
    let m = load("no_blocking_set.cfg");
    let p = algorithm_a(&m, 0, 1).unwrap();
    let pool: Vec<usize> = p.pre_blocking_unmeasured().into_iter().collect();
    for mask in 0u32..(1 << pool.len()) {
        let b: BTreeSet<usize> = pool.iter().enumerate().filter(|(n, _)| mask >> n & 1 == 1).map(|(_, &k)| k).collect();
        assert!(!check_property1(&m, &p.with_blocking(b).unwrap()).unwrap().passed());
    }
    match select_blocking_set(&m, &p) {
        Err(Error::NoValidBlockingSet { candidates, failing, .. }) => {
            assert_eq!(candidates, 1 << pool.len());
            assert!(!failing.is_empty());
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

fn random_graph() -> impl Strategy<Value = NetworkGraph> {
    (3usize..=7).prop_flat_map(|l| {
        (
            proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.3), l), l),
            proptest::collection::vec(proptest::collection::vec(proptest::bool::weighted(0.25), l), l),
        )
            .prop_map(move |(m, mut n)| {
                for (k, row) in n.iter_mut().enumerate() {
                    row[k] = true;
                }
                NetworkGraph::from_patterns(&m, &n)
            })
    })
}

proptest! {
    #[test]
    fn confounders_monotone_in_unmeasured(g in random_graph(), seed in any::<u64>()) {
        let l = g.size();
        let pick = |s: u64, k: usize| (s >> (2 * k)) & 3;
        let inputs: BTreeSet<usize> = (0..l).filter(|&k| pick(seed, k) == 1).collect();
        let outputs: BTreeSet<usize> = (0..l).filter(|&k| pick(seed, k) == 2).collect();
        let z: BTreeSet<usize> = (0..l).filter(|&k| pick(seed, k) == 3).collect();
        let smaller: BTreeSet<usize> = z.iter().copied().filter(|k| (seed >> (40 + k)) & 1 == 0).collect();
        for e in 0..l {
            if is_confounder(&g, e, &inputs, &outputs, &smaller).is_some() {
                prop_assert!(is_confounder(&g, e, &inputs, &outputs, &z).is_some());
            }
        }
    }

    #[test]
    fn found_paths_respect_predicate(g in random_graph(), mask in any::<u8>()) {
        let allowed = |k: usize| (mask >> k) & 1 == 1;
        for from in 0..g.size() {
            for to in 0..g.size() {
                let p = g.find_path(Node::E(from), to, allowed);
                prop_assert_eq!(p.is_some(), !g.enumerate_paths(Node::E(from), to, allowed, 1).is_empty());
                if let Some(p) = p {
                    prop_assert!(netident::graph::intermediates(&p).all(allowed));
                }
            }
        }
    }
}
