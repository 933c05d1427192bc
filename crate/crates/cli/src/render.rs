use std::collections::BTreeSet;
use std::fmt::Write as _;

use netident::graph::{format_path, ConfounderFinding, NodePartition, Path, Property1Report};
use serde_json::{json, Value};

pub fn set_text(s: &BTreeSet<usize>) -> String {
    let v: Vec<String> = s.iter().map(|k| (k + 1).to_string()).collect();
    format!("{{{}}}", v.join(","))
}

pub fn one_based(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().map(|k| k + 1).collect()
}

pub fn partition_text(p: &NodePartition) -> String {
    let mut out = String::new();
    for (name, set) in [("Y", &p.y), ("D", &p.d), ("Q", &p.q), ("A", &p.a), ("B", &p.b), ("Z", &p.z)] {
        let _ = writeln!(out, "{name} = {}", set_text(set));
    }
    let _ = writeln!(out, "o = {}", p.o.map_or("void".to_string(), |o| (o + 1).to_string()));
    out
}

pub fn partition_json(p: &NodePartition) -> Value {
    json!({
        "target": [p.target.0 + 1, p.target.1 + 1],
        "Y": one_based(&p.y),
        "D": one_based(&p.d),
        "Q": one_based(&p.q),
        "A": one_based(&p.a),
        "B": one_based(&p.b),
        "Z": one_based(&p.z),
        "o": p.o.map(|o| o + 1),
    })
}

fn path_json(p: &Path) -> Value {
    Value::String(format_path(p))
}

pub fn confounder_json(c: &ConfounderFinding) -> Value {
    json!({
        "source": format!("e{}", c.source + 1),
        "kind": c.kind,
        "output_path": path_json(&c.output_path),
        "input_path": path_json(&c.input_path),
    })
}

pub fn property_text(r: &Property1Report) -> String {
    let mut out = String::new();
    for c in &r.conditions {
        let state = match (c.applicable, c.passed) {
            (false, _) => "not applicable",
            (true, true) => "holds",
            (true, false) => "fails",
        };
        let _ = writeln!(out, "  {:<3} {state}", c.name);
        for w in &c.witnesses {
            let _ = writeln!(out, "      {}", w.description);
        }
    }
    out
}

pub fn property_json(r: &Property1Report) -> Value {
    json!({
        "blocking": one_based(&r.blocking),
        "passed": r.passed(),
        "failing": r.failing(),
        "conditions": r.conditions.iter().map(|c| json!({
            "name": c.name,
            "passed": c.passed,
            "applicable": c.applicable,
            "witnesses": c.witnesses.iter().map(|w| json!({
                "description": w.description,
                "paths": w.paths.iter().map(path_json).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}
