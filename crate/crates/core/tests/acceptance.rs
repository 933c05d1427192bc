//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{config_path, load, random_model, set};
use netident::experiment::{run_montecarlo, ExperimentManifest, MonteCarloResult, Setup};
use netident::graph::{
    algorithm_a, build_graph, check_property1, find_confounders, is_confounder, select_blocking_set, ConfounderKind,
    Node, NodePartition,
};
use netident::identify::{
    build_model_structure, criterion_gradient, criterion_value, predict_errors, Criterion, EstimateOptions,
    ModelStructure, OrderSpec,
};
use netident::immersion::{check_zero_blocks, disturbance_spectrum, immerse, lemma1_product, max_norm};
use netident::report::{montecarlo_files, write_files, MANIFEST_FILE};
use netident::simulate::{simulate, SimulationPlan};
use netident::{FrequencyGrid, NetworkModel, SignalRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))
}

fn final_partition(m: &NetworkModel, j: usize, i: usize) -> NodePartition {
    select_blocking_set(m, &algorithm_a(m, j, i).unwrap()).unwrap()
}

fn example1_selection() -> Outcome {
    let t = Instant::now();
    let m = load("example1.cfg");
    let p = final_partition(&m, 1, 0);
    let elapsed = t.elapsed();
    ensure(p.y == set(&[2, 4]), format!("Y = {:?}", p.y))?;
    ensure(p.d == set(&[1, 3, 4]), format!("D = {:?}", p.d))?;
    ensure(p.q == set(&[4]), format!("Q = {:?}", p.q))?;
    ensure(p.a == set(&[1, 3]), format!("A = {:?}", p.a))?;
    ensure(p.o == Some(1), format!("o = {:?}", p.o))?;
    ensure(p.b.is_empty(), format!("B = {:?}", p.b))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("{} in {elapsed:?}", p.describe()))
}

fn example2_selection() -> Outcome {
    let t = Instant::now();
    let m = load("example2.cfg");
    let p = algorithm_a(&m, 0, 1).map_err(|e| e.to_string())?;
    ensure(p.y == set(&[1, 2, 3]), format!("Y = {:?}", p.y))?;
    ensure(p.d == set(&[2, 3, 4, 5]), format!("D = {:?}", p.d))?;
    ensure(p.q == set(&[2, 3]), format!("Q = {:?}", p.q))?;
    ensure(p.a == set(&[4, 5]), format!("A = {:?}", p.a))?;
    ensure(p.o == Some(0), format!("o = {:?}", p.o))?;
    let fin = select_blocking_set(&m, &p).map_err(|e| e.to_string())?;
    ensure(fin.b == set(&[8]), format!("B = {:?}", fin.b))?;
    let forced = check_property1(&m, &p.with_blocking(set(&[6])).unwrap()).unwrap();
    ensure(forced.failing() == vec!["2b", "2c"], format!("B={{6}} fails {:?}", forced.failing()))?;
    for name in ["2b", "2c"] {
        let c = forced.condition(name).unwrap();
        ensure(!c.witnesses.is_empty(), format!("{name} has no witness"))?;
        for w in &c.witnesses {
            println!("    {name}: {}", w.description);
        }
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(5))?;
    Ok(format!("{}, B={{6}} fails 2b and 2c, in {elapsed:?}", fin.describe()))
}

fn confounder_classification() -> Outcome {
    let m = load("confounders3.cfg");
    let g = build_graph(&m).map_err(|e| e.to_string())?;
    let (inputs, outputs, z) = (set(&[2]), set(&[1]), set(&[3]));
    let all = find_confounders(&g, &inputs, &outputs, &z);
    let sources: Vec<usize> = all.iter().map(|c| c.source + 1).collect();
    ensure(sources == vec![2, 3], format!("confounders e{sources:?}"))?;
    let e2 = is_confounder(&g, 1, &inputs, &outputs, &z).unwrap();
    let e3 = is_confounder(&g, 2, &inputs, &outputs, &z).unwrap();
    ensure(e2.kind == ConfounderKind::Direct, "e2 not direct")?;
    ensure(e3.kind == ConfounderKind::Indirect, "e3 not indirect")?;
    Ok("e2 direct, e3 indirect".into())
}

fn zero_blocks() -> Outcome {
    let t = Instant::now();
    let grid = FrequencyGrid::default_log();
    let mut worst = 0.0f64;
    for (name, j, i) in [("example1.cfg", 1, 0), ("example2.cfg", 0, 1)] {
        let m = load(name);
        let p = final_partition(&m, j, i);
        let sys = immerse(&m, &p, &grid).map_err(|e| e.to_string())?;
        let report = check_zero_blocks(&disturbance_spectrum(&sys, m.covariance()));
        ensure(report.omegas.len() == 256, "grid size")?;
        for b in &report.blocks {
            worst = worst.max(b.max_relative);
        }
        ensure(report.passed(), format!("{name}: {:?}", report.blocks))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut seed = 1000u64;
    while checked < 50 {
        seed += 1;
        let m = random_model(seed);
        let targets: Vec<(usize, usize)> = (0..m.size())
            .flat_map(|j| (0..m.size()).map(move |i| (j, i)))
            .filter(|&(j, i)| m.has_module(j, i))
            .collect();
        let (j, i) = targets[rng.random_range(0..targets.len())];
        let Ok(p) = select_blocking_set(&m, &algorithm_a(&m, j, i).unwrap()) else {
            continue;
        };
        let sys = immerse(&m, &p, &grid).map_err(|e| e.to_string())?;
        let report = check_zero_blocks(&disturbance_spectrum(&sys, m.covariance()));
        for b in &report.blocks {
            worst = worst.max(b.max_relative);
        }
        ensure(report.passed(), format!("random seed {seed}: {}", p.describe()))?;
        checked += 1;
    }
    let elapsed = t.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("2 examples + {checked} random networks, worst relative norm {worst:.1e}, {elapsed:?}"))
}

fn example1_structure() -> (NetworkModel, ModelStructure) {
    let m = load("example1.cfg");
    let p = final_partition(&m, 1, 0);
    let s = build_model_structure(&m, &p, &OrderSpec::from_model(&m, &p)).unwrap();
    (m, s)
}

fn innovation_recovery() -> Outcome {
    let (m, s) = example1_structure();
    let theta = s.true_parameters(&m).map_err(|e| e.to_string())?;
    let data = simulate(&SimulationPlan::new(m, 20_000, 5)).map_err(|e| e.to_string())?;
    let eps = predict_errors(&s, theta.as_slice(), &data).map_err(|e| e.to_string())?;
    let mut dev = 0.0f64;
    for &k in &s.outputs {
        let got = eps.require(&format!("eps{}", k + 1)).unwrap();
        let want = data.require(&format!("e{}", k + 1)).unwrap();
        for (a, b) in got[200..].iter().zip(&want[200..]) {
            dev = dev.max((a - b).abs());
        }
    }
    ensure(dev < 1e-6, format!("max deviation {dev:.3e}"))?;
    Ok(format!("max deviation {dev:.2e}"))
}

fn montecarlo_manifest() -> ExperimentManifest {
    let mut m = ExperimentManifest::new(config_path("example1.cfg"), [2, 1]);
    m.samples = vec![500, 2000, 8000];
    m.realizations = 20;
    m.criterion = Criterion::MlDet;
    m.seed = 20;
    m
}

fn consistency(mc: &MonteCarloResult, elapsed: Duration) -> Outcome {
    let medians: Vec<f64> = mc
        .manifest
        .samples
        .iter()
        .map(|&n| mc.median(Setup::Mimo, n).unwrap_or(f64::NAN))
        .collect();
    ensure(medians.windows(2).all(|w| w[1] < w[0]), format!("medians {medians:?} not decreasing"))?;
    let last = *medians.last().unwrap();
    ensure(last < 0.05, format!("median at N=8000 is {last:.4}"))?;
    within(elapsed, Duration::from_secs(15 * 60))?;
    Ok(format!("MIMO medians {medians:.4?}, {elapsed:?}"))
}

fn miso_bias(mc: &MonteCarloResult) -> Outcome {
    let miso: Vec<f64> = mc
        .manifest
        .samples
        .iter()
        .map(|&n| mc.median(Setup::Miso, n).unwrap_or(f64::NAN))
        .collect();
    let mimo = mc.median(Setup::Mimo, 8000).unwrap_or(f64::NAN);
    let last = *miso.last().unwrap();
    ensure(last >= 3.0 * mimo, format!("MISO {last:.4} vs MIMO {mimo:.4}"))?;
    ensure(miso.iter().all(|&e| e >= 0.10), format!("MISO medians {miso:?}"))?;
    Ok(format!("MISO medians {miso:.4?}, ratio at N=8000 {:.1}", last / mimo))
}

fn noise_product_bridge() -> Outcome {
    let grid = FrequencyGrid::default_log();
    let (mut passing, mut failing) = (0, 0);
    let (mut worst_zero, mut weakest) = (0.0f64, f64::INFINITY);
    for (name, j, i) in [("example1.cfg", 1, 0), ("example2.cfg", 0, 1)] {
        let m = load(name);
        let g = build_graph(&m).unwrap();
        let base = algorithm_a(&m, j, i).unwrap();
        let pool: Vec<usize> = base.pre_blocking_unmeasured().into_iter().collect();
        for mask in 0u32..(1 << pool.len()) {
            let b: BTreeSet<usize> = pool.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &v)| v).collect();
            let p = base.with_blocking(b).unwrap();
            let sys = immerse(&m, &p, &grid).map_err(|e| e.to_string())?;
            let a: Vec<usize> = p.a.iter().copied().collect();
            let groups: Vec<Vec<usize>> = vec![
                p.y.iter().copied().collect(),
                p.q.iter().copied().collect(),
                p.o.into_iter().collect(),
                p.b.iter().copied().collect(),
            ];
            for g1 in groups.iter().filter(|g| !g.is_empty()) {
                for x in 0..m.size() {
                    let reach = |set: &[usize]| set.iter().any(|&t| g.path_exists(Node::E(x), t, |k| p.z.contains(&k)));
                    let simultaneous = reach(g1) && reach(&a);
                    let norm = max_norm(&lemma1_product(&sys, x, g1, &a).map_err(|e| e.to_string())?);
                    if simultaneous {
                        failing += 1;
                        weakest = weakest.min(norm);
                        ensure(norm > 1e-3, format!("{name} B={:?} e{} {g1:?}: {norm:.2e}", p.b, x + 1))?;
                    } else {
                        passing += 1;
                        worst_zero = worst_zero.max(norm);
                        ensure(norm < 1e-8, format!("{name} B={:?} e{} {g1:?}: {norm:.2e}", p.b, x + 1))?;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{passing} passing pairs (max {worst_zero:.1e}), {failing} failing pairs (min {weakest:.1e})"
    ))
}

fn random_theta(s: &ModelStructure, data: &SignalRecord, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let opts = EstimateOptions::default().with_criterion(Criterion::Wls);
    loop {
        let mut theta = vec![0.0; s.dim];
        for e in s.modules.iter().chain(&s.noise) {
            for k in 0..e.n_num {
                theta[e.offset + k] = rng.random_range(-0.5..0.5);
            }
            let mut poly = vec![1.0];
            for _ in 0..e.n_den {
                let r: f64 = rng.random_range(-0.6..0.6);
                let mut next = vec![0.0; poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k] += c;
                    next[k + 1] -= r * c;
                }
                poly = next;
            }
            theta[e.offset + e.n_num..e.offset + e.len()].copy_from_slice(&poly[1..]);
        }
        if criterion_value(s, &theta, data, &opts).is_ok() {
            return theta;
        }
    }
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for (idx, (name, j, i)) in [("example1.cfg", 1, 0), ("example2.cfg", 0, 1)].into_iter().enumerate() {
        let m = load(name);
        let p = final_partition(&m, j, i);
        let s = build_model_structure(&m, &p, &OrderSpec::from_model(&m, &p)).unwrap();
        let data = simulate(&SimulationPlan::new(m, 2000, 70 + idx as u64)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(idx as u64);
        for _ in 0..10 {
            let theta = random_theta(&s, &data, &mut rng);
            for criterion in [Criterion::MlDet, Criterion::Wls] {
                let opts = EstimateOptions::default().with_criterion(criterion);
                let (_, g) = criterion_gradient(&s, &theta, &data, &opts).map_err(|e| e.to_string())?;
                let mut diff = 0.0;
                for k in 0..s.dim {
                    let h = 1e-6 * theta[k].abs().max(1.0);
                    let (mut up, mut down) = (theta.clone(), theta.clone());
                    up[k] += h;
                    down[k] -= h;
                    let fd = (criterion_value(&s, &up, &data, &opts).unwrap()
                        - criterion_value(&s, &down, &data, &opts).unwrap())
                        / (2.0 * h);
                    diff += (fd - g[k]).powi(2);
                }
                let rel = diff.sqrt() / g.norm();
                worst = worst.max(rel);
                ensure(rel < 1e-4, format!("{name} {criterion}: relative error {rel:.2e}"))?;
            }
        }
    }
    Ok(format!("worst relative error {worst:.1e}"))
}

fn determinism(first: &MonteCarloResult) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    write_files(&a, &montecarlo_files(first)).map_err(|e| e.to_string())?;
    let manifest = ExperimentManifest::read(a.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let second = run_montecarlo(&manifest).map_err(|e| e.to_string())?;
    let files = montecarlo_files(&second);
    write_files(&b, &files).map_err(|e| e.to_string())?;
    for (name, _) in &files {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        ensure(x == y, format!("{name} differs"))?;
    }
    Ok(format!("{} files byte-identical after rerun from the emitted manifest", files.len()))
}

fn run(results: &mut Vec<bool>, n: usize, title: &str, f: impl FnOnce() -> Outcome) {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {n:>2} {title}: {detail}");
            results.push(true);
        }
        Err(why) => {
            println!("FAIL {n:>2} {title}: {why}");
            results.push(false);
        }
    }
}

fn main() {
    let mut results = Vec::new();
    run(&mut results, 1, "example 1 selection", example1_selection);
    run(&mut results, 2, "example 2 selection", example2_selection);
    run(&mut results, 3, "confounder classification", confounder_classification);
    run(&mut results, 4, "zero-block spectrum", zero_blocks);
    run(&mut results, 5, "innovation recovery", innovation_recovery);

    let t = Instant::now();
    let mc = run_montecarlo(&montecarlo_manifest());
    let elapsed = t.elapsed();
    let mc_err = mc.as_ref().err().map(|e| e.to_string());
    let with_mc = |f: &dyn Fn(&MonteCarloResult) -> Outcome| match &mc {
        Ok(r) => f(r),
        Err(_) => Err(format!("montecarlo failed: {}", mc_err.clone().unwrap_or_default())),
    };
    run(&mut results, 6, "MIMO consistency", || with_mc(&|r| consistency(r, elapsed)));
    run(&mut results, 7, "MISO bias", || with_mc(&miso_bias));
    run(&mut results, 8, "noise product bridge", noise_product_bridge);
    run(&mut results, 9, "gradient check", gradient_check);
    run(&mut results, 10, "determinism", || with_mc(&determinism));

    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
