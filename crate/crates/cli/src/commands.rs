use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use netident::config::load_config;
use netident::experiment::{run_montecarlo, ExperimentManifest};
use netident::graph::{
    algorithm_a, blocking_candidates, check_property1, select_blocking_set, NodePartition, Property1Report,
};
use netident::grid::{FrequencyGrid, DEFAULT_GRID_LOW};
use netident::identify::{
    build_model_structure, estimate, excitation_diagnostic, extract_module, miso_structure, EstimateOptions,
    OrderSpec,
};
use netident::immersion::{check_zero_blocks, disturbance_spectrum, immerse};
use netident::report::{montecarlo_files, montecarlo_text, write_files};
use netident::simulate::{burn_in_warning, simulate as run_simulation, SimulationPlan};
use netident::{NetworkModel, SignalRecord};
use serde_json::{json, Value};

use crate::render::{confounder_json, partition_json, partition_text, property_json, property_text, set_text};
use crate::{Global, IdentifyArgs, MontecarloArgs, SimulateArgs, TargetArgs};

pub struct Report {
    pub text: String,
    pub json: Value,
}

fn load(path: &Path) -> Result<(NetworkModel, Option<String>)> {
    let (model, meta) = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    Ok((model, meta.name))
}

fn grid(g: &Global) -> Result<FrequencyGrid> {
    Ok(FrequencyGrid::log_spaced(g.grid_size(), DEFAULT_GRID_LOW)?)
}

fn zero_based(t: (usize, usize)) -> (usize, usize) {
    (t.0 - 1, t.1 - 1)
}

fn write_outputs(g: &Global, files: Vec<(String, String)>) -> Result<()> {
    write_files(&g.out_dir(), &files)?;
    Ok(())
}

struct Selection {
    partition: NodePartition,
    report: Property1Report,
    /// Candidates examined and rejected before the selected one.
    rejected: Vec<Property1Report>,
}

fn select(model: &NetworkModel, target: (usize, usize), blocking: Option<&[usize]>) -> Result<Selection> {
    let (j, i) = zero_based(target);
    let base = algorithm_a(model, j, i)?;
    let (partition, rejected) = match blocking {
        Some(b) => (base.with_blocking(b.iter().map(|k| k - 1).collect())?, Vec::new()),
        None => {
            let fin = select_blocking_set(model, &base)?;
            let mut rejected = Vec::new();
            for b in blocking_candidates(&base, fin.b.len()) {
                if b == fin.b {
                    break;
                }
                rejected.push(check_property1(model, &base.with_blocking(b)?)?);
            }
            (fin, rejected)
        }
    };
    let report = check_property1(model, &partition)?;
    Ok(Selection {
        partition,
        report,
        rejected,
    })
}

pub fn analyze(g: &Global, a: &TargetArgs) -> Result<Report> {
    let (model, name) = load(&a.config)?;
    let sel = select(&model, a.target, a.blocking.as_deref())?;
    let p = &sel.partition;

    let mut text = format!(
        "Network {} ({} nodes), target G[{},{}]\n",
        name.as_deref().unwrap_or("unnamed"),
        model.size(),
        a.target.0,
        a.target.1
    );
    text.push_str(&partition_text(p));
    if sel.report.confounders.is_empty() {
        text.push_str("No confounders for A -> Y.\n");
    } else {
        text.push_str("Confounders for A -> Y:\n");
        for c in &sel.report.confounders {
            let _ = writeln!(text, "  {}", c.describe());
        }
    }
    if !sel.rejected.is_empty() {
        text.push_str("Rejected blocking candidates:\n");
        for r in &sel.rejected {
            let _ = writeln!(text, "  B = {} fails {}", set_text(&r.blocking), r.failing().join(", "));
            for c in r.conditions.iter().filter(|c| !c.passed) {
                for w in &c.witnesses {
                    let _ = writeln!(text, "      {}: {}", c.name, w.description);
                }
            }
        }
    }
    let verdict = if sel.report.passed() { "holds" } else { "fails" };
    let _ = writeln!(text, "Blocking property {verdict} for B = {}:", set_text(&p.b));
    text.push_str(&property_text(&sel.report));

    let json = json!({
        "config": a.config.display().to_string(),
        "name": name,
        "partition": partition_json(p),
        "confounders": sel.report.confounders.iter().map(confounder_json).collect::<Vec<_>>(),
        "rejected": sel.rejected.iter().map(property_json).collect::<Vec<_>>(),
        "property": property_json(&sel.report),
    });
    write_outputs(
        g,
        vec![
            ("analysis.txt".into(), text.clone()),
            ("analysis.json".into(), serde_json::to_string_pretty(&json)? + "\n"),
        ],
    )?;
    Ok(Report { text, json })
}

pub fn check_spectra(g: &Global, a: &TargetArgs) -> Result<Report> {
    let (model, _) = load(&a.config)?;
    let sel = select(&model, a.target, a.blocking.as_deref())?;
    let sys = immerse(&model, &sel.partition, &grid(g)?)?;
    let spec = disturbance_spectrum(&sys, model.covariance());
    let report = check_zero_blocks(&spec);

    let mut text = format!("Immersed disturbance spectrum for {}\n", sel.partition.describe());
    for b in &report.blocks {
        let state = if b.max_relative < report.tolerance { "zero" } else { "NONZERO" };
        let _ = writeln!(text, "  block {:<3} max relative norm {:.3e}  {state}", b.name, b.max_relative);
    }
    let _ = writeln!(
        text,
        "  hermitian defect {:.3e}, smallest eigenvalue {:.3e}",
        spec.hermitian_defect(),
        spec.min_eigenvalue()
    );
    let verdict = if report.passed() { "hold" } else { "do not hold" };
    let _ = writeln!(text, "Zero-block conditions {verdict} (tolerance {:.0e}).", report.tolerance);

    let mut table = String::from("# netident blocks schema 1\nomega");
    for b in &report.blocks {
        let _ = write!(table, "\t{}", b.name);
    }
    table.push('\n');
    for (k, w) in report.omegas.iter().enumerate() {
        let _ = write!(table, "{w:.9e}");
        for b in &report.blocks {
            let _ = write!(table, "\t{:.9e}", b.per_frequency[k]);
        }
        table.push('\n');
    }
    let json = json!({
        "partition": partition_json(&sel.partition),
        "passed": report.passed(),
        "tolerance": report.tolerance,
        "blocks": report.blocks.iter().map(|b| json!({"name": b.name, "max_relative": b.max_relative})).collect::<Vec<_>>(),
        "hermitian_defect": spec.hermitian_defect(),
        "min_eigenvalue": spec.min_eigenvalue(),
    });
    write_outputs(g, vec![("blocks.tsv".into(), table), ("spectra.txt".into(), text.clone())])?;
    Ok(Report { text, json })
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<Report> {
    let (model, _) = load(&a.config)?;
    let mut plan = SimulationPlan::new(model.clone(), a.samples, g.seed()).with_burn_in(a.burn_in);
    if a.no_excitation {
        plan = plan.without_excitation();
    }
    let data = run_simulation(&plan)?;
    let mut text = format!(
        "Simulated {} samples ({} burn-in, seed {}) into {}\n",
        a.samples,
        a.burn_in,
        g.seed(),
        g.out_dir().join(&a.output).display()
    );
    if let Some(w) = burn_in_warning(&model, a.burn_in) {
        let _ = writeln!(text, "warning: {w}");
    }
    let mut json = json!({
        "samples": a.samples,
        "burn_in": a.burn_in,
        "seed": g.seed(),
        "channels": data.names(),
        "file": a.output,
    });
    if let Some(t) = a.target {
        let sel = select(&model, t, None)?;
        let diag = excitation_diagnostic(&data, &sel.partition, |k| format!("e{}", k + 1), Default::default())?;
        let _ = writeln!(
            text,
            "Excitation of [{}]: smallest spectral eigenvalue {:.3e} over {} bins",
            diag.channels.join(" "),
            diag.min_eigenvalue(),
            diag.omegas.len()
        );
        json["excitation"] = json!({"channels": diag.channels, "min_eigenvalue": diag.min_eigenvalue()});
    }
    write_outputs(g, vec![(a.output.clone(), data.to_text())])?;
    Ok(Report { text, json })
}

fn response_table(omegas: &[f64], values: &[netident::Complex64]) -> String {
    let mut out = String::from("# netident response schema 1\nomega\tre\tim\tabs\targ\n");
    for (w, v) in omegas.iter().zip(values) {
        let _ = writeln!(out, "{w:.9e}\t{:.9e}\t{:.9e}\t{:.9e}\t{:.9e}", v.re, v.im, v.norm(), v.arg());
    }
    out
}

pub fn identify(g: &Global, a: &IdentifyArgs) -> Result<Report> {
    let (model, _) = load(&a.config)?;
    let data = SignalRecord::read(&a.data)?;
    let (j, i) = zero_based(a.target);
    let structure = if a.miso {
        let orders = if a.orders == "true" { OrderSpec::for_miso(&model, j) } else { a.orders.parse()? };
        miso_structure(&model, j, i, &orders)?
    } else {
        let p = select(&model, a.target, None)?.partition;
        let orders = if a.orders == "true" { OrderSpec::from_model(&model, &p) } else { a.orders.parse()? };
        build_model_structure(&model, &p, &orders)?
    };
    let opts = EstimateOptions {
        criterion: a.criterion,
        starts: a.starts,
        seed: g.seed(),
        ..EstimateOptions::default()
    };
    let result = estimate(&structure, &data, &opts)?;
    let grid = grid(g)?;

    let mut text = format!(
        "{} estimate of G[{},{}] with {} ({} parameters, {} starts)\n",
        if a.miso { "Single-output" } else { "MIMO" },
        a.target.0,
        a.target.1,
        a.criterion,
        structure.dim,
        a.starts
    );
    let _ = writeln!(text, "{}", structure.partition.describe());
    let _ = writeln!(
        text,
        "criterion {:.6e}, best start {}, {} iterations, gradient norm {:.3e}",
        result.value,
        result.diagnostics.best_start + 1,
        result.diagnostics.iterations,
        result.diagnostics.gradient_norm
    );
    let mut files = Vec::new();
    let mut modules = Vec::new();
    for e in &structure.modules {
        let m = extract_module(&result, e.row, e.col, &grid)?;
        let _ = writeln!(text, "  G[{},{}] = {}", e.row + 1, e.col + 1, m.tf);
        files.push((format!("response_G{}_{}.tsv", e.row + 1, e.col + 1), response_table(grid.omegas(), &m.response)));
        modules.push(json!({
            "row": e.row + 1,
            "col": e.col + 1,
            "numerator": m.tf.numerator(),
            "denominator": m.tf.denominator(),
            "delay": m.tf.dead_time(),
        }));
    }
    for (r, c, h) in result.noise_model() {
        let _ = writeln!(text, "  H[{},{}] = {h}", r + 1, c + 1);
    }
    let lambda: Vec<Vec<f64>> = result.lambda.row_iter().map(|r| r.iter().copied().collect()).collect();
    let json = json!({
        "target": [a.target.0, a.target.1],
        "setup": if a.miso { "miso" } else { "mimo" },
        "criterion": a.criterion,
        "value": result.value,
        "parameters": structure.parameter_names().into_iter().zip(&result.theta).map(|(n, v)| json!({"name": n, "value": v})).collect::<Vec<_>>(),
        "lambda": lambda,
        "modules": modules,
        "diagnostics": result.diagnostics,
    });
    files.push(("estimate.json".into(), serde_json::to_string_pretty(&json)? + "\n"));
    files.push(("residuals.txt".into(), result.residuals.to_text()));
    write_outputs(g, files)?;
    Ok(Report { text, json })
}

pub fn montecarlo(g: &Global, a: &MontecarloArgs) -> Result<Report> {
    let mut manifest = match &a.manifest {
        Some(path) => ExperimentManifest::read(path)?,
        None => {
            let (Some(config), Some(target)) = (&a.config, a.target) else {
                bail!("either --manifest or a config with --target is required");
            };
            let mut m = ExperimentManifest::new(config, [target.0, target.1]);
            m.samples = a.samples.clone();
            m.realizations = a.realizations;
            m.criterion = a.criterion;
            m.orders = a.orders.clone();
            m.starts = a.starts;
            m.seed = g.seed();
            m.grid_size = g.grid_size();
            m.out_dir = g.out_dir();
            m
        }
    };
    if a.manifest.is_some() {
        if let Some(dir) = &g.out_dir {
            manifest.out_dir = dir.clone();
        }
    }
    let result = run_montecarlo(&manifest)?;
    let files = montecarlo_files(&result);
    write_files(&manifest.out_dir, &files)?;
    let mut text = montecarlo_text(&result);
    let _ = writeln!(text, "Wrote {} files to {}", files.len(), manifest.out_dir.display());
    let json = json!({
        "manifest": manifest,
        "summary": result.summary(),
        "files": files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
    });
    Ok(Report { text, json })
}
