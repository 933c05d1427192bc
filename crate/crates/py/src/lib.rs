//! Python bindings. Node indices are 1-based, as in config files.

use std::collections::BTreeSet;

use netident::config::{load_config, parse_config};
use netident::graph::{algorithm_a, check_property1, select_blocking_set, NodePartition};
use netident::grid::{DEFAULT_GRID_LOW, DEFAULT_GRID_POINTS};
use netident::identify::{
    build_model_structure, estimate as run_estimate, extract_module, miso_structure, Criterion, EstimateOptions,
    EstimationResult, OrderSpec,
};
use netident::immersion::{check_zero_blocks, disturbance_spectrum, immerse};
use netident::simulate::{simulate as run_simulate, SimulationPlan, DEFAULT_BURN_IN};
use netident::{FrequencyGrid, NetworkModel, SignalRecord};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: netident::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn zero_based(model: &NetworkModel, node: usize) -> PyResult<usize> {
    if node == 0 || node > model.size() {
        return Err(PyIndexError::new_err(format!("node {node} outside 1..={}", model.size())));
    }
    Ok(node - 1)
}

fn one_based(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().map(|k| k + 1).collect()
}

#[pyclass(name = "TransferFunction", module = "netident", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTransferFunction(netident::TransferFunction);

#[pymethods]
impl PyTransferFunction {
    #[new]
    #[pyo3(signature = (numerator, denominator = vec![1.0], delay = 0))]
    fn new(numerator: Vec<f64>, denominator: Vec<f64>, delay: usize) -> PyResult<Self> {
        netident::TransferFunction::new(numerator, denominator, delay).map(Self).map_err(err)
    }

    #[getter]
    fn numerator(&self) -> Vec<f64> {
        self.0.numerator().to_vec()
    }

    #[getter]
    fn denominator(&self) -> Vec<f64> {
        self.0.denominator().to_vec()
    }

    #[getter]
    fn delay(&self) -> usize {
        self.0.dead_time()
    }

    /// Frequency response at `omega` rad/sample.
    fn response(&self, omega: f64) -> PyResult<num_complex_shim::C> {
        self.0.response_at(omega).map(num_complex_shim::C).map_err(err)
    }

    fn filter(&self, signal: Vec<f64>) -> Vec<f64> {
        self.0.filter(&signal)
    }

    fn __repr__(&self) -> String {
        format!("TransferFunction({})", self.0)
    }
}

mod num_complex_shim {
    use pyo3::prelude::*;
    use pyo3::types::PyComplex;

    pub struct C(pub netident::Complex64);

    impl<'py> IntoPyObject<'py> for C {
        type Target = PyComplex;
        type Output = Bound<'py, PyComplex>;
        type Error = std::convert::Infallible;

        fn into_pyobject(self, py: Python<'py>) -> Result<Self::Output, Self::Error> {
            Ok(PyComplex::from_doubles(py, self.0.re, self.0.im))
        }
    }
}

#[pyclass(name = "Network", module = "netident", frozen)]
struct PyNetwork {
    model: NetworkModel,
    name: Option<String>,
}

#[pymethods]
impl PyNetwork {
    #[getter]
    fn size(&self) -> usize {
        self.model.size()
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.name.clone()
    }

    /// Module `G[j,i]`, or `None` when the edge is absent.
    fn module(&self, j: usize, i: usize) -> PyResult<Option<PyTransferFunction>> {
        let (j, i) = (zero_based(&self.model, j)?, zero_based(&self.model, i)?);
        Ok(self.model.has_module(j, i).then(|| PyTransferFunction(self.model.module(j, i).clone())))
    }

    fn in_neighbors(&self, j: usize) -> PyResult<Vec<usize>> {
        Ok(one_based(&self.model.in_neighbors(zero_based(&self.model, j)?)))
    }

    fn __repr__(&self) -> String {
        format!("Network({}, {} nodes)", self.name.as_deref().unwrap_or("unnamed"), self.model.size())
    }
}

#[pyfunction]
fn load(path: &str) -> PyResult<PyNetwork> {
    let (model, meta) = load_config(path).map_err(err)?;
    Ok(PyNetwork { model, name: meta.name })
}

#[pyfunction]
fn loads(text: &str) -> PyResult<PyNetwork> {
    let (model, meta) = parse_config(text).map_err(err)?;
    Ok(PyNetwork { model, name: meta.name })
}

fn partition(net: &PyNetwork, j: usize, i: usize, blocking: Option<Vec<usize>>) -> PyResult<NodePartition> {
    let (j, i) = (zero_based(&net.model, j)?, zero_based(&net.model, i)?);
    let p = algorithm_a(&net.model, j, i).map_err(err)?;
    match blocking {
        None => select_blocking_set(&net.model, &p).map_err(err),
        Some(b) => {
            let b = b.into_iter().map(|k| zero_based(&net.model, k)).collect::<PyResult<BTreeSet<_>>>()?;
            p.with_blocking(b).map_err(err)
        }
    }
}

/// Signal selection for target `G[j,i]`, with the blocking property report.
#[pyfunction]
#[pyo3(signature = (network, j, i, blocking = None))]
fn analyze<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    j: usize,
    i: usize,
    blocking: Option<Vec<usize>>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = partition(network, j, i, blocking)?;
    let report = check_property1(&network.model, &p).map_err(err)?;
    let out = PyDict::new(py);
    for (key, set) in [("Y", &p.y), ("D", &p.d), ("Q", &p.q), ("A", &p.a), ("B", &p.b), ("Z", &p.z)] {
        out.set_item(key, one_based(set))?;
    }
    out.set_item("o", p.o.map(|o| o + 1))?;
    out.set_item("passed", report.passed())?;
    out.set_item("failing", report.failing())?;
    out.set_item("confounders", report.confounders.iter().map(|c| c.describe()).collect::<Vec<_>>())?;
    Ok(out)
}

/// Largest relative norm of each zero block of the immersed disturbance spectrum.
#[pyfunction]
#[pyo3(signature = (network, j, i, grid_size = DEFAULT_GRID_POINTS))]
fn check_spectra<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    j: usize,
    i: usize,
    grid_size: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = partition(network, j, i, None)?;
    let grid = FrequencyGrid::log_spaced(grid_size, DEFAULT_GRID_LOW).map_err(err)?;
    let sys = immerse(&network.model, &p, &grid).map_err(err)?;
    let report = check_zero_blocks(&disturbance_spectrum(&sys, network.model.covariance()));
    let out = PyDict::new(py);
    for b in &report.blocks {
        out.set_item(b.name, b.max_relative)?;
    }
    Ok(out)
}

#[pyclass(name = "Signals", module = "netident", frozen)]
struct PySignals(SignalRecord);

#[pymethods]
impl PySignals {
    #[getter]
    fn names(&self) -> Vec<String> {
        self.0.names().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __getitem__(&self, name: &str) -> PyResult<Vec<f64>> {
        self.0
            .channel(name)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| PyIndexError::new_err(format!("no channel '{name}'")))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.write(path).map_err(err)
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        SignalRecord::read(path).map(Self).map_err(err)
    }
}

#[pyfunction]
#[pyo3(signature = (network, samples, seed = 0, burn_in = DEFAULT_BURN_IN, excitation = true))]
fn simulate(network: &PyNetwork, samples: usize, seed: u64, burn_in: usize, excitation: bool) -> PyResult<PySignals> {
    let mut plan = SimulationPlan::new(network.model.clone(), samples, seed).with_burn_in(burn_in);
    if !excitation {
        plan = plan.without_excitation();
    }
    run_simulate(&plan).map(PySignals).map_err(err)
}

#[pyclass(name = "Estimate", module = "netident", frozen)]
struct PyEstimate(EstimationResult);

#[pymethods]
impl PyEstimate {
    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }

    #[getter]
    fn criterion(&self) -> String {
        self.0.criterion.to_string()
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta.clone()
    }

    #[getter]
    fn parameter_names(&self) -> Vec<String> {
        self.0.structure.parameter_names()
    }

    #[getter]
    fn outputs(&self) -> Vec<usize> {
        self.0.structure.outputs.iter().map(|k| k + 1).collect()
    }

    /// Estimated module `G[j,i]`.
    fn module(&self, j: usize, i: usize) -> PyResult<PyTransferFunction> {
        if j == 0 || i == 0 {
            return Err(PyIndexError::new_err("node indices are 1-based"));
        }
        let grid = FrequencyGrid::log_spaced(32, DEFAULT_GRID_LOW).map_err(err)?;
        extract_module(&self.0, j - 1, i - 1, &grid).map(|m| PyTransferFunction(m.tf)).map_err(err)
    }
}

/// Prediction-error estimate of the model selected for `G[j,i]`.
#[pyfunction]
#[pyo3(signature = (network, signals, j, i, criterion = "mldet", orders = None, starts = 8, seed = 0, miso = false))]
#[allow(clippy::too_many_arguments)]
fn estimate(
    py: Python<'_>,
    network: &PyNetwork,
    signals: &PySignals,
    j: usize,
    i: usize,
    criterion: &str,
    orders: Option<&str>,
    starts: usize,
    seed: u64,
    miso: bool,
) -> PyResult<PyEstimate> {
    let criterion: Criterion = criterion.parse().map_err(err)?;
    let model = &network.model;
    let structure = if miso {
        let (j0, i0) = (zero_based(model, j)?, zero_based(model, i)?);
        let spec = match orders {
            Some(o) => o.parse().map_err(err)?,
            None => OrderSpec::for_miso(model, j0),
        };
        miso_structure(model, j0, i0, &spec).map_err(err)?
    } else {
        let p = partition(network, j, i, None)?;
        let spec = match orders {
            Some(o) => o.parse().map_err(err)?,
            None => OrderSpec::from_model(model, &p),
        };
        build_model_structure(model, &p, &spec).map_err(err)?
    };
    let opts = EstimateOptions::default().with_criterion(criterion).with_seed(seed).with_starts(starts);
    py.detach(|| run_estimate(&structure, &signals.0, &opts)).map(PyEstimate).map_err(err)
}

#[pymodule]
#[pyo3(name = "netident")]
fn netident_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTransferFunction>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PySignals>()?;
    m.add_class::<PyEstimate>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(loads, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(check_spectra, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    Ok(())
}
