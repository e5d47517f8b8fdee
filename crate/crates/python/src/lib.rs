use std::path::PathBuf;

use moneyflow::bowtie::{classify_bowtie, distance_profile, Component};
use moneyflow::community::{adjusted_rand_index as ari, detect_communities, CommunityOptions};
use moneyflow::geonmf::{factorize, DenseMatrix, NmfOptions, SparseMatrix};
use moneyflow::hodge::{hodge as hodge_decompose, SolverOptions};
use moneyflow::ingest::{
    aggregate, filter_records, parse_log, AggregatedLink, FilterPolicy, ParseMode,
};
use moneyflow::network::{ccdf as ccdf_points, FlowNetwork, WeightKind};
use moneyflow::pipeline::{run_all, run_subcommand, RunConfig, Scenario, Subcommand};
use moneyflow::synth::{generate, ScenarioSpec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn weight_kind(s: &str) -> PyResult<WeightKind> {
    s.parse()
        .map_err(|_| value_err(format!("unknown weight `{s}`, expected flow or frequency")))
}

fn scenario_spec(name: &str, nodes: usize, seed: u64) -> PyResult<ScenarioSpec> {
    Ok(match name {
        "default" => ScenarioSpec {
            nodes,
            seed,
            ..ScenarioSpec::default()
        },
        "walnut" => ScenarioSpec::walnut(nodes, seed),
        "cities" => ScenarioSpec::cities(nodes, true, seed),
        "blocks" => ScenarioSpec::blocks(nodes, 4, 1, seed),
        _ => return Err(value_err(format!("unknown scenario `{name}`"))),
    })
}

/// Directed transfer network aggregated per ordered account pair.
#[pyclass(name = "Network", module = "moneyflow_py", frozen)]
struct PyNetwork {
    inner: FlowNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Builds from `(source, target, flow, frequency)` tuples over node
    /// indices `0..n`.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(u32, u32, u64, u64)>) -> PyResult<Self> {
        Ok(Self {
            inner: FlowNetwork::from_edges(n, &edges).map_err(value_err)?,
        })
    }

    /// Builds from `(source_id, destination_id, flow, frequency)` tuples.
    #[staticmethod]
    fn from_links(links: Vec<(String, String, u64, u64)>) -> PyResult<Self> {
        let links: Vec<AggregatedLink> = links
            .into_iter()
            .map(|(source, destination, flow, frequency)| AggregatedLink {
                source,
                destination,
                flow,
                frequency,
            })
            .collect();
        Ok(Self {
            inner: FlowNetwork::build(&links).map_err(value_err)?,
        })
    }

    /// Parses a transfer log CSV, applies the default filters and aggregates.
    #[staticmethod]
    #[pyo3(signature = (path, strict = false))]
    fn from_log(path: PathBuf, strict: bool) -> PyResult<Self> {
        let file =
            std::fs::File::open(&path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let mode = if strict {
            ParseMode::Strict
        } else {
            ParseMode::Lenient
        };
        let parsed = parse_log(file, mode).map_err(value_err)?;
        let kept = filter_records(parsed.records, &FilterPolicy::default());
        Ok(Self {
            inner: FlowNetwork::build(&aggregate(&kept)).map_err(value_err)?,
        })
    }

    /// Synthetic network from a named scenario.
    #[staticmethod]
    #[pyo3(signature = (scenario = "default", nodes = 10_000, seed = 1))]
    fn synthetic(scenario: &str, nodes: usize, seed: u64) -> PyResult<Self> {
        let data = generate(&scenario_spec(scenario, nodes, seed)?).map_err(value_err)?;
        let kept = filter_records(data.records, &FilterPolicy::default());
        Ok(Self {
            inner: FlowNetwork::build(&aggregate(&kept)).map_err(value_err)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.inner.link_count()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    /// `(source, target, flow, frequency)` per link, by node index.
    fn links(&self) -> Vec<(u32, u32, u64, u64)> {
        self.inner
            .links()
            .iter()
            .map(|l| (l.source, l.target, l.flow, l.frequency))
            .collect()
    }

    fn in_degrees(&self) -> Vec<usize> {
        (0..self.inner.node_count() as u32)
            .map(|v| self.inner.in_degree(v))
            .collect()
    }

    fn out_degrees(&self) -> Vec<usize> {
        (0..self.inner.node_count() as u32)
            .map(|v| self.inner.out_degree(v))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, links={})",
            self.inner.node_count(),
            self.inner.link_count()
        )
    }
}

/// Bowtie labels per node plus component sizes and skin distances.
#[pyfunction]
fn bowtie<'py>(py: Python<'py>, net: &PyNetwork) -> PyResult<Bound<'py, PyDict>> {
    let b = classify_bowtie(&net.inner).map_err(value_err)?;
    let prof = distance_profile(&net.inner, &b);
    let d = PyDict::new(py);
    d.set_item(
        "labels",
        b.component_of
            .iter()
            .map(|c| c.as_str())
            .collect::<Vec<_>>(),
    )?;
    let sizes = PyDict::new(py);
    for c in Component::BOWTIE {
        sizes.set_item(c.as_str(), b.sizes.get(c))?;
    }
    d.set_item("sizes", sizes)?;
    d.set_item("gwcc", b.gwcc_size)?;
    d.set_item(
        "in_to_gscc",
        prof.in_to_gscc
            .iter()
            .map(|r| (r.distance, r.count))
            .collect::<Vec<_>>(),
    )?;
    d.set_item(
        "gscc_to_out",
        prof.gscc_to_out
            .iter()
            .map(|r| (r.distance, r.count))
            .collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Potentials and per-pair `(a, b, net, gradient, circular)` flows.
#[pyfunction]
#[pyo3(signature = (net, weight = "frequency", tol = 1e-10))]
fn hodge(
    net: &PyNetwork,
    weight: &str,
    tol: f64,
) -> PyResult<(Vec<f64>, Vec<(u32, u32, f64, f64, f64)>)> {
    let opts = SolverOptions {
        tolerance: tol,
        ..SolverOptions::default()
    };
    let (_, dec) = hodge_decompose(&net.inner, weight_kind(weight)?, &opts).map_err(value_err)?;
    let pairs = dec
        .pairs
        .iter()
        .map(|p| (p.a, p.b, p.net_flow, p.gradient, p.circular))
        .collect();
    Ok((dec.potentials, pairs))
}

/// Community hierarchy: top-level and leaf labels, codelengths, tree JSON.
#[pyfunction]
#[pyo3(signature = (net, seed = 1, trials = 10, weight = "frequency"))]
fn communities<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    seed: u64,
    trials: usize,
    weight: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = CommunityOptions {
        seed,
        trials,
        weight: weight_kind(weight)?,
        ..CommunityOptions::default()
    };
    let tree = detect_communities(&net.inner, &opts);
    let n = net.inner.node_count();
    let d = PyDict::new(py);
    d.set_item("top", tree.labels_at(1, n))?;
    d.set_item("leaves", tree.leaf_labels(n))?;
    d.set_item("depth", tree.depth())?;
    d.set_item("codelength", tree.codelength)?;
    d.set_item("one_level_codelength", tree.one_level_codelength)?;
    d.set_item("tree_json", tree.to_nested_json(&net.inner).to_string())?;
    Ok(d)
}

/// Frobenius NMF of a dense nonnegative matrix: `(W, H, objective_trace)`.
#[pyfunction]
#[pyo3(signature = (v, rank, seed = 1, max_iter = 5000, tol = 1e-8))]
#[allow(clippy::type_complexity)]
fn nmf(
    v: Vec<Vec<f64>>,
    rank: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let rows = v.len();
    let cols = v.first().map_or(0, Vec::len);
    if v.iter().any(|r| r.len() != cols) {
        return Err(value_err("rows of unequal length"));
    }
    let dense = DenseMatrix::from_fn(rows, cols, |i, j| v[i][j]);
    let opts = NmfOptions {
        rank,
        max_iterations: max_iter,
        tolerance: tol,
        seed,
    };
    let r = factorize(&SparseMatrix::from_dense(&dense), &opts).map_err(value_err)?;
    let to_rows = |m: &DenseMatrix| (0..m.rows).map(|i| m.row(i).to_vec()).collect();
    Ok((to_rows(&r.w), to_rows(&r.h), r.objective_trace))
}

/// `(value, fraction at or above value)` for each distinct value.
#[pyfunction]
fn ccdf(values: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    Ok(ccdf_points(&values).map_err(value_err)?.points)
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<u32>, b: Vec<u32>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(value_err("labelings differ in length"));
    }
    Ok(ari(&a, &b))
}

/// Runs one pipeline subcommand (or `all`) into `out`; returns the names of
/// the stages that ran.
#[pyfunction]
#[pyo3(signature = (subcommand, out, scenario = "default", nodes = 10_000, seed = 1, input = None, nmf_d = 10, grid_k = 100, trials = 10))]
#[allow(clippy::too_many_arguments)]
fn run_pipeline(
    subcommand: &str,
    out: PathBuf,
    scenario: &str,
    nodes: usize,
    seed: u64,
    input: Option<PathBuf>,
    nmf_d: usize,
    grid_k: usize,
    trials: usize,
) -> PyResult<Vec<String>> {
    let cfg = RunConfig {
        input,
        out,
        nodes,
        seed,
        nmf_d,
        grid_k,
        trials,
        scenario: match scenario {
            "default" => Scenario::Default,
            "walnut" => Scenario::Walnut,
            "cities" => Scenario::Cities,
            "blocks" => Scenario::Blocks,
            _ => return Err(value_err(format!("unknown scenario `{scenario}`"))),
        },
        ..RunConfig::default()
    };
    let manifests = if subcommand == "all" {
        run_all(&cfg)
    } else {
        let sub: Subcommand = subcommand
            .parse()
            .map_err(|_| value_err(format!("unknown subcommand `{subcommand}`")))?;
        run_subcommand(sub, &cfg).map(|m| vec![m])
    }
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(manifests
        .into_iter()
        .map(|m| m.subcommand.to_string())
        .collect())
}

#[pymodule]
fn moneyflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(bowtie, m)?)?;
    m.add_function(wrap_pyfunction!(hodge, m)?)?;
    m.add_function(wrap_pyfunction!(communities, m)?)?;
    m.add_function(wrap_pyfunction!(nmf, m)?)?;
    m.add_function(wrap_pyfunction!(ccdf, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
