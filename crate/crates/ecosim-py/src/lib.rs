//! Python bindings for the ecosim simulator: the core domain types, the
//! evolutionary and Hebbian primitives, and the scenario runner.
//!
//! Build with `cargo build -p ecosim-py --release`; the resulting
//! `libecosim_py.so` imports as the `ecosim_py` module once renamed to
//! `ecosim_py.so` (see `python/smoke_test.py`).

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ecosim::config::ScenarioConfig;
use ecosim::evolution::{self, GaConfig};
use ecosim::habitat::{hebbian_update, MigrationOutcome};
use ecosim::harness::{self, run_replication};
use ecosim::model::{self, Agent as CoreAgent, AgentId, AgentSequence, Attribute, Request as CoreRequest, UserId};
use ecosim::rng::RngStream;

fn attribute_from(components: Vec<i64>) -> PyResult<Attribute> {
    if components.is_empty() {
        return Err(PyValueError::new_err("attribute needs at least one component"));
    }
    for &c in &components {
        if !(0..=100).contains(&c) {
            return Err(PyValueError::new_err(format!(
                "attribute component {c} outside [0, 100]"
            )));
        }
    }
    Ok(Attribute::new(components))
}

/// A service agent: an id plus its attribute tuples.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Agent {
    inner: Arc<CoreAgent>,
}

#[pymethods]
impl Agent {
    #[new]
    #[pyo3(signature = (id, attributes, origin_user = 0))]
    fn new(id: u64, attributes: Vec<Vec<i64>>, origin_user: u64) -> PyResult<Self> {
        if attributes.is_empty() {
            return Err(PyValueError::new_err("agent needs at least one attribute"));
        }
        let attrs = attributes
            .into_iter()
            .map(attribute_from)
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Agent {
            inner: Arc::new(CoreAgent::new(AgentId(id), attrs, UserId(origin_user))),
        })
    }

    #[getter]
    fn id(&self) -> u64 {
        self.inner.id.0
    }

    #[getter]
    fn attributes(&self) -> Vec<Vec<i64>> {
        self.inner
            .attributes
            .iter()
            .map(|a| a.components().to_vec())
            .collect()
    }

    #[getter]
    fn origin_user(&self) -> u64 {
        self.inner.origin_user.0
    }

    fn __repr__(&self) -> String {
        format!("Agent(id={}, attributes={:?})", self.inner.id, self.attributes())
    }
}

/// An ordered composition of agents: one candidate application.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Sequence {
    inner: AgentSequence,
}

#[pymethods]
impl Sequence {
    #[new]
    fn new(agents: Vec<Agent>) -> PyResult<Self> {
        if agents.is_empty() {
            return Err(PyValueError::new_err("sequence needs at least one agent"));
        }
        Ok(Sequence {
            inner: AgentSequence::new(agents.into_iter().map(|a| a.inner).collect()),
        })
    }

    #[getter]
    fn agents(&self) -> Vec<Agent> {
        self.inner
            .agents()
            .iter()
            .map(|a| Agent { inner: a.clone() })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let ids: Vec<u64> = self.inner.id_key().iter().map(|id| id.0).collect();
        format!("Sequence(agent_ids={ids:?})")
    }
}

/// A user request: a list of attribute segments.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Request {
    inner: CoreRequest,
}

#[pymethods]
impl Request {
    #[new]
    #[pyo3(signature = (segments, requester = 0))]
    fn new(segments: Vec<Vec<Vec<i64>>>, requester: u64) -> PyResult<Self> {
        if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
            return Err(PyValueError::new_err(
                "request needs non-empty segments",
            ));
        }
        let segments = segments
            .into_iter()
            .map(|seg| seg.into_iter().map(attribute_from).collect::<PyResult<Vec<_>>>())
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Request {
            inner: CoreRequest::new(segments, UserId(requester)),
        })
    }

    #[getter]
    fn segments(&self) -> Vec<Vec<Vec<i64>>> {
        self.inner
            .segments
            .iter()
            .map(|seg| seg.iter().map(|a| a.components().to_vec()).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Request(segments={:?})", self.segments())
    }
}

/// L1 distance between two equal-arity attribute tuples.
#[pyfunction]
fn attr_distance(a: Vec<i64>, r: Vec<i64>) -> PyResult<u64> {
    if a.len() != r.len() {
        return Err(PyValueError::new_err(format!(
            "attribute arity mismatch ({} vs {})",
            a.len(),
            r.len()
        )));
    }
    Ok(model::attr_distance(&attribute_from(a)?, &attribute_from(r)?))
}

/// Fitness of a sequence against a request, in (0, 1].
#[pyfunction]
fn fitness(sequence: &Sequence, request: &Request) -> f64 {
    evolution::fitness(&sequence.inner, &request.inner)
}

/// Parsimony-adjusted fitness.
#[pyfunction]
#[pyo3(signature = (raw, length, mean_length, alpha = 0.05))]
fn adjusted_fitness(raw: f64, length: usize, mean_length: f64, alpha: f64) -> f64 {
    evolution::adjusted_fitness(raw, length, mean_length, alpha)
}

/// Hebbian connection update for a migration outcome.
#[pyfunction]
#[pyo3(signature = (p, success, eta = 0.1, p_min = 0.01, p_max = 0.99))]
fn hebbian(p: f64, success: bool, eta: f64, p_min: f64, p_max: f64) -> f64 {
    let outcome = if success {
        MigrationOutcome::Success
    } else {
        MigrationOutcome::Failure
    };
    hebbian_update(p, outcome, eta, p_min, p_max)
}

/// Percentage match of a composition (list of agents; may be empty) against
/// a request.
#[pyfunction]
fn match_percent(composition: Vec<Agent>, request: &Request) -> f64 {
    let agents: Vec<Arc<CoreAgent>> = composition.into_iter().map(|a| a.inner).collect();
    harness::match_percent(&agents, &request.inner)
}

/// Evolve a response to a request from an agent pool. Returns a dict with
/// the best sequence, its fitness, and the generation/evaluation counts.
#[pyfunction]
#[pyo3(signature = (request, pool, seed, label = "py/evolve"))]
fn evolve<'py>(
    py: Python<'py>,
    request: &Request,
    pool: Vec<Agent>,
    seed: u64,
    label: &str,
) -> PyResult<Bound<'py, PyDict>> {
    if pool.is_empty() {
        return Err(PyValueError::new_err("agent pool must not be empty"));
    }
    let pool: Vec<Arc<CoreAgent>> = pool.into_iter().map(|a| a.inner).collect();
    let mut rng = RngStream::derive(seed, label);
    let result = evolution::evolve_request(
        &request.inner,
        &pool,
        &[],
        &GaConfig::default(),
        &mut rng,
    );
    let out = PyDict::new(py);
    out.set_item(
        "best_sequence",
        Sequence {
            inner: result.best_sequence,
        }
        .into_pyobject(py)?,
    )?;
    out.set_item("best_raw_fitness", result.best_raw_fitness)?;
    out.set_item("generations_run", result.generations_run)?;
    out.set_item("evaluations_used", result.evaluations_used)?;
    Ok(out)
}

fn config_from_kwargs(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    if let Some(kwargs) = kwargs {
        for (key, value) in kwargs.iter() {
            let key: String = key.extract()?;
            let value = value.str()?.to_string();
            cfg.set(&key, &value)
                .map_err(|e| PyValueError::new_err(e.to_string()))?;
        }
    }
    cfg.validate()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(cfg)
}

/// The documented default configuration as a dict of strings.
#[pyfunction]
fn default_config<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ScenarioConfig::default();
    let out = PyDict::new(py);
    for line in cfg.to_config_text().lines() {
        if let Some((key, value)) = line.split_once(" = ") {
            out.set_item(key, value)?;
        }
    }
    Ok(out)
}

/// Run one replication of the experiment. Keyword arguments override the
/// default configuration (same keys as the config file). Returns a list of
/// per-request dicts; each also carries the baseline's comparison count.
#[pyfunction]
#[pyo3(signature = (seed, **overrides))]
fn run_scenario<'py>(
    py: Python<'py>,
    seed: u64,
    overrides: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = config_from_kwargs(overrides)?;
    let replication = run_replication(&cfg, seed);
    let records = PyList::empty(py);
    for (record, &comparisons) in replication.records.iter().zip(&replication.comparisons) {
        let row = PyDict::new(py);
        row.set_item("request_index", record.request_index)?;
        row.set_item("services_available", record.services_available)?;
        row.set_item("match_pct_eco", record.match_pct_eco)?;
        row.set_item("match_pct_soa", record.match_pct_soa)?;
        row.set_item("evaluations_used", record.evaluations_used)?;
        row.set_item("seed", record.seed)?;
        row.set_item("comparisons_used", comparisons)?;
        records.append(row)?;
    }
    Ok(records)
}

#[pymodule]
fn ecosim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Agent>()?;
    m.add_class::<Sequence>()?;
    m.add_class::<Request>()?;
    m.add_function(wrap_pyfunction!(attr_distance, m)?)?;
    m.add_function(wrap_pyfunction!(fitness, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_fitness, m)?)?;
    m.add_function(wrap_pyfunction!(hebbian, m)?)?;
    m.add_function(wrap_pyfunction!(match_percent, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
