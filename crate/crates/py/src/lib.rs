//! Python bindings for the yard location solver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use yardloc::{
    capital_recovery_factor as crf, count_investment_combinations, evaluate_z as lower_z,
    generate_instance, load_instance, parse_instance, prepared, serialize_instance,
    solve as upper_solve, track_demand as track, GeneratorSpec, Route, RunReport, Scenario,
    TcsMode, TcsSolveConfig, TrackFn, UpperMode, UpperSolveConfig,
};

/// A validated problem instance.
#[pyclass(name = "Instance", module = "pyyardloc", frozen)]
struct PyInstance {
    inner: yardloc::Instance,
}

#[pymethods]
impl PyInstance {
    /// Parse and validate TOML text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        load_instance(text)
            .map(|inner| PyInstance { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_toml(&text)
    }

    fn to_toml(&self) -> String {
        serialize_instance(&self.inner)
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().iter().map(|n| n.id.clone()).collect()
    }

    #[getter]
    fn potential_nodes(&self) -> Vec<String> {
        self.inner
            .potential_nodes()
            .into_iter()
            .map(|k| self.inner.id(k).to_string())
            .collect()
    }

    #[getter]
    fn demand_count(&self) -> usize {
        self.inner.demands().len()
    }

    #[getter]
    fn budget(&self) -> f64 {
        self.inner.economics().budget
    }

    fn with_budget(&self, budget: f64) -> Self {
        PyInstance {
            inner: self.inner.with_budget(budget),
        }
    }

    /// Validation issues as `severity [rule] location: message` lines.
    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .issues
            .iter()
            .map(|i| i.to_string())
            .collect()
    }

    /// Number of investment decisions, as an exact integer.
    #[pyo3(signature = (include_no_invest = true))]
    fn count_combinations(&self, include_no_invest: bool) -> num_bigint::BigUint {
        count_investment_combinations(&self.inner, include_no_invest)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(nodes={}, demands={}, potential={})",
            self.inner.nodes().len(),
            self.inner.demands().len(),
            self.inner.potential_nodes().len()
        )
    }
}

/// Parse TOML without validating.
#[pyfunction]
fn parse(text: &str) -> PyResult<PyInstance> {
    parse_instance(text)
        .map(|inner| PyInstance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn capital_recovery_factor(discount_rate: f64, lifetime: u32) -> PyResult<f64> {
    crf(discount_rate, lifetime).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (demand, linear = false))]
fn track_demand(demand: f64, linear: bool) -> PyResult<f64> {
    let f = if linear {
        TrackFn::Linear
    } else {
        TrackFn::step_default()
    };
    track(demand, &f).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn tcs_config(tcs: &str, seed: u64) -> PyResult<TcsSolveConfig> {
    let mode = match tcs {
        "exact" => TcsMode::Exact,
        "heuristic" => TcsMode::Heuristic,
        other => return Err(PyValueError::new_err(format!("unknown tcs mode `{other}`"))),
    };
    Ok(TcsSolveConfig {
        mode,
        rng_seed: seed,
        ..Default::default()
    })
}

/// Daily car-hour cost of the best routing with no investment.
#[pyfunction]
#[pyo3(signature = (instance, tcs = "exact", seed = 0))]
fn evaluate_z(py: Python<'_>, instance: &PyInstance, tcs: &str, seed: u64) -> PyResult<f64> {
    let config = tcs_config(tcs, seed)?;
    let inst = &instance.inner;
    py.detach(|| {
        let inst = prepared(inst).map_err(|e| e.to_string())?;
        lower_z(&Scenario::baseline(&inst), &config).map_err(|e| e.to_string())
    })
    .map_err(PyRuntimeError::new_err)
}

/// Runs the investment search. Returns a dict with the decision, costs,
/// routes and the rendered report.
#[pyfunction]
#[pyo3(signature = (instance, mode = "enumerate", tcs = "exact", seed = 0))]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    mode: &str,
    tcs: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let upper = match mode {
        "enumerate" => UpperMode::Enumerate,
        "anneal" => UpperMode::Anneal,
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    };
    let mut config = UpperSolveConfig {
        mode: upper,
        lower: tcs_config(tcs, seed)?,
        ..Default::default()
    };
    config.anneal.rng_seed = seed;
    let inst = &instance.inner;
    let (inst, outcome) = py
        .detach(|| {
            let inst = prepared(inst).map_err(|e| e.to_string())?.into_owned();
            let out = upper_solve(&inst, &config).map_err(|e| e.to_string())?;
            Ok::<_, String>((inst, out))
        })
        .map_err(PyRuntimeError::new_err)?;
    let plan = &outcome.plan;
    let report = RunReport::new(&inst, &outcome, upper, config.lower.mode, seed);

    let d = PyDict::new(py);
    let decision = PyDict::new(py);
    for (&k, &p) in plan.decision.choices() {
        decision.set_item(inst.id(k), p)?;
    }
    d.set_item("decision", decision)?;
    d.set_item("objective", plan.objective)?;
    d.set_item("annualized_capital", plan.annualized_capital)?;
    d.set_item("invested", plan.invested)?;
    d.set_item("z", plan.tcs.cost.z_total)?;
    d.set_item("accumulation", plan.tcs.cost.accumulation)?;
    d.set_item("reclassification", plan.tcs.cost.reclassification)?;
    let routes = PyDict::new(py);
    for (&(i, j), &r) in plan.tcs.assignment.routes() {
        let via = match r {
            Route::Direct => None,
            Route::Via(k) => Some(inst.id(k).to_string()),
        };
        routes.set_item((inst.id(i), inst.id(j)), via)?;
    }
    d.set_item("routes", routes)?;
    d.set_item("evaluated", outcome.evaluated)?;
    d.set_item("report", report.render())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (node_count = 6, seed = 0, potential_fraction = 0.5, plans_per_node = 2, demand_density = 0.3, capacity_slack = 1.5))]
fn generate(
    node_count: usize,
    seed: u64,
    potential_fraction: f64,
    plans_per_node: usize,
    demand_density: f64,
    capacity_slack: f64,
) -> PyResult<PyInstance> {
    let spec = GeneratorSpec {
        node_count,
        potential_fraction,
        plans_per_node,
        demand_density,
        capacity_slack,
        seed,
    };
    generate_instance(&spec)
        .map(|inner| PyInstance { inner })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyyardloc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(capital_recovery_factor, m)?)?;
    m.add_function(wrap_pyfunction!(track_demand, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_z, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
