//! Python bindings: instances, the DDD solver, the oracle and the scheduler.

use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use tdtsp_core::ddd::Epsilon;
use tdtsp_core::formulations::{self, Schedule};
use tdtsp_core::instance::{self, CostMode, GeneratorConfig, WaitingMode};
use tdtsp_core::mip::Backend;
use tdtsp_core::oracle;
use tdtsp_core::report::{self, RunOptions, Solver};
use tdtsp_core::suites;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn waiting_mode(name: &str) -> PyResult<WaitingMode> {
    match name {
        "free" => Ok(WaitingMode::Free),
        "forbidden" | "forbid" => Ok(WaitingMode::Forbidden),
        "priced" => Ok(WaitingMode::Priced),
        other => Err(PyValueError::new_err(format!("unknown waiting mode {other:?}"))),
    }
}

#[pyclass(frozen, skip_from_py_object, module = "tdtsp")]
#[derive(Clone)]
pub struct Instance {
    inner: instance::Instance,
}

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        instance::parse_instance(text)
            .map(|inner| Instance { inner })
            .map_err(value_error)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_error)?;
        Self::from_json(&text)
    }

    /// The four-city example with constant travel times of 2.
    #[staticmethod]
    fn tiny4() -> Self {
        Instance {
            inner: suites::tiny4(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n, horizon=120, window_width=20, segments=3, waiting="forbidden", random_cost=false))]
    fn generate(
        seed: u64,
        n: usize,
        horizon: i64,
        window_width: i64,
        segments: usize,
        waiting: &str,
        random_cost: bool,
    ) -> PyResult<Self> {
        let cfg = GeneratorConfig {
            n,
            horizon,
            window_width,
            profile_segments: segments,
            waiting: waiting_mode(waiting)?,
            cost: if random_cost { CostMode::Random } else { CostMode::TravelTime },
            ..Default::default()
        };
        instance::generate_instance(seed, &cfg)
            .map(|inner| Instance { inner })
            .map_err(value_error)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn horizon(&self) -> i64 {
        self.inner.horizon()
    }

    #[getter]
    fn windows(&self) -> Vec<(i64, i64)> {
        self.inner.windows().iter().map(|w| (w.earliest, w.latest)).collect()
    }

    /// Copy with every city's waiting set to `free` or `forbidden`.
    fn with_waiting(&self, mode: &str) -> PyResult<Self> {
        Ok(Instance {
            inner: self.inner.with_waiting(waiting_mode(mode)?),
        })
    }

    fn travel_time(&self, i: usize, j: usize, t: i64) -> PyResult<i64> {
        let arc = self
            .inner
            .arc_index(i, j)
            .ok_or_else(|| PyValueError::new_err(format!("no arc ({i},{j})")))?;
        Ok(self.inner.tau_at(arc, t))
    }

    fn travel_cost(&self, i: usize, j: usize, t: i64) -> PyResult<i64> {
        let arc = self
            .inner
            .arc_index(i, j)
            .ok_or_else(|| PyValueError::new_err(format!("no arc ({i},{j})")))?;
        Ok(self.inner.cost_at(arc, t))
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, horizon={})", self.inner.n(), self.inner.horizon())
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "tdtsp")]
#[derive(Clone)]
pub struct Tour {
    cities: Vec<usize>,
    visits: Vec<i64>,
    departures: Vec<i64>,
    cost: i64,
}

impl From<Schedule> for Tour {
    fn from(s: Schedule) -> Self {
        Tour {
            cities: s.cities,
            visits: s.visits,
            departures: s.departures,
            cost: s.cost,
        }
    }
}

#[pymethods]
impl Tour {
    fn __repr__(&self) -> String {
        format!("Tour(cities={:?}, cost={})", self.cities, self.cost)
    }
}

#[pyclass(frozen, get_all, module = "tdtsp")]
pub struct Result {
    instance: String,
    formulation: String,
    status: String,
    lb: Option<i64>,
    ub: Option<i64>,
    gap: Option<f64>,
    iterations: usize,
    nodes: usize,
    arcs: usize,
    paths: usize,
    wall_ms: u64,
    tour: Option<Tour>,
}

#[pymethods]
impl Result {
    fn __repr__(&self) -> String {
        let opt = |v: Option<i64>| v.map_or("None".to_string(), |v| v.to_string());
        format!(
            "Result(formulation={:?}, status={:?}, lb={}, ub={})",
            self.formulation,
            self.status,
            opt(self.lb),
            opt(self.ub)
        )
    }
}

/// Solves with DDD (`path`, `z`, `z-agg`), the full model or the oracle.
#[pyfunction]
#[pyo3(signature = (instance, formulation="z-agg", epsilon="0.01", time_limit=60.0, name="instance"))]
fn solve(
    py: Python<'_>,
    instance: &Instance,
    formulation: &str,
    epsilon: &str,
    time_limit: Option<f64>,
    name: &str,
) -> PyResult<Result> {
    let solver: Solver = formulation.parse().map_err(PyValueError::new_err)?;
    let epsilon: Epsilon = epsilon.parse().map_err(value_error)?;
    let time_limit = match time_limit {
        Some(s) if s < 0.0 || !s.is_finite() => return Err(PyValueError::new_err("bad time limit")),
        s => s.map(Duration::from_secs_f64),
    };
    let opts = RunOptions {
        epsilon,
        time_limit,
        backend: Backend::from_env().map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
    };
    let inst = instance.inner.clone();
    let out = py.detach(move || report::run_solver(name, &inst, solver, &opts));
    if let Some(e) = out.record.error {
        return Err(PyRuntimeError::new_err(e));
    }
    let r = out.record;
    Ok(Result {
        instance: r.instance,
        formulation: r.formulation,
        status: r.status.to_string(),
        lb: r.lb,
        ub: r.ub,
        gap: r.gap,
        iterations: r.iterations,
        nodes: r.nodes,
        arcs: r.arcs,
        paths: r.paths,
        wall_ms: r.wall_ms,
        tour: out.schedule.map(Tour::from),
    })
}

/// Exact optimum by label setting; small instances only.
#[pyfunction]
#[pyo3(signature = (instance, allow_waiting=true))]
fn solve_exact(instance: &Instance, allow_waiting: bool) -> PyResult<Tour> {
    oracle::solve_exact(&instance.inner, allow_waiting)
        .map(|s| s.schedule.into())
        .map_err(value_error)
}

/// Cheapest timing of a fixed tour `[0, ..., 0]`.
#[pyfunction]
fn schedule_tour(instance: &Instance, cities: Vec<usize>) -> PyResult<Tour> {
    formulations::schedule_tour(&instance.inner, &cities)
        .map(Tour::from)
        .map_err(value_error)
}

#[pymodule]
fn tdtsp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Tour>()?;
    m.add_class::<Result>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_tour, m)?)?;
    Ok(())
}
