//! Python bindings. Structured results cross the boundary as JSON strings
//! so the Python side only needs `json.loads`.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use objnav::eval::{self, AgentFactory, EvalConfig};
use objnav::sim::{SimConfig, SimState};
use objnav::{Action, Cell, Episode, Pose, Rotation};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rotation(deg: i64) -> PyResult<Rotation> {
    Rotation::from_degrees(deg).ok_or_else(|| PyValueError::new_err(format!("bad rotation {deg}")))
}

#[pyclass(name = "House", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyHouse {
    inner: objnav::House,
}

#[pymethods]
impl PyHouse {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        objnav::House::from_json_str(text)
            .map(|inner| PyHouse { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn scene_type(&self) -> String {
        self.inner.scene_type().to_string()
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.grid().width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.grid().height()
    }

    fn reachable_cells(&self) -> Vec<(i32, i32)> {
        self.inner
            .grid()
            .reachable_cells()
            .iter()
            .map(|c| (c.col, c.row))
            .collect()
    }

    fn object_count(&self) -> usize {
        self.inner.objects().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "House(id={:?}, scene_type={:?}, {}x{}, objects={})",
            self.inner.id(),
            self.inner.scene_type(),
            self.inner.grid().width(),
            self.inner.grid().height(),
            self.inner.objects().len()
        )
    }
}

/// Generates a house; `spec_json` overrides generation defaults.
#[pyfunction]
#[pyo3(signature = (seed, spec_json=None))]
fn generate_house(seed: u64, spec_json: Option<&str>) -> PyResult<PyHouse> {
    let spec: objnav::GenerationSpec = match spec_json {
        Some(s) => serde_json::from_str(s).map_err(value_err)?,
        None => Default::default(),
    };
    objnav::generate_house(seed, &spec)
        .map(|inner| PyHouse { inner })
        .map_err(value_err)
}

/// Fewest-moves path, cheapest in turns among those, as `(cells, cost)`.
#[pyfunction]
fn plan_path(house: &PyHouse, start: (i32, i32, i64), goal: (i32, i32)) -> PyResult<(Vec<(i32, i32)>, u32)> {
    let pose = Pose::new(Cell::new(start.0, start.1), rotation(start.2)?);
    let path = objnav::plan_shortest_path(house.inner.grid(), pose, Cell::new(goal.0, goal.1)).map_err(value_err)?;
    Ok((path.cells.iter().map(|c| (c.col, c.row)).collect(), path.cost))
}

/// Episodes as a JSON array.
#[pyfunction]
fn sample_episodes(house: &PyHouse, n: usize, seed: u64) -> PyResult<String> {
    let report = objnav::sample_episodes(&house.inner, n, seed, &Default::default()).map_err(value_err)?;
    serde_json::to_string(&report.episodes).map_err(value_err)
}

fn parse_episodes(json: &str) -> PyResult<Vec<Episode>> {
    serde_json::from_str(json).map_err(value_err)
}

/// Trace steps for each episode, as a JSON array.
#[pyfunction]
#[pyo3(signature = (house, episodes_json, gold_label=false, diff_eq=false))]
fn build_traces(house: &PyHouse, episodes_json: &str, gold_label: bool, diff_eq: bool) -> PyResult<String> {
    let opts = objnav::trace::TraceOptions { gold_label, diff_eq };
    let mut steps = Vec::new();
    for ep in parse_episodes(episodes_json)? {
        steps.extend(objnav::trace::compile_episode(&house.inner, &ep, &opts).map_err(value_err)?);
    }
    serde_json::to_string(&steps).map_err(value_err)
}

#[pyfunction]
fn rouge_l(candidate: &str, reference: &str) -> f64 {
    objnav::desc::rouge_l_f(candidate, reference)
}

/// Evaluates a built-in agent ("random", "oracle" or "greedy"); report JSON.
#[pyfunction]
#[pyo3(signature = (agent, houses, episodes_json, seed=0))]
fn evaluate(agent: &str, houses: Vec<PyHouse>, episodes_json: &str, seed: u64) -> PyResult<String> {
    let factory: Box<dyn AgentFactory> = match agent {
        "random" => Box::new(eval::RandomFactory { seed }),
        "oracle" => Box::new(eval::OracleFactory),
        "greedy" => Box::new(eval::GreedyFactory),
        other => return Err(PyValueError::new_err(format!("unknown agent {other:?}"))),
    };
    let map: HashMap<String, objnav::House> = houses
        .into_iter()
        .map(|h| (h.inner.id().to_string(), h.inner))
        .collect();
    let episodes = parse_episodes(episodes_json)?;
    let report = eval::evaluate(factory.as_ref(), &map, &episodes, &EvalConfig::default());
    serde_json::to_string(&report).map_err(value_err)
}

#[pyclass(name = "Simulator")]
pub struct PySimulator {
    house: objnav::House,
    state: SimState,
    config: SimConfig,
}

#[pymethods]
impl PySimulator {
    #[new]
    fn new(house: &PyHouse, col: i32, row: i32, rotation_deg: i64) -> PyResult<Self> {
        let start = Pose::new(Cell::new(col, row), rotation(rotation_deg)?);
        let sim = objnav::Simulator::new(&house.inner, start, SimConfig::default()).map_err(value_err)?;
        let state = *sim.state();
        Ok(PySimulator {
            house: house.inner.clone(),
            state,
            config: SimConfig::default(),
        })
    }

    /// Applies an action name; returns the observation as JSON.
    fn step(&mut self, action: &str) -> PyResult<String> {
        let action: Action = action.parse().map_err(value_err)?;
        let mut sim = objnav::Simulator::resume(&self.house, self.state, self.config).map_err(value_err)?;
        let obs = sim.step(action).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        self.state = *sim.state();
        serde_json::to_string(&obs).map_err(value_err)
    }

    fn observe(&self) -> PyResult<String> {
        let obs = objnav::sim::observe(&self.house, self.state.pose, &self.config);
        serde_json::to_string(&obs).map_err(value_err)
    }

    #[getter]
    fn pose(&self) -> (i32, i32, u16) {
        let p = self.state.pose;
        (p.cell.col, p.cell.row, p.rotation.degrees())
    }

    #[getter]
    fn steps_taken(&self) -> u32 {
        self.state.steps_taken
    }

    #[getter]
    fn terminated(&self) -> bool {
        self.state.terminated()
    }

    fn is_success(&self, object_id: &str) -> PyResult<bool> {
        let obj = self
            .house
            .object(object_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown object {object_id:?}")))?;
        let sim = objnav::Simulator::resume(&self.house, self.state, self.config).map_err(value_err)?;
        sim.is_success(obj).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pymodule]
fn objnav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHouse>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(generate_house, m)?)?;
    m.add_function(wrap_pyfunction!(plan_path, m)?)?;
    m.add_function(wrap_pyfunction!(sample_episodes, m)?)?;
    m.add_function(wrap_pyfunction!(build_traces, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
