use ::phantom_forge as core;
use core::verify::{
    self, manipulation_search, phantom_representable, ScenarioConfig, SearchConfig,
};
use core::{Allocation, BuiltinSystem, Error, MechanismSpec, PhantomSystem, Tolerance};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::UnknownMechanism(_) | Error::UnknownScenario(_) | Error::UnknownSystem(_) => {
            PyKeyError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Serializes `value` and hands it to `json.loads`.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn tolerance(eps_gain: Option<f64>) -> PyResult<Tolerance> {
    let tol = Tolerance::default();
    match eps_gain {
        Some(eps) => tol.with_eps_gain(eps).map_err(to_py),
        None => Ok(tol),
    }
}

fn allocation(values: Vec<f64>) -> PyResult<Allocation> {
    Allocation::new(&values, &Tolerance::default()).map_err(to_py)
}

/// A list of votes on the simplex, all of the same dimension.
#[pyclass(name = "Profile", module = "phantom_forge", frozen)]
struct PyProfile {
    inner: core::Profile,
}

#[pymethods]
impl PyProfile {
    #[new]
    fn new(votes: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = votes.first().map_or(0, Vec::len);
        let inner = core::Profile::from_rows(m, &votes, &Tolerance::default()).map_err(to_py)?;
        Ok(PyProfile { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = core::Profile::from_json(text).map_err(to_py)?;
        Ok(PyProfile { inner })
    }

    #[staticmethod]
    fn lower_bound(n: usize, m: usize) -> PyResult<Self> {
        let inner = core::lower_bound_profile(n, m).map_err(to_py)?;
        Ok(PyProfile { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn votes(&self) -> Vec<Vec<f64>> {
        self.inner
            .votes()
            .iter()
            .map(|v| v.values().to_vec())
            .collect()
    }

    fn mean(&self) -> Vec<f64> {
        core::mean(&self.inner).into_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Profile({})", self.inner.to_json())
    }
}

/// A registry mechanism or one built from an inline JSON specification.
#[pyclass(name = "Mechanism", module = "phantom_forge", frozen)]
struct PyMechanism {
    inner: MechanismSpec,
}

#[pymethods]
impl PyMechanism {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let inner = core::resolve_mechanism(name).map_err(to_py)?;
        Ok(PyMechanism { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn is_phantom_based(&self) -> bool {
        self.inner.is_phantom_based()
    }

    fn has_flag(&self, flag: &str) -> bool {
        self.inner.has_flag(flag)
    }

    fn supports(&self, n: usize, m: usize) -> bool {
        self.inner.supports(n, m)
    }

    fn aggregate(&self, profile: &PyProfile) -> PyResult<Vec<f64>> {
        let out = self
            .inner
            .apply(&profile.inner, &Tolerance::default())
            .map_err(to_py)?;
        Ok(out.into_vec())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!("Mechanism('{}')", self.inner.id)
    }
}

#[pyfunction]
fn list_mechanisms() -> Vec<String> {
    core::registry_list().into_iter().map(|s| s.id).collect()
}

#[pyfunction]
fn aggregate(mechanism: &str, profile: &PyProfile) -> PyResult<Vec<f64>> {
    PyMechanism::new(mechanism)?.aggregate(profile)
}

fn system(name: &str, n: usize) -> PyResult<PhantomSystem> {
    let kind: BuiltinSystem = name.parse().map_err(to_py)?;
    PhantomSystem::builtin(kind, n).map_err(to_py)
}

/// Phantom positions of a built-in system at time `t`.
#[pyfunction]
fn phantom_positions(name: &str, n: usize, t: f64) -> PyResult<Vec<f64>> {
    Ok(system(name, n)?.positions(t))
}

#[pyfunction]
fn normalization_time(name: &str, profile: &PyProfile) -> PyResult<f64> {
    let sys = system(name, profile.inner.n())?;
    core::normalization_time(&sys, &profile.inner, &Tolerance::default()).map_err(to_py)
}

#[pyfunction]
fn is_slow(name: &str, n: usize) -> PyResult<bool> {
    Ok(core::is_slow(&system(name, n)?))
}

#[pyfunction]
fn slow_threshold(name: &str, n: usize, m: usize) -> PyResult<f64> {
    core::slow_threshold(&system(name, n)?, m).map_err(to_py)
}

/// Best misreport found for `voter`; returns the result as a dict.
#[pyfunction]
#[pyo3(signature = (mechanism, profile, voter, seed = verify::DEFAULT_SEED, eps_gain = None))]
fn check_truthfulness<'py>(
    py: Python<'py>,
    mechanism: &PyMechanism,
    profile: &PyProfile,
    voter: usize,
    seed: u64,
    eps_gain: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let tol = tolerance(eps_gain)?;
    let cfg = SearchConfig::for_dimension(profile.inner.m()).with_seed(seed);
    let r =
        manipulation_search(&mechanism.inner, &profile.inner, voter, &cfg, &tol).map_err(to_py)?;
    let dict = to_object(py, &r)?;
    dict.set_item("violation", r.is_violation(&tol))?;
    Ok(dict)
}

#[pyfunction]
fn fairness<'py>(
    py: Python<'py>,
    mechanism: &PyMechanism,
    profile: &PyProfile,
) -> PyResult<Bound<'py, PyAny>> {
    let r =
        verify::fairness(&mechanism.inner, &profile.inner, &Tolerance::default()).map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
fn representable<'py>(
    py: Python<'py>,
    profile: &PyProfile,
    allocation_values: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let a = allocation(allocation_values)?;
    let r = phantom_representable(&profile.inner, &a).map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
fn family_consistent<'py>(
    py: Python<'py>,
    first: &PyProfile,
    first_output: Vec<f64>,
    second: &PyProfile,
    second_output: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let (a1, a2) = (allocation(first_output)?, allocation(second_output)?);
    let r =
        verify::phantom_family_consistent(&first.inner, &a1, &second.inner, &a2).map_err(to_py)?;
    to_object(py, &r)
}

#[pyfunction]
fn scenario_names() -> Vec<&'static str> {
    verify::SCENARIO_NAMES.to_vec()
}

#[pyfunction]
#[pyo3(signature = (name, seed = verify::DEFAULT_SEED, fuzz_profiles = 20))]
fn run_scenario<'py>(
    py: Python<'py>,
    name: &str,
    seed: u64,
    fuzz_profiles: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = ScenarioConfig::new(seed, Tolerance::default());
    cfg.fuzz_profiles = fuzz_profiles;
    let outcome = py
        .detach(|| verify::run_scenario(name, &cfg))
        .map_err(to_py)?;
    to_object(py, &outcome)
}

#[pymodule]
fn phantom_forge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProfile>()?;
    m.add_class::<PyMechanism>()?;
    m.add_function(wrap_pyfunction!(list_mechanisms, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(phantom_positions, m)?)?;
    m.add_function(wrap_pyfunction!(normalization_time, m)?)?;
    m.add_function(wrap_pyfunction!(is_slow, m)?)?;
    m.add_function(wrap_pyfunction!(slow_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(check_truthfulness, m)?)?;
    m.add_function(wrap_pyfunction!(fairness, m)?)?;
    m.add_function(wrap_pyfunction!(representable, m)?)?;
    m.add_function(wrap_pyfunction!(family_consistent, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add("DEFAULT_SEED", verify::DEFAULT_SEED)?;
    Ok(())
}
