//! Python bindings. Rich results (scores, exchange records, reports) cross
//! the boundary as plain dicts built from their JSON form.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;
use survey_core::engine::{Engine, PolicyKind};
use survey_core::lsde::LsdeScorer;
use survey_core::policy::{compute_priors, read_ev_table, write_ev_table};
use survey_core::sim::{self, ExperimentDesign, PersonaUsers};
use survey_core::{corpus, states, stats};
use survey_core::{ActionType, ConversationSession, EngagementState, EpsilonSchedule, Error, ExchangePair, SessionConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::SessionClosed { .. } | Error::Llm(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn scorer() -> &'static LsdeScorer {
    static SCORER: std::sync::OnceLock<LsdeScorer> = std::sync::OnceLock::new();
    SCORER.get_or_init(LsdeScorer::default)
}

/// Score one response. Returns the four dimensions, the composite, the
/// specificity flags and the word and pronoun counts.
#[pyfunction]
fn score(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    to_py(py, &scorer().score(text).map_err(py_err)?)
}

/// Engagement state for composite quality `q` and change `dq`.
#[pyfunction]
fn assign_state(q: f64, dq: f64) -> PyResult<String> {
    Ok(states::assign_state(q, dq).map_err(py_err)?.as_str().to_string())
}

/// ε at exchange `t` for a schedule spec such as `"0.3"` or `"decay:0.40:0.05:15"`.
#[pyfunction]
fn epsilon_at(schedule: &str, t: u32) -> PyResult<f64> {
    parse::<EpsilonSchedule>(schedule)?.epsilon_at(t).map_err(py_err)
}

/// Two-sample Student t-test (pooled variance) plus Cohen's d.
#[pyfunction]
fn compare(py: Python<'_>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Py<PyAny>> {
    let t = stats::student_t_test(&a, &b).map_err(py_err)?;
    let d = stats::cohens_d(&a, &b).map_err(py_err)?;
    to_py(py, &serde_json::json!({ "t": t.t, "df": t.df, "p": t.p, "d": d }))
}

/// Summary statistics for a conversation log file.
#[pyfunction]
fn corpus_stats(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let records = corpus::read_log(&path).map_err(py_err)?;
    to_py(py, &corpus::stats(&records))
}

/// Run the simulated experiment with scripted respondents and return the report.
#[pyfunction]
#[pyo3(signature = (design = "quick", seed = 0, workers = 1, prior = None))]
fn simulate(py: Python<'_>, design: &str, seed: u64, workers: usize, prior: Option<&EvTable>) -> PyResult<Py<PyAny>> {
    let mut d = match design {
        "standard" => ExperimentDesign::default(),
        "quick" => ExperimentDesign { reps: 1, ..ExperimentDesign::default() },
        other => return Err(PyValueError::new_err(format!("unknown design {other:?}, expected standard or quick"))),
    };
    d.seed = seed;
    d.workers = workers.max(1);
    let table = prior.map_or_else(survey_core::EvTable::reference_prior, |p| p.inner.clone());
    let engine = Engine::with_prior(table).map_err(py_err)?;
    let result = py.detach(|| sim::run_experiment(&engine, &d, &PersonaUsers)).map_err(py_err)?;
    to_py(py, &result.report)
}

/// Expected-value table over (state, action).
#[pyclass(module = "adaptive_survey", frozen, skip_from_py_object)]
#[derive(Clone)]
struct EvTable {
    inner: survey_core::EvTable,
}

#[pymethods]
impl EvTable {
    /// The table estimated from the historical corpus.
    #[staticmethod]
    fn reference_prior() -> Self {
        EvTable { inner: survey_core::EvTable::reference_prior() }
    }

    /// Estimate priors from `(state, action, q_before, q_after)` tuples.
    #[staticmethod]
    fn from_pairs(pairs: Vec<(String, String, f64, f64)>) -> PyResult<Self> {
        let pairs = pairs
            .iter()
            .map(|(s, a, q0, q1)| ExchangePair::new(parse(s)?, parse(a)?, *q0, *q1).map_err(py_err))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(EvTable { inner: compute_priors(&pairs) })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(EvTable { inner: read_ev_table(&path).map_err(py_err)? })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        write_ev_table(&path, &self.inner).map_err(py_err)
    }

    fn value(&self, state: &str, action: &str) -> PyResult<f64> {
        Ok(self.inner.value(parse(state)?, parse(action)?))
    }

    fn count(&self, state: &str, action: &str) -> PyResult<u32> {
        Ok(self.inner.count(parse(state)?, parse(action)?))
    }

    fn row(&self, state: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.row(parse(state)?).to_vec())
    }

    fn greedy(&self, state: &str) -> PyResult<String> {
        Ok(self.inner.greedy(parse(state)?).as_str().to_string())
    }

    fn records(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.records())
    }

    #[getter]
    fn total_count(&self) -> u32 {
        self.inner.total_count()
    }

    fn __repr__(&self) -> String {
        self.inner.render()
    }
}

/// One live conversation. Not thread-safe on the Python side.
#[pyclass(module = "adaptive_survey")]
struct Session {
    engine: Engine,
    inner: ConversationSession,
}

#[pymethods]
impl Session {
    #[getter]
    fn id(&self) -> &str {
        self.inner.id()
    }

    #[getter]
    fn t(&self) -> u32 {
        self.inner.t()
    }

    #[getter]
    fn status(&self) -> String {
        self.inner.status().to_string()
    }

    #[getter]
    fn question(&self) -> Option<String> {
        self.inner.current_question().map(str::to_string)
    }

    #[getter]
    fn action(&self) -> Option<String> {
        self.inner.current_action().map(|a| a.as_str().to_string())
    }

    /// Submit the respondent's answer and return the exchange record.
    fn step(&mut self, py: Python<'_>, response: &str) -> PyResult<Py<PyAny>> {
        let out = self.engine.step(&mut self.inner, response).map_err(py_err)?;
        to_py(py, &out.record)
    }

    /// Session EV value, or `None` once the session has ended.
    fn ev(&self, state: &str, action: &str) -> PyResult<Option<f64>> {
        let (s, a): (EngagementState, ActionType) = (parse(state)?, parse(action)?);
        Ok(self.inner.table().map(|t| t.value(s, a)))
    }

    /// Close the session and return its transcript.
    fn end(&mut self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let transcript = self.engine.end_session(&mut self.inner);
        to_py(py, &transcript)
    }
}

/// Holds the prior, the scorer and the template question generator.
#[pyclass(module = "adaptive_survey", frozen)]
struct SurveyEngine {
    engine: Engine,
}

#[pymethods]
impl SurveyEngine {
    #[new]
    #[pyo3(signature = (prior = None))]
    fn new(prior: Option<&EvTable>) -> PyResult<Self> {
        let table = prior.map_or_else(survey_core::EvTable::reference_prior, |p| p.inner.clone());
        Ok(SurveyEngine { engine: Engine::with_prior(table).map_err(py_err)? })
    }

    #[getter]
    fn prior(&self) -> EvTable {
        EvTable { inner: self.engine.prior().clone() }
    }

    #[pyo3(signature = (session_id = None, *, epsilon = "0.3", horizon = 15, alpha = 0.3, seed = 0, baseline = false, topic = None))]
    #[allow(clippy::too_many_arguments)]
    fn start(
        &self,
        session_id: Option<String>,
        epsilon: &str,
        horizon: u32,
        alpha: f64,
        seed: u64,
        baseline: bool,
        topic: Option<String>,
    ) -> PyResult<Session> {
        let config = SessionConfig {
            horizon,
            schedule: parse(epsilon)?,
            alpha,
            policy: if baseline { PolicyKind::historical_baseline() } else { PolicyKind::Adaptive },
            seed,
            role: None,
            topic,
        };
        let id = session_id.unwrap_or_else(|| format!("py-{seed}"));
        let inner = self.engine.start_session(id, config).map_err(py_err)?;
        Ok(Session { engine: self.engine.clone(), inner })
    }
}

#[pymodule]
pub fn adaptive_survey(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(assign_state, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_at, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<EvTable>()?;
    m.add_class::<SurveyEngine>()?;
    m.add_class::<Session>()?;
    m.add("STATES", EngagementState::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    m.add("ACTIONS", ActionType::ALL.iter().map(|a| a.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
