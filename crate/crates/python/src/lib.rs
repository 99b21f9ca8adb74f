//! Python bindings.
//!
//! Matrices cross the boundary as lists of row lists (`numpy.asarray` turns
//! them into arrays; any nested sequence of floats is accepted as input).
//! Configurations are passed as JSON strings with the same field names as
//! the config files of the command-line tool.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use ngmca::algorithms::{self, AlgorithmConfig, AlgorithmId};
use ngmca::bench::{self, BenchmarkConfig};
use ngmca::datagen::{self, InstanceSpec, NoiseLevel};
use ngmca::{container, linops, metrics, Error, RealMatrix};

create_exception!(ngmca_py, NgmcaError, PyException);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidConfig(_) | Error::ShapeMismatch(_) | Error::UnknownAxis(_) | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => NgmcaError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<f64>>, what: &str) -> PyResult<RealMatrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(PyValueError::new_err(format!("{what} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{what} is not rectangular")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let m = RealMatrix::from_row_slice(flat.len() / ncols, ncols, &flat);
    linops::ensure_finite(&m, "input").map_err(py_err)?;
    Ok(m)
}

fn from_matrix(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Observed data `y = a_ref @ s_ref + z` and its ground truth.
#[pyclass(name = "ProblemInstance", frozen)]
struct PyProblemInstance {
    inner: datagen::ProblemInstance,
}

#[pymethods]
impl PyProblemInstance {
    #[getter]
    fn y(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.y)
    }

    #[getter]
    fn a_ref(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.a_ref)
    }

    #[getter]
    fn s_ref(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.s_ref)
    }

    #[getter]
    fn z(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.z)
    }

    /// The generating spec as JSON.
    #[getter]
    fn spec(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.spec).map_err(|e| py_err(e.into()))
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        (self.inner.y.nrows(), self.inner.y.ncols(), self.inner.a_ref.ncols())
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        container::save_instance(&path, &self.inner).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: container::load_instance(&path).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        let (m, n, r) = self.shape();
        format!("ProblemInstance(m={m}, n={n}, r={r}, snr_db={})", self.inner.spec.snr_db)
    }
}

/// Result of one factorization.
#[pyclass(name = "FitReport", frozen)]
struct PyFitReport {
    inner: algorithms::FitReport,
}

#[pymethods]
impl PyFitReport {
    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.pair.a)
    }

    #[getter]
    fn s(&self) -> Vec<Vec<f64>> {
        from_matrix(&self.inner.pair.s)
    }

    #[getter]
    fn iterations_run(&self) -> usize {
        self.inner.iterations_run
    }

    #[getter]
    fn objective_trace(&self) -> Option<Vec<f64>> {
        self.inner.objective_trace.clone()
    }

    #[getter]
    fn final_lambda(&self) -> Option<Vec<f64>> {
        self.inner.final_lambda.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "FitReport(rank={}, iterations_run={})",
            self.inner.pair.rank(),
            self.inner.iterations_run
        )
    }
}

#[pyclass(name = "PairingResult", frozen, get_all)]
struct PyPairingResult {
    /// `permutation[i]` is the reference source paired with estimate `i`.
    permutation: Vec<usize>,
    per_source_sdr_db: Vec<f64>,
    mean_sdr_db: f64,
}

#[pymethods]
impl PyPairingResult {
    fn __repr__(&self) -> String {
        format!("PairingResult(mean_sdr_db={:.3})", self.mean_sdr_db)
    }
}

/// Draws a synthetic instance. `snr_db=None` gives noiseless data.
#[pyfunction]
#[pyo3(signature = (m, n, r, p_s=0.1, snr_db=None, seed=0, p_a=1.0, alpha_a=2.0, alpha_s=1.0))]
#[allow(clippy::too_many_arguments)]
fn generate(
    m: usize,
    n: usize,
    r: usize,
    p_s: f64,
    snr_db: Option<f64>,
    seed: u64,
    p_a: f64,
    alpha_a: f64,
    alpha_s: f64,
) -> PyResult<PyProblemInstance> {
    let spec = InstanceSpec {
        m,
        n,
        r,
        p_a,
        p_s,
        alpha_a,
        alpha_s,
        snr_db: snr_db.map_or(NoiseLevel::Noiseless, NoiseLevel::SnrDb),
        seed,
        ..Default::default()
    };
    generate_from_json(&serde_json::to_string(&spec).map_err(|e| py_err(e.into()))?)
}

/// Draws an instance from a JSON instance spec (NMR sources included).
#[pyfunction]
fn generate_from_json(spec: &str) -> PyResult<PyProblemInstance> {
    let spec: InstanceSpec = serde_json::from_str(spec).map_err(|e| py_err(e.into()))?;
    Ok(PyProblemInstance {
        inner: datagen::gen_instance(&spec).map_err(py_err)?,
    })
}

/// Factorizes `y` with rank `rank`. `config` is an optional JSON algorithm
/// config; `a_ref` is needed by the oracle only.
#[pyfunction]
#[pyo3(signature = (algorithm, y, rank, a_ref=None, config=None, seed=None))]
fn run(
    py: Python<'_>,
    algorithm: &str,
    y: Vec<Vec<f64>>,
    rank: usize,
    a_ref: Option<Vec<Vec<f64>>>,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<PyFitReport> {
    let id: AlgorithmId = algorithm.parse().map_err(py_err)?;
    let mut cfg = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| py_err(e.into()))?,
        None => AlgorithmConfig::default(),
    };
    cfg.algorithm_id = id;
    cfg.rank = rank;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let y = to_matrix(y, "y")?;
    let a_ref = a_ref.map(|a| to_matrix(a, "a_ref")).transpose()?;
    let report = py
        .detach(|| algorithms::run(&y, &cfg, a_ref.as_ref()))
        .map_err(py_err)?;
    Ok(PyFitReport { inner: report })
}

/// Pairs estimated sources with reference sources for the best mean SDR.
#[pyfunction]
fn pair_sources(s_est: Vec<Vec<f64>>, s_ref: Vec<Vec<f64>>, noise_rows: Vec<Vec<f64>>) -> PyResult<PyPairingResult> {
    let p = metrics::pair_sources(
        &to_matrix(s_est, "s_est")?,
        &to_matrix(s_ref, "s_ref")?,
        &to_matrix(noise_rows, "noise_rows")?,
    )
    .map_err(py_err)?;
    Ok(PyPairingResult {
        permutation: p.permutation,
        per_source_sdr_db: p.per_source_sdr_db,
        mean_sdr_db: p.mean_sdr_db,
    })
}

#[pyfunction]
fn hoyer_sparseness(x: Vec<f64>) -> PyResult<f64> {
    metrics::hoyer_sparseness(&x).map_err(py_err)
}

#[pyfunction]
fn condition_number(a: Vec<Vec<f64>>) -> PyResult<f64> {
    metrics::condition_number(&to_matrix(a, "a")?).map_err(py_err)
}

#[pyfunction]
fn measure_snr(y: Vec<Vec<f64>>, x_clean: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(metrics::measure_snr(&to_matrix(y, "y")?, &to_matrix(x_clean, "x_clean")?))
}

/// Runs a campaign from a JSON benchmark config and returns the records
/// and summary as CSV text. Nothing is written to disk.
#[pyfunction]
#[pyo3(signature = (config, workers=None))]
fn run_campaign(py: Python<'_>, config: &str, workers: Option<usize>) -> PyResult<(String, String)> {
    let cfg: BenchmarkConfig = serde_json::from_str(config).map_err(|e| py_err(e.into()))?;
    let records = py.detach(|| bench::run_campaign_with(&cfg, workers)).map_err(py_err)?;
    let summary = bench::summarize(&records);
    let text = |bytes: Vec<u8>| String::from_utf8(bytes).expect("csv output is UTF-8");
    Ok((
        text(bench::records_to_csv(&records).map_err(py_err)?),
        text(bench::summary_to_csv(&summary).map_err(py_err)?),
    ))
}

#[pymodule]
fn ngmca_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NgmcaError", m.py().get_type::<NgmcaError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyProblemInstance>()?;
    m.add_class::<PyFitReport>()?;
    m.add_class::<PyPairingResult>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_from_json, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(pair_sources, m)?)?;
    m.add_function(wrap_pyfunction!(hoyer_sparseness, m)?)?;
    m.add_function(wrap_pyfunction!(condition_number, m)?)?;
    m.add_function(wrap_pyfunction!(measure_snr, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}
