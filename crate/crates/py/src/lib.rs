//! Python bindings: scenarios, runs, sweeps and a few codec/channel helpers.

use std::path::PathBuf;

use megsim::channel::{ber_bpsk as ber, snr_db_to_linear, tx_latency as latency, ChannelSpec, LinkKind};
use megsim::codec::fp16::{fp16_roundtrip as roundtrip, DigitalCodecConfig, FP16_MAX};
use megsim::config::{self, ConfigDocument};
use megsim::simkit::{self, ComparisonRow};
use megsim::tensor::{FeatureTensor, TensorRole};
use megsim::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(megsim, ConfigError, PyValueError, "Invalid scenario or override.");
create_exception!(megsim, SimulationError, PyRuntimeError, "A run failed.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { path, message } if path.is_empty() => ConfigError::new_err(message),
        Error::Config { path, message } | Error::Io { path, message } => {
            ConfigError::new_err(format!("{path}: {message}"))
        }
        other => SimulationError::new_err(other.to_string()),
    }
}

/// A versioned scenario document.
#[pyclass(name = "Scenario", module = "megsim", skip_from_py_object)]
#[derive(Clone)]
pub struct PyScenario {
    doc: ConfigDocument,
}

#[pymethods]
impl PyScenario {
    /// The bundled case study.
    #[staticmethod]
    fn case_study() -> Self {
        Self {
            doc: config::case_study(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn from_toml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        let doc = config::parse_config(text, &overrides).map_err(to_py)?;
        Ok(Self { doc })
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let doc = config::load_config(path, &overrides).map_err(to_py)?;
        Ok(Self { doc })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.doc.to_toml().map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.doc.scenario.name.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.doc.scenario.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.doc.scenario.seed = seed;
    }

    #[getter]
    fn snr_db(&self) -> Vec<f64> {
        self.doc.scenario.snr_db.clone()
    }

    #[getter]
    fn schemes(&self) -> Vec<&'static str> {
        self.doc.scenario.schemes.iter().map(|s| s.name()).collect()
    }

    #[pyo3(signature = (parallel = 1))]
    fn run(&self, py: Python<'_>, parallel: usize) -> PyResult<Vec<PyRunRecord>> {
        let s = &self.doc.scenario;
        let records = py.detach(|| simkit::run_scenario_with(s, parallel)).map_err(to_py)?;
        Ok(records.into_iter().map(PyRunRecord).collect())
    }

    #[pyo3(signature = (from_db, to_db, step_db, parallel = 1))]
    fn sweep(
        &self,
        py: Python<'_>,
        from_db: f64,
        to_db: f64,
        step_db: f64,
        parallel: usize,
    ) -> PyResult<Vec<PyRunRecord>> {
        let s = &self.doc.scenario;
        let records = py
            .detach(|| simkit::sweep_snr_with(s, from_db, to_db, step_db, parallel))
            .map_err(to_py)?;
        Ok(records.into_iter().map(PyRunRecord).collect())
    }

    /// Per-scheme means. Returns `(rows, crossover_snr_db)`.
    #[pyo3(signature = (parallel = 1))]
    fn compare<'py>(&self, py: Python<'py>, parallel: usize) -> PyResult<(Vec<Bound<'py, PyDict>>, Option<f64>)> {
        let s = &self.doc.scenario;
        let cmp = py.detach(|| simkit::compare_schemes_with(s, parallel)).map_err(to_py)?;
        let rows = cmp.rows.iter().map(|r| row_dict(py, r)).collect::<PyResult<_>>()?;
        Ok((rows, cmp.crossover_snr_db))
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, seed={})", self.doc.scenario.name, self.doc.scenario.seed)
    }
}

fn row_dict<'py>(py: Python<'py>, r: &ComparisonRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("scheme", r.scheme.name())?;
    d.set_item("snr_db", r.snr_db)?;
    d.set_item("reps", r.reps)?;
    d.set_item("payload_bits_ul", r.payload_bits_ul)?;
    d.set_item("payload_bits_dl", r.payload_bits_dl)?;
    d.set_item("t_tx_s", r.t_tx_s)?;
    d.set_item("t_compute_s", r.t_compute_s)?;
    d.set_item("t_e2e_s", r.t_e2e_s)?;
    d.set_item("mse", r.mse)?;
    d.set_item("psnr_db", r.psnr_db)?;
    Ok(d)
}

/// One simulated generation.
#[pyclass(name = "RunRecord", module = "megsim", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyRunRecord(simkit::RunRecord);

#[pymethods]
impl PyRunRecord {
    #[getter]
    fn scenario(&self) -> String {
        self.0.scenario.clone()
    }
    #[getter]
    fn scheme(&self) -> &'static str {
        self.0.scheme.name()
    }
    #[getter]
    fn mechanism(&self) -> &'static str {
        self.0.mechanism.name()
    }
    #[getter]
    fn snr_db(&self) -> f64 {
        self.0.snr_db
    }
    #[getter]
    fn rep(&self) -> u32 {
        self.0.rep
    }
    #[getter]
    fn payload_bits_ul(&self) -> u64 {
        self.0.payload_bits_ul
    }
    #[getter]
    fn payload_bits_dl(&self) -> u64 {
        self.0.payload_bits_dl
    }
    #[getter]
    fn t_tx_s(&self) -> f64 {
        self.0.t_tx_s
    }
    #[getter]
    fn t_compute_s(&self) -> f64 {
        self.0.t_compute_s
    }
    #[getter]
    fn t_e2e_s(&self) -> f64 {
        self.0.t_e2e_s
    }
    #[getter]
    fn mse(&self) -> f64 {
        self.0.mse
    }
    #[getter]
    fn psnr_db(&self) -> f64 {
        self.0.psnr_db
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    /// The record as a CSV line, without the header.
    fn csv_row(&self) -> String {
        self.0.csv_row()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunRecord(scheme={}, snr_db={}, rep={}, t_e2e_s={}, mse={})",
            self.0.scheme.name(),
            self.0.snr_db,
            self.0.rep,
            self.0.t_e2e_s,
            self.0.mse
        )
    }
}

#[pyfunction]
fn case_study_toml() -> &'static str {
    config::CASE_STUDY_TOML
}

/// CSV with header, as written by the CLI.
#[pyfunction]
fn records_to_csv(records: Vec<PyRunRecord>) -> String {
    let rs: Vec<_> = records.into_iter().map(|r| r.0).collect();
    simkit::records_to_csv(&rs)
}

/// BPSK bit error rate at `snr_db`.
#[pyfunction]
fn ber_bpsk(snr_db: f64) -> PyResult<f64> {
    ber(snr_db_to_linear(snr_db)).map_err(to_py)
}

#[pyfunction]
fn tx_latency(bits: u64, rate_bps: f64) -> PyResult<f64> {
    let ch = ChannelSpec::new(0.0, rate_bps, LinkKind::Ul).map_err(to_py)?;
    Ok(latency(bits, &ch))
}

/// Quantizes to fp16 and back after clamping to `[-clamp_max, clamp_max]`.
#[pyfunction]
#[pyo3(signature = (values, clamp_max = FP16_MAX))]
fn fp16_roundtrip(values: Vec<f64>, clamp_max: f64) -> PyResult<Vec<f64>> {
    let cfg = DigitalCodecConfig::with_clamp(clamp_max).map_err(to_py)?;
    let t = FeatureTensor::from_vec(values, TensorRole::Seed).map_err(to_py)?;
    Ok(roundtrip(&t, &cfg).map_err(to_py)?.into_values())
}

#[pyfunction]
fn snr_grid(from_db: f64, to_db: f64, step_db: f64) -> PyResult<Vec<f64>> {
    simkit::snr_grid(from_db, to_db, step_db).map_err(to_py)
}

#[pymodule(name = "megsim")]
pub fn megsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRunRecord>()?;
    m.add("ConfigError", m.py().get_type::<ConfigError>())?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    m.add("CONFIG_VERSION", config::CONFIG_VERSION)?;
    m.add_function(wrap_pyfunction!(case_study_toml, m)?)?;
    m.add_function(wrap_pyfunction!(records_to_csv, m)?)?;
    m.add_function(wrap_pyfunction!(ber_bpsk, m)?)?;
    m.add_function(wrap_pyfunction!(tx_latency, m)?)?;
    m.add_function(wrap_pyfunction!(fp16_roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(snr_grid, m)?)?;
    Ok(())
}
