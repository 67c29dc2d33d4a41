//! Python bindings. Scalar estimators return `Estimate` objects; report,
//! simulation, coverage and fitting entry points take and return JSON
//! strings in the same shapes the command-line tool uses.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

use vendorest::estimators::{poisson_prediction_interval, subregion_lambda0, subtotal_tau, total_tau, RatioInputs};
use vendorest::harness::{oracle_mle, run_coverage, ExperimentConfig};
use vendorest::hierarchical::{fit as fit_model, summarize, FitConfig, FitData, HierModel};
use vendorest::io::{check_cells, read_partition_map_path, read_records_path};
use vendorest::overdispersed::{od_subregion, od_subtotal, u1, Dispersion};
use vendorest::report::{estimate_report_from_records, Caps, Markets, ReportSettings};
use vendorest::rng::RngStream;
use vendorest::simulator::{GenerativeModel, Scenario};
use vendorest::{weighted, Error};

create_exception!(pyvendorest, EstimationError, PyException, "Estimator undefined for the supplied counts.");
create_exception!(pyvendorest, InitializationError, PyException, "MCMC found no finite starting point.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(m) => PyValueError::new_err(m),
        Error::Estimation(m) => EstimationError::new_err(m),
        Error::Initialization(m) => InitializationError::new_err(m),
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Point estimate with plug-in standard error.
#[pyclass(frozen, name = "Estimate", from_py_object)]
#[derive(Clone)]
pub struct PyEstimate(vendorest::Estimate);

#[pymethods]
impl PyEstimate {
    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }
    #[getter]
    fn se(&self) -> Option<f64> {
        self.0.se
    }
    /// Two standard errors.
    #[getter]
    fn moe(&self) -> Option<f64> {
        self.0.moe
    }
    #[getter]
    fn ci(&self) -> Option<(f64, f64)> {
        self.0.ci
    }
    #[getter]
    fn level(&self) -> f64 {
        self.0.level
    }
    #[getter]
    fn degenerate(&self) -> bool {
        self.0.flags.degenerate
    }
    #[getter]
    fn radicand_clamped(&self) -> bool {
        self.0.flags.radicand_clamped
    }
    #[getter]
    fn dispersion_clamped(&self) -> bool {
        self.0.flags.dispersion_clamped
    }
    fn at_level(&self, level: f64) -> PyResult<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(PyValueError::new_err("level must be in (0, 1)"));
        }
        Ok(PyEstimate(self.0.at_level(level)))
    }
    fn covers(&self, truth: f64) -> Option<bool> {
        self.0.covers(truth)
    }
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(json_err)
    }
    fn __repr__(&self) -> String {
        match self.0.se {
            Some(se) => format!("Estimate(value={:.4}, se={:.4})", self.0.value, se),
            None => format!("Estimate(value={:.4}, se=None, degenerate=True)", self.0.value),
        }
    }
}

fn wrap(r: vendorest::Result<vendorest::Estimate>) -> PyResult<PyEstimate> {
    r.map(PyEstimate).map_err(py_err)
}

/// Citywide total `N1 n0 / n1 + N1`.
#[pyfunction]
#[pyo3(signature = (cap, n0, n1, level = 0.95))]
fn ratio_total(cap: u64, n0: u64, n1: u64, level: f64) -> PyResult<PyEstimate> {
    let inputs = RatioInputs::new(cap, n0, n1).map_err(py_err)?;
    wrap(total_tau(&inputs))?.at_level(level)
}

/// Uncredentialed count in `B` from its uncredentialed respondents and the
/// credentialed respondents of the enclosing area `A`.
#[pyfunction]
#[pyo3(signature = (cap, n0b, n1a, level = 0.95))]
fn subregion(cap: u64, n0b: u64, n1a: u64, level: f64) -> PyResult<PyEstimate> {
    wrap(subregion_lambda0(cap, n0b, n1a))?.at_level(level)
}

/// Uncredentialed plus credentialed total for `B`.
#[pyfunction]
#[pyo3(signature = (cap, n0b, n1b, n1_complement, level = 0.95))]
fn subtotal(cap: u64, n0b: u64, n1b: u64, n1_complement: u64, level: f64) -> PyResult<PyEstimate> {
    wrap(subtotal_tau(cap, n0b, n1b, n1_complement))?.at_level(level)
}

/// Subregion estimate with market-clustering standard error.
#[pyfunction]
fn od_subregion_estimate(cap: u64, n0b: u64, n1a: u64, u0: f64, u1: f64) -> PyResult<PyEstimate> {
    wrap(od_subregion(cap, n0b, n1a, Dispersion::new(u0, u1)))
}

/// Subtotal with market-clustering standard error.
#[pyfunction]
fn od_subtotal_estimate(cap: u64, n0b: u64, n1b: u64, n1_complement: u64, u0: f64, u1: f64) -> PyResult<PyEstimate> {
    wrap(od_subtotal(cap, n0b, n1b, n1_complement, Dispersion::new(u0, u1)))
}

/// Credentialed dispersion `(N1 - M1) / (M1 + 1)`.
#[pyfunction]
fn credentialed_dispersion(cap: u64, markets: f64) -> PyResult<f64> {
    u1(cap, markets).map_err(py_err)
}

#[pyfunction]
fn bias_factor(n0w: f64, n1w: f64, n0: u64, n1: u64) -> PyResult<f64> {
    weighted::bias_factor(n0w, n1w, n0, n1).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rate, level = 0.95))]
fn prediction_interval(rate: f64, level: f64) -> PyResult<(u64, u64)> {
    poisson_prediction_interval(rate, level).map_err(py_err)
}

/// Full report from a records file and a partition map. `fmt` is one of
/// "json", "csv" or "md".
#[pyfunction]
#[pyo3(signature = (records, partition_map, fmt = "json", food_cap = 5100, merchandise_cap = 853,
                    veteran_add_on = 1000, level = 0.95, vendors_per_market = None))]
#[allow(clippy::too_many_arguments)]
fn estimate_report(
    records: &str,
    partition_map: &str,
    fmt: &str,
    food_cap: u64,
    merchandise_cap: u64,
    veteran_add_on: u64,
    level: f64,
    vendors_per_market: Option<f64>,
) -> PyResult<String> {
    let layout = read_partition_map_path(partition_map).map_err(py_err)?;
    let recs = read_records_path(records).map_err(py_err)?;
    check_cells(&recs, &layout.partition).map_err(py_err)?;
    let settings = ReportSettings {
        caps: Caps {
            food: food_cap,
            merchandise: merchandise_cap,
        },
        veteran_add_on,
        level,
    };
    let markets = vendors_per_market.map(Markets::VendorsPerMarket);
    let report = estimate_report_from_records(&recs, &layout, &settings, markets.as_ref()).map_err(py_err)?;
    match fmt {
        "json" => report.to_json().map_err(py_err),
        "csv" => report.to_csv().map_err(py_err),
        "md" => Ok(report.to_markdown()),
        other => Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    }
}

fn parse_model(model: Option<&str>, scenario: &Scenario) -> PyResult<GenerativeModel> {
    match model {
        None => Ok(scenario.default_model()),
        Some("1") => Ok(GenerativeModel::Model1),
        Some("2") => Ok(GenerativeModel::Model2),
        Some("3") => Ok(GenerativeModel::Model3),
        Some(m) => Err(PyValueError::new_err(format!("unknown model {m:?}"))),
    }
}

/// One replicate of `(n0, n1)` per slot, unknown slot last.
#[pyfunction]
#[pyo3(signature = (scenario_json, replicate = 0, model = None))]
fn simulate(scenario_json: &str, replicate: u64, model: Option<&str>) -> PyResult<(Vec<u64>, Vec<u64>)> {
    let scenario: Scenario = serde_json::from_str(scenario_json).map_err(json_err)?;
    let model = parse_model(model, &scenario)?;
    let c = scenario
        .simulate(model, &RngStream::new(scenario.seed), replicate)
        .map_err(py_err)?;
    Ok((c.n0, c.n1))
}

/// Monte Carlo coverage experiment; returns the report as JSON.
#[pyfunction]
fn coverage(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let config: ExperimentConfig = serde_json::from_str(config_json).map_err(json_err)?;
    let report = py.detach(|| run_coverage(&config)).map_err(py_err)?;
    serde_json::to_string(&report).map_err(json_err)
}

/// Independent maximum-likelihood solution `(lambda0, p, q)`.
#[pyfunction]
fn mle(n0: Vec<u64>, n1: Vec<u64>, n1_total: u64) -> PyResult<(Vec<f64>, f64, Vec<f64>)> {
    let s = oracle_mle(&n0, &n1, n1_total).map_err(py_err)?;
    Ok((s.lambda0, s.p, s.q))
}

/// Hierarchical fit; returns `(mean, lower, upper)` of the population total.
#[pyfunction]
#[pyo3(signature = (data_json, model = None, chains = 4, warmup = 2000, iters = 2000, seed = 1, level = 0.95))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    data_json: &str,
    model: Option<&str>,
    chains: usize,
    warmup: usize,
    iters: usize,
    seed: u64,
    level: f64,
) -> PyResult<(f64, f64, f64)> {
    let data: FitData = serde_json::from_str(data_json).map_err(json_err)?;
    let model = match model {
        None if data.rho.is_some() => HierModel::Model5,
        None | Some("4") => HierModel::Model4,
        Some("5") => HierModel::Model5,
        Some(m) => return Err(PyValueError::new_err(format!("unknown model {m:?}"))),
    };
    let config = FitConfig {
        chains,
        warmup,
        iters,
        seed,
        ..FitConfig::default()
    };
    let draws = py.detach(|| fit_model(model, &data, &config)).map_err(py_err)?;
    let s = summarize(&draws, level).map_err(py_err)?;
    Ok((s.mean, s.lower, s.upper))
}

#[pymodule]
pub fn pyvendorest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add("EstimationError", m.py().get_type::<EstimationError>())?;
    m.add("InitializationError", m.py().get_type::<InitializationError>())?;
    m.add_function(wrap_pyfunction!(ratio_total, m)?)?;
    m.add_function(wrap_pyfunction!(subregion, m)?)?;
    m.add_function(wrap_pyfunction!(subtotal, m)?)?;
    m.add_function(wrap_pyfunction!(od_subregion_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(od_subtotal_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(credentialed_dispersion, m)?)?;
    m.add_function(wrap_pyfunction!(bias_factor, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_interval, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(mle, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
