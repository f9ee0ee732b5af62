//! Python bindings: `import censgof`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use censored_gof::asymptotics::{covariance_estimate, j_asymptotic_test, laguerre_grid, limiting_eigenvalues};
use censored_gof::bootstrap::{bootstrap_test, BootstrapConfig};
use censored_gof::power_study::{emit_table, run_power_study, StudyConfig, TableFormat};
use censored_gof::rng::stream;
use censored_gof::statistics::{self as st, CriticalValues, Hypothesis, MMethod, Sidedness};
use censored_gof::{Characterization, DistSpec, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Input(_) | Error::Parse { .. } | Error::Schema { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn hypothesis(name: &str, mu: f64) -> PyResult<Hypothesis> {
    match name {
        "simple" => Ok(Hypothesis::Simple { mu }),
        "composite" => Ok(Hypothesis::Composite),
        other => Err(PyValueError::new_err(format!("hypothesis must be 'simple' or 'composite', got {other:?}"))),
    }
}

/// Right-censored sample: observed times and event indicators (true = failure).
#[pyclass(name = "CensoredSample", frozen)]
struct PySample(censored_gof::CensoredSample);

#[pymethods]
impl PySample {
    #[new]
    fn new(times: Vec<f64>, events: Vec<bool>) -> PyResult<Self> {
        censored_gof::CensoredSample::new(times, events).map(PySample).map_err(err)
    }

    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        censored_gof::CensoredSample::from_csv_path(path).map(PySample).map_err(err)
    }

    /// Draw `n` observations from `alternative` (e.g. "weibull:1.4") under
    /// Koziol–Green censoring at expected rate `rate`.
    #[staticmethod]
    #[pyo3(signature = (alternative, rate, n, seed=1))]
    fn generate(alternative: &str, rate: f64, n: usize, seed: u64) -> PyResult<Self> {
        let alt: DistSpec = parse(alternative)?;
        censored_gof::generate_censored_sample(&alt, rate, n, &mut stream(seed, &[])).map(PySample).map_err(err)
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    #[getter]
    fn events(&self) -> Vec<bool> {
        self.0.events().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let failures = self.0.events().iter().filter(|&&d| d).count();
        format!("CensoredSample(n={}, failures={failures})", self.0.len())
    }
}

/// Test statistic, built from its canonical string such as "J:PR:a=1",
/// "M:D:a=2:closed", "cvm", "chi2:r=3", "qns" or "delta".
#[pyclass(name = "StatisticSpec", frozen)]
struct PySpec(st::StatisticSpec);

#[pymethods]
impl PySpec {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        parse(spec).map(PySpec)
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label()
    }

    #[getter]
    fn latex_label(&self) -> String {
        self.0.latex_label()
    }

    /// "upper", "absolute" or "two-sided".
    #[getter]
    fn sidedness(&self) -> &'static str {
        match self.0.sidedness() {
            Sidedness::Upper => "upper",
            Sidedness::Absolute => "absolute",
            Sidedness::TwoSided => "two-sided",
        }
    }

    #[pyo3(signature = (sample, hypothesis="simple", mu=1.0))]
    fn evaluate(&self, sample: &PySample, hypothesis: &str, mu: f64) -> PyResult<f64> {
        self.0.evaluate(&sample.0, self::hypothesis(hypothesis, mu)?).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("StatisticSpec({:?})", self.0.to_string())
    }
}

/// Result of a calibrated test.
#[pyclass(name = "TestOutcome", frozen)]
struct PyOutcome(st::TestOutcome);

#[pymethods]
impl PyOutcome {
    #[getter]
    fn statistic(&self) -> f64 {
        self.0.statistic
    }

    #[getter]
    fn p_value(&self) -> Option<f64> {
        self.0.p_value
    }

    #[getter]
    fn reject(&self) -> bool {
        self.0.reject
    }

    /// `(lower, upper)`; `lower` is None unless the test is two-sided.
    #[getter]
    fn critical_values(&self) -> (Option<f64>, f64) {
        match self.0.critical_values {
            CriticalValues::Upper { upper } | CriticalValues::Absolute { upper } => (None, upper),
            CriticalValues::Band { lower, upper } => (Some(lower), upper),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        self.0.to_string()
    }
}

#[pyfunction]
fn j_statistic(sample: &PySample, characterization: &str, a: f64) -> PyResult<f64> {
    st::j_statistic(&sample.0, parse(characterization)?, a).map_err(err)
}

/// `method` is "quadrature" (with `nodes`) or "closed".
#[pyfunction]
#[pyo3(signature = (sample, characterization, a, method="quadrature", nodes=64))]
fn m_statistic(sample: &PySample, characterization: &str, a: f64, method: &str, nodes: usize) -> PyResult<f64> {
    let method = match method {
        "quadrature" => MMethod::Quadrature(nodes),
        "closed" => MMethod::ClosedForm,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    st::m_statistic(&sample.0, parse(characterization)?, a, method).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, mu=1.0))]
fn cvm_koziol(sample: &PySample, mu: f64) -> PyResult<f64> {
    st::cvm_koziol(&sample.0, mu).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, r, hypothesis="simple", mu=1.0))]
fn akritas_chi2(sample: &PySample, r: usize, hypothesis: &str, mu: f64) -> PyResult<f64> {
    st::akritas_chi2(&sample.0, self::hypothesis(hypothesis, mu)?, r).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, mu=1.0))]
fn qn_statistic(sample: &PySample, mu: f64) -> PyResult<f64> {
    st::qn_statistic(&sample.0, mu).map_err(err)
}

#[pyfunction]
fn delta_statistic(sample: &PySample) -> PyResult<f64> {
    st::delta_statistic(&sample.0).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, spec, b=500, alpha=0.05, hypothesis="simple", mu=1.0, seed=1))]
#[allow(clippy::too_many_arguments)]
fn bootstrap(py: Python<'_>, sample: &PySample, spec: &PySpec, b: usize, alpha: f64, hypothesis: &str, mu: f64, seed: u64) -> PyResult<PyOutcome> {
    let cfg = BootstrapConfig::new(b, alpha, self::hypothesis(hypothesis, mu)?, seed).map_err(err)?;
    py.detach(|| bootstrap_test(&sample.0, &spec.0, &cfg)).map(PyOutcome).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, characterization, a=1.0, alpha=0.05, hypothesis="simple", mu=1.0))]
fn j_asymptotic(sample: &PySample, characterization: &str, a: f64, alpha: f64, hypothesis: &str, mu: f64) -> PyResult<PyOutcome> {
    let ch: Characterization = parse(characterization)?;
    j_asymptotic_test(&sample.0, ch, a, alpha, self::hypothesis(hypothesis, mu)?).map(PyOutcome).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sample, r, alpha=0.05, hypothesis="simple", mu=1.0))]
fn chi2_asymptotic(sample: &PySample, r: usize, alpha: f64, hypothesis: &str, mu: f64) -> PyResult<PyOutcome> {
    st::chi2_asymptotic_test(&sample.0, self::hypothesis(hypothesis, mu)?, r, alpha).map(PyOutcome).map_err(err)
}

/// Leading eigenvalues of the estimated limiting covariance operator of
/// `n M̂`, discretised on a Gauss–Laguerre grid.
#[pyfunction]
#[pyo3(signature = (sample, characterization, a=1.0, nodes=100, k=20))]
fn eigenvalues(sample: &PySample, characterization: &str, a: f64, nodes: usize, k: usize) -> PyResult<Vec<f64>> {
    let cov = covariance_estimate(&sample.0, parse(characterization)?, &laguerre_grid(a, nodes)).map_err(err)?;
    limiting_eigenvalues(&cov, a, k).map_err(err)
}

/// Run a power study from config text and return the table in `format`
/// ("csv", "markdown" or "latex").
#[pyfunction]
#[pyo3(signature = (config, format="csv"))]
fn power_study(py: Python<'_>, config: &str, format: &str) -> PyResult<String> {
    let cfg = StudyConfig::parse(config).map_err(err)?;
    let format: TableFormat = parse(format)?;
    py.detach(|| run_power_study(&cfg).and_then(|t| emit_table(&t, format))).map_err(err)
}

#[pymodule]
fn censgof(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySample>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(j_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(m_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(cvm_koziol, m)?)?;
    m.add_function(wrap_pyfunction!(akritas_chi2, m)?)?;
    m.add_function(wrap_pyfunction!(qn_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(delta_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(j_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(chi2_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(power_study, m)?)?;
    Ok(())
}
