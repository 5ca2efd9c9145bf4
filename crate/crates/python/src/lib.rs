//! Python bindings: Lasso fits, selective intervals, PoSI constants, simulation
//! scenarios and data analysis. Matrices are passed as lists of rows.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use selinf::analysis::{analyze as analyze_data, AnalysisData, AnalyzeOptions};
use selinf::datagen::{sample_dataset, Scenario as CoreScenario, SimulationDesign};
use selinf::harness::{run_scenario as core_run_scenario, MethodId, RunSettings};
use selinf::inference::{self, ExactOptions, SelectiveInterval};
use selinf::selection::{LassoSelector, Selector, Tuning};
use selinf::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::RankDeficient { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows of x differ in length"));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_weights(weights: Option<Vec<f64>>, p: usize) -> PyResult<DVector<f64>> {
    match weights {
        Some(w) if w.len() != p => Err(PyValueError::new_err(format!("expected {p} weights, got {}", w.len()))),
        Some(w) => Ok(DVector::from_vec(w)),
        None => Ok(DVector::repeat(p, 1.0)),
    }
}

/// Lasso fit at one λ.
#[pyclass(get_all, frozen)]
struct LassoFit {
    lam: f64,
    coefficients: Vec<f64>,
    intercept: f64,
    active_set: Vec<usize>,
    signs: Vec<f64>,
    converged: bool,
}

#[pymethods]
impl LassoFit {
    fn __repr__(&self) -> String {
        format!("LassoFit(lam={}, active_set={:?})", self.lam, self.active_set)
    }
}

/// Confidence interval for one selected variable.
#[pyclass(get_all, frozen)]
struct Interval {
    variable: usize,
    estimate: f64,
    lower: f64,
    upper: f64,
    p_value: f64,
    flag_infinite: bool,
    flag_excludes_estimate: bool,
}

impl From<SelectiveInterval> for Interval {
    fn from(c: SelectiveInterval) -> Self {
        Self {
            variable: c.variable,
            estimate: c.estimate,
            lower: c.lower,
            upper: c.upper,
            p_value: c.p_value,
            flag_infinite: c.flag_infinite,
            flag_excludes_estimate: c.flag_excludes_estimate,
        }
    }
}

#[pymethods]
impl Interval {
    fn __repr__(&self) -> String {
        format!("Interval(variable={}, estimate={:.4}, lower={:.4}, upper={:.4}, p_value={:.4})", self.variable, self.estimate, self.lower, self.upper, self.p_value)
    }
}

/// Minimizes ½‖y − β₀ − Xβ‖² + lam·Σ w_j|β_j|.
#[pyfunction]
#[pyo3(signature = (x, y, lam, weights=None))]
fn lasso(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64, weights: Option<Vec<f64>>) -> PyResult<LassoFit> {
    let x = matrix(&x)?;
    let w = check_weights(weights, x.ncols())?;
    let f = selinf::lasso::fit_lasso(&x, &DVector::from_vec(y), lam, &w).map_err(to_py)?;
    Ok(LassoFit {
        lam: f.lambda,
        coefficients: f.coefficients.iter().copied().collect(),
        intercept: f.intercept,
        active_set: f.active_set,
        signs: f.signs,
        converged: f.converged,
    })
}

/// Tuned λ for the Lasso ("cv" or "negahban"); adaptive uses OLS weights.
#[pyfunction]
#[pyo3(signature = (x, y, tuning="cv", adaptive=false, seed=0))]
fn tune_lambda(x: Vec<Vec<f64>>, y: Vec<f64>, tuning: &str, adaptive: bool, seed: u64) -> PyResult<f64> {
    let x = matrix(&x)?;
    let y = DVector::from_vec(y);
    let tuning = match tuning {
        "cv" => Tuning::Cv { folds: selinf::tuning::DEFAULT_FOLDS },
        "negahban" => Tuning::Negahban { n_mc: selinf::tuning::DEFAULT_NEGAHBAN_MC },
        other => return Err(PyValueError::new_err(format!("unknown tuning '{other}'"))),
    };
    let sel = LassoSelector { adaptive, tuning };
    let r = sel.select(&x, &y, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    Ok(r.lambda)
}

/// Selective intervals given the Lasso event at `lam`, with σ known.
#[pyfunction]
#[pyo3(signature = (x, y, lam, sigma, alpha=0.1, weights=None))]
fn exact_intervals(x: Vec<Vec<f64>>, y: Vec<f64>, lam: f64, sigma: f64, alpha: f64, weights: Option<Vec<f64>>) -> PyResult<Vec<Interval>> {
    let x = matrix(&x)?;
    let y = DVector::from_vec(y);
    let w = check_weights(weights, x.ncols())?;
    let fit = selinf::lasso::fit_lasso(&x, &y, lam, &w).map_err(to_py)?;
    let cis = inference::selective_ci_exact(&x, &y, &fit, sigma, alpha, ExactOptions::default()).map_err(to_py)?;
    cis.into_iter().map(|c| c.map(Interval::from).map_err(to_py)).collect()
}

/// Monte-Carlo PoSI multiplier K over all submodels of `x`.
#[pyfunction]
#[pyo3(signature = (x, alpha=0.1, df=None, n_mc=1000, seed=0))]
fn posi_constant(x: Vec<Vec<f64>>, alpha: f64, df: Option<f64>, n_mc: usize, seed: u64) -> PyResult<f64> {
    let x = matrix(&x)?;
    let k = inference::posi_constant(&x, alpha, None, df, n_mc, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
    Ok(k.k)
}

/// Projection target Σ_M⁻¹Σ_{M,·}β of the submodel `model`.
#[pyfunction]
fn submodel_target(sigma: Vec<Vec<f64>>, beta: Vec<f64>, model: Vec<usize>) -> PyResult<Vec<f64>> {
    let t = selinf::estimands::submodel_target(&matrix(&sigma)?, &DVector::from_vec(beta), &model).map_err(to_py)?;
    Ok(t.targets)
}

/// One cell of the simulation grid.
#[pyclass(frozen)]
struct Scenario {
    design: SimulationDesign,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(setup: &str, correlation: &str, coefficients: &str, r2: f64, opv: usize) -> PyResult<Self> {
        let scenario = CoreScenario {
            setup: setup.parse().map_err(to_py)?,
            correlation: correlation.into(),
            coefficients: coefficients.into(),
            target_r2: r2,
            obs_per_variable: opv,
        };
        Ok(Self { design: SimulationDesign::resolve(&scenario).map_err(to_py)? })
    }

    #[getter]
    fn id(&self) -> String {
        self.design.scenario.id()
    }

    #[getter]
    fn n(&self) -> usize {
        self.design.scenario.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.design.scenario.p()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.design.coefficients.beta.iter().copied().collect()
    }

    /// Draws (standardized x, y, validation y).
    fn sample(&self, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        let d = sample_dataset(&self.design, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(to_py)?;
        Ok((rows(&d.x_std), d.y.iter().copied().collect(), d.y_valid.iter().copied().collect()))
    }

    /// Runs the methods and returns one dict of aggregates per method.
    #[pyo3(signature = (methods="all", iterations=100, seed=1, alpha=0.1))]
    fn run(&self, py: Python<'_>, methods: &str, iterations: usize, seed: u64, alpha: f64) -> PyResult<Vec<Py<PyAny>>> {
        let ids = MethodId::parse_list(methods).map_err(to_py)?;
        let settings = RunSettings::for_setup(self.design.scenario.setup, alpha);
        let s = py
            .detach(|| core_run_scenario(&self.design, &ids, &settings, iterations, seed, 1, None))
            .map_err(to_py)?;
        s.methods
            .iter()
            .map(|m| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("method", m.method.as_str())?;
                d.set_item("n_iter", m.n_iter)?;
                d.set_item("coverage", m.general.coverage())?;
                d.set_item("power", m.general.power())?;
                d.set_item("type1", m.general.type1())?;
                d.set_item("true_model_freq", m.true_model_freq)?;
                d.set_item("fp_freq", m.fp_freq)?;
                d.set_item("median_width", m.width.median_width)?;
                d.set_item("unstable_rate", m.width.unstable_rate)?;
                d.set_item("mean_validation_r2", m.mean_validation_r2)?;
                Ok(d.into_any().unbind())
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Scenario('{}')", self.id())
    }
}

/// Runs methods on a dataset; returns one dict per (method, variable) with
/// intervals on the original predictor scale.
#[pyfunction]
#[pyo3(signature = (x, y, names, methods="Full,Lasso-CV-SI", alpha=0.1, n_boot=100, seed=1))]
fn analyze(py: Python<'_>, x: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>, methods: &str, alpha: f64, n_boot: usize, seed: u64) -> PyResult<Vec<Py<PyAny>>> {
    let data = AnalysisData::new(names, matrix(&x)?, DVector::from_vec(y)).map_err(to_py)?;
    let options = AnalyzeOptions { methods: MethodId::parse_list(methods).map_err(to_py)?, alpha, n_boot, seed, ..Default::default() };
    let reports = py.detach(|| analyze_data(&data, &options)).map_err(to_py)?;
    let mut out = Vec::new();
    for r in &reports {
        for v in &r.variables {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("method", r.method.as_str())?;
            d.set_item("variable", &v.name)?;
            d.set_item("selected", v.selected)?;
            d.set_item("estimate", v.estimate)?;
            d.set_item("lower", v.lower)?;
            d.set_item("upper", v.upper)?;
            d.set_item("p_value", v.p_value)?;
            d.set_item("boot_freq", v.boot_freq)?;
            d.set_item("failure", v.failure.map(|c| c.as_str()))?;
            out.push(d.into_any().unbind());
        }
    }
    Ok(out)
}

/// Ids of the scenarios of a built-in grid ("toy-full" or "realistic-full").
#[pyfunction]
fn grid_scenarios(name: &str) -> PyResult<Vec<String>> {
    let g = selinf::harness::GridConfig::builtin(name).map_err(to_py)?;
    Ok(selinf::harness::enumerate_scenarios(&[g]).map_err(to_py)?.iter().map(CoreScenario::id).collect())
}

#[pymodule]
fn selinf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("METHODS", MethodId::ALL.iter().map(|m| m.as_str()).collect::<Vec<_>>())?;
    m.add_class::<LassoFit>()?;
    m.add_class::<Interval>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(lasso, m)?)?;
    m.add_function(wrap_pyfunction!(tune_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(exact_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(posi_constant, m)?)?;
    m.add_function(wrap_pyfunction!(submodel_target, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(grid_scenarios, m)?)?;
    Ok(())
}
