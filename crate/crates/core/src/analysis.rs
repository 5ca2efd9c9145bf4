//! Analysis of a user-supplied dataset with the compared methods.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimands::FailureCode;
use crate::harness::bootstrap::bootstrap_selection_frequencies;
use crate::harness::methods::{MethodId, Route};
use crate::harness::rng::{iteration_seed, stream_rng, Stream};
use crate::harness::runner::{RunSettings, Session};
use crate::linalg;
use crate::selection::{FixedSelector, LassoSelector, Selector, Tuning};

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub columns: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DataTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<DVector<f64>> {
        self.column_index(name).map(|j| self.values.column(j).into_owned())
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    /// Splits off `outcome`; `predictors` defaults to every other column.
    pub fn design(&self, outcome: &str, predictors: Option<&[String]>) -> Result<AnalysisData> {
        let yj = self
            .column_index(outcome)
            .ok_or_else(|| Error::InvalidInput(format!("outcome column '{outcome}' not found")))?;
        let names: Vec<String> = match predictors {
            Some(p) => p.to_vec(),
            None => self.columns.iter().filter(|c| *c != outcome).cloned().collect(),
        };
        let mut idx = Vec::with_capacity(names.len());
        for n in &names {
            if n == outcome {
                return Err(Error::InvalidInput(format!("'{n}' is both outcome and predictor")));
            }
            idx.push(self.column_index(n).ok_or_else(|| Error::InvalidInput(format!("predictor column '{n}' not found")))?);
        }
        AnalysisData::new(names, linalg::select_columns(&self.values, &idx), self.values.column(yj).into_owned())
    }
}

/// Reads a delimiter-separated table with a header row. The delimiter is
/// taken from the first line (tab, semicolon or comma).
pub fn read_table(path: &Path) -> Result<DataTable> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text, path)
}

fn parse_table(text: &str, path: &Path) -> Result<DataTable> {
    let schema = |reason: String| Error::Schema { path: path.to_path_buf(), reason };
    let first = text.lines().next().ok_or_else(|| schema("empty file".into()))?;
    let delimiter = [b'\t', b';', b','].into_iter().find(|&d| first.as_bytes().contains(&d)).unwrap_or(b',');
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let columns: Vec<String> = rdr.headers()?.iter().map(|h| h.trim_matches('"').to_string()).collect();
    if columns.iter().any(String::is_empty) {
        return Err(schema("empty column name in header".into()));
    }
    let mut data = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != columns.len() {
            return Err(schema(format!("row {} has {} fields, header has {}", i + 2, rec.len(), columns.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| schema(format!("row {}, column '{}': non-numeric value '{cell}'", i + 2, columns[j])))?;
            data.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(schema("no data rows".into()));
    }
    Ok(DataTable { values: DMatrix::from_row_slice(n, columns.len(), &data), columns })
}

/// Predictors of the body-fat case study, in the analysis units: age in decades,
/// height in dm, weight in kg, circumferences in cm.
pub const BODYFAT_PREDICTORS: [&str; 13] = [
    "age", "height", "weight", "neck", "chest", "abdomen", "hip", "thigh", "knee", "ankle", "biceps", "forearm", "wrist",
];
pub const BODYFAT_OUTCOME: &str = "siri";
/// Case number of the individual with implausible values (height 29.5 in).
pub const BODYFAT_EXCLUDED_CASE: usize = 42;

/// Loads the body-fat data in its usual layout (`case`, `brozek`, `siri`,
/// `density`, `age`, `weight`, `height`, circumferences), drops case 42 and
/// converts units. Height is taken as inches when its median is below 100 and as
/// cm otherwise; weight as pounds when its median exceeds 130 and as kg otherwise.
pub fn load_bodyfat(path: &Path) -> Result<DataTable> {
    let raw = read_table(path)?;
    let missing: Vec<&str> = std::iter::once(BODYFAT_OUTCOME)
        .chain(BODYFAT_PREDICTORS)
        .filter(|c| raw.column_index(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { path: path.to_path_buf(), reason: format!("missing columns {missing:?}") });
    }
    let keep: Vec<usize> = match raw.column("case") {
        Some(case) => (0..raw.n_rows()).filter(|&i| case[i] != BODYFAT_EXCLUDED_CASE as f64).collect(),
        None => (0..raw.n_rows()).filter(|&i| i + 1 != BODYFAT_EXCLUDED_CASE).collect(),
    };
    let col = |name: &str| linalg::select_entries(&raw.column(name).unwrap(), &keep);
    let median = |v: &DVector<f64>| linalg::median(v.as_slice());
    let mut columns = vec![BODYFAT_OUTCOME.to_string()];
    let mut cols = vec![col(BODYFAT_OUTCOME)];
    for name in BODYFAT_PREDICTORS {
        let mut v = col(name);
        match name {
            "age" => v /= 10.0,
            "height" => v *= if median(&v) < 100.0 { 0.254 } else { 0.1 },
            "weight" => {
                if median(&v) > 130.0 {
                    v *= 0.453_592_37;
                }
            }
            _ => {}
        }
        columns.push(name.to_string());
        cols.push(v);
    }
    Ok(DataTable { columns, values: DMatrix::from_columns(&cols) })
}

/// Outcome and standardized predictors.
#[derive(Debug, Clone)]
pub struct AnalysisData {
    pub names: Vec<String>,
    pub x_raw: DMatrix<f64>,
    pub x_std: DMatrix<f64>,
    /// Column SDs used for standardization.
    pub scales: DVector<f64>,
    pub y: DVector<f64>,
}

impl AnalysisData {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if names.len() != p || y.len() != n {
            return Err(Error::InvalidInput("names, predictors and outcome disagree in size".into()));
        }
        if p == 0 {
            return Err(Error::InvalidInput("no predictors".into()));
        }
        if n <= p + 2 {
            return Err(Error::InvalidInput(format!("need more than p + 2 = {} rows, got {n}", p + 2)));
        }
        let constant: Vec<&str> = (0..p).filter(|&j| !(linalg::variance(x.column(j).as_slice()) > 0.0)).map(|j| names[j].as_str()).collect();
        if !constant.is_empty() {
            return Err(Error::InvalidInput(format!("constant predictor columns: {}", constant.join(", "))));
        }
        if !(linalg::variance(y.as_slice()) > 0.0) {
            return Err(Error::InvalidInput("outcome is constant".into()));
        }
        let s = linalg::standardize(&x)?;
        Ok(Self { names, x_raw: x, x_std: s.x, scales: s.sds, y })
    }

    pub fn p(&self) -> usize {
        self.x_std.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOptions {
    pub methods: Vec<MethodId>,
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub posi_mc: usize,
    pub neg_mc: usize,
    pub cv_folds: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            methods: vec![MethodId::Full, MethodId::LassoCvSplit, MethodId::LassoCvPosi, MethodId::LassoCvSi],
            alpha: crate::harness::config::DEFAULT_ALPHA,
            n_boot: crate::harness::bootstrap::DEFAULT_BOOTSTRAP,
            seed: 1,
            posi_mc: crate::harness::config::TOY_POSI_MC,
            neg_mc: crate::tuning::DEFAULT_NEGAHBAN_MC,
            cv_folds: crate::tuning::DEFAULT_FOLDS,
        }
    }
}

/// One variable of one method, on the original predictor scale.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableReport {
    pub name: String,
    pub selected: bool,
    pub std_estimate: Option<f64>,
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub p_value: Option<f64>,
    pub flag_infinite: bool,
    pub flag_excludes_estimate: bool,
    pub failure: Option<FailureCode>,
    pub boot_freq: f64,
}

impl VariableReport {
    pub fn excludes_zero(&self) -> bool {
        matches!((self.lower, self.upper), (Some(l), Some(u)) if l > 0.0 || u < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: MethodId,
    pub lambda: Option<f64>,
    pub model: Vec<String>,
    pub failure: Option<FailureCode>,
    /// Every predictor, in column order.
    pub variables: Vec<VariableReport>,
    pub boot_failures: usize,
}

impl MethodReport {
    pub fn variable(&self, name: &str) -> Option<&VariableReport> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Selected variables whose interval excludes zero.
    pub fn confirmed(&self) -> Vec<&str> {
        self.variables.iter().filter(|v| v.excludes_zero()).map(|v| v.name.as_str()).collect()
    }
}

fn bootstrap_selector(method: MethodId, p: usize, folds: usize, neg_mc: usize) -> Box<dyn Selector> {
    match method.route() {
        Route::Full | Route::Oracle => Box::new(FixedSelector { name: "Full".into(), model: (0..p).collect() }),
        _ => {
            let tuning = match method {
                MethodId::LassoNegSi | MethodId::AlassoNegSi => Tuning::Negahban { n_mc: neg_mc },
                _ => Tuning::Cv { folds },
            };
            Box::new(LassoSelector { adaptive: method.is_adaptive(), tuning })
        }
    }
}

/// Runs each method on the data. Estimates and interval endpoints are divided by
/// the predictor SD, so they refer to one unit of the original predictor.
pub fn analyze(data: &AnalysisData, options: &AnalyzeOptions) -> Result<Vec<MethodReport>> {
    if options.methods.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    if options.methods.contains(&MethodId::Oracle) {
        return Err(Error::Config("the Oracle method needs the true model and cannot be used on real data".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    let p = data.p();
    let settings = RunSettings {
        alpha: options.alpha,
        posi_mc: options.posi_mc,
        posi_max_size: None,
        neg_mc: options.neg_mc,
        cv_folds: options.cv_folds,
        exact: Default::default(),
    };
    let mut session = Session::new(&data.x_std, &data.y, settings, options.seed);
    let mut boot_cache: Vec<(String, (Vec<f64>, usize))> = Vec::new();
    let mut reports = Vec::with_capacity(options.methods.len());
    for &method in &options.methods {
        let run = session.run(method, None);
        let selector = bootstrap_selector(method, p, options.cv_folds, options.neg_mc);
        let key = selector.name();
        let (freq, boot_failures) = match boot_cache.iter().find(|(k, _)| *k == key) {
            Some((_, v)) => v.clone(),
            None => {
                let seed = iteration_seed(options.seed, &format!("bootstrap:{key}"), 0);
                let v = bootstrap_selection_frequencies(&data.x_std, &data.y, selector.as_ref(), options.n_boot.max(1), &mut stream_rng(seed, Stream::Data))?;
                boot_cache.push((key, v.clone()));
                v
            }
        };
        let mut variables: Vec<VariableReport> = (0..p)
            .map(|j| VariableReport {
                name: data.names[j].clone(),
                selected: false,
                std_estimate: None,
                estimate: None,
                lower: None,
                upper: None,
                p_value: None,
                flag_infinite: false,
                flag_excludes_estimate: false,
                failure: None,
                boot_freq: if options.n_boot == 0 { f64::NAN } else { freq[j] },
            })
            .collect();
        let mut failure = run.failure;
        for (k, &j) in run.model.iter().enumerate() {
            let v = &mut variables[j];
            v.selected = true;
            let sd = data.scales[j];
            match run.intervals.get(k) {
                Some(Ok(ci)) => {
                    v.std_estimate = Some(ci.estimate);
                    v.estimate = Some(ci.estimate / sd);
                    v.lower = Some(ci.lower / sd);
                    v.upper = Some(ci.upper / sd);
                    v.p_value = Some(ci.p_value);
                    v.flag_infinite = ci.flag_infinite;
                    v.flag_excludes_estimate = ci.flag_excludes_estimate;
                }
                Some(Err(e)) => {
                    let code = FailureCode::from_error(e);
                    failure.get_or_insert(code);
                    v.failure = Some(code);
                }
                None => v.failure = run.failure,
            }
        }
        reports.push(MethodReport {
            method,
            lambda: run.lambda,
            model: run.model.iter().map(|&j| data.names[j].clone()).collect(),
            failure,
            variables,
            boot_failures,
        });
    }
    Ok(reports)
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "method",
    "variable",
    "selected",
    "std_estimate",
    "estimate",
    "lower",
    "upper",
    "p_value",
    "flag_infinite",
    "flag_excludes_estimate",
    "failure",
    "boot_freq",
    "lambda",
];

/// Tidy per-(method, variable) table.
pub fn write_reports<W: std::io::Write>(out: W, reports: &[MethodReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_COLUMNS)?;
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    for r in reports {
        for v in &r.variables {
            w.write_record([
                r.method.as_str().to_string(),
                v.name.clone(),
                (v.selected as u8).to_string(),
                na(v.std_estimate),
                na(v.estimate),
                na(v.lower),
                na(v.upper),
                na(v.p_value),
                (v.flag_infinite as u8).to_string(),
                (v.flag_excludes_estimate as u8).to_string(),
                v.failure.map_or("NA", |c| c.as_str()).to_string(),
                v.boot_freq.to_string(),
                na(r.lambda),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
