//! Simulated datasets: latent Gaussian draw, column transforms, standardized
//! linear predictor and noise calibrated to a target R².

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, quantile_sorted};

/// Attempts before a scenario producing constant columns is declared degenerate.
pub const MAX_REDRAWS: usize = 100;

/// Eigenvalue floor used when a requested correlation matrix is not positive definite.
pub const EIGEN_FLOOR: f64 = 0.05;

/// Monte-Carlo sample size for the post-transform covariance of the realistic design.
pub const POPULATION_MC: usize = 1_000_000;
const POPULATION_SEED: u64 = 0x5EED_0F_5_1A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    Toy,
    Realistic,
}

impl Setup {
    pub fn n_predictors(self) -> usize {
        match self {
            Setup::Toy => 4,
            Setup::Realistic => 17,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::Toy => "toy",
            Setup::Realistic => "realistic",
        }
    }

    /// Correlation design ids in canonical order.
    pub fn correlation_ids(self) -> &'static [&'static str] {
        match self {
            Setup::Toy => &TOY_CORRELATIONS,
            Setup::Realistic => &["realistic"],
        }
    }

    /// Coefficient structure ids in canonical order.
    pub fn coefficient_ids(self) -> Vec<&'static str> {
        match self {
            Setup::Toy => TOY_COEFFICIENTS.iter().map(|(id, _)| *id).collect(),
            Setup::Realistic => REALISTIC_COEFFICIENTS.iter().map(|(id, _)| *id).collect(),
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Setup::Toy),
            "realistic" => Ok(Setup::Realistic),
            other => Err(Error::Config(format!("unknown setup '{other}'"))),
        }
    }
}

pub const TOY_CORRELATIONS: [&str; 7] = [
    "uncorrelated",
    "correlated",
    "correlated_neg",
    "blocks_2_2",
    "blocks_2_2_neg",
    "blocks_1_3",
    "blocks_1_3_neg",
];

pub const TOY_COEFFICIENTS: [(&str, [f64; 4]); 10] = [
    ("v1", [1.0, 0.0, 0.0, 0.0]),
    ("v12", [1.0, 1.0, 0.0, 0.0]),
    ("v12_dec", [1.0, 0.1, 0.0, 0.0]),
    ("v1234", [1.0, 1.0, 1.0, 1.0]),
    ("v13", [1.0, 0.0, 1.0, 0.0]),
    ("v13_dec", [1.0, 0.0, 0.1, 0.0]),
    ("v13_inc", [0.1, 0.0, 1.0, 0.0]),
    ("v3", [0.0, 0.0, 1.0, 0.0]),
    ("v34", [0.0, 0.0, 1.0, 1.0]),
    ("v34_dec", [0.0, 0.0, 1.0, 0.1]),
];

/// Nonzero entries (1-based variable, value) of the realistic coefficient structures.
pub const REALISTIC_COEFFICIENTS: [(&str, &[(usize, f64)]); 13] = [
    ("c2", &[(2, 1.0), (4, 1.0), (14, 1.0)]),
    ("c3", &[(7, 1.0), (8, 1.0), (13, 1.0)]),
    ("c34", &[(7, 1.0), (8, 1.0), (13, 1.0), (4, 1.0), (5, 1.0), (16, 1.0)]),
    ("c34w", &[(7, 1.0), (8, 1.0), (13, 1.0), (4, 0.1), (5, 0.1), (16, 0.1)]),
    ("c3w4", &[(7, 0.1), (8, 0.1), (13, 0.1), (4, 1.0), (5, 1.0), (16, 1.0)]),
    ("c34neg", &[(7, 1.0), (8, 1.0), (13, 1.0), (4, -1.0), (5, -1.0), (16, -1.0)]),
    ("c3neg4", &[(7, -1.0), (8, -1.0), (13, -1.0), (4, 1.0), (5, 1.0), (16, 1.0)]),
    ("c23", &[(7, 1.0), (8, 1.0), (13, 1.0), (2, 1.0), (4, 1.0), (14, 1.0)]),
    ("c2w3", &[(7, 1.0), (8, 1.0), (13, 1.0), (2, 0.1), (4, 0.1), (14, 0.1)]),
    ("c23w", &[(7, 0.1), (8, 0.1), (13, 0.1), (2, 1.0), (4, 1.0), (14, 1.0)]),
    ("c2neg3", &[(7, 1.0), (8, 1.0), (13, 1.0), (2, -1.0), (4, -1.0), (14, -1.0)]),
    ("c23neg", &[(7, -1.0), (8, -1.0), (13, -1.0), (2, 1.0), (4, 1.0), (14, 1.0)]),
    (
        "c234",
        &[(7, 1.0), (8, 1.0), (13, 1.0), (4, 1.0), (5, 1.0), (16, 1.0), (2, 1.0), (14, 1.0)],
    ),
];

/// Latent correlation pairs (1-based) of the realistic design.
const REALISTIC_PAIRS: [(usize, usize, f64); 16] = [
    (1, 2, 0.8),
    (1, 9, 0.5),
    (3, 5, 0.5),
    (3, 9, -0.8),
    (4, 6, -0.8),
    (4, 7, -0.5),
    (5, 6, -0.5),
    (5, 12, 0.8),
    (6, 7, 0.8),
    (6, 11, 0.8),
    (6, 14, 0.5),
    (7, 11, 0.5),
    (7, 14, 0.5),
    (8, 9, -0.5),
    (8, 11, 0.5),
    (11, 14, 0.8),
];

pub const REALISTIC_NAMES: [&str; 17] = [
    "v1", "v2", "v3", "v4", "v5", "v6", "v7", "v8", "v9", "v10", "v11", "v12", "v13", "v14",
    "v15", "v16", "v17",
];

/// Latent-variable correlation matrix together with its sampling factor.
#[derive(Debug, Clone)]
pub struct CorrelationDesign {
    pub name: String,
    /// Correlation matrix actually sampled from.
    pub sigma: DMatrix<f64>,
    /// Matrix as requested; differs from `sigma` only when that was not positive definite.
    pub requested: DMatrix<f64>,
    /// Lower-triangular `L` with `L Lᵀ = sigma`.
    factor: DMatrix<f64>,
}

impl CorrelationDesign {
    /// Validates a correlation matrix. Matrices that are not positive definite are
    /// replaced by their eigenvalue-floored projection rescaled to unit diagonal.
    pub fn new(name: impl Into<String>, sigma: DMatrix<f64>) -> Result<Self> {
        let name = name.into();
        let p = sigma.nrows();
        if sigma.ncols() != p {
            return Err(Error::Config(format!("correlation '{name}' is not square")));
        }
        for i in 0..p {
            for j in 0..p {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Config(format!("correlation '{name}' is not symmetric")));
                }
            }
        }
        let requested = sigma;
        let sigma = match requested.clone().cholesky() {
            Some(_) => requested.clone(),
            None => nearest_positive_definite(&requested, EIGEN_FLOOR),
        };
        let factor = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config(format!("correlation '{name}' is not positive definite")))?
            .unpack();
        Ok(Self { name, sigma, requested, factor })
    }

    pub fn was_projected(&self) -> bool {
        self.sigma != self.requested
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// `n × dim` draw of `N(0, sigma)` rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let q = self.dim();
        let g = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        g * self.factor.transpose()
    }
}

/// Eigenvalues below `floor` are raised to it, then the matrix is rescaled to a
/// correlation matrix.
fn nearest_positive_definite(sigma: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(sigma.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let m = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let d = m.diagonal().map(|x| 1.0 / x.sqrt());
    let mut out = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[i] * d[j]);
    out.fill_diagonal(1.0);
    (&out + out.transpose()) * 0.5
}

fn constant_correlation(p: usize, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { off })
}

fn block_correlation(sizes: &[usize], offs: &[f64]) -> DMatrix<f64> {
    let p: usize = sizes.iter().sum();
    let mut m = DMatrix::identity(p, p);
    let mut start = 0;
    for (&s, &off) in sizes.iter().zip(offs) {
        for i in start..start + s {
            for j in start..start + s {
                if i != j {
                    m[(i, j)] = off;
                }
            }
        }
        start += s;
    }
    m
}

/// One of the seven 4×4 toy correlation structures.
pub fn build_toy_correlation(design_id: &str) -> Result<CorrelationDesign> {
    let sigma = match design_id {
        "uncorrelated" => constant_correlation(4, 0.0),
        "correlated" => constant_correlation(4, 0.8),
        "correlated_neg" => constant_correlation(4, -0.8),
        "blocks_2_2" => block_correlation(&[2, 2], &[0.8, 0.8]),
        "blocks_2_2_neg" => block_correlation(&[2, 2], &[0.8, -0.8]),
        "blocks_1_3" => block_correlation(&[1, 3], &[0.0, 0.8]),
        "blocks_1_3_neg" => block_correlation(&[1, 3], &[0.0, -0.8]),
        other => return Err(Error::Config(format!("unknown toy correlation design '{other}'"))),
    };
    CorrelationDesign::new(design_id, sigma)
}

/// Map from one latent column to one output predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnTransform {
    Identity { latent: usize },
    /// `floor(scale·z + shift)`
    FloorAffine { latent: usize, scale: f64, shift: f64 },
    /// `exp(scale·z + shift)`
    ExpAffine { latent: usize, scale: f64, shift: f64 },
    /// `floor(max(0, scale·exp(z) − offset))`
    FloorShiftedExp { latent: usize, scale: f64, offset: f64 },
    /// `I[lower ≤ z < upper]`
    Indicator { latent: usize, lower: f64, upper: f64 },
    /// `0.01·floor(100·(z + shift)²)`
    CentiFloorSquare { latent: usize, shift: f64 },
}

impl ColumnTransform {
    pub fn latent(&self) -> usize {
        match *self {
            ColumnTransform::Identity { latent }
            | ColumnTransform::FloorAffine { latent, .. }
            | ColumnTransform::ExpAffine { latent, .. }
            | ColumnTransform::FloorShiftedExp { latent, .. }
            | ColumnTransform::Indicator { latent, .. }
            | ColumnTransform::CentiFloorSquare { latent, .. } => latent,
        }
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            ColumnTransform::Identity { .. } => z,
            ColumnTransform::FloorAffine { scale, shift, .. } => (scale * z + shift).floor(),
            ColumnTransform::ExpAffine { scale, shift, .. } => (scale * z + shift).exp(),
            ColumnTransform::FloorShiftedExp { scale, offset, .. } => {
                (scale * z.exp() - offset).max(0.0).floor()
            }
            ColumnTransform::Indicator { lower, upper, .. } => {
                if z >= lower && z < upper {
                    1.0
                } else {
                    0.0
                }
            }
            ColumnTransform::CentiFloorSquare { shift, .. } => {
                0.01 * (100.0 * (z + shift).powi(2)).floor()
            }
        }
    }
}

/// Ordered column transforms plus per-output winsorization multipliers.
#[derive(Debug, Clone)]
pub struct TransformPipeline {
    pub column_transforms: Vec<ColumnTransform>,
    pub truncation: Vec<Option<f64>>,
}

impl TransformPipeline {
    pub fn identity(p: usize) -> Self {
        Self {
            column_transforms: (0..p).map(|latent| ColumnTransform::Identity { latent }).collect(),
            truncation: vec![None; p],
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.column_transforms.len()
    }

    pub fn is_identity(&self) -> bool {
        self.truncation.iter().all(Option::is_none)
            && self
                .column_transforms
                .iter()
                .enumerate()
                .all(|(j, t)| *t == ColumnTransform::Identity { latent: j })
    }

    /// Transforms latent rows into predictors, then winsorizes flagged columns at
    /// `median ± m·IQR` of the generated column.
    pub fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let n = z.nrows();
        let mut x = DMatrix::zeros(n, self.n_outputs());
        for (j, t) in self.column_transforms.iter().enumerate() {
            let src = z.column(t.latent());
            for i in 0..n {
                x[(i, j)] = t.apply(src[i]);
            }
        }
        for (j, m) in self.truncation.iter().enumerate() {
            if let Some(m) = *m {
                winsorize(x.column_mut(j).as_mut_slice(), m);
            }
        }
        x
    }
}

fn winsorize(col: &mut [f64], multiplier: f64) {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    let med = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let (lo, hi) = (med - multiplier * iqr, med + multiplier * iqr);
    for v in col.iter_mut() {
        *v = v.clamp(lo, hi);
    }
}

/// The 15-dimensional latent correlation and the 17 output transforms of the
/// realistic setup.
pub fn build_realistic_design() -> (CorrelationDesign, TransformPipeline) {
    let mut sigma = DMatrix::identity(15, 15);
    for &(i, j, r) in &REALISTIC_PAIRS {
        sigma[(i - 1, j - 1)] = r;
        sigma[(j - 1, i - 1)] = r;
    }
    let corr = CorrelationDesign::new("realistic", sigma).expect("static realistic design");
    use ColumnTransform::*;
    let inf = f64::INFINITY;
    let column_transforms = vec![
        FloorAffine { latent: 0, scale: 10.0, shift: 55.0 },
        Indicator { latent: 1, lower: -inf, upper: 0.6 },
        ExpAffine { latent: 2, scale: 0.4, shift: 3.0 },
        Indicator { latent: 3, lower: -1.2, upper: inf },
        Indicator { latent: 3, lower: 0.75, upper: inf },
        ExpAffine { latent: 4, scale: 0.5, shift: 1.5 },
        FloorShiftedExp { latent: 5, scale: 100.0, offset: 20.0 },
        FloorShiftedExp { latent: 6, scale: 80.0, offset: 20.0 },
        Indicator { latent: 7, lower: -inf, upper: -0.35 },
        Indicator { latent: 8, lower: 0.5, upper: 1.5 },
        Indicator { latent: 8, lower: 1.5, upper: inf },
        CentiFloorSquare { latent: 9, shift: 4.0 },
        FloorAffine { latent: 10, scale: 10.0, shift: 55.0 },
        FloorAffine { latent: 11, scale: 10.0, shift: 55.0 },
        FloorAffine { latent: 12, scale: 10.0, shift: 55.0 },
        Indicator { latent: 13, lower: -inf, upper: 0.0 },
        Indicator { latent: 14, lower: -inf, upper: 0.0 },
    ];
    let t = Some(5.0);
    let truncation = vec![
        t, None, t, None, None, t, t, t, None, None, None, t, t, t, t, None, None,
    ];
    (corr, TransformPipeline { column_transforms, truncation })
}

/// Standardized true coefficient vector.
#[derive(Debug, Clone)]
pub struct CoefficientStructure {
    pub name: String,
    pub beta: DVector<f64>,
}

impl CoefficientStructure {
    pub fn support(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }
}

pub fn coefficient_structure(setup: Setup, id: &str) -> Result<CoefficientStructure> {
    let beta = match setup {
        Setup::Toy => TOY_COEFFICIENTS
            .iter()
            .find(|(name, _)| *name == id)
            .map(|(_, b)| DVector::from_column_slice(b)),
        Setup::Realistic => REALISTIC_COEFFICIENTS.iter().find(|(name, _)| *name == id).map(
            |(_, entries)| {
                let mut b = DVector::zeros(17);
                for &(j, v) in entries.iter() {
                    b[j - 1] = v;
                }
                b
            },
        ),
    };
    beta.map(|beta| CoefficientStructure { name: id.to_string(), beta })
        .ok_or_else(|| Error::Config(format!("unknown {setup} coefficient structure '{id}'")))
}

/// One cell of the factorial design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub setup: Setup,
    pub correlation: String,
    pub coefficients: String,
    pub target_r2: f64,
    pub obs_per_variable: usize,
}

impl Scenario {
    pub fn p(&self) -> usize {
        self.setup.n_predictors()
    }

    pub fn n(&self) -> usize {
        self.obs_per_variable * self.p()
    }

    pub fn id(&self) -> String {
        format!(
            "{}:{}:{}:r2={}:opv={}",
            self.setup, self.correlation, self.coefficients, self.target_r2, self.obs_per_variable
        )
    }
}

/// A scenario with all of its static ingredients resolved.
#[derive(Debug, Clone)]
pub struct SimulationDesign {
    pub scenario: Scenario,
    pub correlation: CorrelationDesign,
    pub pipeline: TransformPipeline,
    pub coefficients: CoefficientStructure,
    /// Population covariance of the standardized predictors.
    pub population_sigma: DMatrix<f64>,
}

impl SimulationDesign {
    pub fn resolve(scenario: &Scenario) -> Result<Self> {
        if !(scenario.target_r2 > 0.0 && scenario.target_r2 < 1.0) {
            return Err(Error::Config(format!(
                "target R² must lie in (0, 1), got {}",
                scenario.target_r2
            )));
        }
        if scenario.obs_per_variable == 0 {
            return Err(Error::Config("observations per variable must be positive".into()));
        }
        let coefficients = coefficient_structure(scenario.setup, &scenario.coefficients)?;
        let (correlation, pipeline, population_sigma) = match scenario.setup {
            Setup::Toy => {
                let corr = build_toy_correlation(&scenario.correlation)?;
                let sigma = corr.sigma.clone();
                (corr, TransformPipeline::identity(4), sigma)
            }
            Setup::Realistic => {
                if scenario.correlation != "realistic" {
                    return Err(Error::Config(format!(
                        "unknown realistic correlation design '{}'",
                        scenario.correlation
                    )));
                }
                let (corr, pipe) = build_realistic_design();
                (corr, pipe, realistic_population_sigma().clone())
            }
        };
        Ok(Self { scenario: scenario.clone(), correlation, pipeline, coefficients, population_sigma })
    }

    pub fn true_support(&self) -> Vec<usize> {
        self.coefficients.support()
    }
}

/// One simulated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x_raw: DMatrix<f64>,
    pub x_std: DMatrix<f64>,
    pub y: DVector<f64>,
    pub y_valid: DVector<f64>,
    pub sigma_true: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub noise_sd: f64,
    /// Noiseless linear predictor `x_std · beta_true`.
    pub eta: DVector<f64>,
}

pub fn sample_dataset<R: Rng + ?Sized>(design: &SimulationDesign, rng: &mut R) -> Result<Dataset> {
    let scenario = &design.scenario;
    let (n, p) = (scenario.n(), scenario.p());
    if n < p + 2 {
        return Err(Error::Config(format!("scenario {} has n = {n} < p + 2", scenario.id())));
    }
    for _ in 0..MAX_REDRAWS {
        let z = design.correlation.sample(n, rng);
        let x_raw = design.pipeline.apply(&z);
        let Ok(std) = linalg::standardize(&x_raw) else {
            continue;
        };
        let beta = design.coefficients.beta.clone();
        let eta = &std.x * &beta;
        let var_eta = linalg::variance(eta.as_slice());
        if !(var_eta > 0.0) {
            continue;
        }
        let noise_sd = (var_eta * (1.0 / scenario.target_r2 - 1.0)).sqrt();
        let eps = DVector::from_fn(n, |_, _| noise_sd * rng.sample::<f64, _>(StandardNormal));
        let eps_valid = DVector::from_fn(n, |_, _| noise_sd * rng.sample::<f64, _>(StandardNormal));
        return Ok(Dataset {
            y: &eta + eps,
            y_valid: &eta + eps_valid,
            x_raw,
            x_std: std.x,
            sigma_true: design.population_sigma.clone(),
            beta_true: beta,
            noise_sd,
            eta,
        });
    }
    Err(Error::DegenerateData { scenario: scenario.id(), attempts: MAX_REDRAWS })
}

/// Population covariance of the standardized transformed predictors. Identity
/// pipelines return the latent correlation exactly; otherwise a Monte-Carlo
/// estimate from `n_mc` draws.
pub fn population_sigma<R: Rng + ?Sized>(
    design: &CorrelationDesign,
    pipeline: &TransformPipeline,
    n_mc: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    if pipeline.is_identity() {
        return design.sigma.clone();
    }
    let z = design.sample(n_mc, rng);
    let x = pipeline.apply(&z);
    let s = linalg::standardize(&x).expect("Monte-Carlo sample has no constant column");
    let c = s.x.transpose() * &s.x / n_mc as f64;
    let mut c = (&c + c.transpose()) * 0.5;
    c.fill_diagonal(1.0);
    c
}

/// The realistic design's population covariance, computed once per process.
pub fn realistic_population_sigma() -> &'static DMatrix<f64> {
    static CELL: OnceLock<DMatrix<f64>> = OnceLock::new();
    CELL.get_or_init(|| {
        let (corr, pipe) = build_realistic_design();
        let mut rng = ChaCha8Rng::seed_from_u64(POPULATION_SEED);
        population_sigma(&corr, &pipe, POPULATION_MC, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_designs_match_their_definitions() {
        let u = build_toy_correlation("uncorrelated").unwrap();
        assert_eq!(u.sigma, DMatrix::identity(4, 4));
        let c = build_toy_correlation("correlated").unwrap();
        assert!(c.sigma.iter().enumerate().all(|(k, &v)| if k % 5 == 0 { v == 1.0 } else { v == 0.8 }));
        let b = build_toy_correlation("blocks_2_2_neg").unwrap();
        assert_eq!(b.sigma[(0, 1)], 0.8);
        assert_eq!(b.sigma[(2, 3)], -0.8);
        assert_eq!(b.sigma[(1, 2)], 0.0);
        assert!(build_toy_correlation("nope").is_err());
    }

    #[test]
    fn infeasible_negative_designs_are_projected() {
        // Equicorrelation −0.8 is not a valid 4×4 (nor 3×3) correlation matrix.
        for id in ["correlated_neg", "blocks_1_3_neg"] {
            let d = build_toy_correlation(id).unwrap();
            assert!(d.sigma.clone().cholesky().is_some());
            for i in 0..4 {
                assert_eq!(d.sigma[(i, i)], 1.0);
            }
        }
        let c = build_toy_correlation("correlated_neg").unwrap();
        let off = c.sigma[(0, 1)];
        assert!(off < -0.3 && off > -1.0 / 3.0, "{off}");
        assert!((c.sigma[(2, 3)] - off).abs() < 1e-12);
        let b = build_toy_correlation("blocks_1_3_neg").unwrap();
        assert_eq!(b.sigma[(0, 1)], 0.0);
        assert!(b.sigma[(1, 2)] < -0.45 && b.sigma[(1, 2)] > -0.5);
    }

    #[test]
    fn realistic_design_shape_and_transforms() {
        let (corr, pipe) = build_realistic_design();
        assert_eq!(corr.dim(), 15);
        assert_eq!(pipe.n_outputs(), 17);
        assert_eq!(corr.requested[(0, 1)], 0.8);
        assert_eq!(corr.requested[(2, 8)], -0.8);
        let nonzero = (0..15)
            .flat_map(|i| (i + 1..15).map(move |j| (i, j)))
            .filter(|&(i, j)| corr.requested[(i, j)] != 0.0)
            .count();
        assert_eq!(nonzero, 16);
        // The requested matrix is indefinite; the sampled one stays close to it.
        assert!(corr.was_projected());
        assert!((&corr.sigma - &corr.requested).amax() < 0.2);
        assert!(corr.sigma.clone().cholesky().is_some());
        let z = DMatrix::<f64>::zeros(1, 15);
        let x = pipe.column_transforms.iter().map(|t| t.apply(z[(0, t.latent())])).collect::<Vec<_>>();
        assert_eq!(x[0], 55.0);
        assert_eq!(x[3], 1.0);
        assert_eq!(x[4], 0.0);
        assert_eq!(x[6], 80.0);
        assert_eq!(x[11], 16.0);
    }

    #[test]
    fn coefficient_tables() {
        let b = coefficient_structure(Setup::Toy, "v12_dec").unwrap();
        assert_eq!(b.beta.as_slice(), &[1.0, 0.1, 0.0, 0.0]);
        let b = coefficient_structure(Setup::Toy, "v1234").unwrap();
        assert_eq!(b.beta.as_slice(), &[1.0; 4]);
        let c2 = coefficient_structure(Setup::Realistic, "c2").unwrap();
        assert_eq!(c2.support(), vec![1, 3, 13]);
        assert!(c2.beta.iter().all(|&v| v == 0.0 || v == 1.0));
        for id in Setup::Realistic.coefficient_ids() {
            let c = coefficient_structure(Setup::Realistic, id).unwrap();
            assert!(c.beta.iter().all(|v| [-1.0, 0.0, 0.1, 1.0].contains(v)));
            assert!(!c.support().is_empty());
        }
        assert!(coefficient_structure(Setup::Toy, "c2").is_err());
    }

    #[test]
    fn scenario_sizes() {
        let s = Scenario {
            setup: Setup::Realistic,
            correlation: "realistic".into(),
            coefficients: "c2".into(),
            target_r2: 0.5,
            obs_per_variable: 5,
        };
        assert_eq!(s.n(), 85);
        let t = Scenario { setup: Setup::Toy, correlation: "uncorrelated".into(), coefficients: "v1".into(), target_r2: 0.5, obs_per_variable: 10 };
        assert_eq!(t.n(), 40);
    }

    #[test]
    fn dataset_is_standardized_and_calibrated() {
        let s = Scenario { setup: Setup::Toy, correlation: "correlated".into(), coefficients: "v12".into(), target_r2: 0.5, obs_per_variable: 10 };
        let d = SimulationDesign::resolve(&s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = sample_dataset(&d, &mut rng).unwrap();
        let n = ds.x_std.nrows() as f64;
        for col in ds.x_std.column_iter() {
            assert!(col.mean().abs() <= 1e-10);
            assert!(((col.norm_squared() / n).sqrt() - 1.0).abs() <= 1e-10);
        }
        let v = linalg::variance(ds.eta.as_slice());
        assert!((ds.noise_sd.powi(2) - v).abs() < 1e-12);
        assert!((v / (v + ds.noise_sd.powi(2)) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn winsorize_clamps_outliers() {
        let mut v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 1000.0];
        winsorize(&mut v, 5.0);
        // median 3.5, IQR 2.5 → upper 16
        assert_eq!(v[5], 16.0);
        assert_eq!(v[0], 1.0);
    }
}
