//! Run configuration and scenario enumeration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::methods::MethodId;
use crate::datagen::{Scenario, Setup};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.10;
pub const DEFAULT_ITERATIONS: usize = 900;
pub const TOY_POSI_MC: usize = 1000;
pub const REALISTIC_POSI_MC: usize = 500;

/// Full-factorial block of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub setup: Setup,
    pub correlations: Vec<String>,
    pub coefficients: Vec<String>,
    pub r2: Vec<f64>,
    pub opv: Vec<usize>,
}

impl GridConfig {
    pub fn full(setup: Setup) -> Self {
        Self {
            setup,
            correlations: setup.correlation_ids().iter().map(|s| s.to_string()).collect(),
            coefficients: setup.coefficient_ids().iter().map(|s| s.to_string()).collect(),
            r2: vec![0.2, 0.5, 0.8],
            opv: vec![5, 10, 50],
        }
    }

    /// `toy-full` or `realistic-full`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "toy-full" => Ok(Self::full(Setup::Toy)),
            "realistic-full" => Ok(Self::full(Setup::Realistic)),
            other => Err(Error::Config(format!(
                "unknown grid '{other}' (built-in grids: toy-full, realistic-full)"
            ))),
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_seed() -> u64 {
    1
}
fn default_workers() -> usize {
    1
}
fn default_methods() -> Vec<String> {
    MethodId::ALL.iter().map(|m| m.as_str().to_string()).collect()
}
fn default_neg_mc() -> usize {
    crate::tuning::DEFAULT_NEGAHBAN_MC
}
fn default_folds() -> usize {
    crate::tuning::DEFAULT_FOLDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// PoSI Monte-Carlo draws; defaults to 1000 (toy) / 500 (realistic).
    #[serde(default)]
    pub posi_mc: Option<usize>,
    #[serde(default = "default_neg_mc")]
    pub neg_mc: usize,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    pub grid: Vec<GridConfig>,
}

impl RunConfig {
    pub fn new(grid: Vec<GridConfig>) -> Self {
        Self {
            methods: default_methods(),
            alpha: DEFAULT_ALPHA,
            iterations: DEFAULT_ITERATIONS,
            seed: default_seed(),
            workers: default_workers(),
            posi_mc: None,
            neg_mc: default_neg_mc(),
            cv_folds: default_folds(),
            grid,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn method_ids(&self) -> Result<Vec<MethodId>> {
        MethodId::parse_list(&self.methods.join(","))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        if self.neg_mc == 0 || self.posi_mc == Some(0) {
            return Err(Error::Config("Monte-Carlo sizes must be positive".into()));
        }
        self.method_ids()?;
        enumerate_scenarios(&self.grid)?;
        Ok(())
    }
}

/// All scenarios of the grids in canonical order (setup, correlation id,
/// coefficient id, R² ascending, opv ascending), without duplicates.
pub fn enumerate_scenarios(grids: &[GridConfig]) -> Result<Vec<Scenario>> {
    if grids.is_empty() {
        return Err(Error::Config("no scenario grid given".into()));
    }
    let mut keyed = Vec::new();
    for g in grids {
        if g.correlations.is_empty() || g.coefficients.is_empty() || g.r2.is_empty() || g.opv.is_empty() {
            return Err(Error::Config(format!("{} grid has an empty factor list", g.setup)));
        }
        let corr_ids = g.setup.correlation_ids();
        let coef_ids = g.setup.coefficient_ids();
        for c in &g.correlations {
            let ci = corr_ids
                .iter()
                .position(|k| k == c)
                .ok_or_else(|| Error::Config(format!("unknown {} correlation design '{c}'", g.setup)))?;
            for b in &g.coefficients {
                let bi = coef_ids
                    .iter()
                    .position(|k| k == b)
                    .ok_or_else(|| Error::Config(format!("unknown {} coefficient structure '{b}'", g.setup)))?;
                for &r2 in &g.r2 {
                    if !(r2 > 0.0 && r2 < 1.0) {
                        return Err(Error::Config(format!("target R² must lie in (0, 1), got {r2}")));
                    }
                    for &opv in &g.opv {
                        if opv == 0 {
                            return Err(Error::Config("observations per variable must be positive".into()));
                        }
                        let s = Scenario {
                            setup: g.setup,
                            correlation: c.clone(),
                            coefficients: b.clone(),
                            target_r2: r2,
                            obs_per_variable: opv,
                        };
                        keyed.push(((g.setup, ci, bi), s));
                    }
                }
            }
        }
    }
    keyed.sort_by(|(ka, a), (kb, b)| {
        ka.cmp(kb)
            .then(a.target_r2.total_cmp(&b.target_r2))
            .then(a.obs_per_variable.cmp(&b.obs_per_variable))
    });
    keyed.dedup_by(|(_, a), (_, b)| a == b);
    Ok(keyed.into_iter().map(|(_, s)| s).collect())
}

/// Scenario id with characters that are awkward in file names replaced.
pub fn file_safe_id(id: &str) -> String {
    id.chars()
        .map(|c| match c {
            ':' => '_',
            '=' => '-',
            c if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' => c,
            _ => '_',
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_sizes() {
        assert_eq!(enumerate_scenarios(&[GridConfig::builtin("toy-full").unwrap()]).unwrap().len(), 630);
        assert_eq!(enumerate_scenarios(&[GridConfig::builtin("realistic-full").unwrap()]).unwrap().len(), 117);
    }

    #[test]
    fn canonical_order_and_dedup() {
        let g = GridConfig {
            setup: Setup::Toy,
            correlations: vec!["correlated".into(), "uncorrelated".into()],
            coefficients: vec!["v1".into()],
            r2: vec![0.8, 0.2],
            opv: vec![10],
        };
        let s = enumerate_scenarios(&[g.clone(), g]).unwrap();
        let ids: Vec<String> = s.iter().map(|s| s.id()).collect();
        assert_eq!(
            ids,
            vec![
                "toy:uncorrelated:v1:r2=0.2:opv=10",
                "toy:uncorrelated:v1:r2=0.8:opv=10",
                "toy:correlated:v1:r2=0.2:opv=10",
                "toy:correlated:v1:r2=0.8:opv=10"
            ]
        );
    }

    #[test]
    fn single_and_empty_factors() {
        let mut g = GridConfig {
            setup: Setup::Realistic,
            correlations: vec!["realistic".into()],
            coefficients: vec!["c2".into()],
            r2: vec![0.5],
            opv: vec![5],
        };
        assert_eq!(enumerate_scenarios(std::slice::from_ref(&g)).unwrap().len(), 1);
        g.r2.clear();
        assert!(enumerate_scenarios(&[g]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::new(vec![GridConfig::builtin("toy-full").unwrap()]);
        cfg.iterations = 10;
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(RunConfig::from_toml_str("alpha = 2.0\n[[grid]]\nsetup='toy'\ncorrelations=['correlated']\ncoefficients=['v1']\nr2=[0.5]\nopv=[5]").is_err());
    }

    #[test]
    fn safe_ids() {
        assert_eq!(file_safe_id("toy:uncorrelated:v1:r2=0.2:opv=5"), "toy_uncorrelated_v1_r2-0.2_opv-5");
    }
}
