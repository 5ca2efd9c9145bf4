use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::selection::LassoSelector;

/// The ten compared procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Full,
    Oracle,
    LassoCvSplit,
    LassoCvPosi,
    LassoCvSi,
    LassoNegSi,
    AlassoCvSplit,
    AlassoCvPosi,
    AlassoCvSi,
    AlassoNegSi,
}

/// How intervals are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Wald intervals on all predictors.
    Full,
    /// Wald intervals on the true support.
    Oracle,
    Split,
    Posi,
    Exact,
}

impl MethodId {
    pub const ALL: [MethodId; 10] = [
        MethodId::Full,
        MethodId::Oracle,
        MethodId::LassoCvSplit,
        MethodId::LassoCvPosi,
        MethodId::LassoCvSi,
        MethodId::LassoNegSi,
        MethodId::AlassoCvSplit,
        MethodId::AlassoCvPosi,
        MethodId::AlassoCvSi,
        MethodId::AlassoNegSi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Full => "Full",
            MethodId::Oracle => "Oracle",
            MethodId::LassoCvSplit => "Lasso-CV-Split",
            MethodId::LassoCvPosi => "Lasso-CV-PoSI",
            MethodId::LassoCvSi => "Lasso-CV-SI",
            MethodId::LassoNegSi => "Lasso-Neg-SI",
            MethodId::AlassoCvSplit => "ALasso-CV-Split",
            MethodId::AlassoCvPosi => "ALasso-CV-PoSI",
            MethodId::AlassoCvSi => "ALasso-CV-SI",
            MethodId::AlassoNegSi => "ALasso-Neg-SI",
        }
    }

    pub fn route(self) -> Route {
        match self {
            MethodId::Full => Route::Full,
            MethodId::Oracle => Route::Oracle,
            MethodId::LassoCvSplit | MethodId::AlassoCvSplit => Route::Split,
            MethodId::LassoCvPosi | MethodId::AlassoCvPosi => Route::Posi,
            MethodId::LassoCvSi | MethodId::LassoNegSi | MethodId::AlassoCvSi | MethodId::AlassoNegSi => Route::Exact,
        }
    }

    /// Selection procedure, `None` for the fixed-model references.
    pub fn selector(self) -> Option<LassoSelector> {
        match self {
            MethodId::Full | MethodId::Oracle => None,
            MethodId::LassoCvSplit | MethodId::LassoCvPosi | MethodId::LassoCvSi => Some(LassoSelector::lasso_cv()),
            MethodId::LassoNegSi => Some(LassoSelector::lasso_neg()),
            MethodId::AlassoCvSplit | MethodId::AlassoCvPosi | MethodId::AlassoCvSi => Some(LassoSelector::alasso_cv()),
            MethodId::AlassoNegSi => Some(LassoSelector::alasso_neg()),
        }
    }

    pub fn is_adaptive(self) -> bool {
        self.selector().is_some_and(|s| s.adaptive)
    }

    /// Parses a comma-separated list; `all` expands to every method.
    pub fn parse_list(s: &str) -> Result<Vec<MethodId>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(MethodId::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("no methods given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<&str> = MethodId::ALL.iter().map(|m| m.as_str()).collect();
                Error::Config(format!("unknown method '{s}' (known: {})", known.join(", ")))
            })
    }
}

/// A method with its components resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub id: MethodId,
    pub selector: Option<LassoSelector>,
    pub route: Route,
}

impl From<MethodId> for MethodSpec {
    fn from(id: MethodId) -> Self {
        Self { id, selector: id.selector(), route: id.route() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::Selector;

    #[test]
    fn ten_methods_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
            let spec = MethodSpec::from(m);
            if let Some(sel) = spec.selector {
                assert!(m.as_str().starts_with(&sel.name()));
            }
        }
        assert!("Lasso-AIC-SI".parse::<MethodId>().is_err());
        assert_eq!(MethodId::parse_list("all").unwrap().len(), 10);
        assert_eq!(MethodId::parse_list("Oracle, Full,Oracle").unwrap(), vec![MethodId::Full, MethodId::Oracle]);
    }
}
