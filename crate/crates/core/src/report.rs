//! Tidy per-figure tables projected from summary files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Coverage,
    Power,
    Type1,
    ModelSelection,
    FreqVsCoverage,
    Width,
    Stability,
    Prediction,
}

impl ReportKind {
    pub const ALL: [ReportKind; 8] = [
        ReportKind::Coverage,
        ReportKind::Power,
        ReportKind::Type1,
        ReportKind::ModelSelection,
        ReportKind::FreqVsCoverage,
        ReportKind::Width,
        ReportKind::Stability,
        ReportKind::Prediction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Coverage => "coverage",
            ReportKind::Power => "power",
            ReportKind::Type1 => "type1",
            ReportKind::ModelSelection => "model-selection",
            ReportKind::FreqVsCoverage => "freq-vs-coverage",
            ReportKind::Width => "width",
            ReportKind::Stability => "stability",
            ReportKind::Prediction => "prediction",
        }
    }

    /// File the report is projected from.
    pub fn source_file(self) -> &'static str {
        match self {
            ReportKind::FreqVsCoverage => "summary_conditional.csv",
            _ => "summary.csv",
        }
    }

    /// (source column, output column) pairs.
    fn columns(self) -> &'static [(&'static str, &'static str)] {
        const KEYS: [(&str, &str); 6] = [
            ("scenario", "scenario"),
            ("setup", "setup"),
            ("correlation", "correlation"),
            ("coefficients", "coefficients"),
            ("r2", "r2"),
            ("opv", "opv"),
        ];
        macro_rules! with_keys {
            ($($pair:expr),*) => {{
                const C: &[(&str, &str)] = &[KEYS[0], KEYS[1], KEYS[2], KEYS[3], KEYS[4], KEYS[5], ("method", "method"), $($pair),*];
                C
            }};
        }
        match self {
            ReportKind::Coverage => with_keys!(("n_intervals", "n_intervals"), ("coverage", "coverage")),
            ReportKind::Power => with_keys!(("power", "power")),
            ReportKind::Type1 => with_keys!(("type1", "type1")),
            ReportKind::ModelSelection => with_keys!(("true_model_freq", "true_model_freq"), ("fp_freq", "fp_freq"), ("mean_model_size", "mean_model_size")),
            ReportKind::FreqVsCoverage => &[
                ("variable", "variable"),
                ("scenario", "scenario"),
                ("method", "method"),
                ("selection_freq", "selection_freq"),
                ("coverage", "conditional_coverage"),
                ("is_true_predictor", "is_true_predictor"),
            ],
            ReportKind::Width => with_keys!(("median_width", "median_width"), ("iqr_width", "iqr_width")),
            ReportKind::Stability => with_keys!(("unstable_rate", "unstable_rate"), ("unstable_iter_rate", "unstable_iter_rate"), ("infinite_rate", "infinite_rate")),
            ReportKind::Prediction => with_keys!(("mean_validation_r2", "mean_validation_r2")),
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|k| k.as_str()).collect();
            Error::Config(format!("unknown report kind '{s}' (known: {})", known.join(", ")))
        })
    }
}

/// Resolves `input` (a summary file or the directory holding it) for `kind`.
pub fn source_path(kind: ReportKind, input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(kind.source_file())
    } else {
        input.to_path_buf()
    }
}

/// Projects the summary rows onto the report's columns, as CSV text.
pub fn build_report(kind: ReportKind, input: &Path) -> Result<String> {
    let path = source_path(kind, input);
    let schema = |reason: String| Error::Schema { path: path.clone(), reason };
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => schema(format!("cannot read: {e}")),
        _ => Error::Csv(e),
    })?;
    let header = rdr.headers()?.clone();
    let mut idx = Vec::new();
    let mut missing = Vec::new();
    for &(src, _) in kind.columns() {
        match header.iter().position(|h| h == src) {
            Some(i) => idx.push(i),
            None => missing.push(src),
        }
    }
    if !missing.is_empty() {
        return Err(schema(format!("missing columns for the {kind} report: {}", missing.join(", "))));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(kind.columns().iter().map(|&(_, out)| out))?;
    for rec in rdr.records() {
        let rec = rec?;
        w.write_record(idx.iter().map(|&i| rec.get(i).unwrap_or("")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in ReportKind::ALL {
            assert_eq!(k.as_str().parse::<ReportKind>().unwrap(), k);
        }
        assert!("figure".parse::<ReportKind>().is_err());
    }

    #[test]
    fn projection_and_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("summary.csv");
        std::fs::write(&f, "scenario,setup,correlation,coefficients,r2,opv,method,n_intervals,coverage\ns1,toy,c,v1,0.5,10,Full,40,0.9\n").unwrap();
        let out = build_report(ReportKind::Coverage, dir.path()).unwrap();
        assert_eq!(out, "scenario,setup,correlation,coefficients,r2,opv,method,n_intervals,coverage\ns1,toy,c,v1,0.5,10,Full,40,0.9\n");
        let e = build_report(ReportKind::Power, &f).unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, Error::Schema { .. }));
        assert!(msg.contains("summary.csv") && msg.contains("power"), "{msg}");
    }
}
