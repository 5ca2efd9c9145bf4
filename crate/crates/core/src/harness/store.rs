//! Append-only per-scenario record files.
//!
//! One row per (iteration, method, variable), each carrying an FNV-1a checksum
//! of its own fields, then a `#commit` row closing the iteration whose checksum
//! covers the whole block. Rows after the last commit are discarded on resume.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::methods::MethodId;
use super::rng::{fnv1a, iteration_seed};
use super::runner::{IterationRecord, MethodIteration};
use crate::error::{Error, Result};
use crate::estimands::{FailureCode, VariableOutcome};

pub const RECORD_COLUMNS: [&str; 23] = [
    "scenario",
    "iteration",
    "seed",
    "method",
    "variable",
    "selected",
    "estimate",
    "lower",
    "upper",
    "p_value",
    "target",
    "covered",
    "excludes_zero",
    "width",
    "flag_infinite",
    "flag_excludes_estimate",
    "failure_code",
    "method_failure",
    "lambda",
    "model",
    "validation_r2",
    "seconds",
    "checksum",
];

const COMMIT: &str = "#commit";
const NA: &str = "NA";

fn header() -> String {
    RECORD_COLUMNS.join(",")
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn opt_bool(v: Option<bool>) -> String {
    v.map_or_else(|| NA.to_string(), |b| (b as u8).to_string())
}

fn opt_code(v: Option<FailureCode>) -> String {
    v.map_or_else(|| NA.to_string(), |c| c.as_str().to_string())
}

/// Model as 1-based indices joined by ';' (empty for the empty model).
fn model_field(model: &[usize]) -> String {
    model.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(";")
}

fn checksum(fields: &[String]) -> String {
    format!("{:016x}", fnv1a(fields.join("\x1f").as_bytes()))
}

fn with_checksum(mut fields: Vec<String>) -> String {
    let sum = checksum(&fields);
    fields.push(sum);
    fields.join(",")
}

/// Serializes one iteration, commit row included.
pub fn encode_iteration(rec: &IterationRecord) -> String {
    let mut out = String::new();
    let mut block = String::new();
    for (k, m) in rec.methods.iter().enumerate() {
        let seconds = rec.timings.get(k).map_or(0.0, |(_, d)| d.as_secs_f64());
        for o in &m.outcomes {
            let fields = vec![
                rec.scenario_id.clone(),
                rec.iteration.to_string(),
                rec.seed.to_string(),
                m.method.as_str().to_string(),
                (o.variable + 1).to_string(),
                (o.selected as u8).to_string(),
                opt_f64(o.estimate),
                opt_f64(o.lower),
                opt_f64(o.upper),
                opt_f64(o.p_value),
                opt_f64(o.target),
                opt_bool(o.covered),
                opt_bool(o.excludes_zero),
                opt_f64(o.width),
                (o.flag_infinite as u8).to_string(),
                (o.flag_excludes_estimate as u8).to_string(),
                opt_code(o.failure),
                opt_code(m.failure),
                opt_f64(m.lambda),
                model_field(&m.model),
                opt_f64(m.validation_r2),
                seconds.to_string(),
            ];
            let line = with_checksum(fields);
            block.push_str(&line);
            block.push('\n');
        }
    }
    out.push_str(&block);
    let mut commit: Vec<String> = vec![rec.scenario_id.clone(), rec.iteration.to_string(), rec.seed.to_string(), COMMIT.into()];
    commit.resize(RECORD_COLUMNS.len() - 2, String::new());
    commit.push(format!("{:016x}", fnv1a(block.as_bytes())));
    out.push_str(&with_checksum(commit));
    out.push('\n');
    out
}

struct RowError(String);

fn parse_f64(s: &str) -> std::result::Result<Option<f64>, RowError> {
    if s == NA {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| RowError(format!("bad number '{s}'")))
}

fn parse_bool(s: &str) -> std::result::Result<bool, RowError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(RowError(format!("bad flag '{s}'"))),
    }
}

fn parse_opt_bool(s: &str) -> std::result::Result<Option<bool>, RowError> {
    if s == NA {
        Ok(None)
    } else {
        parse_bool(s).map(Some)
    }
}

fn parse_code(s: &str) -> std::result::Result<Option<FailureCode>, RowError> {
    if s == NA {
        return Ok(None);
    }
    FailureCode::parse(s).map(Some).ok_or_else(|| RowError(format!("unknown failure code '{s}'")))
}

fn parse_index(s: &str) -> std::result::Result<usize, RowError> {
    match s.parse::<usize>() {
        Ok(j) if j >= 1 => Ok(j - 1),
        _ => Err(RowError(format!("bad variable index '{s}'"))),
    }
}

struct Row {
    method: MethodId,
    outcome: VariableOutcome,
    method_failure: Option<FailureCode>,
    lambda: Option<f64>,
    model: Vec<usize>,
    validation_r2: Option<f64>,
    seconds: f64,
}

fn parse_row(f: &[&str]) -> std::result::Result<Row, RowError> {
    let method: MethodId = f[3].parse().map_err(|_| RowError(format!("unknown method '{}'", f[3])))?;
    let outcome = VariableOutcome {
        variable: parse_index(f[4])?,
        selected: parse_bool(f[5])?,
        estimate: parse_f64(f[6])?,
        lower: parse_f64(f[7])?,
        upper: parse_f64(f[8])?,
        p_value: parse_f64(f[9])?,
        target: parse_f64(f[10])?,
        covered: parse_opt_bool(f[11])?,
        excludes_zero: parse_opt_bool(f[12])?,
        width: parse_f64(f[13])?,
        flag_infinite: parse_bool(f[14])?,
        flag_excludes_estimate: parse_bool(f[15])?,
        failure: parse_code(f[16])?,
    };
    let model = if f[19].is_empty() {
        Vec::new()
    } else {
        f[19].split(';').map(parse_index).collect::<std::result::Result<_, _>>()?
    };
    Ok(Row {
        method,
        outcome,
        method_failure: parse_code(f[17])?,
        lambda: parse_f64(f[18])?,
        model,
        validation_r2: parse_f64(f[20])?,
        seconds: parse_f64(f[21])?.unwrap_or(0.0),
    })
}

fn assemble(scenario_id: &str, iteration: usize, seed: u64, rows: Vec<Row>) -> IterationRecord {
    let mut methods: Vec<MethodIteration> = Vec::new();
    let mut timings = Vec::new();
    for r in rows {
        match methods.last_mut() {
            Some(m) if m.method == r.method => m.outcomes.push(r.outcome),
            _ => {
                timings.push((r.method, Duration::from_secs_f64(r.seconds.max(0.0))));
                methods.push(MethodIteration {
                    method: r.method,
                    model: r.model,
                    lambda: r.lambda,
                    validation_r2: r.validation_r2,
                    failure: r.method_failure,
                    outcomes: vec![r.outcome],
                });
            }
        }
    }
    IterationRecord { scenario_id: scenario_id.to_string(), iteration, seed, methods, timings }
}

/// Committed iterations of a record file and the byte length they occupy.
pub struct Loaded {
    pub records: Vec<IterationRecord>,
    pub committed_len: u64,
}

/// Reads a record file, checking row checksums, iteration order, seeds and the
/// method list. Anything after the last commit is ignored.
pub fn load_records(path: &Path, scenario_id: &str, master_seed: u64, methods: &[MethodId], p: usize) -> Result<Loaded> {
    let corrupt = |line: usize, reason: String| Error::Corrupt { path: path.to_path_buf(), reason: format!("line {line}: {reason}") };
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let mut lines = text.split_inclusive('\n');
    let mut offset = 0u64;
    match lines.next() {
        Some(h) if h.trim_end_matches(['\n', '\r']) == header() && h.ends_with('\n') => offset += h.len() as u64,
        Some(h) if !h.ends_with('\n') && header().starts_with(h) => {
            return Ok(Loaded { records: Vec::new(), committed_len: 0 });
        }
        None => return Ok(Loaded { records: Vec::new(), committed_len: 0 }),
        Some(_) => return Err(corrupt(1, "unexpected header".into())),
    }
    let mut records = Vec::new();
    let mut committed_len = offset;
    let mut block = String::new();
    let mut pending: Vec<Vec<String>> = Vec::new();
    for (k, raw) in lines.enumerate() {
        let lineno = k + 2;
        offset += raw.len() as u64;
        if !raw.ends_with('\n') {
            // Torn final write.
            break;
        }
        let line = raw.trim_end_matches(['\n', '\r']);
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != RECORD_COLUMNS.len() {
            return Err(corrupt(lineno, format!("expected {} fields, found {}", RECORD_COLUMNS.len(), fields.len())));
        }
        let (body, sum) = fields.split_at(fields.len() - 1);
        if checksum(body) != sum[0] {
            return Err(corrupt(lineno, "row checksum mismatch".into()));
        }
        if fields[3] != COMMIT {
            block.push_str(raw);
            pending.push(fields);
            continue;
        }
        let iteration = records.len();
        if fields[0] != scenario_id {
            return Err(corrupt(lineno, format!("scenario '{}' where '{scenario_id}' was expected", fields[0])));
        }
        if fields[1] != iteration.to_string() {
            return Err(corrupt(lineno, format!("iteration {} where {iteration} was expected", fields[1])));
        }
        let seed = iteration_seed(master_seed, scenario_id, iteration);
        if fields[2] != seed.to_string() {
            return Err(corrupt(lineno, "seed does not match the master seed of this run".into()));
        }
        if fields[RECORD_COLUMNS.len() - 2] != format!("{:016x}", fnv1a(block.as_bytes())) {
            return Err(corrupt(lineno, "iteration block checksum mismatch".into()));
        }
        let mut rows = Vec::with_capacity(pending.len());
        for f in pending.drain(..) {
            if f[0] != fields[0] || f[1] != fields[1] || f[2] != fields[2] {
                return Err(corrupt(lineno, "row keys differ from their commit".into()));
            }
            let refs: Vec<&str> = f.iter().map(String::as_str).collect();
            rows.push(parse_row(&refs).map_err(|RowError(e)| corrupt(lineno, e))?);
        }
        let rec = assemble(scenario_id, iteration, seed, rows);
        let found: Vec<MethodId> = rec.methods.iter().map(|m| m.method).collect();
        if found != methods {
            return Err(corrupt(lineno, "method list differs from this run".into()));
        }
        if rec.methods.iter().any(|m| m.outcomes.len() != p || m.outcomes.iter().enumerate().any(|(j, o)| o.variable != j)) {
            return Err(corrupt(lineno, "variable rows incomplete".into()));
        }
        records.push(rec);
        block.clear();
        committed_len = offset;
    }
    Ok(Loaded { records, committed_len })
}

/// Appends iterations to a scenario's record file.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    /// Opens `path` for appending. With `resume`, committed iterations are loaded
    /// and an uncommitted tail is cut; otherwise the file is started afresh.
    pub fn open(
        path: &Path,
        scenario_id: &str,
        master_seed: u64,
        methods: &[MethodId],
        p: usize,
        resume: bool,
    ) -> Result<(Self, Vec<IterationRecord>)> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut records = Vec::new();
        let file = if resume && path.exists() {
            let loaded = load_records(path, scenario_id, master_seed, methods, p)?;
            records = loaded.records;
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(loaded.committed_len)?;
            let mut f = OpenOptions::new().append(true).open(path)?;
            if loaded.committed_len == 0 {
                writeln!(f, "{}", header())?;
            }
            f
        } else {
            let mut f = File::create(path)?;
            writeln!(f, "{}", header())?;
            f
        };
        Ok((Self { path: path.to_path_buf(), out: BufWriter::new(file) }, records))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and flushes one committed iteration.
    pub fn append(&mut self, rec: &IterationRecord) -> Result<()> {
        self.out.write_all(encode_iteration(rec).as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{Scenario, Setup, SimulationDesign};
    use crate::harness::runner::{run_iteration, RunSettings};

    fn design() -> SimulationDesign {
        SimulationDesign::resolve(&Scenario {
            setup: Setup::Toy,
            correlation: "correlated".into(),
            coefficients: "v12".into(),
            target_r2: 0.5,
            obs_per_variable: 10,
        })
        .unwrap()
    }

    fn records(n: usize) -> (SimulationDesign, Vec<IterationRecord>) {
        let d = design();
        let s = RunSettings::for_setup(Setup::Toy, 0.1);
        let recs = (0..n).map(|i| run_iteration(&d, &MethodId::ALL, &s, 11, i)).collect();
        (d, recs)
    }

    #[test]
    fn round_trip_is_exact() {
        let (d, recs) = records(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let id = d.scenario.id();
        let (mut w, old) = RecordWriter::open(&path, &id, 11, &MethodId::ALL, 4, true).unwrap();
        assert!(old.is_empty());
        for r in &recs {
            w.append(r).unwrap();
        }
        drop(w);
        let loaded = load_records(&path, &id, 11, &MethodId::ALL, 4).unwrap();
        assert_eq!(loaded.records.len(), 3);
        for (a, b) in loaded.records.iter().zip(&recs) {
            assert_eq!(a.methods, b.methods);
            assert_eq!(a.seed, b.seed);
        }
    }

    #[test]
    fn torn_tail_is_dropped_and_tampering_is_refused() {
        let (d, recs) = records(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let id = d.scenario.id();
        let (mut w, _) = RecordWriter::open(&path, &id, 11, &MethodId::ALL, 4, false).unwrap();
        w.append(&recs[0]).unwrap();
        drop(w);
        let good = std::fs::read_to_string(&path).unwrap();
        let second = encode_iteration(&recs[1]);
        // Half of the next iteration, cut mid-line.
        std::fs::write(&path, format!("{good}{}", &second[..second.len() / 2])).unwrap();
        let (_, old) = RecordWriter::open(&path, &id, 11, &MethodId::ALL, 4, true).unwrap();
        assert_eq!(old.len(), 1);
        assert_eq!(std::fs::read_to_string(&path).unwrap(), good);

        let tampered = good.replacen(",Full,1,1,", ",Full,1,0,", 1);
        assert_ne!(tampered, good);
        std::fs::write(&path, tampered).unwrap();
        assert!(matches!(load_records(&path, &id, 11, &MethodId::ALL, 4), Err(Error::Corrupt { .. })));

        std::fs::write(&path, &good).unwrap();
        assert!(matches!(load_records(&path, &id, 12, &MethodId::ALL, 4), Err(Error::Corrupt { .. })));
        assert!(matches!(load_records(&path, &id, 11, &[MethodId::Full], 4), Err(Error::Corrupt { .. })));
    }
}
