//! Running scenarios and whole grids, with parallel iterations and resumable records.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{enumerate_scenarios, file_safe_id, RunConfig};
use super::methods::MethodId;
use super::runner::{run_iteration, IterationRecord, RunSettings};
use super::store::RecordWriter;
use super::summary::{summarize, write_summaries, ScenarioSummary};
use crate::datagen::SimulationDesign;
use crate::error::{Error, Result};

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))
}

/// Runs iterations `0..n_iter` of one scenario. With `records_path`, committed
/// iterations already on disk are reused and new ones appended as they finish,
/// in iteration order. The summary does not depend on `workers`.
pub fn run_scenario(
    design: &SimulationDesign,
    methods: &[MethodId],
    settings: &RunSettings,
    n_iter: usize,
    master_seed: u64,
    workers: usize,
    records_path: Option<&Path>,
) -> Result<ScenarioSummary> {
    if n_iter == 0 {
        return Err(Error::Config("n_iter must be at least 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Config("no methods given".into()));
    }
    let id = design.scenario.id();
    let p = design.scenario.p();
    let (mut writer, mut records) = match records_path {
        Some(path) => {
            let (w, r) = RecordWriter::open(path, &id, master_seed, methods, p, true)?;
            (Some(w), r)
        }
        None => (None, Vec::new()),
    };
    records.truncate(n_iter);
    let pool = pool(workers)?;
    let chunk = 4 * workers.max(1);
    let mut next = records.len();
    while next < n_iter {
        let end = (next + chunk).min(n_iter);
        let batch: Vec<IterationRecord> =
            pool.install(|| (next..end).into_par_iter().map(|i| run_iteration(design, methods, settings, master_seed, i)).collect());
        if let Some(w) = writer.as_mut() {
            for r in &batch {
                w.append(r)?;
            }
        }
        records.extend(batch);
        next = end;
    }
    Ok(summarize(&design.scenario, &design.true_support(), methods, &records))
}

/// Result of a grid run.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub summaries: Vec<ScenarioSummary>,
    pub out_dir: PathBuf,
}

/// Runs every scenario of `config`, writing `manifest.toml`, `records/<scenario>.csv`
/// and the summary files under `out_dir`. `progress` is called after each scenario.
pub fn run_grid(config: &RunConfig, out_dir: &Path, progress: &mut dyn FnMut(usize, usize, &ScenarioSummary)) -> Result<GridOutcome> {
    config.validate()?;
    let methods = config.method_ids()?;
    let scenarios = enumerate_scenarios(&config.grid)?;
    std::fs::create_dir_all(out_dir.join("records"))?;
    std::fs::write(out_dir.join("manifest.toml"), config.to_toml())?;
    let mut summaries = Vec::with_capacity(scenarios.len());
    for (k, sc) in scenarios.iter().enumerate() {
        let design = SimulationDesign::resolve(sc)?;
        let mut settings = RunSettings::for_setup(sc.setup, config.alpha);
        if let Some(mc) = config.posi_mc {
            settings.posi_mc = mc;
        }
        settings.neg_mc = config.neg_mc;
        settings.cv_folds = config.cv_folds;
        let path = out_dir.join("records").join(format!("{}.csv", file_safe_id(&sc.id())));
        let s = run_scenario(&design, &methods, &settings, config.iterations, config.seed, config.workers, Some(&path))?;
        progress(k + 1, scenarios.len(), &s);
        summaries.push(s);
    }
    write_summaries(out_dir, &summaries)?;
    Ok(GridOutcome { summaries, out_dir: out_dir.to_path_buf() })
}
