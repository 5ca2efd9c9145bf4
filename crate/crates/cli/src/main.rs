use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use selinf::analysis::{analyze, load_bodyfat, read_table, write_reports, AnalyzeOptions, MethodReport};
use selinf::datagen::Setup;
use selinf::estimands::FailureCode;
use selinf::harness::{run_grid, GridConfig, MethodId, RunConfig};
use selinf::report::{build_report, ReportKind};
use selinf::Error;

#[derive(Parser)]
#[command(name = "selinf", version, about = "Post-selection inference simulations and data analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid and write records and summaries.
    Simulate(SimulateArgs),
    /// Project summary files onto the data of one figure.
    Report(ReportArgs),
    /// Run the methods on a dataset.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in grid: toy-full or realistic-full (repeatable).
    #[arg(long)]
    grid: Vec<String>,
    /// Inline grid setup (toy or realistic), used with the factor flags below.
    #[arg(long)]
    setup: Option<String>,
    #[arg(long, value_delimiter = ',')]
    correlations: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    coefficients: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    r2: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    opv: Vec<usize>,
    /// Comma-separated method ids, or "all".
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "SELINF_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    posi_mc: Option<usize>,
    #[arg(long)]
    neg_mc: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "selinf-out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// coverage, power, type1, model-selection, freq-vs-coverage, width, stability or prediction.
    #[arg(long)]
    kind: String,
    /// Summary directory or summary file.
    #[arg(long)]
    input: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Delimiter-separated data file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Treat the file as the body-fat data: convert units, drop case 42, outcome siri.
    #[arg(long)]
    bodyfat: bool,
    #[arg(long)]
    outcome: Option<String>,
    /// Comma-separated predictor columns; all other columns when omitted.
    #[arg(long, value_delimiter = ',')]
    predictors: Vec<String>,
    #[arg(long, default_value = "Full,Lasso-CV-Split,Lasso-CV-PoSI,Lasso-CV-SI")]
    methods: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    n_boot: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    posi_mc: usize,
    /// Tidy CSV output; a manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure class deciding the exit code.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config(_)) => Failure::Usage(e),
            _ => Failure::Runtime(e),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn resolve_simulate(args: &SimulateArgs) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::from_file(p).map_err(usage)?,
        None => RunConfig::new(Vec::new()),
    };
    let mut grids = Vec::new();
    for g in &args.grid {
        grids.push(GridConfig::builtin(g).map_err(usage)?);
    }
    if let Some(setup) = &args.setup {
        let setup: Setup = setup.parse().map_err(usage)?;
        let full = GridConfig::full(setup);
        let or_full = |given: &Vec<String>, all: Vec<String>| if given.is_empty() { all } else { given.clone() };
        grids.push(GridConfig {
            setup,
            correlations: or_full(&args.correlations, full.correlations),
            coefficients: or_full(&args.coefficients, full.coefficients),
            r2: if args.r2.is_empty() { full.r2 } else { args.r2.clone() },
            opv: if args.opv.is_empty() { full.opv } else { args.opv.clone() },
        });
    } else if !(args.correlations.is_empty() && args.coefficients.is_empty() && args.r2.is_empty() && args.opv.is_empty()) {
        return Err(usage(anyhow::anyhow!("--correlations/--coefficients/--r2/--opv need --setup")));
    }
    if !grids.is_empty() {
        cfg.grid = grids;
    }
    if let Some(m) = &args.methods {
        cfg.methods = MethodId::parse_list(m).map_err(usage)?.iter().map(|m| m.as_str().to_string()).collect();
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = args.posi_mc {
        cfg.posi_mc = Some(v);
    }
    if let Some(v) = args.neg_mc {
        cfg.neg_mc = v;
    }
    if let Some(v) = args.folds {
        cfg.cv_folds = v;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = resolve_simulate(&args)?;
    let start = Instant::now();
    let mut progress = |k: usize, total: usize, s: &selinf::harness::ScenarioSummary| {
        let failures: Vec<String> = s
            .methods
            .iter()
            .filter_map(|m| {
                let rate: f64 = m.failure_rates.iter().zip(FailureCode::ALL).filter(|(_, c)| *c != FailureCode::NoSelection).map(|(r, _)| r).sum();
                (rate > 0.0).then(|| format!("{} {:.1}%", m.method, 100.0 * rate))
            })
            .collect();
        let failures = if failures.is_empty() { "none".to_string() } else { failures.join(", ") };
        eprintln!("[{k}/{total}] {} ({:.0}s) failures: {failures}", s.scenario.id(), start.elapsed().as_secs_f64());
    };
    let outcome = run_grid(&cfg, &args.out, &mut progress).context("simulation failed")?;
    eprintln!("wrote {} scenario summaries to {}", outcome.summaries.len(), outcome.out_dir.display());
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let kind: ReportKind = args.kind.parse().map_err(usage)?;
    let text = build_report(kind, &args.input)?;
    match &args.out {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            let manifest = format!("command = \"report\"\nkind = \"{kind}\"\ninput = {:?}\n", args.input.display().to_string());
            std::fs::write(manifest_path(p), manifest).context("writing manifest")?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.toml")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn print_reports(reports: &[MethodReport]) {
    let mut out = std::io::stdout().lock();
    for r in reports {
        let status = r.failure.map_or(String::new(), |c| format!(" [{}]", c.as_str()));
        let _ = writeln!(out, "{}{status}  model: {{{}}}", r.method, r.model.join(", "));
        let _ = writeln!(out, "  {:<12} {:>10} {:>10} {:>10} {:>8} {:>6}  flags", "variable", "estimate", "lower", "upper", "p", "boot");
        for v in r.variables.iter().filter(|v| v.selected) {
            let mut flags = Vec::new();
            if v.flag_infinite {
                flags.push("infinite");
            }
            if v.flag_excludes_estimate {
                flags.push("excludes-estimate");
            }
            if let Some(c) = v.failure {
                flags.push(c.as_str());
            }
            let _ = writeln!(
                out,
                "  {:<12} {:>10} {:>10} {:>10} {:>8} {:>5.0}%  {}",
                v.name,
                fmt_opt(v.estimate),
                fmt_opt(v.lower),
                fmt_opt(v.upper),
                fmt_opt(v.p_value),
                100.0 * v.boot_freq,
                flags.join(" ")
            );
        }
    }
}

fn analyze_cmd(args: AnalyzeArgs) -> Result<(), Failure> {
    let methods = MethodId::parse_list(&args.methods).map_err(usage)?;
    let options = AnalyzeOptions {
        methods,
        alpha: args.alpha,
        n_boot: args.n_boot,
        seed: args.seed,
        posi_mc: args.posi_mc,
        ..Default::default()
    };
    let (table, default_outcome) = if args.bodyfat {
        (load_bodyfat(&args.data)?, Some(selinf::analysis::BODYFAT_OUTCOME.to_string()))
    } else {
        (read_table(&args.data)?, None)
    };
    let outcome = args
        .outcome
        .clone()
        .or(default_outcome)
        .ok_or_else(|| usage(anyhow::anyhow!("--outcome is required")))?;
    let predictors = (!args.predictors.is_empty()).then_some(args.predictors.as_slice());
    let data = table.design(&outcome, predictors)?;
    let reports = analyze(&data, &options)?;
    print_reports(&reports);
    if let Some(p) = &args.out {
        let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_reports(f, &reports)?;
        let manifest = format!(
            "command = \"analyze\"\ndata = {:?}\nbodyfat = {}\noutcome = {:?}\npredictors = {:?}\nmethods = {:?}\nalpha = {}\nn_boot = {}\nseed = {}\nposi_mc = {}\nneg_mc = {}\ncv_folds = {}\n",
            args.data.display().to_string(),
            args.bodyfat,
            outcome,
            data.names,
            options.methods.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
            options.alpha,
            options.n_boot,
            options.seed,
            options.posi_mc,
            options.neg_mc,
            options.cv_folds,
        );
        std::fs::write(manifest_path(p), manifest).context("writing manifest")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
        Command::Analyze(a) => analyze_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
