//! `hqrc` — generate trajectories, run experiments and sweeps, re-aggregate reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use hqrc::dynamics::{integrate_rk4_substeps, Normalizer};
use hqrc::experiment::report::{read_report_json, reaggregate, write_forecast_csv};
use hqrc::experiment::sweep::run_sweep_with;
use hqrc::experiment::{
    aggregate, emit_report, run_experiment, CellResult, ExperimentConfig, Format, Mode, SweepGrid,
    SweepReport, SystemKind,
};
use hqrc::statevector::Shots;
use hqrc::HqrcError;

#[derive(Parser)]
#[command(name = "hqrc", version, about = "Hybrid quantum reservoir computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a ground-truth trajectory and write it as CSV.
    Generate(GenerateArgs),
    /// Train and forecast with one configuration over one or more seeds.
    Run(RunArgs),
    /// Run a configuration grid.
    Sweep(SweepArgs),
    /// Classical echo-state baseline (same options as `run`).
    Baseline(BaselineArgs),
    /// Recompute group statistics from stored JSON reports.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SystemArg {
    Lorenz63,
    DoubleScroll,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the system kind of the configuration.
    #[arg(long, value_enum)]
    system: Option<SystemArg>,
    /// Integration steps; defaults to train + test length.
    #[arg(long)]
    steps: Option<usize>,
    /// Divide by the training-segment maximum.
    #[arg(long)]
    normalized: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run seeds 0..n.
    #[arg(long)]
    seeds: Option<u64>,
    /// Shot count per basis, or `exact`.
    #[arg(long)]
    shots: Option<Shots>,
    /// Coherent angle-noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Skip the per-seed forecast CSV and model JSON files.
    #[arg(long)]
    no_trajectories: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,
    /// Reservoir size of the baseline.
    #[arg(long)]
    n_res: Option<usize>,
    #[arg(long)]
    no_trajectories: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct ReportArgs {
    /// JSON reports written by `run`, `baseline` or `sweep`.
    #[arg(long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    format: FormatArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_by_extension<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let parsed = if is_toml {
        toml::from_str(&text).map_err(HqrcError::from)
    } else {
        serde_json::from_str(&text).map_err(HqrcError::from)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    })
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.shots {
            cfg.noise.shots = s;
        }
        if let Some(s) = self.sigma {
            cfg.noise.sigma = s;
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        } else if let Some(n) = self.seeds {
            cfg.seeds = (0..n).collect();
        }
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.flush()?;
    Ok(())
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(s) = args.system {
        cfg.system.kind = match s {
            SystemArg::Lorenz63 => SystemKind::Lorenz63,
            SystemArg::DoubleScroll => SystemKind::DoubleScroll,
        };
        cfg.system.parameters = None;
    }
    cfg.validate()?;
    let sys = &cfg.system;
    let steps = args.steps.unwrap_or(sys.train_steps + sys.test_steps);
    let mut truth = integrate_rk4_substeps(&sys.ode()?, sys.initial()?, sys.dt()?, steps, sys.substeps()?)?;
    if args.normalized {
        let fit_len = (sys.train_steps + 1).min(truth.len());
        truth = Normalizer::fit(&truth.slice(0, fit_len))?.apply(&truth);
    }
    fs::create_dir_all(&args.out)?;
    let names = cfg.system.ode()?.component_names();
    let path = args.out.join("truth.csv");
    truth.save_csv(&path, &names)?;
    eprintln!("wrote {} points to {}", truth.len(), path.display());
    Ok(())
}

fn run_seeds(cfg: &ExperimentConfig, common: &Common, trajectories: bool, stem: &str) -> anyhow::Result<()> {
    cfg.validate()?;
    fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("config.json"), cfg)?;
    let names = cfg.system.ode()?.component_names();
    let hash = cfg.config_hash();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(common.workers.max(1)).build()?;
    let results: Vec<(u64, hqrc::Result<hqrc::experiment::RunOutput>)> =
        pool.install(|| cfg.seeds.par_iter().map(|&s| (s, run_experiment(cfg, s))).collect());

    let mut cells = Vec::with_capacity(results.len());
    for (seed, res) in results {
        match res {
            Ok(out) => {
                let s = &out.summary;
                eprintln!(
                    "seed {seed}: VPT {:.2}{} overlap {:.3} ({:.1}s)",
                    s.vpt,
                    if s.censored { " (censored)" } else { "" },
                    s.overlap.fraction_inside,
                    s.wall_clock_s
                );
                if trajectories {
                    let f = File::create(common.out.join(format!("forecast_seed{seed}.csv")))?;
                    let t0 = cfg.system.train_steps as f64 * out.truth.dt;
                    write_forecast_csv(&out.truth, &out.prediction, &names, t0, BufWriter::new(f))?;
                    fs::write(common.out.join(format!("model_seed{seed}.json")), out.model.to_json()?)?;
                }
                cells.push(CellResult {
                    config_hash: hash.clone(),
                    seed,
                    params: Default::default(),
                    summary: Some(out.summary),
                    error: None,
                });
            }
            Err(e) => {
                eprintln!("seed {seed}: failed: {e}");
                cells.push(CellResult {
                    config_hash: hash.clone(),
                    seed,
                    params: Default::default(),
                    summary: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let report = SweepReport {
        groups: aggregate(&cells),
        cells,
    };
    for p in emit_report(&report, &common.out, stem, &[Format::Csv, Format::Json])? {
        eprintln!("wrote {}", p.display());
    }
    if report.cells.iter().all(|c| c.summary.is_none()) {
        bail!("every seed failed");
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let common = &args.common;
    let mut grid: SweepGrid = match &common.config {
        Some(p) => parse_by_extension(p)?,
        None => SweepGrid::default(),
    };
    common.apply(&mut grid.template);
    if common.seed.is_some() || common.seeds.is_some() {
        grid.seeds = grid.template.seeds.clone();
    }
    grid.template.validate()?;
    fs::create_dir_all(&common.out)?;
    write_json(&common.out.join("grid.json"), &grid)?;
    let total = grid.points()?.len() * grid.seeds().len();
    let done = AtomicUsize::new(0);
    let report = run_sweep_with(&grid, common.workers, |c| {
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        match &c.summary {
            Some(s) => eprintln!("[{k}/{total}] {} seed {}: VPT {:.2}", &c.config_hash[..12], c.seed, s.vpt),
            None => eprintln!(
                "[{k}/{total}] {} seed {}: failed: {}",
                &c.config_hash[..12],
                c.seed,
                c.error.as_deref().unwrap_or("")
            ),
        }
    })?;
    for p in emit_report(&report, &common.out, "sweep", &[Format::Csv, Format::Json])? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn report(args: ReportArgs) -> anyhow::Result<()> {
    let mut cells = Vec::new();
    for p in &args.inputs {
        let r = read_report_json(p).with_context(|| format!("reading {}", p.display()))?;
        cells.extend(r.cells);
    }
    let merged = reaggregate(&SweepReport { cells, groups: vec![] });
    let formats: &[Format] = match args.format {
        FormatArg::Csv => &[Format::Csv],
        FormatArg::Json => &[Format::Json],
        FormatArg::Both => &[Format::Csv, Format::Json],
    };
    for p in emit_report(&merged, &args.out, "report", formats)? {
        eprintln!("wrote {}", p.display());
    }
    for g in &merged.groups {
        println!(
            "{}  runs {:>3}  median {:>7.3}  IQR [{:.3}, {:.3}]  max {:.3}",
            &g.config_hash[..12],
            g.runs,
            g.median,
            g.q1,
            g.q3,
            g.max
        );
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => {
            let mut cfg = load_config(a.common.config.as_deref())?;
            a.common.apply(&mut cfg);
            run_seeds(&cfg, &a.common, !a.no_trajectories, "runs")
        }
        Command::Baseline(a) => {
            let mut cfg = load_config(a.common.config.as_deref())?;
            a.common.apply(&mut cfg);
            cfg.mode = Mode::ClassicalEsn;
            if let Some(n) = a.n_res {
                cfg.esn.n_res = n;
            }
            run_seeds(&cfg, &a.common, !a.no_trajectories, "baseline")
        }
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

/// Configuration and usage problems exit with 2, everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HqrcError>() {
        Some(HqrcError::Config(_)) | Some(HqrcError::Usage(_)) | Some(HqrcError::Serialization(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
