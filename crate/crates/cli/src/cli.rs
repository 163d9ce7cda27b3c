//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use outliers_core::region::Region;

use crate::config::{Analysis, ConfigError, ExperimentConfig};
use crate::figures::figure_config;
use crate::report::{evaluate_checks, ReportError, RunReport};
use crate::run::{run, RunError};
use crate::svg::{render_scatter, Layer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "outliers", version, about = "Outlier eigenvalues of deformed i.i.d. random matrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment config and write its report, point CSV and plot.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Plot the points of a saved report.
    Plot {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a lattice against the support of the limiting law of a config's deformation.
    SupportGrid {
        config: PathBuf,
        /// Lattice points per side.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Half-width of the square lattice.
        #[arg(long, default_value_t = 2.0)]
        extent: f64,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run one of the shipped figure configs.
    ReproduceFigure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=5))]
        figure: u8,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Exit with status 4 when a configured check fails.
    #[arg(long)]
    pub assert: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    AllTrialsFailed(String),
    #[error("{failed} check(s) failed")]
    Checks { failed: usize },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io(_) | CliError::Report(ReportError::Io { .. }) => EXIT_IO,
            CliError::Config(_) | CliError::Run(RunError::Config(_)) | CliError::Report(_) => EXIT_CONFIG,
            CliError::Run(_) | CliError::AllTrialsFailed(_) => EXIT_NUMERICAL,
            CliError::Checks { .. } => EXIT_CHECK,
        }
    }
}

/// Parses `args` and executes; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, flags } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            run_and_write(cfg, &stem_of(&config), &flags)
        }
        Command::Plot { report, out } => {
            let r = RunReport::load(&report)?;
            std::fs::write(&out, plot_report(&r)).map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
            Ok(())
        }
        Command::SupportGrid {
            config,
            grid,
            extent,
            flags,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if !matches!(cfg.analysis, Analysis::SupportTestGrid { .. }) {
                cfg.analysis = Analysis::SupportTestGrid {
                    grid,
                    extent,
                    atoms: outliers_core::spectral::DEFAULT_PROXY_ATOMS,
                    band: 0.02,
                };
                cfg.checks.clear();
                cfg.validate()?;
            }
            run_and_write(cfg, &format!("{}.support", stem_of(&config)), &flags)
        }
        Command::ReproduceFigure { figure, flags } => {
            let cfg = figure_config(figure)?;
            run_and_write(cfg, &format!("fig{figure}"), &flags)
        }
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn run_and_write(mut cfg: ExperimentConfig, stem: &str, flags: &RunFlags) -> Result<(), CliError> {
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = flags.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    let report = run(&cfg, flags.threads)?;
    std::fs::create_dir_all(&flags.out_dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", flags.out_dir.display())))?;
    let base = flags.out_dir.join(stem);
    let with_ext = |ext: &str| PathBuf::from(format!("{}.{ext}", base.display()));
    report.save(&with_ext("report.json"))?;
    report.write_points_csv(&with_ext("points.csv"))?;
    let svg_path = with_ext("svg");
    std::fs::write(&svg_path, plot_report(&report)).map_err(|e| CliError::Io(format!("cannot write {}: {e}", svg_path.display())))?;

    for (k, v) in &report.aggregates {
        println!("{k} = {v}");
    }
    let failed = report.failed_trials();
    if failed > 0 {
        eprintln!("warning: {failed} of {} trials failed; see the report", report.trials.len());
        if failed == report.trials.len() {
            return Err(CliError::AllTrialsFailed(format!("all {failed} trials failed")));
        }
    }
    let outcomes = evaluate_checks(&report);
    let mut failures = 0;
    for c in &outcomes {
        let shown = c.value.map_or("missing".to_string(), |v| v.to_string());
        println!("check {} = {} {}", c.metric, shown, if c.passed { "PASS" } else { "FAIL" });
        failures += (!c.passed) as usize;
    }
    if flags.assert && failures > 0 {
        return Err(CliError::Checks { failed: failures });
    }
    Ok(())
}

/// SVG of the report's points over its region (and partition cells, if any).
pub fn plot_report(report: &RunReport) -> String {
    let series = report.point_series();
    let layers: Vec<Layer<'_>> = series
        .iter()
        .filter(|(_, p)| !p.is_empty())
        .map(|(label, points)| Layer { label, points })
        .collect();
    // Rescaled and limit-law samples live in their own coordinates.
    let overlays: Vec<Region> = match &report.config.analysis {
        Analysis::StableFluct { .. } | Analysis::JordanFluct { .. } | Analysis::AppendixClt { .. } => Vec::new(),
        Analysis::GafCompare { partition, .. } => std::iter::once(report.config.region.clone()).chain(partition.iter().cloned()).collect(),
        _ => vec![report.config.region.clone()],
    };
    render_scatter(&layers, &overlays)
}
