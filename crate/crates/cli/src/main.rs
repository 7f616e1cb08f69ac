use clap::{Args, Parser, Subcommand};
use spde_homog::experiments::{self, ExperimentConfig, ExperimentReport, VarianceTarget};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spde-homog", version, about = "Homogenisation experiments for stochastic heat equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `study.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config `output` field, then `out/<study>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `study.paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Invariant density, effective diffusivity and spectral gap.
    Cell(Common),
    /// Noise assumption validators and Λ-series convergence.
    NoiseCheck(Common),
    /// Sample paths written as CSV.
    Simulate(Common),
    /// Pathwise convergence study for the strong-noise limit.
    Converge(Common),
    /// Exact-covariance study against a weak, white-noise or smoothed limit.
    Variance {
        #[command(flatten)]
        common: Common,
        /// `thm2`, `thm3` or `corollary`; defaults to `study.target`.
        #[arg(long)]
        target: Option<String>,
    },
    /// Semigroup remainder and boundary-layer scaling.
    Semigroup(Common),
}

fn load(common: &Common) -> spde_homog::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.study.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.study.paths = paths;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &ExperimentReport) {
    println!("study {}  config {}  seed {}", report.study, &report.config_hash[..12], report.seed);
    for (k, v) in &report.summary {
        println!("  {k} = {v:.6e}");
    }
    for note in &report.notes {
        println!("  note: {note}");
    }
    for v in &report.verdicts {
        let mark = if v.passed { "PASS" } else { "FAIL" };
        println!("  {mark} {} = {:.6e} ({:?} {:.6e})", v.name, v.value, v.comparison, v.tolerance);
    }
}

fn run(cli: Cli) -> spde_homog::Result<bool> {
    let (common, report) = match &cli.command {
        Command::Cell(c) => (c, experiments::run_cell(&load(c)?)?),
        Command::NoiseCheck(c) => (c, experiments::run_noise_check(&load(c)?)?),
        Command::Simulate(c) => (c, experiments::run_simulate(&load(c)?)?),
        Command::Converge(c) => (c, experiments::run_thm1_convergence(&load(c)?)?),
        Command::Semigroup(c) => (c, experiments::run_semigroup_study(&load(c)?)?),
        Command::Variance { common, target } => {
            let cfg = load(common)?;
            let name = target.clone().or_else(|| cfg.study.target.clone()).unwrap_or_else(|| "thm3".into());
            (common, experiments::run_variance_study(&cfg, VarianceTarget::parse(&name)?)?)
        }
    };
    let cfg = load(common)?;
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&report.study));
    let written = experiments::emit_report(&report, &dir)?;
    if !common.quiet {
        print_summary(&report);
        println!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
