use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use solicit::harness::{self, Mode, Scenario};
use solicit::{lloyd_max_normal, waterfill, Error};

#[derive(Parser)]
#[command(
    name = "solicit",
    version,
    about = "Preference solicitation and assortment experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Override the configured number of trials per point.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the configured master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank-capped water-filling plan for a prior spectrum.
    Waterfill {
        /// Prior covariance eigenvalues, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        prior_eigs: Vec<f64>,
        #[arg(long)]
        m: usize,
        /// Response noise standard deviation.
        #[arg(long)]
        sigma: f64,
    },
    /// Lloyd-Max quantizer for the standard normal.
    Quantize {
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Depth or breadth sweep under N(0, I_d) with unit noise.
    Sweep {
        #[arg(long)]
        mode: SweepMode,
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long, default_value_t = harness::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = harness::DEFAULT_SEED)]
        seed: u64,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Plot one or more sweep CSV files.
    Plot {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Depth,
    Breadth,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return err.exit_code() as u8;
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            svg,
            trials,
            seed,
        } => {
            let mut scenario =
                harness::load_config(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(t) = trials {
                scenario.trials = t;
            }
            if let Some(s) = seed {
                scenario.master_seed = s;
            }
            sweep_to_files(&scenario, Some(&out), svg.as_ref())
        }
        Command::Waterfill { prior_eigs, m, sigma } => print_waterfill(&prior_eigs, m, sigma),
        Command::Quantize { k, tol } => print_quantizer(k, tol),
        Command::Sweep {
            mode,
            d,
            values,
            trials,
            seed,
            out,
            svg,
        } => {
            let mode = match mode {
                SweepMode::Depth => Mode::Depth,
                SweepMode::Breadth => Mode::Breadth,
            };
            let scenario = Scenario::standard(mode, d, values, trials, seed)?;
            sweep_to_files(&scenario, out.as_ref(), svg.as_ref())
        }
        Command::Plot { inputs, out } => {
            let mut rows = Vec::new();
            for path in &inputs {
                let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
                rows.extend(harness::read_csv(file).with_context(|| format!("reading {}", path.display()))?);
            }
            harness::emit_svg(&rows, &out)?;
            Ok(())
        }
    }
}

fn sweep_to_files(scenario: &Scenario, out: Option<&PathBuf>, svg: Option<&PathBuf>) -> Result<()> {
    let summaries = harness::run_sweep(scenario)?;
    match out {
        Some(path) => harness::emit_csv(&summaries, path)?,
        None => harness::write_csv(&summaries, io::stdout().lock())?,
    }
    if let Some(path) = svg {
        harness::emit_svg(&summaries, path)?;
    }
    Ok(())
}

fn print_waterfill(eigs: &[f64], m: usize, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidInput("sigma must be positive".into()).into());
    }
    if eigs.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
        return Err(Error::InvalidInput("prior eigenvalues must be positive".into()).into());
    }
    let prior = DMatrix::from_diagonal(&DVector::from_column_slice(eigs));
    let plan = waterfill(&prior, m, sigma * sigma)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:>4}  {:>14}  {:>14}  {:>14}",
        "dir", "prior", "allocation", "posterior"
    )?;
    for i in 0..plan.dim() {
        writeln!(
            out,
            "{:>4}  {:>14.6}  {:>14.6}  {:>14.6}",
            i, plan.prior_eigs[i], plan.allocations[i], plan.posterior_eigs[i]
        )?;
    }
    writeln!(
        out,
        "active rank {}, common level {:.6}, posterior trace {:.6}",
        plan.active_rank,
        plan.common_level,
        plan.posterior_trace()
    )?;
    writeln!(out)?;
    writeln!(out, "dir,prior,allocation,posterior")?;
    for i in 0..plan.dim() {
        writeln!(
            out,
            "{},{},{},{}",
            i, plan.prior_eigs[i], plan.allocations[i], plan.posterior_eigs[i]
        )?;
    }
    Ok(())
}

fn print_quantizer(k: usize, tol: f64) -> Result<()> {
    let q = lloyd_max_normal(k, tol)?;
    let mut out = io::stdout().lock();
    writeln!(out, "levels      {}", q.levels())?;
    writeln!(out, "iterations  {}", q.iterations)?;
    writeln!(out, "distortion  {}", q.distortion)?;
    writeln!(out, "efficiency  {}", q.efficiency())?;
    writeln!(out, "centroids   {}", join(&q.centroids))?;
    writeln!(out, "boundaries  {}", join(&q.boundaries))?;
    Ok(())
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>().join(" ")
}
