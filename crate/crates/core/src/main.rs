use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use onebit_track::estimators::Algorithm;
use onebit_track::experiments::validate::run_all;
use onebit_track::experiments::{run_sweep, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "onebit-track", version, about = "Phase-noise tracking with 1-bit quantization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an Es/N0 sweep and write the results as CSV.
    Sweep {
        /// TOML config file; defaults are used for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of pilot_only,kalman,rts.
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<Mode>>,
        /// Comma-separated subset of ls,em,scoring.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
    },
    /// Run the built-in oracle and property checks.
    Validate,
    /// Print the resolved configuration.
    ShowConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ExperimentConfig::default()),
    }
}

fn sweep(
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    modes: Option<Vec<Mode>>,
    algorithms: Option<Vec<Algorithm>>,
) -> Result<()> {
    let mut cfg = load(config.as_ref())?;
    if let Some(n) = trials {
        cfg.experiments.trials = n;
    }
    if let Some(s) = seed {
        cfg.experiments.seed = s;
    }
    if let Some(m) = modes {
        cfg.experiments.modes = m;
    }
    if let Some(a) = algorithms {
        cfg.experiments.algorithms = a;
    }
    cfg.validate().context("invalid configuration")?;

    // open the output before the (long) sweep so path errors surface early
    let sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let result = run_sweep(&cfg)?;
    result.write_csv(sink).context("writing CSV")?;

    let d = result.diagnostics;
    if d.degenerate_ls > 0 || d.scoring_non_finite > 0 || d.scoring_unsettled > 0 {
        eprintln!(
            "diagnostics: degenerate_ls={} scoring_non_finite={} scoring_unsettled={}/{}",
            d.degenerate_ls, d.scoring_non_finite, d.scoring_unsettled, d.scoring_runs
        );
    }
    Ok(())
}

fn validate() -> Result<bool> {
    let checks = run_all();
    let mut ok = true;
    for c in &checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Sweep {
            config,
            out,
            trials,
            seed,
            modes,
            algorithms,
        } => sweep(config, out, trials, seed, modes, algorithms).map(|_| true),
        Command::Validate => validate(),
        Command::ShowConfig { config } => load(config.as_ref()).and_then(|cfg| {
            cfg.validate().context("invalid configuration")?;
            print!("{}", cfg.to_toml_string());
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
