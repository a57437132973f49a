use clap::{Parser, Subcommand};
use dynpg::calibrate::calibrate;
use dynpg::config::Config;
use dynpg::suites::{leaves_table, run};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dynpg",
    about = "Residual verification suites for dynamical Poisson groupoids over sl(n)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the residual suites and write the report.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Restrict to one or more suites (repeatable).
        #[arg(long = "suite")]
        suites: Vec<String>,
        /// Write line-delimited residual records here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the calibration table only.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the orbit/rank table of the leaf suite at a sampled point.
    Leaves {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<Config, dynpg::Error> {
    let mut cfg = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify {
            config,
            seed,
            suites,
            out,
        } => (|| -> Result<bool, dynpg::Error> {
            let mut cfg = load_config(&config, seed)?;
            if !suites.is_empty() {
                cfg.suites = suites;
                cfg.validate()?;
            }
            let report = run(&cfg)?;
            if let Some(path) = out {
                std::fs::write(&path, report.records())?;
                eprintln!("records written to {}", path.display());
            }
            print!("{}", report.summary());
            Ok(report.all_passed())
        })(),
        Command::Calibrate { config, seed, out } => (|| {
            let cfg = load_config(&config, seed)?;
            let table = calibrate(&cfg)?;
            let text = serde_json::to_string_pretty(&table)
                .map_err(|e| dynpg::Error::InvalidConfig(e.to_string()))?;
            if let Some(path) = out {
                std::fs::write(&path, &text)?;
            }
            println!("{text}");
            Ok(true)
        })(),
        Command::Leaves { config, seed } => (|| {
            let cfg = load_config(&config, seed)?;
            print!("{}", leaves_table(&cfg)?);
            Ok(true)
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
