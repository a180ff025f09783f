//! `gensm-sim`: runs one experiment described by a config file.
//!
//! Command-line flags override the corresponding config entries. Exit
//! status: 0 on success, 1 for configuration errors, 2 for numerical
//! failures and 3 for I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gensm_core::experiment::{self, ExperimentConfig, Mode};
use gensm_core::Error;

#[derive(Debug, Parser)]
#[command(name = "gensm-sim", version, about = "GenSM hybrid precoding experiments")]
struct Args {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,

    /// One of bound-tightness, optimize, sweep, partition-select, gradcheck.
    #[arg(long)]
    mode: Option<String>,

    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn resolve(args: &Args) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(mode) = &args.mode {
        cfg.mode = mode.parse::<Mode>()?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &Args) -> Result<(), Error> {
    let cfg = resolve(args)?;
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }

    let report = experiment::run(&cfg)?;
    experiment::write_csv(&cfg.output_path, &cfg, &report.table)?;

    println!(
        "mode {} | {} channels | seed {} | {} rows -> {}",
        cfg.mode,
        cfg.n_channels,
        cfg.master_seed,
        report.table.rows.len(),
        cfg.output_path.display()
    );
    print!("{}", report.summary);
    if report.optimizer_runs > 0 {
        println!(
            "optimizer runs: {} | unconverged: {} | non-monotone: {}",
            report.optimizer_runs, report.non_converged, report.non_monotone
        );
    }
    report.check()
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as a numerical
    // failure here.
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gensm-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
