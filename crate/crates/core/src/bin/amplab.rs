use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use amplab::harness::{run_experiment, selftest::run_selftest, ExperimentConfig};
use amplab::Error;

/// Thread-count default when `--threads` is absent.
const THREADS_ENV: &str = "AMPLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "amplab",
    version,
    about = "AMP experiments on spiked Wigner matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the records CSV and summary JSON.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Print the resolved config and exit without running.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in oracle checks.
    Selftest,
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_config_error() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn resolve(out_dir: Option<&Path>, file: &str) -> PathBuf {
    match out_dir {
        Some(dir) => dir.join(file),
        None => PathBuf::from(file),
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.parse().map(Some).map_err(|_| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn run(
    config: &Path,
    out_dir: Option<&Path>,
    dry_run: bool,
    threads_flag: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if dry_run {
        println!("{}", cfg.to_canonical_json());
        return Ok(());
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads(threads_flag)? {
        if t == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out = pool.install(|| run_experiment(&cfg))?;
    let records = resolve(out_dir, &cfg.records_path);
    let summary = resolve(out_dir, &cfg.summary_path);
    out.table.write_csv(&records)?;
    out.summary.write_json(&summary)?;
    eprintln!(
        "{} records ({} failed) -> {}; summary -> {}",
        out.summary.records,
        out.summary.failed,
        records.display(),
        summary.display()
    );
    for (name, v) in &out.summary.fits {
        eprintln!("{name} = {v:.6}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out_dir,
            dry_run,
            threads,
            seed,
        } => match run(&config, out_dir.as_deref(), dry_run, threads, seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Selftest => {
            let results = run_selftest();
            let mut ok = true;
            for c in &results {
                println!(
                    "{} {}: {}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                ok &= c.pass;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
