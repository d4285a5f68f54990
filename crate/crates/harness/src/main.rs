use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simcf_harness::output::write_outputs;
use simcf_harness::validate::{run_all, SuiteSize};
use simcf_harness::{canned, run_experiment, ExperimentSpec, HarnessError, Result};

/// Spectral-efficiency experiments for SIM-enhanced cell-free massive MIMO.
#[derive(Parser)]
#[command(name = "simcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the spec's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the spec's output, else out/<name>).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec (JSON).
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the oracle suite on small instances.
    Validate {
        /// Scale every trial count down by this factor.
        #[arg(long, default_value_t = 1)]
        shrink: usize,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Meta-atom spacing sweep.
    Table1 {
        #[arg(long, default_value_t = 20)]
        drops: usize,
        #[command(flatten)]
        common: Common,
    },
    /// AP-count sweep at a fixed meta-atom budget.
    Fig3 {
        #[arg(long, default_value_t = 20)]
        drops: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn init_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Spec(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn execute(mut spec: ExperimentSpec, common: Common) -> Result<()> {
    init_pool(common.threads)?;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    let dir = common
        .out_dir
        .or_else(|| spec.output.clone())
        .unwrap_or_else(|| Path::new("out").join(&spec.name));
    let out = run_experiment(&spec)?;
    let files = write_outputs(&dir, &out)?;
    for a in &out.aggregates {
        println!(
            "{:>10} {} {:<14} mean {:.4} ± {:.4}  95%-likely {:.4}",
            a.sweep_value, a.decoder, a.scheme, a.mean_se, a.std_err, a.likely95_se
        );
    }
    if !out.failures.is_empty() {
        println!("{} drop(s) failed and were skipped", out.failures.len());
    }
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { spec, common } => execute(ExperimentSpec::load(&spec)?, common),
        Command::Table1 { drops, common } => execute(canned::table1(drops), common),
        Command::Fig3 { drops, common } => execute(canned::fig3(drops), common),
        Command::Validate { shrink, threads } => {
            init_pool(threads)?;
            let d = SuiteSize::default();
            let s = shrink.max(1);
            let size = SuiteSize {
                sinr_trials: d.sinr_trials / s,
                pair_trials: d.pair_trials / s,
                identity_instances: d.identity_instances,
                covariance_trials: d.covariance_trials / s,
            };
            let checks = run_all(&size)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(HarnessError::Validation(failed));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::to_string(&e.record()).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", e.kind()));
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
