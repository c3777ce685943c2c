use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mfgcn::cli::{load_config, run, Task, OUT_ENV};

/// Mean field games with common noise on the circle.
#[derive(Debug, Parser)]
#[command(name = "mfgcn", version, about)]
struct Args {
    /// Task to run.
    #[arg(value_enum)]
    task: Task,
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the environment, then the config.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Worker threads for tree sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut cfg = match load_config(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let out = args
        .out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("mfgcn-out"));
    match run(args.task, &cfg, &out) {
        Ok(outcome) => {
            print!("{}", outcome.summary_table());
            eprintln!("wall time {:.2} s, outputs in {}", outcome.record.wall_time, out.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
