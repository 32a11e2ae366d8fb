use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use varexp::{exit_code, execute, Command, ExperimentConfig};

/// Variable-exponent p(x)-Laplacian experiments.
#[derive(Debug, Parser)]
#[command(name = "varexp", version)]
struct Cli {
    /// One of solve, verify, gehring, goodlambda, sweep, denoise.
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[run] threads`.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut cfg, text) = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("varexp: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let threads = cli.threads.or(cfg.threads).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        eprintln!("varexp: --threads must be >= 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("varexp: {e}");
        return ExitCode::from(1);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let result = execute(cli.command, &cfg, &text, &out, threads);
    let code = exit_code(&result);
    match &result {
        Ok(o) => {
            for (k, v) in &o.summary {
                println!("{k} = {v}");
            }
            if code == 2 {
                eprintln!("varexp: solver did not converge");
            }
        }
        Err(e) => eprintln!("varexp: {e}"),
    }
    ExitCode::from(code as u8)
}
