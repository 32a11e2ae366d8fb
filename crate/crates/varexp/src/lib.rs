//! File formats, experiment configuration and pipelines for the `varexp`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod denoise;
pub mod error;
pub mod pgm;
pub mod pipelines;
pub mod report;
pub mod vxf;

use std::path::Path;

pub use config::{Command, ExperimentConfig};
pub use error::{CliError, Result};
pub use report::Outcome;

/// Exit status for a finished run.
pub fn exit_code(outcome: &Result<Outcome>) -> i32 {
    match outcome {
        Ok(o) if o.converged => 0,
        Ok(_) => 2,
        Err(_) => 1,
    }
}

/// Run `command`, then write its CSV tables and `report.txt` into `out_dir`.
pub fn execute(command: Command, cfg: &ExperimentConfig, config_text: &str, out_dir: &Path, threads: usize) -> Result<Outcome> {
    let started = report::unix_now();
    let outcome = pipelines::run(cfg, command, out_dir)?;
    let prov = report::Provenance {
        command: &command.to_string(),
        config_text,
        seed: cfg.seed,
        threads,
        started,
    };
    report::write_outputs(out_dir, &outcome, &prov)?;
    Ok(outcome)
}
