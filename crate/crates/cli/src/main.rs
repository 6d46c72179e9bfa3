//! `negsob <mesh|norm|precond|split|bench>`: CSV studies of the multilevel
//! norms, preconditioners and splittings.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 a check failed.

mod commands;
mod config;

use clap::Parser;
use config::{Cli, CommandKind, ExperimentConfig};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, flags) = cli.command.parts();
    let mut flags = flags.clone();
    let cfg = match flags.merge_config().and_then(|_| ExperimentConfig::from_flags(kind, &flags)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = match cfg.command {
        CommandKind::Mesh => commands::run_mesh(&cfg),
        CommandKind::Norm => commands::run_norm(&cfg),
        CommandKind::Precond => commands::run_precond(&cfg),
        CommandKind::Split => commands::run_split(&cfg),
        CommandKind::Bench => commands::run_bench(&cfg),
    };
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&cfg, &out) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if out.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("check failed");
        ExitCode::from(2)
    }
}

fn write_outputs(cfg: &ExperimentConfig, out: &commands::Outcome) -> std::io::Result<()> {
    for (path, text) in &out.files {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
    }
    match &cfg.output {
        Some(path) => std::fs::write(path, &out.csv),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(out.csv.as_bytes())
        }
    }
}
