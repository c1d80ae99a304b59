mod commands;
mod config;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};

use crate::commands::Outcome;
use crate::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Classify,
    Curvature,
    PhasePlane,
    Ejsol,
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Classify => "classify",
            Command::Curvature => "curvature",
            Command::PhasePlane => "phase-plane",
            Command::Ejsol => "ejsol",
            Command::Validate => "validate",
        }
    }
}

/// Bracket-flow laboratory for solvable Lie groups.
#[derive(Debug, Parser)]
#[command(name = "solvflow", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the run length of the command.
    #[arg(long)]
    t_end: Option<f64>,
    /// Overrides the integrator's relative tolerance and the classification tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for plane sampling and the validation suite.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_STEP_FAILURE: u8 = 3;
pub const EXIT_CHECKS_FAILED: u8 = 4;

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(t) = cli.t_end {
        cfg.flow.t_end = t;
        cfg.phase_plane.sigma_end = t;
        if let Some(e) = cfg.ejsol.as_mut() {
            e.t_end = Some(t);
        }
    }
    if let Some(tol) = cli.tol {
        cfg.flow.rel_tol = tol;
        cfg.classify_tol = Some(tol);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn log_line(dir: &Path, line: &str) {
    if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(dir.join("run.log")) {
        let _ = writeln!(f, "{} {line}", now());
    }
}

fn write_outputs(dir: &Path, outcome: &Outcome) -> std::io::Result<()> {
    for (name, bytes) in &outcome.files {
        let partial = dir.join(format!(".{name}.partial"));
        fs::write(&partial, bytes)?;
        fs::rename(&partial, dir.join(name))?;
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("SOLVFLOW_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn config_error(err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();

    let mut cfg = match RunConfig::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(err) => return config_error(err),
    };
    apply_overrides(&cli, &mut cfg);
    let out_dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));

    // Everything that can fail as a configuration error happens before any
    // file is touched.
    let prepared = match commands::prepare(cli.command, &cfg) {
        Ok(p) => p,
        Err(err) => return config_error(err),
    };
    if !cli.force {
        let clashes: Vec<_> = prepared
            .planned_files()
            .into_iter()
            .filter(|name| out_dir.join(name).exists())
            .collect();
        if !clashes.is_empty() {
            return config_error(anyhow::anyhow!(
                "refusing to overwrite {} in {} (pass --force): {}",
                if clashes.len() == 1 { "a file" } else { "files" },
                out_dir.display(),
                clashes.join(", ")
            ));
        }
    }
    if let Err(err) = fs::create_dir_all(&out_dir) {
        return config_error(anyhow::anyhow!("creating {}: {err}", out_dir.display()));
    }
    log_line(&out_dir, &format!("start {}", cli.command.name()));

    let outcome = match prepared.run() {
        Ok(o) => o,
        Err(err) => {
            eprintln!("error: {err:#}");
            log_line(&out_dir, "end exit=1");
            return ExitCode::from(1);
        }
    };
    if let Err(err) = write_outputs(&out_dir, &outcome) {
        eprintln!("error: writing outputs: {err}");
        log_line(&out_dir, "end exit=1");
        return ExitCode::from(1);
    }
    if let Some(text) = &outcome.stdout {
        // A closed pipe downstream is not a failure of the run.
        let _ = writeln!(std::io::stdout().lock(), "{text}");
    }
    for line in &outcome.messages {
        eprintln!("{line}");
    }
    log_line(&out_dir, &format!("end exit={}", outcome.code));
    ExitCode::from(outcome.code)
}
