//! `gibbslab`: runs one experiment per invocation and leaves CSV/JSON
//! artifacts plus a `manifest.json` in the output directory.
//!
//! Exit codes: 0 all asserted invariants hold, 1 other failure, 2 config
//! error, 3 capacity or ambiguity, 4 invariant failure (`failure.json`).

mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Ctx;
use crate::config::{ConfigError, ExperimentConfig};
use crate::manifest::{config_hash, write_json, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "gibbslab", version, about = "Finite-window experiments on lattice specifications")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, global = true, env = "GIBBSLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "GIBBSLAB_THREADS")]
    threads: Option<usize>,
    /// Artifact directory (default `gibbslab-out`).
    #[arg(long, global = true, env = "GIBBSLAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, env = "GIBBSLAB_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dump the kernel table of `window` under a boundary rule.
    Kernel,
    /// Boundary diameter of `window` against its closed-form bound.
    Diam,
    /// Consistency residuals of `window` inside `outer`.
    Consistency,
    /// Specific free energy sandwich report.
    Sfe,
    /// Superadditivity of the infimum entropy over `parts`.
    Superadd,
    /// Finite-energy lower bound of `field` on `window`.
    FiniteEnergy,
    /// DLR residual of `field` for `window` inside `frame`.
    Dlr,
    /// Heat-bath chains on `frame`, resampling `window`.
    Sample,
    /// The full invariant suite.
    VerifyAll,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Diam => "diam",
            Command::Consistency => "consistency",
            Command::Sfe => "sfe",
            Command::Superadd => "superadd",
            Command::FiniteEnergy => "finite-energy",
            Command::Dlr => "dlr",
            Command::Sample => "sample",
            Command::VerifyAll => "verify-all",
        }
    }
}

fn load(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, cfg: &ExperimentConfig, out: &Path, m: &mut RunManifest) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let ctx = Ctx {
        out: out.to_path_buf(),
        seed: cli.seed,
    };
    let run = match cli.command {
        Command::Kernel => commands::kernel,
        Command::Diam => commands::diam,
        Command::Consistency => commands::consistency,
        Command::Sfe => commands::sfe,
        Command::Superadd => commands::superadd,
        Command::FiniteEnergy => commands::finite_energy,
        Command::Dlr => commands::dlr,
        Command::Sample => commands::sample,
        Command::VerifyAll => commands::verify_all,
    };
    run(cfg, &ctx, m)
}

/// Exit code and failure kind for an error.
fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return (2, "config");
        }
        if let Some(err) = cause.downcast_ref::<gibbslab::Error>() {
            return match err {
                gibbslab::Error::Capacity { .. } => (3, "capacity"),
                gibbslab::Error::Ambiguity(_) => (3, "ambiguity"),
                gibbslab::Error::Invariant(_) => (4, "invariant"),
                gibbslab::Error::Invalid(_) | gibbslab::Error::Shape(_) | gibbslab::Error::Domain(_) => (2, "config"),
                gibbslab::Error::Optimization { .. } => (1, "numerical"),
            };
        }
    }
    (1, "error")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut m = RunManifest::new(cli.command.name());
    m.seed = cli.seed;
    m.threads = cli.threads;

    let loaded = load(cli.config.as_deref());
    let out = cli
        .out_dir
        .clone()
        .or_else(|| loaded.as_ref().ok().and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("gibbslab-out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::from(1);
    }

    let result = loaded.and_then(|cfg| {
        let mut effective = serde_json::to_value(&cfg)?;
        if let Some(s) = cli.seed {
            effective["seed"] = s.into();
        }
        m.config_hash = Some(config_hash(&effective));
        m.seed = cli.seed.or(cfg.seed);
        execute(&cli, &cfg, &out, &mut m)
    });

    let (code, failure) = match &result {
        Ok(()) => {
            let failed: Vec<_> = m.failed().into_iter().cloned().collect();
            if failed.is_empty() {
                (0, None)
            } else {
                let names: Vec<&str> = failed.iter().map(|i| i.name.as_str()).collect();
                let record = json!({
                    "kind": "invariant",
                    "exit_code": 4,
                    "message": format!("invariant failed: {}", names.join(", ")),
                    "invariants": failed,
                });
                (4, Some(record))
            }
        }
        Err(e) => {
            let (code, kind) = classify(e);
            let record = json!({ "kind": kind, "exit_code": code, "message": format!("{e:#}") });
            (code, Some(record))
        }
    };
    m.exit_code = code as i32;

    if let Some(record) = &failure {
        eprintln!("{record}");
        if let Err(e) = write_json(&out.join("failure.json"), record) {
            eprintln!("error: {e:#}");
        }
    }
    if let Err(e) = m.write(&out) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
