use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vbgk_cli::commands::{cmd_certify, cmd_constants, cmd_convergence, cmd_run};
use vbgk_cli::config::{resolve, Purpose, RawConfig, Source};

/// Vector BGK relaxation solver for 2D incompressible Navier-Stokes.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on
/// configuration or I/O errors. Config keys may be overridden with
/// VBGK_<KEY> environment variables.
#[derive(Parser)]
#[command(name = "vbgk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the `out` key).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the `workers` key).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Taylor-Green run with diagnostics, snapshots and a manifest.
    Run(Common),
    /// Epsilon convergence study against Taylor-Green.
    Convergence(Common),
    /// Certify the structural matrices and definiteness conditions.
    Certify(Common),
    /// Select and verify the stability constants for (a, lambda).
    Constants {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
    },
}

fn load(common: &Common, purpose: Purpose, extra: &[(&str, Option<f64>)]) -> anyhow::Result<vbgk_cli::config::RunConfig> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("reading {}: {e}", p.display()))?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    raw.overlay_env(std::env::vars());
    let cli = Source::Env("command line".into());
    if let Some(o) = &common.out {
        raw.set("out", o.display().to_string(), cli.clone());
    }
    if let Some(w) = common.workers {
        raw.set("workers", w.to_string(), cli.clone());
    }
    for (k, v) in extra {
        if let Some(v) = v {
            if *k == "a" {
                raw.entries.remove("tau");
            }
            if *k == "tau" {
                raw.entries.remove("a");
            }
            raw.set(k, v.to_string(), cli.clone());
        }
    }
    let cfg = resolve(&raw, purpose)?;
    if let Some(n) = cfg.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(c) => cmd_run(&load(&c, Purpose::Run, &[])?),
        Command::Convergence(c) => cmd_convergence(&load(&c, Purpose::Convergence, &[])?),
        Command::Certify(c) => cmd_certify(&load(&c, Purpose::Certify, &[])?),
        Command::Constants { common, a, lambda, tau, nu } => {
            let cfg = load(&common, Purpose::Constants, &[("a", a), ("tau", tau), ("lambda", lambda), ("nu", nu)])?;
            let a = cfg.a().ok_or_else(|| anyhow::anyhow!("give a, or tau with nu"))?;
            let tau = match cfg.dissipation {
                vbgk_cli::config::Dissipation::Tau(t) => Some(t),
                vbgk_cli::config::Dissipation::A(_) => None,
            };
            cmd_constants(a, cfg.lambda, tau)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
