use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod models;
mod run;
mod table;
mod verify;

use error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("FLOQUET_KATO_GIT"), ")");
/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_ENV: &str = "FLOQUET_KATO_OUT";
const DEFAULT_OUT: &str = "results";

#[derive(Parser)]
#[command(name = "floquet-kato", version = VERSION, about = "Floquet and Kato decompositions of periodic drives")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the computations and sweeps described by a config file.
    Run {
        config: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Output directory; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the model registry.
    ListModels {
        #[arg(long)]
        json: bool,
    },
    /// Run the invariant suite on small built-in systems.
    Verify {
        #[arg(long)]
        filter: Option<String>,
        /// Multiply every bound by this factor.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { config, threads, out } => cmd_run(&config, threads, out),
        Cmd::ListModels { json } => {
            list_models(json);
            Ok(())
        }
        Cmd::Verify { filter, tol_scale } => cmd_verify(filter.as_deref(), tol_scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_run(path: &std::path::Path, threads: usize, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = config::load(path)?;
    let out = out
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let created = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok());
    let summary = run::run(&cfg, &run::RunOptions { threads, out, created })?;
    for f in &summary.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn list_models(json: bool) {
    let reg = floquet_kato::drives::registry();
    if json {
        let v: Vec<serde_json::Value> = reg
            .iter()
            .map(|m| {
                let params: Vec<serde_json::Value> = m
                    .params
                    .iter()
                    .map(|(k, d, s)| serde_json::json!({"name": k, "default": d, "meaning": s}))
                    .collect();
                serde_json::json!({"name": m.name, "summary": m.summary, "params": params})
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
        return;
    }
    for m in reg {
        println!("{}: {}", m.name, m.summary);
        for (k, d, s) in m.params {
            println!("    {k:<10} {d:<22} {s}");
        }
        if m.name.starts_with("afti") {
            println!("    {:<10} {:<22} momentum along the periodic direction", "kx", "0");
        }
    }
}

fn cmd_verify(filter: Option<&str>, tol_scale: f64) -> Result<(), CliError> {
    if let Some(f) = filter {
        if !verify::MODULES.contains(&f) {
            return Err(CliError::Validation(format!("unknown module '{f}' (one of {})", verify::MODULES.join(", "))));
        }
    }
    if !(tol_scale >= 0.0) {
        return Err(CliError::Validation("--tol-scale must be non-negative".into()));
    }
    let outcomes = verify::run(filter, tol_scale);
    let mut failed = Vec::new();
    for o in &outcomes {
        let tag = if o.pass { "ok  " } else { "FAIL" };
        let extra = o.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        println!("{tag} {:<12} {:<55} observed {:.3e} bound {:.3e}{extra}", o.module, o.invariant, o.observed, o.bound);
        if !o.pass {
            failed.push(format!("{}: {}", o.module, o.invariant));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("{} invariant(s) failed: {}", failed.len(), failed.join("; "))))
    }
}
