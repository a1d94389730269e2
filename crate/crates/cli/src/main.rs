//! Command-line front end: parse a run configuration, dispatch the
//! simulation, and emit plot-ready CSV plus machine-readable JSON reports.

mod config;
mod scenarios;
mod validate;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "collisim", about = "Collisional-decoherence simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML config file.
    Run {
        config: PathBuf,
        /// Root directory for the run artifacts.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress progress notes (artifacts are still written).
        #[arg(long)]
        quiet: bool,
    },
    /// Parse and sanity-check a config without running anything.
    Validate { config: PathBuf },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, output_dir, seed, quiet } => run(config, output_dir, seed, quiet),
        Command::Validate { config } => validate_only(config),
    }
}

fn load(config: &std::path::Path) -> Result<config::RunConfig, ExitCode> {
    config::RunConfig::from_path(config).map_err(|msg| {
        eprintln!("{msg}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn validate_only(path: PathBuf) -> ExitCode {
    let cfg = match load(&path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let violations = validate::validate(&cfg);
    let report = serde_json::json!({
        "config": path.display().to_string(),
        "scenario": cfg.scenario.to_string(),
        "violations": violations,
    });
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    if validate::has_errors(&violations) {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::SUCCESS
    }
}

fn run(
    path: PathBuf,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    quiet: bool,
) -> ExitCode {
    let mut cfg = match load(&path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = Some(dir);
    }
    let violations = validate::validate(&cfg);
    for v in &violations {
        eprintln!("{:?} [{}]: {}", v.severity, v.field, v.message);
    }
    if validate::has_errors(&violations) {
        return ExitCode::from(EXIT_CONFIG);
    }

    let root = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let dir = scenarios::run_dir(&root, cfg.scenario);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let ctx = scenarios::RunContext { dir: dir.clone(), quiet };

    // echo the resolved config next to the artifacts
    match toml::to_string_pretty(&cfg) {
        Ok(echo) => {
            if let Err(e) = std::fs::write(dir.join("config_echo.toml"), echo) {
                eprintln!("cannot write config echo: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        Err(e) => {
            eprintln!("cannot serialize config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    match scenarios::run(&cfg, &ctx) {
        Ok(report) => {
            let pretty = serde_json::to_string_pretty(&report).expect("serializable");
            if let Err(e) = std::fs::write(dir.join("report.json"), &pretty) {
                eprintln!("cannot write report: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            if !quiet {
                println!("artifacts in {}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("run failed: {msg}");
            let dump = serde_json::json!({ "error": msg });
            let _ = std::fs::write(
                dir.join("failure.json"),
                serde_json::to_string_pretty(&dump).expect("serializable"),
            );
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
