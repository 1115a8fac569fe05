use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};
use ista_cli::{execute, CliError, Command, ExperimentConfig, Outcome};

#[derive(Parser)]
#[command(name = "ista", version, about = "Sparse inverse problem experiments")]
struct Cli {
    /// Experiment config (TOML). Repeat to run several experiments in parallel.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,

    /// Artifact root; each experiment writes to <out-dir>/<name>.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Replaces the seed of every config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve, trace, fit the rate and check it against the certificates.
    Run,
    /// Compute rate certificates without a traced run.
    Certify,
    /// Sign-pattern enumeration only.
    Oracle,
    /// Spectral report and FBI scan only.
    Spectral,
}

fn one(cli: &Cli, path: &Path, command: Command) -> Result<Outcome, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed_override {
        cfg.seed = Some(seed);
    }
    let root = cli
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(&cfg, command, &root)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.config.is_empty() {
        eprintln!("error: at least one --config is required");
        return ExitCode::from(1);
    }
    let command = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Certify => Command::Certify,
        Cmd::Oracle => Command::Oracle,
        Cmd::Spectral => Command::Spectral,
    };
    let results: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = cli
            .config
            .iter()
            .map(|path| s.spawn(|| one(&cli, path, command)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Runtime("worker panicked".into()))))
            .collect()
    });

    let mut code = 0;
    for (path, result) in cli.config.iter().zip(results) {
        match result {
            Ok(out) => {
                println!("{}: {} -> {}", out.name, out.message, out.dir.display());
                if !out.certificate_respected {
                    eprintln!("{}: fitted rate exceeds a certificate", out.name);
                }
                code = code.max(out.exit_code());
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
