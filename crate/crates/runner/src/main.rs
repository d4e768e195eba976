use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kanlab_runner::config::{has_errors, ConfigError};
use kanlab_runner::emit::{self, summary_lines, RunStatus, BUNDLE_FILE};
use kanlab_runner::{default_run_dir, fetch, load_config, run_experiment, validate_config, RunOptions, OUT_ENV};

#[derive(Parser)]
#[command(name = "kanlab", version, about = "Run KAN forgetting experiments and emit reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its reports.
    Run {
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Parallel (seed, grid) cells.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Run directory; must be absent or empty.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Default output root.
        #[arg(long, env = OUT_ENV, hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Download MNIST into a directory and verify checksums.
    FetchMnist { dir: PathBuf },
    /// Verify a run directory and print its summary.
    Report { run_dir: PathBuf },
}

fn config_exit(e: &ConfigError) -> ExitCode {
    eprintln!("{e}");
    match e {
        ConfigError::Read { .. } => ExitCode::from(4),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => match validate_config(&config) {
            Ok(diags) => {
                for d in &diags {
                    eprintln!("{d}");
                }
                if has_errors(&diags) {
                    ExitCode::from(2)
                } else {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                }
            }
            Err(e) => config_exit(&e),
        },
        Command::Run {
            config,
            seed_offset,
            workers,
            out,
            out_root,
        } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_exit(&e),
            };
            let dir = out.unwrap_or_else(|| default_run_dir(&cfg, out_root.as_deref()));
            let opts = RunOptions { workers, seed_offset };
            match run_experiment(&cfg, &opts, &dir) {
                Ok(m) => {
                    if let Ok(b) = emit::load_bundle(&dir.join(BUNDLE_FILE)) {
                        for line in summary_lines(&b.result) {
                            println!("{line}");
                        }
                    }
                    println!("{} files written to {}", m.files.len(), dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::FetchMnist { dir } => match fetch::fetch_mnist(&dir) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(4)
            }
        },
        Command::Report { run_dir } => {
            let m = match emit::load_manifest(&run_dir) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(4);
                }
            };
            println!("{} run, seeds {:?}, status {:?}", m.kind, m.seeds, m.status);
            if m.status == RunStatus::Failed {
                println!("failure: {}", m.failure.as_deref().unwrap_or("unknown"));
                return ExitCode::from(3);
            }
            let bad = emit::verify_files(&run_dir, &m);
            if !bad.is_empty() {
                eprintln!("checksum mismatch: {}", bad.join(", "));
                return ExitCode::from(4);
            }
            match emit::load_bundle(&run_dir.join(BUNDLE_FILE)) {
                Ok(b) => {
                    for line in summary_lines(&b.result) {
                        println!("{line}");
                    }
                    println!("{} files verified", m.files.len());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(4)
                }
            }
        }
    }
}
