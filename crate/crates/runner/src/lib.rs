//! Configuration, orchestration and report emission for kanlab experiments.

pub mod config;
pub mod emit;
pub mod experiments;
pub mod fetch;

pub use config::{check, load_config, parse_config, validate_config, Diagnostic, ExperimentConfig, ExperimentKind};
pub use emit::{emit_reports, load_bundle, ReportBundle, RunManifest};
pub use experiments::{execute, ExperimentResult, RunError, RunOptions};

use std::path::{Path, PathBuf};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "KANLAB_OUT";

/// Run directory when none is given: the config's `output_dir`, else
/// `<root>/<kind>-<UTC timestamp>` with root from `KANLAB_OUT` or `runs`.
pub fn default_run_dir(cfg: &ExperimentConfig, env_root: Option<&Path>) -> PathBuf {
    if let Some(d) = &cfg.output_dir {
        return d.clone();
    }
    let root = env_root.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-{}", cfg.kind, chrono::Utc::now().format("%Y%m%dT%H%M%SZ")))
}

/// Runs `cfg` and writes its reports into `dir`. On a failed run a manifest
/// marking the failure is written instead and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions, dir: &Path) -> Result<RunManifest, RunError> {
    let diags = check(cfg);
    if config::has_errors(&diags) {
        return Err(RunError::Config(diags));
    }
    let manifest = RunManifest::new(cfg, opts.seed_offset, opts.workers, emit::now());
    let io = |e: emit::EmitError| RunError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    match execute(cfg, opts) {
        Ok(result) => {
            let bundle = ReportBundle::new(cfg.resolved(), result);
            emit_reports(dir, manifest, &bundle).map_err(io)
        }
        Err(e @ RunError::Config(_)) => Err(e),
        Err(e) => {
            emit::emit_failure(dir, manifest, &e.to_string()).map_err(io)?;
            Err(e)
        }
    }
}
