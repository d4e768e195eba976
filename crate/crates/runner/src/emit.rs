//! Report files: table CSVs, gnuplot curves, the JSON bundle and the run
//! manifest. Everything is staged in a sibling temp directory and renamed
//! into place once complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::experiments::ExperimentResult;

pub const BUNDLE_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
const BUNDLE_FORMAT: &str = "kanlab-report v1";

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{0} already exists and is not empty")]
    Occupied(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmitError + '_ {
    move |source| EmitError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name relative to the run directory.
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Two-column gnuplot data file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub file: String,
    pub columns: (String, String),
    pub points: Vec<(f64, f64)>,
}

impl CurveFile {
    pub fn render(&self) -> Vec<u8> {
        let mut s = format!("# {} {}\n", self.columns.0, self.columns.1);
        for (x, y) in &self.points {
            s.push_str(&format!("{x} {y}\n"));
        }
        s.into_bytes()
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn ledger_rows(t: &mut Table, prefix: &[String], losses: &[Vec<f64>], accs: &[Vec<f64>]) {
    for (c, row) in losses.iter().enumerate() {
        for (i, l) in row.iter().enumerate() {
            let mut r = prefix.to_vec();
            r.extend([(c + 1).to_string(), (i + 1).to_string(), num(*l), num(accs[c][i])]);
            t.push(r);
        }
    }
}

/// Table-shaped CSVs for one result.
pub fn tables(result: &ExperimentResult) -> Vec<Table> {
    match result {
        ExperimentResult::Sequence { runs, grids } => {
            let mut ledger = Table::new("ledger.csv", &["grid", "seed", "checkpoint_t", "task_i", "loss", "accuracy"]);
            let mut forgetting = Table::new("forgetting.csv", &["grid", "seed", "task_i", "F_i"]);
            let mut drop = Table::new(
                "first_task_drop.csv",
                &["grid", "seed", "task_i", "initial_loss", "after_task1_loss", "decades"],
            );
            for r in runs {
                let prefix = [r.grid.to_string(), r.seed.to_string()];
                ledger_rows(&mut ledger, &prefix, &r.losses, &r.accuracies);
                for (i, f) in r.forgetting.iter().enumerate() {
                    forgetting.push(vec![prefix[0].clone(), prefix[1].clone(), (i + 1).to_string(), num(*f)]);
                }
                for (i, d) in r.first_task_drop_decades().iter().enumerate() {
                    drop.push(vec![
                        prefix[0].clone(),
                        prefix[1].clone(),
                        (i + 1).to_string(),
                        num(r.initial_losses[i]),
                        num(r.after_first_task[i]),
                        num(*d),
                    ]);
                }
            }
            let mut summary = Table::new("forgetting_summary.csv", &["grid", "task_i", "mean_F", "std_F"]);
            let mut totals = Table::new("forgetting_total.csv", &["grid", "mean_total_F"]);
            for g in grids {
                for (i, (m, s)) in g.mean_forgetting.iter().zip(&g.std_forgetting).enumerate() {
                    summary.push(vec![g.grid.to_string(), (i + 1).to_string(), num(*m), num(*s)]);
                }
                totals.push(vec![g.grid.to_string(), num(g.mean_total_forgetting)]);
            }
            vec![ledger, forgetting, summary, totals, drop]
        }
        ExperimentResult::PairRatios { runs, report, cv } => {
            let mut main = Table::new("theorem1.csv", &["task_i", "task_j", "grid", "F_i", "delta", "ratio"]);
            for r in &report.rows {
                main.push(vec![
                    r.task_i.to_string(),
                    r.partners[0].to_string(),
                    r.grid.unwrap_or_default().to_string(),
                    num(r.forgetting),
                    num(r.denominator),
                    opt(r.ratio),
                ]);
            }
            let mut raw = Table::new(
                "theorem1_runs.csv",
                &["grid", "seed", "task_i", "task_j", "F_i", "delta", "bin_width"],
            );
            for r in runs {
                raw.push(vec![
                    r.grid.to_string(),
                    r.seed.to_string(),
                    r.task_i.to_string(),
                    r.task_j.to_string(),
                    num(r.forgetting),
                    num(r.delta),
                    num(r.bin_width),
                ]);
            }
            vec![main, raw, cv_table("theorem1_cv.csv", cv)]
        }
        ExperimentResult::CumulativeRatios { runs, report, cv } => {
            let mut main = Table::new("theorem2.csv", &["task_i", "tasks_j", "grid", "F_i", "cumulative", "ratio"]);
            for r in &report.rows {
                let js: Vec<String> = r.partners.iter().map(|j| j.to_string()).collect();
                main.push(vec![
                    r.task_i.to_string(),
                    js.join(" "),
                    r.grid.unwrap_or_default().to_string(),
                    num(r.forgetting),
                    num(r.denominator),
                    opt(r.ratio),
                ]);
            }
            let mut raw = Table::new("theorem2_runs.csv", &["grid", "seed", "task_i", "F_i", "cumulative", "bin_width"]);
            let mut unions = Table::new(
                "union_bound.csv",
                &["grid", "seed", "task_i", "layer", "branch", "union", "delta_sum", "own_measure", "holds"],
            );
            for r in runs {
                for (i, (f, c)) in r.forgetting.iter().zip(&r.cumulative).enumerate() {
                    raw.push(vec![
                        r.grid.to_string(),
                        r.seed.to_string(),
                        (i + 1).to_string(),
                        num(*f),
                        num(*c),
                        num(r.bin_width),
                    ]);
                }
                for u in &r.unions {
                    unions.push(vec![
                        u.grid.to_string(),
                        u.seed.to_string(),
                        u.task_i.to_string(),
                        u.layer.to_string(),
                        u.branch.to_string(),
                        num(u.union_measure),
                        num(u.delta_sum),
                        num(u.own_measure),
                        u.holds.to_string(),
                    ]);
                }
            }
            vec![main, raw, unions, cv_table("theorem2_cv.csv", cv)]
        }
        ExperimentResult::Images { runs, report, cv } => {
            let mut ledger = Table::new(
                "image_ledger.csv",
                &["Q", "S", "hidden", "seed", "checkpoint_t", "task_i", "loss", "accuracy"],
            );
            let mut forgetting = Table::new("image_forgetting.csv", &["Q", "S", "hidden", "seed", "d", "task_i", "F_i"]);
            for r in runs {
                let prefix = [
                    r.quantize_levels.to_string(),
                    r.side.to_string(),
                    r.hidden.to_string(),
                    r.seed.to_string(),
                ];
                ledger_rows(&mut ledger, &prefix, &r.losses, &r.accuracies);
                for (i, f) in r.forgetting.iter().enumerate() {
                    let mut row = prefix.to_vec();
                    row.extend([num(r.intrinsic_dim), (i + 1).to_string(), num(*f)]);
                    forgetting.push(row);
                }
            }
            let mut out = vec![ledger, forgetting];
            if let Some(rep) = report {
                let mut t3 = Table::new("theorem3.csv", &["Q", "S", "d", "F_1", "ratio"]);
                for r in &rep.rows {
                    t3.push(vec![
                        r.quantize_levels.unwrap_or_default().to_string(),
                        r.pixels.unwrap_or_default().to_string(),
                        num(r.denominator),
                        num(r.forgetting),
                        opt(r.ratio),
                    ]);
                }
                let mut cvt = Table::new("theorem3_cv.csv", &["cv"]);
                cvt.push(vec![opt(*cv)]);
                out.push(t3);
                out.push(cvt);
            }
            out
        }
        ExperimentResult::Overlap { cells } => {
            let mut t = Table::new(
                "corollary1.csv",
                &["seed", "s_i", "s_j", "N", "mean", "std_error", "analytic_expectation", "z_score"],
            );
            for c in cells {
                t.push(vec![
                    c.seed.to_string(),
                    num(c.s_i),
                    num(c.s_j),
                    c.estimate.trials.to_string(),
                    num(c.estimate.mean),
                    num(c.estimate.std_error),
                    num(c.expected),
                    num(c.z_score),
                ]);
            }
            vec![t]
        }
        ExperimentResult::Saturation { runs } => {
            let mut t = Table::new(
                "saturation.csv",
                &["seed", "s_i", "s_j", "T", "N", "mean", "std_error", "closed_form", "slack"],
            );
            let mut onset = Table::new("saturation_onset.csv", &["seed", "support_measure", "plateau_onset"]);
            for r in runs {
                for (k, p) in r.curve.points.iter().enumerate() {
                    t.push(vec![
                        r.seed.to_string(),
                        num(r.s_i),
                        num(r.s_j),
                        (k + 1).to_string(),
                        p.trials.to_string(),
                        num(p.mean),
                        num(p.std_error),
                        num(r.closed_form[k]),
                        num(r.curve.slack[k]),
                    ]);
                }
                onset.push(vec![
                    r.seed.to_string(),
                    num(r.curve.support_measure),
                    r.curve.plateau_onset.map(|t| t.to_string()).unwrap_or_default(),
                ]);
            }
            vec![t, onset]
        }
        ExperimentResult::Dimension { fits } => {
            let mut pts = Table::new(
                "dimension_points.csv",
                &["seed", "d_i", "d_j", "r", "N", "mean", "std_error", "analytic_expectation", "residual"],
            );
            let mut fit = Table::new(
                "dimension_fit.csv",
                &["seed", "d_i", "d_j", "slope", "slope_stderr", "expected_slope"],
            );
            for f in fits {
                let s = &f.study;
                for k in 0..s.sweep.len() {
                    pts.push(vec![
                        f.seed.to_string(),
                        num(f.d_i),
                        num(f.d_j),
                        num(s.sweep[k]),
                        s.points[k].trials.to_string(),
                        num(s.points[k].mean),
                        num(s.points[k].std_error),
                        num(s.expected[k]),
                        num(s.fit.residuals[k]),
                    ]);
                }
                fit.push(vec![
                    f.seed.to_string(),
                    num(f.d_i),
                    num(f.d_j),
                    num(s.fit.slope),
                    num(s.fit.slope_stderr),
                    num(f.d_i + f.d_j),
                ]);
            }
            vec![pts, fit]
        }
        ExperimentResult::Fragmentation { fits } => {
            let mut pts = Table::new(
                "fragmentation_points.csv",
                &[
                    "seed",
                    "d_i",
                    "d_j",
                    "r",
                    "swept",
                    "k",
                    "N",
                    "mean",
                    "std_error",
                    "analytic_expectation",
                    "residual",
                ],
            );
            let mut fit = Table::new(
                "fragmentation_fit.csv",
                &["seed", "d_i", "d_j", "r", "swept", "slope", "slope_stderr", "expected_slope"],
            );
            for f in fits {
                for (swept, s, want) in [
                    ("k_i", &f.study.over_k_i, -f.d_i),
                    ("k_j", &f.study.over_k_j, -f.d_j),
                ] {
                    let head = [f.seed.to_string(), num(f.d_i), num(f.d_j), num(f.r), swept.to_string()];
                    for k in 0..s.sweep.len() {
                        let mut row = head.to_vec();
                        row.extend([
                            num(s.sweep[k]),
                            s.points[k].trials.to_string(),
                            num(s.points[k].mean),
                            num(s.points[k].std_error),
                            num(s.expected[k]),
                            num(s.fit.residuals[k]),
                        ]);
                        pts.push(row);
                    }
                    let mut row = head.to_vec();
                    row.extend([num(s.fit.slope), num(s.fit.slope_stderr), num(want)]);
                    fit.push(row);
                }
            }
            vec![pts, fit]
        }
    }
}

fn cv_table(file: &str, cv: &[crate::experiments::GridCv]) -> Table {
    let mut t = Table::new(file, &["grid", "cv"]);
    for c in cv {
        t.push(vec![c.grid.to_string(), opt(c.cv)]);
    }
    t
}

/// Plot-ready curves: per-task loss against global epoch, saturation means
/// against T.
pub fn curves(result: &ExperimentResult) -> Vec<CurveFile> {
    match result {
        ExperimentResult::Sequence { runs, .. } => runs
            .iter()
            .flat_map(|r| {
                let tasks = r.curve.first().map_or(0, |p| p.losses.len());
                (0..tasks).map(move |i| CurveFile {
                    file: format!("curves/g{}_s{}_task{}.dat", r.grid, r.seed, i + 1),
                    columns: ("epoch".into(), format!("loss_task{}", i + 1)),
                    points: r.curve.iter().map(|p| (p.epoch as f64, p.losses[i])).collect(),
                })
            })
            .collect(),
        ExperimentResult::Saturation { runs } => runs
            .iter()
            .map(|r| CurveFile {
                file: format!("curves/saturation_s{}.dat", r.seed),
                columns: ("T".into(), "mean_union".into()),
                points: r
                    .curve
                    .points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| ((k + 1) as f64, p.mean))
                    .collect(),
            })
            .collect(),
        _ => Vec::new(),
    }
}

/// Short human-readable lines for the console.
pub fn summary_lines(result: &ExperimentResult) -> Vec<String> {
    let fmt_v = |v: &[f64]| v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ");
    match result {
        ExperimentResult::Sequence { grids, .. } => grids
            .iter()
            .map(|g| {
                let max = g.mean_forgetting.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                format!(
                    "grid {}: mean F = [{}], max {max:.3e}, mean sum {:.4}",
                    g.grid,
                    fmt_v(&g.mean_forgetting),
                    g.mean_total_forgetting
                )
            })
            .collect(),
        ExperimentResult::PairRatios { cv, .. } | ExperimentResult::CumulativeRatios { cv, .. } => cv
            .iter()
            .map(|c| format!("grid {}: ratio CV {}", c.grid, c.cv.map_or("n/a".into(), |v| format!("{v:.4}"))))
            .collect(),
        ExperimentResult::Images { report, cv, runs } => {
            let mut out = vec![format!("{} image runs", runs.len())];
            if let Some(rep) = report {
                for r in &rep.rows {
                    out.push(format!(
                        "Q {} S {} d {:.3}: F_1 {:.4} ratio {}",
                        r.quantize_levels.unwrap_or(0),
                        r.pixels.unwrap_or(0),
                        r.denominator,
                        r.forgetting,
                        r.ratio.map_or("n/a".into(), |v| format!("{v:.4}"))
                    ));
                }
                out.push(format!("ratio CV {}", cv.map_or("n/a".into(), |v| format!("{v:.4}"))));
            }
            out
        }
        ExperimentResult::Overlap { cells } => cells
            .iter()
            .map(|c| {
                format!(
                    "s_i {} s_j {}: mean {:.5} ± {:.5} (expected {:.5}, z {:.2})",
                    c.s_i, c.s_j, c.estimate.mean, c.estimate.std_error, c.expected, c.z_score
                )
            })
            .collect(),
        ExperimentResult::Saturation { runs } => runs
            .iter()
            .map(|r| {
                format!(
                    "seed {}: final mean {:.5} of support {}, plateau onset {:?}",
                    r.seed,
                    r.curve.points.last().map_or(0.0, |p| p.mean),
                    r.curve.support_measure,
                    r.curve.plateau_onset
                )
            })
            .collect(),
        ExperimentResult::Dimension { fits } => fits
            .iter()
            .map(|f| {
                format!(
                    "d_i {} d_j {}: slope {:.4} ± {:.4} (model {})",
                    f.d_i,
                    f.d_j,
                    f.study.fit.slope,
                    f.study.fit.slope_stderr,
                    f.d_i + f.d_j
                )
            })
            .collect(),
        ExperimentResult::Fragmentation { fits } => fits
            .iter()
            .map(|f| {
                format!(
                    "d_i {} d_j {}: slope in k_i {:.4} (model {}), in k_j {:.4} (model {})",
                    f.d_i,
                    f.d_j,
                    f.study.over_k_i.fit.slope,
                    -f.d_i,
                    f.study.over_k_j.fit.slope,
                    -f.d_j
                )
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub format: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub result: ExperimentResult,
}

impl ReportBundle {
    pub fn new(config: ExperimentConfig, result: ExperimentResult) -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            kind: config.kind,
            config,
            result,
        }
    }
}

pub fn load_bundle(path: &Path) -> Result<ReportBundle, EmitError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let b: ReportBundle = serde_json::from_slice(&bytes).map_err(|e| EmitError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if b.format != BUNDLE_FORMAT {
        return Err(EmitError::Format {
            path: path.display().to_string(),
            message: format!("unknown bundle format {:?}", b.format),
        });
    }
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub kind: ExperimentKind,
    /// Resolved config: every default spelled out.
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub seed_offset: u64,
    pub workers: usize,
    pub started_at: String,
    pub finished_at: String,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, seed_offset: u64, workers: usize, started_at: String) -> Self {
        let config = config.resolved();
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            kind: config.kind,
            seeds: config.seeds().iter().map(|s| s.wrapping_add(seed_offset)).collect(),
            config,
            seed_offset,
            workers,
            started_at: started_at.clone(),
            finished_at: started_at,
            status: RunStatus::Complete,
            failure: None,
            files: Vec::new(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn ensure_free(dir: &Path) -> Result<(), EmitError> {
    match fs::read_dir(dir) {
        Ok(mut it) => {
            if it.next().is_some() {
                return Err(EmitError::Occupied(dir.display().to_string()));
            }
            fs::remove_dir(dir).map_err(io_err(dir))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(io_err(dir)(e)),
    }
}

fn stage_dir(dir: &Path) -> Result<tempfile::TempDir, EmitError> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    tempfile::Builder::new()
        .prefix(".kanlab-stage-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<FileEntry, EmitError> {
    let path = root.join(rel);
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(io_err(p))?;
    }
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(bytes).map_err(io_err(&path))?;
    f.sync_all().map_err(io_err(&path))?;
    Ok(FileEntry {
        path: rel.into(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(bytes),
    })
}

fn commit(stage: tempfile::TempDir, root: &Path, dir: &Path, manifest: &RunManifest) -> Result<(), EmitError> {
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    write_file(root, MANIFEST_FILE, &json)?;
    ensure_free(dir)?;
    let staged = stage.keep();
    fs::rename(&staged, dir).map_err(|e| {
        let _ = fs::remove_dir_all(&staged);
        io_err(dir)(e)
    })
}

/// Writes every report file for `bundle` into `dir` and returns the final
/// manifest. `dir` must be absent or empty; nothing appears there unless
/// every file was written.
pub fn emit_reports(dir: &Path, mut manifest: RunManifest, bundle: &ReportBundle) -> Result<RunManifest, EmitError> {
    ensure_free_check(dir)?;
    let stage = stage_dir(dir)?;
    let root = stage.path().to_path_buf();
    let mut files = Vec::new();
    for t in tables(&bundle.result) {
        files.push(write_file(&root, &t.file, &t.to_csv())?);
    }
    for c in curves(&bundle.result) {
        files.push(write_file(&root, &c.file, &c.render())?);
    }
    let json = serde_json::to_vec_pretty(bundle).map_err(|e| EmitError::Format {
        path: BUNDLE_FILE.into(),
        message: e.to_string(),
    })?;
    files.push(write_file(&root, BUNDLE_FILE, &json)?);
    manifest.files = files;
    manifest.status = RunStatus::Complete;
    manifest.finished_at = now();
    commit(stage, &root, dir, &manifest)?;
    Ok(manifest)
}

/// Writes a manifest with no report files, marking the run failed.
pub fn emit_failure(dir: &Path, mut manifest: RunManifest, failure: &str) -> Result<RunManifest, EmitError> {
    ensure_free_check(dir)?;
    let stage = stage_dir(dir)?;
    let root = stage.path().to_path_buf();
    manifest.files.clear();
    manifest.status = RunStatus::Failed;
    manifest.failure = Some(failure.into());
    manifest.finished_at = now();
    commit(stage, &root, dir, &manifest)?;
    Ok(manifest)
}

fn ensure_free_check(dir: &Path) -> Result<(), EmitError> {
    match fs::read_dir(dir).map(|it| it.count()) {
        Ok(n) if n > 0 => Err(EmitError::Occupied(dir.display().to_string())),
        _ => Ok(()),
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn load_manifest(run_dir: &Path) -> Result<RunManifest, EmitError> {
    let path = run_dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    serde_json::from_slice(&bytes).map_err(|e| EmitError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Files whose size or checksum no longer matches the manifest.
pub fn verify_files(run_dir: &Path, manifest: &RunManifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter(|f| match fs::read(run_dir.join(&f.path)) {
            Ok(b) => b.len() as u64 != f.bytes || sha256_hex(&b) != f.sha256,
            Err(_) => true,
        })
        .map(|f| f.path.clone())
        .collect()
}
