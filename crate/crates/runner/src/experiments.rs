//! Executes configured experiments and collects typed results.

use std::path::Path;

use kanlab_core::forgetting::{
    coefficient_of_variation, cumulative_overlap, measure_supports_on, pairwise_overlap, ratio_report_theorem1,
    ratio_report_theorem2, ratio_report_theorem3, support_axes, union_overlap, BinAxis, CumulativeMeasurement,
    DimensionMeasurement, LabError, PairMeasurement, RatioReport,
};
use kanlab_core::montecarlo::{
    dimension_scaling, fragmentation_scaling, mc_expected_overlap, saturation_closed_form, saturation_curve,
    FragmentationStudy, McError, McEstimate, SaturationCurve, ScalingStudy, SupportModel,
};
use kanlab_core::network::{KanNetwork, NetworkError};
use kanlab_core::tasks::{
    build_image_tasks, gen_binary_tasks, gen_decimal_tasks, intrinsic_dimension, load_mnist_idx, preprocess_images,
    DataError, ImagePreprocessSpec, TaskDataset, MNIST_CLASS_PLAN,
};
use kanlab_core::training::{train_sequence, CurvePoint, LossKind, TrainConfig, TrainError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{check, has_errors, Diagnostic, ExperimentConfig, ExperimentKind};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Diagnostic>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Data(String),
}

impl RunError {
    /// 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } | RunError::Data(_) => 4,
        }
    }
}

impl From<TrainError> for RunError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteGradient { .. } | TrainError::NonFiniteLoss { .. } => {
                RunError::Numerical(e.to_string())
            }
            other => RunError::Data(other.to_string()),
        }
    }
}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<McError> for RunError {
    fn from(e: McError) -> Self {
        match e {
            McError::Usage(m) => RunError::Config(vec![Diagnostic {
                severity: crate::config::Severity::Error,
                field: "mc".into(),
                message: m,
            }]),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<NetworkError> for RunError {
    fn from(e: NetworkError) -> Self {
        RunError::Data(e.to_string())
    }
}

impl From<DataError> for RunError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { path, source } => RunError::Io {
                path,
                message: source.to_string(),
            },
            other => RunError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub seed_offset: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            seed_offset: 0,
        }
    }
}

/// One sequential-training run of the addition tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRun {
    pub seed: u64,
    pub grid: usize,
    /// `losses[t][i]`: loss on task `i + 1` after training task `t + 1`.
    pub losses: Vec<Vec<f64>>,
    pub accuracies: Vec<Vec<f64>>,
    pub forgetting: Vec<f64>,
    /// Losses of every task before training.
    pub initial_losses: Vec<f64>,
    /// Losses of every task once task 1 is trained.
    pub after_first_task: Vec<f64>,
    pub curve: Vec<CurvePoint>,
}

impl SequenceRun {
    /// `log10(initial / after task 1)` per task.
    pub fn first_task_drop_decades(&self) -> Vec<f64> {
        self.initial_losses
            .iter()
            .zip(&self.after_first_task)
            .map(|(a, b)| (a / b).log10())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid: usize,
    pub mean_forgetting: Vec<f64>,
    pub std_forgetting: Vec<f64>,
    pub mean_total_forgetting: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRun {
    pub seed: u64,
    pub grid: usize,
    pub task_i: usize,
    pub task_j: usize,
    pub forgetting: f64,
    pub delta: f64,
    pub bin_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionRow {
    pub seed: u64,
    pub grid: usize,
    pub task_i: usize,
    pub layer: usize,
    pub branch: usize,
    pub union_measure: f64,
    pub delta_sum: f64,
    pub own_measure: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRun {
    pub seed: u64,
    pub grid: usize,
    pub forgetting: Vec<f64>,
    /// Total cumulative overlap for tasks `1..T-1`.
    pub cumulative: Vec<f64>,
    pub bin_width: f64,
    pub unions: Vec<UnionRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCv {
    pub grid: usize,
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRun {
    pub quantize_levels: u32,
    pub side: usize,
    pub hidden: usize,
    pub seed: u64,
    pub intrinsic_dim: f64,
    pub losses: Vec<Vec<f64>>,
    pub accuracies: Vec<Vec<f64>>,
    pub forgetting: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCell {
    pub seed: u64,
    pub s_i: f64,
    pub s_j: f64,
    pub estimate: McEstimate,
    pub expected: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationRun {
    pub seed: u64,
    pub s_i: f64,
    pub s_j: f64,
    pub curve: SaturationCurve,
    pub closed_form: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub seed: u64,
    pub d_i: f64,
    pub d_j: f64,
    pub study: ScalingStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationFit {
    pub seed: u64,
    pub d_i: f64,
    pub d_j: f64,
    pub r: f64,
    pub study: FragmentationStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case")]
pub enum ExperimentResult {
    Sequence {
        runs: Vec<SequenceRun>,
        grids: Vec<GridSummary>,
    },
    PairRatios {
        runs: Vec<PairRun>,
        report: RatioReport,
        cv: Vec<GridCv>,
    },
    CumulativeRatios {
        runs: Vec<CumulativeRun>,
        report: RatioReport,
        cv: Vec<GridCv>,
    },
    Images {
        runs: Vec<ImageRun>,
        report: Option<RatioReport>,
        cv: Option<f64>,
    },
    Overlap {
        cells: Vec<OverlapCell>,
    },
    Saturation {
        runs: Vec<SaturationRun>,
    },
    Dimension {
        fits: Vec<DimensionFit>,
    },
    Fragmentation {
        fits: Vec<FragmentationFit>,
    },
}

/// Validates `cfg` and runs it for every seed.
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentResult, RunError> {
    let diags = check(cfg);
    if has_errors(&diags) {
        return Err(RunError::Config(diags));
    }
    if opts.workers == 0 {
        return Err(RunError::Config(vec![Diagnostic {
            severity: crate::config::Severity::Error,
            field: "--workers".into(),
            message: "must be at least 1".into(),
        }]));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| RunError::Data(e.to_string()))?;
    let seeds: Vec<u64> = cfg.seeds().iter().map(|s| s.wrapping_add(opts.seed_offset)).collect();
    pool.install(|| match cfg.kind {
        ExperimentKind::BinaryAdd => run_sequences(cfg, &seeds, &gen_binary_tasks()),
        ExperimentKind::DecimalAdd => run_sequences(cfg, &seeds, &gen_decimal_tasks()),
        ExperimentKind::Theorem1 => run_theorem1(cfg, &seeds),
        ExperimentKind::Theorem2 => run_theorem2(cfg, &seeds),
        ExperimentKind::MnistCl => run_images(cfg, &seeds, false),
        ExperimentKind::Theorem3 => run_images(cfg, &seeds, true),
        ExperimentKind::Corollary1Mc => run_corollary1(cfg, &seeds),
        ExperimentKind::SaturationMc => run_saturation(cfg, &seeds),
        ExperimentKind::DimensionMc => run_dimension(cfg, &seeds),
        ExperimentKind::FragmentationMc => run_fragmentation(cfg, &seeds),
    })
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..cfg.train() }
}

fn grid_seed_cells(cfg: &ExperimentConfig, seeds: &[u64]) -> Vec<(usize, u64)> {
    cfg.network()
        .grid_sizes
        .iter()
        .flat_map(|&g| seeds.iter().map(move |&s| (g, s)))
        .collect()
}

fn min_width(axes: &[BinAxis]) -> f64 {
    axes.iter().map(BinAxis::width).fold(f64::INFINITY, f64::min)
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v.iter().copied());
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn run_sequences(cfg: &ExperimentConfig, seeds: &[u64], tasks: &[TaskDataset]) -> Result<ExperimentResult, RunError> {
    let net_cfg = cfg.network();
    let dims = net_cfg.dims.clone().unwrap_or_default();
    let runs = grid_seed_cells(cfg, seeds)
        .into_par_iter()
        .map(|(grid, seed)| -> Result<SequenceRun, RunError> {
            let net = KanNetwork::init(&dims, &net_cfg.init_for(grid), seed)?;
            let mut tc = train_config(cfg, seed);
            tc.record_curve = true;
            let out = train_sequence(net, tasks, &tc)?;
            let epochs = tc.epochs_per_task;
            let initial_losses = out.curve.first().map(|p| p.losses.clone()).unwrap_or_default();
            let after_first_task = out
                .curve
                .iter()
                .find(|p| p.training_task == 1 && p.epoch == epochs)
                .or_else(|| out.curve.first())
                .map(|p| p.losses.clone())
                .unwrap_or_default();
            Ok(SequenceRun {
                seed,
                grid,
                losses: out.ledger.losses().to_vec(),
                accuracies: out.ledger.accuracies().to_vec(),
                forgetting: out.ledger.forgetting()?,
                initial_losses,
                after_first_task,
                curve: out.curve,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let grids = net_cfg
        .grid_sizes
        .iter()
        .map(|&grid| {
            let rs: Vec<&SequenceRun> = runs.iter().filter(|r| r.grid == grid).collect();
            let t = rs[0].forgetting.len();
            let col = |i: usize| rs.iter().map(|r| r.forgetting[i]).collect::<Vec<_>>();
            GridSummary {
                grid,
                mean_forgetting: (0..t).map(|i| mean(col(i))).collect(),
                std_forgetting: (0..t).map(|i| sample_std(&col(i))).collect(),
                mean_total_forgetting: mean(rs.iter().map(|r| r.forgetting.iter().sum::<f64>())),
            }
        })
        .collect();
    Ok(ExperimentResult::Sequence { runs, grids })
}

fn cv_per_grid(report: &RatioReport, grids: &[usize]) -> Vec<GridCv> {
    grids
        .iter()
        .map(|&grid| GridCv {
            grid,
            cv: coefficient_of_variation(&report.ratios_for_grid(grid)),
        })
        .collect()
}

fn run_theorem1(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let net_cfg = cfg.network();
    let dims = net_cfg.dims.clone().unwrap_or_default();
    let tasks = gen_decimal_tasks();
    let analysis = cfg.analysis.clone();
    let cells: Vec<(usize, u64, usize)> = grid_seed_cells(cfg, seeds)
        .into_iter()
        .flat_map(|(g, s)| (0..tasks.len() - 1).map(move |i| (g, s, i)))
        .collect();
    let runs = cells
        .into_par_iter()
        .map(|(grid, seed, i)| -> Result<PairRun, RunError> {
            let net = KanNetwork::init(&dims, &net_cfg.init_for(grid), seed)?;
            let pair = [tasks[i].clone(), tasks[i + 1].clone()];
            let mut tc = train_config(cfg, seed);
            tc.record_curve = false;
            let out = train_sequence(net, &pair, &tc)?;
            let axes = support_axes(
                &[(&out.checkpoints[0], &pair[0]), (&out.checkpoints[1], &pair[1])],
                analysis.bins,
            )?;
            let a = measure_supports_on(&out.checkpoints[0], &pair[0], analysis.threshold, &axes)?;
            let b = measure_supports_on(&out.checkpoints[1], &pair[1], analysis.threshold, &axes)?;
            Ok(PairRun {
                seed,
                grid,
                task_i: i + 1,
                task_j: i + 2,
                forgetting: out.ledger.forgetting()?[0],
                delta: pairwise_overlap(&a, &b)?.delta,
                bin_width: min_width(&axes),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut measurements = Vec::new();
    for &grid in &net_cfg.grid_sizes {
        for i in 1..tasks.len() {
            let rs: Vec<&PairRun> = runs.iter().filter(|r| r.grid == grid && r.task_i == i).collect();
            measurements.push(PairMeasurement {
                task_i: i,
                task_j: i + 1,
                grid,
                forgetting: mean(rs.iter().map(|r| r.forgetting)),
                delta: mean(rs.iter().map(|r| r.delta)),
                bin_width: mean(rs.iter().map(|r| r.bin_width)),
            });
        }
    }
    let report = ratio_report_theorem1(&measurements);
    let cv = cv_per_grid(&report, &net_cfg.grid_sizes);
    Ok(ExperimentResult::PairRatios { runs, report, cv })
}

fn run_theorem2(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let net_cfg = cfg.network();
    let dims = net_cfg.dims.clone().unwrap_or_default();
    let tasks = gen_decimal_tasks();
    let analysis = cfg.analysis.clone();
    let runs = grid_seed_cells(cfg, seeds)
        .into_par_iter()
        .map(|(grid, seed)| -> Result<CumulativeRun, RunError> {
            let net = KanNetwork::init(&dims, &net_cfg.init_for(grid), seed)?;
            let mut tc = train_config(cfg, seed);
            tc.record_curve = false;
            let out = train_sequence(net, &tasks, &tc)?;
            let pairs: Vec<(&KanNetwork, &TaskDataset)> = out.checkpoints.iter().zip(&tasks).collect();
            let axes = support_axes(&pairs, analysis.bins)?;
            let profiles = pairs
                .iter()
                .map(|(n, t)| measure_supports_on(n, t, analysis.threshold, &axes))
                .collect::<Result<Vec<_>, _>>()?;
            let last = tasks.len() - 1;
            let cumulative = (0..last)
                .map(|i| cumulative_overlap(&profiles, i).map(|c| c.total))
                .collect::<Result<Vec<_>, _>>()?;
            let mut unions = Vec::new();
            for i in 0..last {
                let u = union_overlap(&profiles, i)?;
                for (layer, row) in u.per_branch.iter().enumerate() {
                    for (branch, e) in row.iter().enumerate() {
                        unions.push(UnionRow {
                            seed,
                            grid,
                            task_i: i + 1,
                            layer,
                            branch,
                            union_measure: e.union_measure,
                            delta_sum: e.delta_sum,
                            own_measure: e.own_measure,
                            holds: e.holds,
                        });
                    }
                }
            }
            Ok(CumulativeRun {
                seed,
                grid,
                forgetting: out.ledger.forgetting()?,
                cumulative,
                bin_width: min_width(&axes),
                unions,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut measurements = Vec::new();
    for &grid in &net_cfg.grid_sizes {
        let rs: Vec<&CumulativeRun> = runs.iter().filter(|r| r.grid == grid).collect();
        for i in 0..tasks.len() - 1 {
            measurements.push(CumulativeMeasurement {
                task_i: i + 1,
                tasks: tasks.len(),
                grid,
                forgetting: mean(rs.iter().map(|r| r.forgetting[i])),
                cumulative: mean(rs.iter().map(|r| r.cumulative[i])),
                bin_width: mean(rs.iter().map(|r| r.bin_width)),
            });
        }
    }
    let report = ratio_report_theorem2(&measurements);
    let cv = cv_per_grid(&report, &net_cfg.grid_sizes);
    Ok(ExperimentResult::CumulativeRatios { runs, report, cv })
}

fn run_images(cfg: &ExperimentConfig, seeds: &[u64], ratios: bool) -> Result<ExperimentResult, RunError> {
    let m = cfg.mnist();
    let net_cfg = cfg.network();
    let images = m.data_dir.join(&m.images_file);
    let labels = m.data_dir.join(&m.labels_file);
    for p in [&images, &labels] {
        if !p.exists() {
            return Err(RunError::Io {
                path: p.display().to_string(),
                message: "not found; `kanlab fetch-mnist <dir>` downloads the dataset".into(),
            });
        }
    }
    let raw = load_mnist_idx(&images, &labels)?;
    let plan: Vec<Vec<u8>> = MNIST_CLASS_PLAN.iter().map(|p| p.to_vec()).collect();
    let grid = net_cfg.grid_sizes[0];
    let mut datasets = Vec::with_capacity(m.configs.len());
    for &(q, side) in &m.configs {
        let spec = ImagePreprocessSpec::square(q, side);
        let x = preprocess_images(&raw, &spec)?;
        let d = intrinsic_dimension(&spec);
        datasets.push((q, side, d, build_image_tasks(&x, &raw.labels, &plan, m.samples_per_class, Some(d))?));
    }
    let cells: Vec<(usize, usize, u64)> = (0..datasets.len())
        .flat_map(|c| m.hidden.iter().flat_map(move |&h| seeds.iter().map(move |&s| (c, h, s))))
        .collect();
    let runs = cells
        .into_par_iter()
        .map(|(c, hidden, seed)| -> Result<ImageRun, RunError> {
            let (q, side, d, tasks) = &datasets[c];
            let net = KanNetwork::init(&[side * side, hidden, 10], &net_cfg.init_for(grid), seed)?;
            let tc = TrainConfig {
                loss: LossKind::CrossEntropy,
                record_curve: false,
                ..train_config(cfg, seed)
            };
            let out = train_sequence(net, tasks, &tc)?;
            Ok(ImageRun {
                quantize_levels: *q,
                side: *side,
                hidden,
                seed,
                intrinsic_dim: *d,
                losses: out.ledger.losses().to_vec(),
                accuracies: out.ledger.accuracies().to_vec(),
                forgetting: out.ledger.forgetting()?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !ratios {
        return Ok(ExperimentResult::Images {
            runs,
            report: None,
            cv: None,
        });
    }
    let mut rows = Vec::new();
    for &(q, side) in &m.configs {
        for &h in &m.hidden {
            let rs: Vec<&ImageRun> = runs
                .iter()
                .filter(|r| r.quantize_levels == q && r.side == side && r.hidden == h)
                .collect();
            rows.push(DimensionMeasurement {
                quantize_levels: q,
                pixels: side * side,
                intrinsic_dim: rs[0].intrinsic_dim,
                forgetting_first: mean(rs.iter().map(|r| r.forgetting[0])),
            });
        }
    }
    let report = ratio_report_theorem3(&rows);
    let cv = coefficient_of_variation(&report.ratios());
    Ok(ExperimentResult::Images {
        runs,
        report: Some(report),
        cv,
    })
}

fn run_corollary1(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let mc = cfg.mc();
    let mut cells = Vec::new();
    for &seed in seeds {
        let base = mc.mc_config(seed);
        let mut idx = 0u64;
        for &s_i in &mc.s_values {
            for &s_j in &mc.s_values {
                let est = mc_expected_overlap(
                    &SupportModel::TorusInterval { s: s_i },
                    &SupportModel::TorusInterval { s: s_j },
                    &base.cell(idx),
                )?;
                idx += 1;
                let expected = s_i * s_j;
                cells.push(OverlapCell {
                    seed,
                    s_i,
                    s_j,
                    estimate: est,
                    expected,
                    z_score: est.z_score(expected),
                });
            }
        }
    }
    Ok(ExperimentResult::Overlap { cells })
}

fn run_saturation(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let mc = cfg.mc();
    let runs = seeds
        .iter()
        .map(|&seed| -> Result<SaturationRun, RunError> {
            let later = vec![SupportModel::TorusInterval { s: mc.s_j }; mc.later_tasks];
            let curve = saturation_curve(&SupportModel::TorusInterval { s: mc.s_i }, &later, &mc.mc_config(seed))?;
            let closed_form = (1..=mc.later_tasks)
                .map(|t| saturation_closed_form(mc.s_i, mc.s_j, t))
                .collect();
            Ok(SaturationRun {
                seed,
                s_i: mc.s_i,
                s_j: mc.s_j,
                curve,
                closed_form,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentResult::Saturation { runs })
}

fn run_dimension(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let mc = cfg.mc();
    let mut fits = Vec::new();
    for &seed in seeds {
        for (p, &(d_i, d_j)) in mc.dimension_pairs.iter().enumerate() {
            let study = dimension_scaling(d_i, d_j, &mc.r_sweep, &mc.mc_config(seed).cell(1000 + p as u64))?;
            fits.push(DimensionFit { seed, d_i, d_j, study });
        }
    }
    Ok(ExperimentResult::Dimension { fits })
}

fn run_fragmentation(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<ExperimentResult, RunError> {
    let mc = cfg.mc();
    let mut fits = Vec::new();
    for &seed in seeds {
        for (p, &d_i) in mc.fragment_dims.iter().enumerate() {
            let study = fragmentation_scaling(
                d_i,
                mc.fragment_d_j,
                mc.fragment_r,
                &mc.k_sweep,
                &mc.mc_config(seed).cell(2000 + p as u64),
            )?;
            fits.push(FragmentationFit {
                seed,
                d_i,
                d_j: mc.fragment_d_j,
                r: mc.fragment_r,
                study,
            });
        }
    }
    Ok(ExperimentResult::Fragmentation { fits })
}

/// Loads a config file, runs it, and returns the resolved config with the result.
pub fn execute_file(path: &Path, opts: &RunOptions) -> Result<(ExperimentConfig, ExperimentResult), RunError> {
    let cfg = crate::config::load_config(path).map_err(|e| match e {
        crate::config::ConfigError::Read { path, source } => RunError::Io {
            path,
            message: source.to_string(),
        },
        other => RunError::Config(vec![Diagnostic {
            severity: crate::config::Severity::Error,
            field: "<file>".into(),
            message: other.to_string(),
        }]),
    })?;
    let result = execute(&cfg, opts)?;
    Ok((cfg.resolved(), result))
}
