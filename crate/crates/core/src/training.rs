//! Losses, AdamW, EWC and the sequential-task training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forgetting::ForgettingLedger;
use crate::matrix::Matrix;
use crate::network::{Model, NetworkError};
use crate::tasks::{TaskDataset, Targets};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} at row {row} is outside 0..{classes}")]
    LabelOutOfRange { row: usize, label: usize, classes: usize },
    #[error("non-finite gradient entry at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss while training task {task}, epoch {epoch}")]
    NonFiniteLoss { task: usize, epoch: usize },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    MeanSquaredError,
    CrossEntropy,
}

/// Which prior data the Fisher estimate is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FisherMemory {
    PrecedingTask,
    AllPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EwcConfig {
    pub lambda: f64,
    pub memory: FisherMemory,
}

impl Default for EwcConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            memory: FisherMemory::PrecedingTask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs_per_task: usize,
    pub loss: LossKind,
    pub betas: (f64, f64),
    pub epsilon: f64,
    pub seed: u64,
    /// Samples per update (a sample spans `rows_per_sample` rows); `None`
    /// trains full-batch.
    pub batch_size: Option<usize>,
    /// Start every task with fresh AdamW moments.
    pub reset_optimizer_per_task: bool,
    /// Evaluate every task after every epoch (the loss curves).
    pub record_curve: bool,
    pub ewc: Option<EwcConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            epochs_per_task: 50,
            loss: LossKind::MeanSquaredError,
            betas: (0.9, 0.999),
            epsilon: 1e-8,
            seed: 0,
            batch_size: None,
            reset_optimizer_per_task: false,
            record_curve: true,
            ewc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Usage(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::Usage("weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.betas.0) || !(0.0..1.0).contains(&self.betas.1) {
            return Err(TrainError::Usage("betas must lie in [0, 1)".into()));
        }
        if self.batch_size == Some(0) {
            return Err(TrainError::Usage("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Mean squared error over every entry, with its gradient `2 (pred - target) / count`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix), TrainError> {
    if pred.shape() != target.shape() {
        return Err(TrainError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.as_slice().len().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0;
    for ((g, p), t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(target.as_slice()) {
        let d = p - t;
        sum += d * d;
        *g = 2.0 * d / n;
    }
    Ok((sum / n, grad))
}

/// Mean negative log-softmax of the true class (max-subtracted), with
/// gradient `(softmax - onehot) / batch`.
pub fn cross_entropy_loss(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix), TrainError> {
    if logits.rows() != labels.len() {
        return Err(TrainError::Shape(format!(
            "{} logit rows vs {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    let classes = logits.cols();
    let batch = logits.rows().max(1) as f64;
    let mut grad = Matrix::zeros(logits.rows(), classes);
    let mut total = 0.0;
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(TrainError::LabelOutOfRange { row, label, classes });
        }
        let z = logits.row(row);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + sum_exp.ln();
        total += log_norm - z[label];
        let g = grad.row_mut(row);
        for (c, gv) in g.iter_mut().enumerate() {
            let p = (z[c] - log_norm).exp();
            *gv = (p - if c == label { 1.0 } else { 0.0 }) / batch;
        }
    }
    Ok((total / batch, grad))
}

/// Loss and output gradient for a task's targets.
pub fn task_loss(pred: &Matrix, targets: &Targets, kind: LossKind) -> Result<(f64, Matrix), TrainError> {
    match (kind, targets) {
        (LossKind::MeanSquaredError, Targets::Values(t)) => mse_loss(pred, t),
        (LossKind::CrossEntropy, Targets::Labels(l)) => cross_entropy_loss(pred, l),
        (k, _) => Err(TrainError::Usage(format!("loss {k:?} does not match the task's target kind"))),
    }
}

/// Mean loss of `model` over the whole task.
pub fn evaluate_loss<M: Model>(model: &M, task: &TaskDataset, kind: LossKind) -> Result<f64, TrainError> {
    let pred = model.predict(&task.inputs)?;
    task_loss(&pred, &task.targets, kind).map(|(l, _)| l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamwState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamwState {
    pub fn new(num_params: usize) -> Self {
        Self {
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }
}

/// One AdamW update in place: decoupled decay `θ ← θ (1 - lr·wd)`, then the
/// bias-corrected Adam step.
pub fn adamw_step(state: &mut AdamwState, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<(), TrainError> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(TrainError::Shape(format!(
            "{} params, {} grads, {} optimizer slots",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { index });
    }
    let (b1, b2) = cfg.betas;
    let lr = cfg.learning_rate;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let decay = 1.0 - lr * cfg.weight_decay;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *p *= decay;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwcState {
    pub lambda: f64,
    pub fisher_diag: Vec<f64>,
    pub anchor_params: Vec<f64>,
}

/// Diagonal empirical Fisher: per-sample loss gradients squared, averaged
/// over every row of the memory tasks.
pub fn fisher_estimate<M: Model>(model: &M, memory: &[&TaskDataset], kind: LossKind) -> Result<Vec<f64>, TrainError> {
    let rows: usize = memory.iter().map(|t| t.len()).sum();
    if rows == 0 {
        return Err(TrainError::Usage("Fisher memory is empty".into()));
    }
    let mut fisher = vec![0.0; model.num_params()];
    for task in memory {
        for r in 0..task.len() {
            let x = task.inputs.select_rows(&[r]);
            let y = task.targets.select_rows(&[r]);
            let trace = model.forward_traced(&x)?;
            let (_, og) = task_loss(M::trace_output(&trace), &y, kind)?;
            let g = model.param_gradient(&trace, &og)?;
            for (f, gi) in fisher.iter_mut().zip(&g) {
                *f += gi * gi;
            }
        }
    }
    let n = rows as f64;
    fisher.iter_mut().for_each(|f| *f /= n);
    Ok(fisher)
}

/// `(λ/2) Σ F_k (θ_k - θ*_k)²` and its gradient `λ F ⊙ (θ - θ*)`.
pub fn ewc_penalty(params: &[f64], ewc: &EwcState) -> Result<(f64, Vec<f64>), TrainError> {
    if params.len() != ewc.anchor_params.len() || params.len() != ewc.fisher_diag.len() {
        return Err(TrainError::Shape(format!(
            "{} params vs anchor {} / fisher {}",
            params.len(),
            ewc.anchor_params.len(),
            ewc.fisher_diag.len()
        )));
    }
    let mut penalty = 0.0;
    let grad = params
        .iter()
        .zip(&ewc.anchor_params)
        .zip(&ewc.fisher_diag)
        .map(|((p, a), f)| {
            let d = p - a;
            penalty += f * d * d;
            ewc.lambda * f * d
        })
        .collect();
    Ok((0.5 * ewc.lambda * penalty, grad))
}

/// Losses on every task after one epoch of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Global epoch counter; 0 is the untrained network.
    pub epoch: usize,
    /// 1-based index of the task being trained, 0 before any training.
    pub training_task: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceOutcome<M> {
    /// `checkpoints[t]` is the network right after training task `t + 1`.
    pub checkpoints: Vec<M>,
    pub ledger: ForgettingLedger,
    pub curve: Vec<CurvePoint>,
}

/// Owns the optimizer and shuffling stream of one training run.
pub struct Trainer<'a> {
    cfg: &'a TrainConfig,
    optimizer: AdamwState,
    rng: ChaCha8Rng,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a TrainConfig, num_params: usize) -> Result<Self, TrainError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            optimizer: AdamwState::new(num_params),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    /// Runs `epochs_per_task` epochs on `task`. After each epoch the losses on
    /// `eval_tasks` are appended to `curve` (if given).
    pub fn train_task<M: Model>(
        &mut self,
        model: &mut M,
        task: &TaskDataset,
        ewc: Option<&EwcState>,
        eval_tasks: &[TaskDataset],
        mut curve: Option<&mut Vec<CurvePoint>>,
    ) -> Result<(), TrainError> {
        if task.is_empty() {
            return Err(TrainError::Usage(format!("task {} has no samples", task.task_index)));
        }
        if self.cfg.reset_optimizer_per_task {
            self.optimizer = AdamwState::new(model.num_params());
        }
        let group = task.meta.rows_per_sample.max(1);
        let samples = task.len() / group;
        let batch = self.cfg.batch_size.unwrap_or(samples).min(samples);
        let mut order: Vec<usize> = (0..samples).collect();
        let mut params = model.params();
        for epoch in 1..=self.cfg.epochs_per_task {
            if batch < samples {
                order.shuffle(&mut self.rng);
            }
            for chunk in order.chunks(batch) {
                let (x, y) = if batch == samples {
                    (task.inputs.clone(), task.targets.clone())
                } else {
                    let rows: Vec<usize> = chunk.iter().flat_map(|&s| s * group..(s + 1) * group).collect();
                    (task.inputs.select_rows(&rows), task.targets.select_rows(&rows))
                };
                let trace = model.forward_traced(&x)?;
                let (loss, og) = task_loss(M::trace_output(&trace), &y, self.cfg.loss)?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        task: task.task_index,
                        epoch,
                    });
                }
                let mut grads = model.param_gradient(&trace, &og)?;
                if let Some(ewc) = ewc {
                    let (_, pg) = ewc_penalty(&params, ewc)?;
                    grads.iter_mut().zip(pg).for_each(|(g, p)| *g += p);
                }
                adamw_step(&mut self.optimizer, &mut params, &grads, self.cfg).map_err(|e| match e {
                    TrainError::NonFiniteGradient { .. } => TrainError::NonFiniteLoss {
                        task: task.task_index,
                        epoch,
                    },
                    other => other,
                })?;
                model.set_params(&params);
            }
            if let Some(curve) = curve.as_deref_mut() {
                let losses = eval_tasks
                    .iter()
                    .map(|t| evaluate_loss(model, t, self.cfg.loss))
                    .collect::<Result<Vec<_>, _>>()?;
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(TrainError::NonFiniteLoss {
                        task: task.task_index,
                        epoch,
                    });
                }
                let global = curve.last().map_or(0, |p| p.epoch) + 1;
                curve.push(CurvePoint {
                    epoch: global,
                    training_task: task.task_index,
                    losses,
                });
            }
        }
        Ok(())
    }
}

/// Trains on `tasks` in order, snapshotting after each and recording the
/// loss of every snapshot on every task.
pub fn train_sequence<M: Model>(
    mut model: M,
    tasks: &[TaskDataset],
    cfg: &TrainConfig,
) -> Result<SequenceOutcome<M>, TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::Usage("task sequence is empty".into()));
    }
    for t in tasks {
        if t.inputs.cols() != model.input_dim() {
            return Err(TrainError::Shape(format!(
                "task {} has {} input columns, network expects {}",
                t.task_index,
                t.inputs.cols(),
                model.input_dim()
            )));
        }
    }
    let mut trainer = Trainer::new(cfg, model.num_params())?;
    let initial = tasks
        .iter()
        .map(|t| evaluate_loss(&model, t, cfg.loss))
        .collect::<Result<Vec<_>, _>>()?;
    let mut curve = vec![CurvePoint {
        epoch: 0,
        training_task: 0,
        losses: initial,
    }];
    let mut checkpoints = Vec::with_capacity(tasks.len());
    let mut ledger = ForgettingLedger::new(tasks.len());
    let mut ewc_state: Option<EwcState> = None;
    for (t, task) in tasks.iter().enumerate() {
        let sink = cfg.record_curve.then_some(&mut curve);
        trainer.train_task(&mut model, task, ewc_state.as_ref(), tasks, sink)?;
        for (i, eval) in tasks.iter().enumerate() {
            let pred = model.predict(&eval.inputs)?;
            let (loss, _) = task_loss(&pred, &eval.targets, cfg.loss)?;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    task: task.task_index,
                    epoch: cfg.epochs_per_task,
                });
            }
            ledger.record(t, i, loss, eval.accuracy(&pred));
        }
        if let Some(ewc) = &cfg.ewc {
            let memory: Vec<&TaskDataset> = match ewc.memory {
                FisherMemory::PrecedingTask => vec![task],
                FisherMemory::AllPrior => tasks[..=t].iter().collect(),
            };
            ewc_state = Some(EwcState {
                lambda: ewc.lambda,
                fisher_diag: fisher_estimate(&model, &memory, cfg.loss)?,
                anchor_params: model.params(),
            });
        }
        checkpoints.push(model.clone());
    }
    Ok(SequenceOutcome {
        checkpoints,
        ledger,
        curve,
    })
}
