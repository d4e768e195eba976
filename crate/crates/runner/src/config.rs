//! Experiment configuration files and their validation.

use std::fmt;
use std::path::{Path, PathBuf};

use kanlab_core::montecarlo::McConfig;
use kanlab_core::network::KanInit;
use kanlab_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BinaryAdd,
    DecimalAdd,
    MnistCl,
    Theorem1,
    Theorem2,
    Theorem3,
    Corollary1Mc,
    SaturationMc,
    DimensionMc,
    FragmentationMc,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::BinaryAdd => "binary-add",
            ExperimentKind::DecimalAdd => "decimal-add",
            ExperimentKind::MnistCl => "mnist-cl",
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::Theorem3 => "theorem3",
            ExperimentKind::Corollary1Mc => "corollary1-mc",
            ExperimentKind::SaturationMc => "saturation-mc",
            ExperimentKind::DimensionMc => "dimension-mc",
            ExperimentKind::FragmentationMc => "fragmentation-mc",
        }
    }

    pub fn is_monte_carlo(self) -> bool {
        matches!(
            self,
            ExperimentKind::Corollary1Mc
                | ExperimentKind::SaturationMc
                | ExperimentKind::DimensionMc
                | ExperimentKind::FragmentationMc
        )
    }

    pub fn uses_mnist(self) -> bool {
        matches!(self, ExperimentKind::MnistCl | ExperimentKind::Theorem3)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Layer widths; required except for image experiments, whose input
    /// width follows the image size.
    pub dims: Option<Vec<usize>>,
    pub grid_sizes: Vec<usize>,
    pub order: usize,
    pub range: (f64, f64),
    pub base_weight_scale: f64,
    pub spline_weight_scale: f64,
    pub noise_scale: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let init = KanInit::default();
        Self {
            dims: None,
            grid_sizes: vec![init.grid_size],
            order: init.order,
            range: init.range,
            base_weight_scale: init.base_weight_scale,
            spline_weight_scale: init.spline_weight_scale,
            noise_scale: init.noise_scale,
        }
    }
}

impl NetworkSection {
    pub fn init_for(&self, grid_size: usize) -> KanInit {
        KanInit {
            range: self.range,
            grid_size,
            order: self.order,
            base_weight_scale: self.base_weight_scale,
            spline_weight_scale: self.spline_weight_scale,
            noise_scale: self.noise_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub threshold: f64,
    pub bins: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            threshold: kanlab_core::forgetting::DEFAULT_THRESHOLD,
            bins: kanlab_core::forgetting::DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub trials: usize,
    pub seed: u64,
    pub shard_size: usize,
    /// Interval lengths crossed with themselves (corollary1-mc).
    pub s_values: Vec<f64>,
    /// Reference and later lengths, and the number of later tasks (saturation-mc).
    pub s_i: f64,
    pub s_j: f64,
    pub later_tasks: usize,
    /// `(d_i, d_j)` pairs swept over `r_sweep` (dimension-mc).
    pub dimension_pairs: Vec<(f64, f64)>,
    pub r_sweep: Vec<f64>,
    /// `d_i` values swept over `k_sweep` at fixed `d_j`, `r` (fragmentation-mc).
    pub fragment_dims: Vec<f64>,
    pub fragment_d_j: f64,
    pub fragment_r: f64,
    pub k_sweep: Vec<f64>,
}

impl Default for McSection {
    fn default() -> Self {
        let mc = McConfig::default();
        Self {
            trials: mc.trials,
            seed: mc.seed,
            shard_size: mc.shard_size,
            s_values: vec![0.1, 0.2, 0.5],
            s_i: 0.3,
            s_j: 0.3,
            later_tasks: 50,
            dimension_pairs: vec![(1.0, 1.0), (2.0, 3.0), (3.0, 3.0)],
            r_sweep: vec![0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4],
            fragment_dims: vec![1.0, 2.0],
            fragment_d_j: 1.0,
            fragment_r: 0.4,
            k_sweep: vec![1.0, 2.0, 4.0, 8.0],
        }
    }
}

impl McSection {
    pub fn mc_config(&self, seed_offset: u64) -> McConfig {
        McConfig {
            trials: self.trials,
            seed: self.seed.wrapping_add(seed_offset),
            shard_size: self.shard_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistSection {
    pub data_dir: PathBuf,
    pub images_file: String,
    pub labels_file: String,
    pub samples_per_class: usize,
    /// `(Q, S)`: quantization levels and square side length.
    pub configs: Vec<(u32, usize)>,
    pub hidden: Vec<usize>,
}

impl Default for MnistSection {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/mnist"),
            images_file: "train-images-idx3-ubyte".into(),
            labels_file: "train-labels-idx1-ubyte".into(),
            samples_per_class: 100,
            configs: vec![(2, 8), (2, 16), (2, 28), (4, 28), (8, 28), (16, 28), (32, 28)],
            hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Option<Vec<u64>>,
    pub output_dir: Option<PathBuf>,
    pub network: Option<NetworkSection>,
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    pub mc: Option<McSection>,
    pub mnist: Option<MnistSection>,
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![0])
    }

    pub fn network(&self) -> NetworkSection {
        self.network.clone().unwrap_or_default()
    }

    pub fn train(&self) -> TrainConfig {
        self.train.clone().unwrap_or_default()
    }

    pub fn mc(&self) -> McSection {
        self.mc.clone().unwrap_or_default()
    }

    pub fn mnist(&self) -> MnistSection {
        self.mnist.clone().unwrap_or_default()
    }

    /// Every optional section filled in with the value the run will use.
    pub fn resolved(&self) -> ExperimentConfig {
        let k = self.kind;
        let mut out = self.clone();
        out.seeds = Some(self.seeds());
        if !k.is_monte_carlo() {
            out.network = Some(self.network());
            out.train = Some(self.train());
        }
        if k.is_monte_carlo() {
            out.mc = Some(self.mc());
        }
        if k.uses_mnist() {
            out.mnist = Some(self.mnist());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Parse failures carry toml's line and column report.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{} problem(s):\n{}", .0.len(), .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.into(),
        message: e.to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Reads, parses and checks a config file without running anything.
pub fn validate_config(path: &Path) -> Result<Vec<Diagnostic>, ConfigError> {
    Ok(check(&load_config(path)?))
}

/// Semantic checks on a parsed config.
pub fn check(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let kind = cfg.kind;
    match &cfg.seeds {
        None => d.push(Diagnostic::error(
            "seeds",
            "missing; add `seeds = [0]` for the default single run",
        )),
        Some(s) if s.is_empty() => d.push(Diagnostic::error("seeds", "must list at least one seed")),
        Some(s) => {
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                d.push(Diagnostic::error("seeds", "contains duplicates"));
            }
        }
    }
    if kind.is_monte_carlo() {
        match &cfg.mc {
            None => d.push(Diagnostic::error("mc", format!("section required for {kind}"))),
            Some(mc) => check_mc(kind, mc, &mut d),
        }
    } else {
        match &cfg.network {
            None => d.push(Diagnostic::error("network", format!("section required for {kind}"))),
            Some(n) => check_network(kind, n, &mut d),
        }
        match &cfg.train {
            None => d.push(Diagnostic::error("train", format!("section required for {kind}"))),
            Some(t) => check_train(t, &mut d),
        }
        if !(cfg.analysis.threshold > 0.0) {
            d.push(Diagnostic::error("analysis.threshold", "must be positive"));
        }
        if cfg.analysis.bins < 10 {
            d.push(Diagnostic::error("analysis.bins", "must be at least 10"));
        }
    }
    if kind.uses_mnist() {
        match &cfg.mnist {
            None => d.push(Diagnostic::error("mnist", format!("section required for {kind}"))),
            Some(m) => check_mnist(m, &mut d),
        }
    }
    d
}

fn check_network(kind: ExperimentKind, n: &NetworkSection, d: &mut Vec<Diagnostic>) {
    if n.grid_sizes.is_empty() {
        d.push(Diagnostic::error("network.grid_sizes", "must list at least one grid size"));
    }
    if n.grid_sizes.contains(&0) {
        d.push(Diagnostic::error("network.grid_sizes", "grid sizes must be at least 1"));
    }
    if !(n.range.0 < n.range.1) {
        d.push(Diagnostic::error("network.range", "lower end must be below upper end"));
    }
    if n.noise_scale < 0.0 {
        d.push(Diagnostic::error("network.noise_scale", "must be non-negative"));
    }
    if kind.uses_mnist() {
        return;
    }
    let want = match kind {
        ExperimentKind::BinaryAdd => Some((3, 2)),
        ExperimentKind::DecimalAdd | ExperimentKind::Theorem1 | ExperimentKind::Theorem2 => Some((2, 2)),
        _ => None,
    };
    match (&n.dims, want) {
        (None, _) => d.push(Diagnostic::error("network.dims", format!("required for {kind}"))),
        (Some(dims), _) if dims.len() < 2 || dims.contains(&0) => {
            d.push(Diagnostic::error("network.dims", "need at least two positive widths"))
        }
        (Some(dims), Some((i, o))) if dims[0] != i || dims[dims.len() - 1] != o => d.push(Diagnostic::error(
            "network.dims",
            format!("{kind} tasks need {i} inputs and {o} outputs, got {dims:?}"),
        )),
        _ => {}
    }
}

fn check_train(t: &TrainConfig, d: &mut Vec<Diagnostic>) {
    if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
        d.push(Diagnostic::error(
            "train.learning_rate",
            format!("must be positive, got {}", t.learning_rate),
        ));
    }
    if !(t.weight_decay >= 0.0) {
        d.push(Diagnostic::error("train.weight_decay", "must be non-negative"));
    }
    if !(0.0..1.0).contains(&t.betas.0) || !(0.0..1.0).contains(&t.betas.1) {
        d.push(Diagnostic::error("train.betas", "both must lie in [0, 1)"));
    }
    if !(t.epsilon > 0.0) {
        d.push(Diagnostic::error("train.epsilon", "must be positive"));
    }
    if t.batch_size == Some(0) {
        d.push(Diagnostic::error("train.batch_size", "must be positive; omit it for full batch"));
    }
    if let Some(e) = &t.ewc {
        if !(e.lambda >= 0.0) {
            d.push(Diagnostic::error("train.ewc.lambda", "must be non-negative"));
        }
    }
}

fn check_mc(kind: ExperimentKind, mc: &McSection, d: &mut Vec<Diagnostic>) {
    if mc.trials == 0 {
        d.push(Diagnostic::error("mc.trials", "must be at least 1"));
    }
    if mc.shard_size == 0 {
        d.push(Diagnostic::error("mc.shard_size", "must be at least 1"));
    }
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    match kind {
        ExperimentKind::Corollary1Mc => {
            if mc.s_values.is_empty() || !mc.s_values.iter().all(|s| unit(*s)) {
                d.push(Diagnostic::error("mc.s_values", "need one or more lengths in [0, 1]"));
            }
        }
        ExperimentKind::SaturationMc => {
            if !unit(mc.s_i) {
                d.push(Diagnostic::error("mc.s_i", "must lie in [0, 1]"));
            }
            if !unit(mc.s_j) {
                d.push(Diagnostic::error("mc.s_j", "must lie in [0, 1]"));
            }
            if mc.later_tasks == 0 {
                d.push(Diagnostic::error("mc.later_tasks", "must be at least 1"));
            }
        }
        ExperimentKind::DimensionMc => {
            if mc.dimension_pairs.is_empty() || mc.dimension_pairs.iter().any(|(a, b)| !(*a >= 1.0 && *b >= 1.0)) {
                d.push(Diagnostic::error("mc.dimension_pairs", "need pairs with both dimensions ≥ 1"));
            }
            if mc.r_sweep.len() < 4 || mc.r_sweep.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
                d.push(Diagnostic::error("mc.r_sweep", "need at least 4 values in (0, 1)"));
            }
        }
        ExperimentKind::FragmentationMc => {
            if mc.fragment_dims.is_empty() || mc.fragment_dims.iter().any(|v| !(*v >= 1.0)) {
                d.push(Diagnostic::error("mc.fragment_dims", "need dimensions ≥ 1"));
            }
            if !(mc.fragment_d_j >= 1.0) {
                d.push(Diagnostic::error("mc.fragment_d_j", "must be at least 1"));
            }
            if !(mc.fragment_r > 0.0 && mc.fragment_r < 1.0) {
                d.push(Diagnostic::error("mc.fragment_r", "must lie in (0, 1)"));
            }
            if mc.k_sweep.len() < 2 || mc.k_sweep.iter().any(|k| !(*k >= 1.0)) {
                d.push(Diagnostic::error("mc.k_sweep", "need at least 2 values ≥ 1"));
            }
        }
        _ => {}
    }
}

fn check_mnist(m: &MnistSection, d: &mut Vec<Diagnostic>) {
    if m.samples_per_class == 0 {
        d.push(Diagnostic::error("mnist.samples_per_class", "must be at least 1"));
    }
    if m.configs.is_empty() {
        d.push(Diagnostic::error("mnist.configs", "must list at least one (Q, S) pair"));
    }
    for (q, s) in &m.configs {
        if *q < 2 || *s == 0 {
            d.push(Diagnostic::error(
                "mnist.configs",
                format!("({q}, {s}): need Q ≥ 2 and a positive side"),
            ));
        }
    }
    if m.hidden.contains(&0) {
        d.push(Diagnostic::error("mnist.hidden", "hidden widths must be positive"));
    }
}
