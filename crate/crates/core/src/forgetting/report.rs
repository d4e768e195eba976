//! Forgetting-to-overlap ratio tables.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenominatorKind {
    PairwiseDelta,
    CumulativeMeasure,
    IntrinsicDimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub task_i: usize,
    /// `j` for pairwise rows, every later task for cumulative rows.
    pub partners: Vec<usize>,
    pub grid: Option<usize>,
    pub quantize_levels: Option<u32>,
    pub pixels: Option<usize>,
    pub forgetting: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub kind: DenominatorKind,
    pub note: String,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn ratios_for_grid(&self, grid: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.grid == Some(grid))
            .filter_map(|r| r.ratio)
            .collect()
    }
}

/// Sample standard deviation (n − 1) over the absolute mean. `None` for
/// fewer than two values or a zero mean.
pub fn coefficient_of_variation(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return None;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some(var.sqrt() / mean.abs())
}

/// Inputs for one pairwise row: train `i`, then `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurement {
    pub task_i: usize,
    pub task_j: usize,
    pub grid: usize,
    pub forgetting: f64,
    pub delta: f64,
    pub bin_width: f64,
}

fn ratio_or_flag(forgetting: f64, denominator: f64, floor: f64) -> (Option<f64>, Option<String>) {
    if denominator < floor || denominator <= 0.0 {
        let flag = if forgetting != 0.0 {
            "nonzero forgetting with overlap below one bin"
        } else {
            "overlap below one bin"
        };
        (None, Some(flag.to_string()))
    } else {
        (Some(forgetting / denominator), None)
    }
}

/// Rows `(i, j, F_i, Δ_ij, F_i/Δ_ij)`.
pub fn ratio_report_theorem1(pairs: &[PairMeasurement]) -> RatioReport {
    let rows = pairs
        .iter()
        .map(|m| {
            let (ratio, flag) = ratio_or_flag(m.forgetting, m.delta, m.bin_width);
            RatioRow {
                task_i: m.task_i,
                partners: vec![m.task_j],
                grid: Some(m.grid),
                quantize_levels: None,
                pixels: None,
                forgetting: m.forgetting,
                denominator: m.delta,
                ratio,
                flag,
            }
        })
        .collect();
    RatioReport {
        kind: DenominatorKind::PairwiseDelta,
        note: "F_i from two-task runs (train i, then j); supports measured on each task's own checkpoint".into(),
        rows,
    }
}

/// Inputs for one cumulative row of a `tasks`-long sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeMeasurement {
    pub task_i: usize,
    pub tasks: usize,
    pub grid: usize,
    pub forgetting: f64,
    pub cumulative: f64,
    pub bin_width: f64,
}

/// Rows `(i, {j > i}, F_i, Σ_j Σ_branches μ(S_i ∩ S_j), ratio)`; the last
/// task has no later tasks and is omitted.
pub fn ratio_report_theorem2(rows: &[CumulativeMeasurement]) -> RatioReport {
    let rows = rows
        .iter()
        .filter(|m| m.task_i < m.tasks)
        .map(|m| {
            let (ratio, flag) = ratio_or_flag(m.forgetting, m.cumulative, m.bin_width);
            RatioRow {
                task_i: m.task_i,
                partners: (m.task_i + 1..=m.tasks).collect(),
                grid: Some(m.grid),
                quantize_levels: None,
                pixels: None,
                forgetting: m.forgetting,
                denominator: m.cumulative,
                ratio,
                flag,
            }
        })
        .collect();
    RatioReport {
        kind: DenominatorKind::CumulativeMeasure,
        note: "F_i from the full sequence; denominator sums branch overlaps over later tasks".into(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionMeasurement {
    pub quantize_levels: u32,
    pub pixels: usize,
    pub intrinsic_dim: f64,
    pub forgetting_first: f64,
}

/// Rows `(Q, S, d, F_1, log10(F_1)/d)`.
pub fn ratio_report_theorem3(rows: &[DimensionMeasurement]) -> RatioReport {
    let rows = rows
        .iter()
        .map(|m| {
            let (ratio, flag) = if m.forgetting_first > 0.0 && m.intrinsic_dim > 0.0 {
                (Some(m.forgetting_first.log10() / m.intrinsic_dim), None)
            } else {
                (None, Some("non-positive forgetting has no logarithm".to_string()))
            };
            RatioRow {
                task_i: 1,
                partners: Vec::new(),
                grid: None,
                quantize_levels: Some(m.quantize_levels),
                pixels: Some(m.pixels),
                forgetting: m.forgetting_first,
                denominator: m.intrinsic_dim,
                ratio,
                flag,
            }
        })
        .collect();
    RatioReport {
        kind: DenominatorKind::IntrinsicDimension,
        note: "ratio = log10(F_1) / d with d = log2(Q * S)".into(),
        rows,
    }
}
