//! Binned activation supports and their overlaps.

use serde::{Deserialize, Serialize};

use super::LabError;
use crate::network::KanNetwork;
use crate::tasks::TaskDataset;

pub const DEFAULT_BINS: usize = 400;
pub const DEFAULT_THRESHOLD: f64 = 1e-2;

/// `bins` equal-width bins over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinAxis {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinAxis {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self, LabError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || bins == 0 {
            return Err(LabError::Usage(format!("invalid bin axis [{lo}, {hi}] with {bins} bins")));
        }
        Ok(Self { lo, hi, bins })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn bin_of(&self, z: f64) -> Option<usize> {
        if !(z >= self.lo && z <= self.hi) {
            return None;
        }
        let b = ((z - self.lo) / self.width()).floor() as usize;
        Some(b.min(self.bins - 1))
    }

    /// Left edge of bin `b`.
    pub fn edge(&self, b: usize) -> f64 {
        self.lo + b as f64 * self.width()
    }
}

/// Active-bin mask of one branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchMask(pub Vec<bool>);

impl BranchMask {
    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn and_count(&self, other: &BranchMask) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| **a && **b).count()
    }
}

/// Supports of every branch of one layer; masks indexed `q * in_dim + p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSupport {
    pub axis: BinAxis,
    pub in_dim: usize,
    pub out_dim: usize,
    pub masks: Vec<BranchMask>,
}

impl LayerSupport {
    pub fn measure(&self, branch: usize) -> f64 {
        self.masks[branch].count() as f64 * self.axis.width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub task_index: usize,
    pub threshold: f64,
    pub layers: Vec<LayerSupport>,
}

impl SupportProfile {
    /// Branch measures in layer-major order.
    pub fn measures(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| (0..l.masks.len()).map(move |b| l.measure(b)))
            .collect()
    }

    pub fn num_branches(&self) -> usize {
        self.layers.iter().map(|l| l.masks.len()).sum()
    }

    fn check_compatible(&self, other: &SupportProfile) -> Result<(), LabError> {
        if self.layers.len() != other.layers.len() {
            return Err(LabError::AxisMismatch(format!(
                "{} vs {} layers",
                self.layers.len(),
                other.layers.len()
            )));
        }
        for (l, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            if a.axis != b.axis || a.masks.len() != b.masks.len() {
                return Err(LabError::AxisMismatch(format!(
                    "layer {l}: axis {:?} with {} branches vs {:?} with {}",
                    a.axis,
                    a.masks.len(),
                    b.axis,
                    b.masks.len()
                )));
            }
        }
        Ok(())
    }
}

/// Per-layer axes covering the grid range and every pre-activation the
/// given (network, task) pairs produce. Profiles meant to be compared must
/// be measured on the same axes.
pub fn support_axes(runs: &[(&KanNetwork, &TaskDataset)], bins: usize) -> Result<Vec<BinAxis>, LabError> {
    let (first, _) = runs.first().ok_or_else(|| LabError::Usage("no runs to span".into()))?;
    let depth = first.depth();
    let mut spans: Vec<(f64, f64)> = first
        .layers()
        .iter()
        .map(|l| (l.grid().range_lo(), l.grid().range_hi()))
        .collect();
    for (net, task) in runs {
        if net.depth() != depth {
            return Err(LabError::Usage("networks differ in depth".into()));
        }
        if task.is_empty() {
            return Err(LabError::Usage(format!("task {} is empty", task.task_index)));
        }
        let trace = net.forward(&task.inputs)?;
        for (span, pre) in spans.iter_mut().zip(&trace.pre_activations) {
            for &z in pre.as_slice() {
                span.0 = span.0.min(z);
                span.1 = span.1.max(z);
            }
        }
    }
    spans.into_iter().map(|(lo, hi)| BinAxis::new(lo, hi, bins)).collect()
}

/// Marks bin(z) active for every sample whose pre-activation `z` gives
/// `|φ(z)| > threshold`.
pub fn mask_from_samples(axis: &BinAxis, samples: impl IntoIterator<Item = (f64, f64)>, threshold: f64) -> BranchMask {
    let mut mask = vec![false; axis.bins];
    for (z, value) in samples {
        if value.abs() > threshold {
            if let Some(b) = axis.bin_of(z) {
                mask[b] = true;
            }
        }
    }
    BranchMask(mask)
}

/// Supports of `net` on `task`, binned on explicit per-layer axes.
pub fn measure_supports_on(
    net: &KanNetwork,
    task: &TaskDataset,
    threshold: f64,
    axes: &[BinAxis],
) -> Result<SupportProfile, LabError> {
    if !(threshold > 0.0) {
        return Err(LabError::Usage(format!("threshold must be positive, got {threshold}")));
    }
    if task.is_empty() {
        return Err(LabError::Usage(format!("task {} is empty", task.task_index)));
    }
    if axes.len() != net.depth() {
        return Err(LabError::Usage(format!("{} axes for {} layers", axes.len(), net.depth())));
    }
    if let Some(a) = axes.iter().find(|a| a.bins < 10) {
        return Err(LabError::Usage(format!("at least 10 bins required, got {}", a.bins)));
    }
    let trace = net.forward_with_branches(&task.inputs)?;
    let branches = trace.branch_outputs.as_ref().expect("branch outputs requested");
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let (pre, out) = (&trace.pre_activations[l], &branches[l]);
            let in_dim = layer.in_dim();
            let masks = (0..layer.num_branches())
                .map(|col| {
                    let p = col % in_dim;
                    mask_from_samples(
                        &axes[l],
                        (0..pre.rows()).map(|b| (pre.get(b, p), out.get(b, col))),
                        threshold,
                    )
                })
                .collect();
            LayerSupport {
                axis: axes[l],
                in_dim,
                out_dim: layer.out_dim(),
                masks,
            }
        })
        .collect();
    Ok(SupportProfile {
        task_index: task.task_index,
        threshold,
        layers,
    })
}

/// Supports of `net` on `task` with axes derived from this pair alone.
pub fn measure_supports(net: &KanNetwork, task: &TaskDataset, threshold: f64, bins: usize) -> Result<SupportProfile, LabError> {
    let axes = support_axes(&[(net, task)], bins)?;
    measure_supports_on(net, task, threshold, &axes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    /// Maximum per-branch overlap.
    pub delta: f64,
    /// `per_branch[l][branch]`.
    pub per_branch: Vec<Vec<f64>>,
    /// Overlap bin counts, same layout.
    pub counts: Vec<Vec<usize>>,
}

pub fn pairwise_overlap(a: &SupportProfile, b: &SupportProfile) -> Result<PairOverlap, LabError> {
    a.check_compatible(b)?;
    let counts: Vec<Vec<usize>> = a
        .layers
        .iter()
        .zip(&b.layers)
        .map(|(la, lb)| la.masks.iter().zip(&lb.masks).map(|(x, y)| x.and_count(y)).collect())
        .collect();
    let per_branch: Vec<Vec<f64>> = counts
        .iter()
        .zip(&a.layers)
        .map(|(c, l)| c.iter().map(|&n| n as f64 * l.axis.width()).collect())
        .collect();
    let delta = per_branch.iter().flatten().copied().fold(0.0, f64::max);
    Ok(PairOverlap {
        delta,
        per_branch,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeOverlap {
    /// `Σ_{j>i} μ(S_i ∩ S_j)` per branch.
    pub per_branch: Vec<Vec<f64>>,
    pub total: f64,
}

/// Sums pairwise overlaps of profile `i` (0-based) with every later profile.
pub fn cumulative_overlap(profiles: &[SupportProfile], i: usize) -> Result<CumulativeOverlap, LabError> {
    let base = profiles
        .get(i)
        .ok_or_else(|| LabError::Usage(format!("profile index {i} out of range 0..{}", profiles.len())))?;
    let mut per_branch: Vec<Vec<f64>> = base.layers.iter().map(|l| vec![0.0; l.masks.len()]).collect();
    for later in &profiles[i + 1..] {
        let o = pairwise_overlap(base, later)?;
        for (acc, add) in per_branch.iter_mut().zip(&o.per_branch) {
            acc.iter_mut().zip(add).for_each(|(a, b)| *a += b);
        }
    }
    let total = per_branch.iter().flatten().sum();
    Ok(CumulativeOverlap { per_branch, total })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionBranch {
    pub union_measure: f64,
    pub delta_sum: f64,
    pub own_measure: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionOverlap {
    pub per_branch: Vec<Vec<UnionBranch>>,
}

impl UnionOverlap {
    pub fn violations(&self) -> usize {
        self.per_branch.iter().flatten().filter(|b| !b.holds).count()
    }
}

/// Measures `U_i = ∪_{j>i} (S_i ∩ S_j)` per branch and checks
/// `μ(U_i) ≤ min(Σ_{j>i} Δ_ij, μ(S_i))`.
///
/// The check runs on bin counts, which makes it exact: the union count is at
/// most the own count and at most the summed per-pair counts, and each pair's
/// count times the bin width is bounded by that pair's Δ.
pub fn union_overlap(profiles: &[SupportProfile], i: usize) -> Result<UnionOverlap, LabError> {
    let base = profiles
        .get(i)
        .ok_or_else(|| LabError::Usage(format!("profile index {i} out of range 0..{}", profiles.len())))?;
    let later = &profiles[i + 1..];
    let pairs = later
        .iter()
        .map(|p| pairwise_overlap(base, p))
        .collect::<Result<Vec<_>, _>>()?;
    let delta_sum: f64 = pairs.iter().map(|p| p.delta).sum();
    let mut per_branch = Vec::with_capacity(base.layers.len());
    for (l, layer) in base.layers.iter().enumerate() {
        let w = layer.axis.width();
        let mut row = Vec::with_capacity(layer.masks.len());
        for (b, own) in layer.masks.iter().enumerate() {
            let union_count = (0..layer.axis.bins)
                .filter(|&k| own.0[k] && later.iter().any(|p| p.layers[l].masks[b].0[k]))
                .count();
            let pair_counts: usize = pairs.iter().map(|p| p.counts[l][b]).sum();
            let pairs_within_delta = pairs.iter().all(|p| p.per_branch[l][b] <= p.delta);
            let holds = union_count <= own.count() && union_count <= pair_counts && pairs_within_delta;
            let entry = UnionBranch {
                union_measure: union_count as f64 * w,
                delta_sum,
                own_measure: own.count() as f64 * w,
                holds,
            };
            if !holds {
                return Err(LabError::BoundViolation {
                    task: base.task_index,
                    layer: l,
                    branch: b,
                    union: entry.union_measure,
                    bound: entry.delta_sum.min(entry.own_measure),
                });
            }
            row.push(entry);
        }
        per_branch.push(row);
    }
    Ok(UnionOverlap { per_branch })
}
