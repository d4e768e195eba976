//! Monte Carlo estimates of random support overlaps on the unit torus.
//!
//! Every support model reduces to one arc of known length placed uniformly
//! on [0, 1):
//!
//! | model                      | arc length   |
//! |----------------------------|--------------|
//! | torus interval `s`         | `s`          |
//! | projected manifold `(r,d)` | `r^d`        |
//! | fragmented `(r,d,k)`       | `(r/k)^d`    |
//!
//! The projected model stands in for a `d`-dimensional task manifold whose
//! branch fires with probability `O(r^d)`; it reproduces the `r^(d_i+d_j)`
//! overlap rate without the covering constants. The fragmented model keeps a
//! single active fragment per trial.
//!
//! Trials run in fixed-size shards. Shard `k` draws from a ChaCha8 stream
//! `k` keyed by the cell seed, and shard sums are combined in shard order
//! with compensated summation, so results do not depend on worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("{0}")]
    Usage(String),
    #[error("degenerate sweep: {0}")]
    Degenerate(String),
    #[error("trial {trial}: union {union} exceeds support measure {bound}")]
    BoundViolation { trial: usize, union: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SupportModel {
    TorusInterval { s: f64 },
    ManifoldProjected { r: f64, d: f64 },
    Fragmented { r: f64, d: f64, k: f64 },
    /// Arc placed `offset` after the reference support's start instead of
    /// uniformly; only meaningful as a later support in a saturation run.
    Anchored { offset: f64, len: f64 },
}

impl SupportModel {
    pub fn validate(&self) -> Result<(), McError> {
        let bad = |m: String| Err(McError::Usage(m));
        match *self {
            SupportModel::TorusInterval { s } if !(0.0..=1.0).contains(&s) => bad(format!("s = {s} outside [0, 1]")),
            SupportModel::ManifoldProjected { r, d } | SupportModel::Fragmented { r, d, .. }
                if !(r > 0.0 && r < 1.0) || !(d >= 1.0) =>
            {
                bad(format!("need r in (0, 1) and d ≥ 1, got r = {r}, d = {d}"))
            }
            SupportModel::Fragmented { k, .. } if !(k >= 1.0) => bad(format!("k = {k} below 1")),
            SupportModel::Anchored { offset, len } if !(0.0..=1.0).contains(&len) || !offset.is_finite() => {
                bad(format!("anchored arc offset {offset}, length {len}"))
            }
            _ => Ok(()),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            SupportModel::TorusInterval { s } => s,
            SupportModel::ManifoldProjected { r, d } => r.powf(d),
            SupportModel::Fragmented { r, d, k } => (r / k).powf(d),
            SupportModel::Anchored { len, .. } => len,
        }
    }

    fn place(&self, rng: &mut ChaCha8Rng, anchor: f64) -> Arc {
        let start = match *self {
            SupportModel::Anchored { offset, .. } => (anchor + offset).rem_euclid(1.0),
            _ => rng.random::<f64>(),
        };
        Arc {
            start,
            len: self.length(),
        }
    }
}

/// `[start, start + len)` on the torus [0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

fn line_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Exact measure of the intersection of two arcs, wrap-around included.
pub fn torus_overlap(a: Arc, b: Arc) -> Result<f64, McError> {
    for arc in [a, b] {
        if !(0.0..=1.0).contains(&arc.len) || !arc.start.is_finite() {
            return Err(McError::Usage(format!("arc {arc:?} needs a length in [0, 1]")));
        }
    }
    Ok(overlap_unchecked(a, b))
}

fn overlap_unchecked(a: Arc, b: Arc) -> f64 {
    if a.len == 0.0 || b.len == 0.0 {
        return 0.0;
    }
    if a.len == 1.0 {
        return b.len;
    }
    if b.len == 1.0 {
        return a.len;
    }
    let a0 = a.start.rem_euclid(1.0);
    let b0 = b.start.rem_euclid(1.0);
    // Copies of b shifted by whole turns are disjoint since b.len < 1.
    (-1..=1)
        .map(|k| line_overlap(a0, a0 + a.len, b0 + k as f64, b0 + k as f64 + b.len))
        .sum::<f64>()
        .min(a.len.min(b.len))
}

/// Parts of `b` inside `a`, in `a`-local coordinates `[0, a.len)`.
fn local_pieces(a: Arc, b: Arc, out: &mut Vec<(f64, f64)>) {
    let a0 = a.start.rem_euclid(1.0);
    let b0 = b.start.rem_euclid(1.0);
    if b.len >= 1.0 {
        out.push((0.0, a.len));
        return;
    }
    for k in -1..=1 {
        let lo = (b0 + k as f64).max(a0);
        let hi = (b0 + k as f64 + b.len).min(a0 + a.len);
        if hi > lo {
            out.push((lo - a0, hi - a0));
        }
    }
}

fn union_length(pieces: &mut [(f64, f64)]) -> f64 {
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &(lo, hi) in pieces.iter() {
        match cur {
            Some((cl, ch)) if lo <= ch => cur = Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                total += ch - cl;
                cur = Some((lo, hi));
            }
            None => cur = Some((lo, hi)),
        }
    }
    if let Some((cl, ch)) = cur {
        total += ch - cl;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub shard_size: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0,
            shard_size: 4096,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if self.trials == 0 || self.shard_size == 0 {
            return Err(McError::Usage("trials and shard_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Same config with an independent seed for sub-experiment `cell`.
    pub fn cell(&self, cell: u64) -> McConfig {
        // SplitMix64 finalizer over (seed, cell).
        let mut z = self.seed ^ cell.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        McConfig {
            seed: z ^ (z >> 31),
            ..*self
        }
    }

    fn shards(&self) -> Vec<(u64, usize)> {
        let n = self.trials.div_ceil(self.shard_size);
        (0..n)
            .map(|k| (k as u64, self.shard_size.min(self.trials - k * self.shard_size)))
            .collect()
    }

    fn rng(&self, shard: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(shard);
        rng
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: Compensated,
    sumsq: Compensated,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum.add(v);
        self.sumsq.add(v * v);
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum.add(other.sum.value());
        self.sumsq.add(other.sumsq.value());
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum.value() / n;
        let var = if self.n > 1 {
            ((self.sumsq.value() - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error: (var / n).sqrt(),
            trials: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
}

impl McEstimate {
    /// `(mean − expected) / std_error`; zero when both agree exactly.
    pub fn z_score(&self, expected: f64) -> f64 {
        let d = self.mean - expected;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Mean overlap of independently placed supports over `cfg.trials` trials.
pub fn mc_expected_overlap(mi: &SupportModel, mj: &SupportModel, cfg: &McConfig) -> Result<McEstimate, McError> {
    mi.validate()?;
    mj.validate()?;
    cfg.validate()?;
    let shards: Vec<Moments> = cfg
        .shards()
        .into_par_iter()
        .map(|(k, n)| {
            let mut rng = cfg.rng(k);
            let mut m = Moments::default();
            for _ in 0..n {
                let a = mi.place(&mut rng, 0.0);
                let b = mj.place(&mut rng, a.start);
                m.push(overlap_unchecked(a, b));
            }
            m
        })
        .collect();
    let mut total = Moments::default();
    shards.iter().for_each(|s| total.merge(s));
    Ok(total.estimate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationCurve {
    /// `points[t - 1]` is the union measure after `t` later tasks.
    pub points: Vec<McEstimate>,
    pub support_measure: f64,
    /// `support_measure − mean` per point.
    pub slack: Vec<f64>,
    /// First `t` whose mean reaches 95% of the support measure.
    pub plateau_onset: Option<usize>,
}

/// Mean `μ(∪_{t ≤ T} S_i ∩ S_t)` for `T = 1..=later.len()`.
pub fn saturation_curve(mi: &SupportModel, later: &[SupportModel], cfg: &McConfig) -> Result<SaturationCurve, McError> {
    if later.is_empty() {
        return Err(McError::Usage("saturation needs at least one later support".into()));
    }
    mi.validate()?;
    later.iter().try_for_each(SupportModel::validate)?;
    cfg.validate()?;
    let support = mi.length();
    let t_max = later.len();
    let shards: Vec<Result<Vec<Moments>, McError>> = cfg
        .shards()
        .into_par_iter()
        .map(|(k, n)| {
            let mut rng = cfg.rng(k);
            let mut per_t = vec![Moments::default(); t_max];
            let mut pieces = Vec::with_capacity(3 * t_max);
            for trial in 0..n {
                let a = mi.place(&mut rng, 0.0);
                pieces.clear();
                for (t, m) in later.iter().enumerate() {
                    let b = m.place(&mut rng, a.start);
                    local_pieces(a, b, &mut pieces);
                    let u = union_length(&mut pieces.clone());
                    if u > support + 1e-12 {
                        return Err(McError::BoundViolation {
                            trial: k as usize * cfg.shard_size + trial,
                            union: u,
                            bound: support,
                        });
                    }
                    per_t[t].push(u.min(support));
                }
            }
            Ok(per_t)
        })
        .collect();
    let mut total = vec![Moments::default(); t_max];
    for shard in shards {
        for (acc, m) in total.iter_mut().zip(shard?) {
            acc.merge(&m);
        }
    }
    let points: Vec<McEstimate> = total.iter().map(Moments::estimate).collect();
    let slack = points.iter().map(|p| support - p.mean).collect();
    let plateau_onset = points
        .iter()
        .position(|p| support > 0.0 && p.mean >= 0.95 * support)
        .map(|t| t + 1);
    Ok(SaturationCurve {
        points,
        support_measure: support,
        slack,
        plateau_onset,
    })
}

/// Expected union after `t` uniform later arcs of length `s_j`:
/// `s_i (1 − (1 − s_j)^t)`.
pub fn saturation_closed_form(s_i: f64, s_j: f64, t: usize) -> f64 {
    s_i * (1.0 - (1.0 - s_j).powi(t as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `ln y − (intercept + slope·ln x)` per point.
    pub residuals: Vec<f64>,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit, McError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(McError::Degenerate(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    if let Some(i) = (0..xs.len()).find(|&i| !(xs[i] > 0.0) || !(ys[i] > 0.0)) {
        return Err(McError::Degenerate(format!(
            "point {i} = ({}, {}) is not positive",
            xs[i], ys[i]
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(McError::Degenerate("all x values coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - (intercept + slope * x)).collect();
    let slope_stderr = if lx.len() > 2 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        slope_stderr,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub sweep: Vec<f64>,
    pub points: Vec<McEstimate>,
    pub expected: Vec<f64>,
    pub fit: PowerLawFit,
}

fn run_sweep(
    sweep: &[f64],
    cfg: &McConfig,
    models: impl Fn(f64) -> (SupportModel, SupportModel),
) -> Result<ScalingStudy, McError> {
    let mut points = Vec::with_capacity(sweep.len());
    let mut expected = Vec::with_capacity(sweep.len());
    for (idx, &x) in sweep.iter().enumerate() {
        let (mi, mj) = models(x);
        let est = mc_expected_overlap(&mi, &mj, &cfg.cell(idx as u64))?;
        if est.mean <= 0.0 {
            return Err(McError::Degenerate(format!(
                "no overlap observed at sweep value {x}; raise trials"
            )));
        }
        expected.push(mi.length() * mj.length());
        points.push(est);
    }
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let fit = fit_power_law(sweep, &ys)?;
    Ok(ScalingStudy {
        sweep: sweep.to_vec(),
        points,
        expected,
        fit,
    })
}

/// Fits `ln E[overlap]` against `ln r` for projected supports of dimension
/// `d_i`, `d_j`; the slope estimates `d_i + d_j`.
pub fn dimension_scaling(d_i: f64, d_j: f64, r_sweep: &[f64], cfg: &McConfig) -> Result<ScalingStudy, McError> {
    if r_sweep.len() < 4 {
        return Err(McError::Degenerate(format!("{} sweep points, need at least 4", r_sweep.len())));
    }
    if let Some(r) = r_sweep.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(McError::Degenerate(format!("r = {r} outside (0, 1)")));
    }
    run_sweep(r_sweep, cfg, |r| {
        (
            SupportModel::ManifoldProjected { r, d: d_i },
            SupportModel::ManifoldProjected { r, d: d_j },
        )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationStudy {
    /// Sweep over `k_i` with `k_j = 1`; slope estimates `−d_i`.
    pub over_k_i: ScalingStudy,
    /// Sweep over `k_j` with `k_i = 1`; slope estimates `−d_j`.
    pub over_k_j: ScalingStudy,
}

pub fn fragmentation_scaling(d_i: f64, d_j: f64, r: f64, k_sweep: &[f64], cfg: &McConfig) -> Result<FragmentationStudy, McError> {
    if k_sweep.len() < 2 {
        return Err(McError::Degenerate("need at least 2 k values".into()));
    }
    if let Some(k) = k_sweep.iter().find(|k| !(**k >= 1.0)) {
        return Err(McError::Degenerate(format!("k = {k} below 1")));
    }
    let frag = |d: f64, k: f64| SupportModel::Fragmented { r, d, k };
    let over_k_i = run_sweep(k_sweep, &cfg.cell(1 << 32), |k| (frag(d_i, k), frag(d_j, 1.0)))?;
    let over_k_j = run_sweep(k_sweep, &cfg.cell(2 << 32), |k| (frag(d_i, 1.0), frag(d_j, k)))?;
    Ok(FragmentationStudy { over_k_i, over_k_j })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(start: f64, len: f64) -> Arc {
        Arc { start, len }
    }

    #[test]
    fn torus_overlap_cases() {
        assert!((torus_overlap(arc(0.3, 0.4), arc(0.3, 0.4)).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(torus_overlap(arc(0.3, 0.0), arc(0.1, 0.9)).unwrap(), 0.0);
        // [0, 0.3) against [0.95, 1.15): the wrapped part covers [0, 0.15).
        let o = torus_overlap(arc(0.0, 0.3), arc(0.95, 0.2)).unwrap();
        assert!((o - 0.15).abs() < 1e-12);
        // [0, 0.2) against [0.95, 1.25) covers all of the first arc.
        let o = torus_overlap(arc(0.0, 0.2), arc(0.95, 0.3)).unwrap();
        assert!((o - 0.2).abs() < 1e-12);
        assert!(torus_overlap(arc(0.0, 1.2), arc(0.0, 0.1)).is_err());
        assert_eq!(torus_overlap(arc(0.7, 1.0), arc(0.2, 0.35)).unwrap(), 0.35);
    }

    #[test]
    fn torus_overlap_matches_grid_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        for _ in 0..50 {
            let a = arc(rng.random(), rng.random());
            let b = arc(rng.random(), rng.random());
            let inside = |x: f64, c: Arc| (x - c.start).rem_euclid(1.0) < c.len;
            let hits = (0..n)
                .filter(|&i| {
                    let x = (i as f64 + 0.5) / n as f64;
                    inside(x, a) && inside(x, b)
                })
                .count();
            let o = torus_overlap(a, b).unwrap();
            assert!((o - hits as f64 / n as f64).abs() <= 2.0 / n as f64, "{a:?} {b:?}");
            assert!(o <= a.len.min(b.len));
        }
    }

    #[test]
    fn expected_overlap_is_product_of_lengths() {
        let cfg = McConfig {
            trials: 100_000,
            seed: 11,
            ..McConfig::default()
        };
        let e = mc_expected_overlap(
            &SupportModel::TorusInterval { s: 0.2 },
            &SupportModel::TorusInterval { s: 0.3 },
            &cfg,
        )
        .unwrap();
        assert!(e.z_score(0.06).abs() <= 3.0, "{e:?}");
    }

    #[test]
    fn extreme_lengths_are_exact() {
        let cfg = McConfig {
            trials: 5000,
            ..McConfig::default()
        };
        let zero = SupportModel::TorusInterval { s: 0.0 };
        let one = SupportModel::TorusInterval { s: 1.0 };
        let half = SupportModel::TorusInterval { s: 0.5 };
        assert_eq!(mc_expected_overlap(&zero, &half, &cfg).unwrap().mean, 0.0);
        let full = mc_expected_overlap(&one, &one, &cfg).unwrap();
        assert_eq!((full.mean, full.std_error), (1.0, 0.0));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let cfg = McConfig {
            trials: 30_000,
            seed: 5,
            shard_size: 1000,
        };
        let (a, b) = (SupportModel::TorusInterval { s: 0.3 }, SupportModel::TorusInterval { s: 0.45 });
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_expected_overlap(&a, &b, &cfg).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn saturation_against_closed_form() {
        let cfg = McConfig {
            trials: 20_000,
            seed: 2,
            ..McConfig::default()
        };
        let later = vec![SupportModel::TorusInterval { s: 0.3 }; 50];
        let c = saturation_curve(&SupportModel::TorusInterval { s: 0.3 }, &later, &cfg).unwrap();
        for (t, p) in c.points.iter().enumerate() {
            let want = saturation_closed_form(0.3, 0.3, t + 1);
            assert!(p.mean <= 0.3 + 1e-12);
            assert!(
                // 1/N covers the tail where no trial misses any point.
                (p.mean - want).abs() <= 3.0 * p.std_error + 1.0 / cfg.trials as f64,
                "T={} mean {} want {want} se {}",
                t + 1,
                p.mean,
                p.std_error
            );
            if t > 0 {
                assert!(p.mean >= c.points[t - 1].mean);
            }
        }
        assert!(c.plateau_onset.is_some());
    }

    #[test]
    fn saturation_degenerate_cases() {
        let cfg = McConfig {
            trials: 2000,
            ..McConfig::default()
        };
        let si = SupportModel::TorusInterval { s: 0.25 };
        let same = vec![SupportModel::Anchored { offset: 0.0, len: 0.25 }; 5];
        let c = saturation_curve(&si, &same, &cfg).unwrap();
        assert!(c.points.iter().all(|p| (p.mean - 0.25).abs() < 1e-12));
        assert_eq!(c.plateau_onset, Some(1));
        let apart = vec![SupportModel::Anchored { offset: 0.25, len: 0.5 }; 5];
        let c = saturation_curve(&si, &apart, &cfg).unwrap();
        assert!(c.points.iter().all(|p| p.mean < 1e-12));
        assert!(saturation_curve(&si, &[], &cfg).is_err());
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let xs = [0.05, 0.1, 0.2, 0.3, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-10);
        assert!(f.intercept.abs() < 1e-10);
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-10);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit_power_law(&[0.1, 0.1], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[0.1, 0.2], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn dimension_slopes() {
        let cfg = McConfig {
            trials: 100_000,
            seed: 9,
            ..McConfig::default()
        };
        let sweep = [0.05, 0.1, 0.2, 0.3, 0.4];
        let s = dimension_scaling(1.0, 1.0, &sweep, &cfg).unwrap();
        assert!((s.fit.slope - 2.0).abs() < 0.15, "{}", s.fit.slope);
        let s = dimension_scaling(2.0, 3.0, &sweep, &cfg).unwrap();
        assert!((s.fit.slope - 5.0).abs() < 0.3, "{}", s.fit.slope);
        assert!(dimension_scaling(1.0, 1.0, &[0.1, 0.2, 0.3], &cfg).is_err());
        assert!(dimension_scaling(1.0, 1.0, &[0.1, 0.2, 0.3, 1.5], &cfg).is_err());
    }

    #[test]
    fn fragmentation_slopes_and_consistency() {
        let cfg = McConfig {
            trials: 100_000,
            seed: 4,
            ..McConfig::default()
        };
        let f = fragmentation_scaling(2.0, 1.0, 0.4, &[1.0, 2.0, 4.0, 8.0], &cfg).unwrap();
        assert!((f.over_k_i.fit.slope + 2.0).abs() < 0.3, "{}", f.over_k_i.fit.slope);
        assert!((f.over_k_j.fit.slope + 1.0).abs() < 0.3, "{}", f.over_k_j.fit.slope);

        // k = 1 is the unfragmented projected model.
        let a = mc_expected_overlap(
            &SupportModel::Fragmented { r: 0.3, d: 2.0, k: 1.0 },
            &SupportModel::Fragmented { r: 0.3, d: 1.0, k: 1.0 },
            &cfg,
        )
        .unwrap();
        let b = mc_expected_overlap(
            &SupportModel::ManifoldProjected { r: 0.3, d: 2.0 },
            &SupportModel::ManifoldProjected { r: 0.3, d: 1.0 },
            &cfg,
        )
        .unwrap();
        assert_eq!(a, b);

        // Doubling k_i at d_i = 1 halves the mean.
        let m = |k| {
            mc_expected_overlap(
                &SupportModel::Fragmented { r: 0.4, d: 1.0, k },
                &SupportModel::Fragmented { r: 0.4, d: 1.0, k: 1.0 },
                &cfg.cell(k as u64),
            )
            .unwrap()
        };
        let (one, two) = (m(2.0), m(4.0));
        let se = (one.std_error.powi(2) / 4.0 + two.std_error.powi(2)).sqrt();
        assert!((one.mean / 2.0 - two.mean).abs() <= 3.0 * se);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let cfg = McConfig::default();
        let ok = SupportModel::TorusInterval { s: 0.5 };
        for bad in [
            SupportModel::TorusInterval { s: 1.5 },
            SupportModel::ManifoldProjected { r: 1.0, d: 2.0 },
            SupportModel::ManifoldProjected { r: 0.5, d: 0.5 },
            SupportModel::Fragmented { r: 0.5, d: 1.0, k: 0.0 },
        ] {
            assert!(mc_expected_overlap(&bad, &ok, &cfg).is_err(), "{bad:?}");
        }
        let zero = McConfig { trials: 0, ..cfg };
        assert!(mc_expected_overlap(&ok, &ok, &zero).is_err());
    }
}
