//! Uniform B-spline bases: Cox–de Boor evaluation, derivatives and
//! least-squares coefficient fitting.
//!
//! A [`KnotGrid`] of `G` intervals over `[lo, hi]` with order `k` carries
//! `G + 2k + 1` knots, extended uniformly by `k` knots on each side, and
//! spans `G + k` basis functions. Basis function `j` is supported on
//! `[t_j, t_{j+k+1})`. Points outside `[lo, hi]` are evaluated against the
//! extended knots (never clamped); beyond the outermost knots every basis
//! function is zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Ridge added to the normal equations when the design is underdetermined.
pub const DEFAULT_RIDGE: f64 = 1e-10;

/// Above this estimate the normal matrix is treated as numerically singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplineError {
    #[error("invalid knot grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite evaluation point {0}")]
    NonFinite(f64),
    #[error("xs has {xs} entries but ys has {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("fit needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} at x = {x} lies outside the grid range [{lo}, {hi}]")]
    OutOfRange { index: usize, x: f64, lo: f64, hi: f64 },
    #[error("rank-deficient design matrix (condition estimate {condition:.3e})")]
    RankDeficient { condition: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotGrid {
    range_lo: f64,
    range_hi: f64,
    grid_size: usize,
    order: usize,
    knots: Vec<f64>,
}

/// Evaluations of every basis function of a grid at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub values: Vec<f64>,
}

impl BasisVector {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.values.iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// The `order + 1` possibly-nonzero basis values at a point. `values[r]`
/// belongs to basis index `first + r`; indices outside `0..num_basis` are
/// to be ignored by the caller.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalBasis {
    pub first: isize,
    pub len: usize,
    pub values: [f64; MAX_LOCAL],
}

pub(crate) const MAX_LOCAL: usize = 16;

impl KnotGrid {
    pub fn new(range_lo: f64, range_hi: f64, grid_size: usize, order: usize) -> Result<Self, SplineError> {
        if !(range_lo.is_finite() && range_hi.is_finite()) || range_lo >= range_hi {
            return Err(SplineError::InvalidGrid(format!(
                "range [{range_lo}, {range_hi}] must be finite with lo < hi"
            )));
        }
        if grid_size == 0 {
            return Err(SplineError::InvalidGrid("grid size must be positive".into()));
        }
        if order == 0 || order + 1 > MAX_LOCAL {
            return Err(SplineError::InvalidGrid(format!(
                "order must be in 1..={}, got {order}",
                MAX_LOCAL - 1
            )));
        }
        let h = (range_hi - range_lo) / grid_size as f64;
        let knots = (0..grid_size + 2 * order + 1)
            .map(|i| range_lo + (i as f64 - order as f64) * h)
            .collect();
        Ok(Self {
            range_lo,
            range_hi,
            grid_size,
            order,
            knots,
        })
    }

    /// The `[-1, 1]` grid used throughout the experiments.
    pub fn symmetric(grid_size: usize, order: usize) -> Result<Self, SplineError> {
        Self::new(-1.0, 1.0, grid_size, order)
    }

    pub fn range_lo(&self) -> f64 {
        self.range_lo
    }

    pub fn range_hi(&self) -> f64 {
        self.range_hi
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.order
    }

    pub fn step(&self) -> f64 {
        (self.range_hi - self.range_lo) / self.grid_size as f64
    }

    /// The `G + 1` knots bounding the interior intervals.
    pub fn interior_points(&self) -> &[f64] {
        &self.knots[self.order..=self.order + self.grid_size]
    }

    /// Knot `i` of the uniform sequence, valid for any integer index so the
    /// recursion may look past either end of the stored vector.
    #[inline]
    fn knot(&self, i: isize) -> f64 {
        if i >= 0 && (i as usize) < self.knots.len() {
            self.knots[i as usize]
        } else {
            self.range_lo + (i as f64 - self.order as f64) * self.step()
        }
    }

    /// Knot span `s` with `t_s <= x < t_{s+1}`; `x == hi` is assigned to the
    /// last interior span so the partition of unity holds on the closed range.
    fn span(&self, x: f64) -> Option<usize> {
        let last = self.knots.len() - 1;
        if x < self.knots[0] || x >= self.knots[last] {
            return None;
        }
        if x == self.range_hi {
            return Some(self.order + self.grid_size - 1);
        }
        let mut s = ((x - self.knots[0]) / self.step()).floor() as isize;
        s = s.clamp(0, last as isize - 1);
        let mut s = s as usize;
        while s > 0 && x < self.knots[s] {
            s -= 1;
        }
        while s + 1 < last && x >= self.knots[s + 1] {
            s += 1;
        }
        Some(s)
    }

    /// Degree-`degree` basis values at span `s` (de Boor's triangular scheme).
    fn local_values(&self, s: usize, x: f64, degree: usize, out: &mut [f64; MAX_LOCAL]) {
        let s = s as isize;
        let mut left = [0.0; MAX_LOCAL];
        let mut right = [0.0; MAX_LOCAL];
        out[0] = 1.0;
        for j in 1..=degree {
            left[j] = x - self.knot(s + 1 - j as isize);
            right[j] = self.knot(s + j as isize) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    pub(crate) fn local_basis(&self, x: f64) -> Option<LocalBasis> {
        let s = self.span(x)?;
        let mut values = [0.0; MAX_LOCAL];
        self.local_values(s, x, self.order, &mut values);
        Some(LocalBasis {
            first: s as isize - self.order as isize,
            len: self.order + 1,
            values,
        })
    }

    pub(crate) fn local_derivative(&self, x: f64) -> Option<LocalBasis> {
        let s = self.span(x)?;
        let k = self.order;
        let mut lower = [0.0; MAX_LOCAL];
        self.local_values(s, x, k - 1, &mut lower);
        // lower[r] is the degree k-1 function with index s-k+1+r.
        let first = s as isize - k as isize;
        let mut values = [0.0; MAX_LOCAL];
        for (r, v) in values.iter_mut().enumerate().take(k + 1) {
            let j = first + r as isize;
            let a = if r >= 1 { lower[r - 1] } else { 0.0 };
            let b = if r < k { lower[r] } else { 0.0 };
            let da = self.knot(j + k as isize) - self.knot(j);
            let db = self.knot(j + k as isize + 1) - self.knot(j + 1);
            *v = k as f64 * (a / da - b / db);
        }
        Some(LocalBasis {
            first,
            len: k + 1,
            values,
        })
    }

    fn scatter(&self, local: Option<LocalBasis>) -> BasisVector {
        let n = self.num_basis();
        let mut values = vec![0.0; n];
        if let Some(lb) = local {
            for r in 0..lb.len {
                let j = lb.first + r as isize;
                if j >= 0 && (j as usize) < n {
                    values[j as usize] = lb.values[r];
                }
            }
        }
        BasisVector { values }
    }

    /// All `G + k` basis functions evaluated at `x`.
    pub fn eval_basis(&self, x: f64) -> Result<BasisVector, SplineError> {
        if !x.is_finite() {
            return Err(SplineError::NonFinite(x));
        }
        Ok(self.scatter(self.local_basis(x)))
    }

    /// `d/dx` of every basis function at `x`, via the order-reduction identity
    /// `B'_{j,k} = k (B_{j,k-1} / (t_{j+k} - t_j) - B_{j+1,k-1} / (t_{j+k+1} - t_{j+1}))`.
    pub fn eval_basis_derivative(&self, x: f64) -> Result<BasisVector, SplineError> {
        if !x.is_finite() {
            return Err(SplineError::NonFinite(x));
        }
        Ok(self.scatter(self.local_derivative(x)))
    }

    /// `Σ_j coeffs[j] B_j(x)`; zero outside the extended knots.
    pub fn spline_value(&self, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.num_basis());
        self.local_basis(x).map_or(0.0, |lb| self.local_dot(&lb, coeffs))
    }

    pub fn spline_derivative(&self, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.num_basis());
        self.local_derivative(x).map_or(0.0, |lb| self.local_dot(&lb, coeffs))
    }

    #[inline]
    pub(crate) fn local_dot(&self, lb: &LocalBasis, coeffs: &[f64]) -> f64 {
        let n = coeffs.len() as isize;
        let mut acc = 0.0;
        for r in 0..lb.len {
            let j = lb.first + r as isize;
            if j >= 0 && j < n {
                acc += lb.values[r] * coeffs[j as usize];
            }
        }
        acc
    }
}

/// Least-squares spline coefficients for the samples `(xs, ys)`.
///
/// Solves the normal equations by Cholesky factorization. Requires at
/// least `G + k` samples inside the grid range and a well-conditioned
/// design; otherwise returns [`SplineError::RankDeficient`] carrying the
/// condition estimate.
pub fn fit_coefficients(grid: &KnotGrid, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>, SplineError> {
    check_samples(grid, xs, ys)?;
    let n = grid.num_basis();
    if xs.len() < n {
        return Err(SplineError::TooFewSamples {
            needed: n,
            got: xs.len(),
        });
    }
    for (index, &x) in xs.iter().enumerate() {
        if x < grid.range_lo() || x > grid.range_hi() {
            return Err(SplineError::OutOfRange {
                index,
                x,
                lo: grid.range_lo(),
                hi: grid.range_hi(),
            });
        }
    }
    let (ata, aty) = normal_equations(grid, xs, ys);
    let factor = cholesky(&ata, n).ok_or(SplineError::RankDeficient {
        condition: f64::INFINITY,
    })?;
    let condition = condition_estimate(&factor, n);
    if condition > MAX_CONDITION {
        return Err(SplineError::RankDeficient { condition });
    }
    Ok(cholesky_solve(&factor, n, &aty))
}

/// Ridge-regularized least squares, `(AᵀA + ridge·I) c = Aᵀy`.
///
/// Accepts underdetermined designs (fewer samples than basis functions),
/// as used when initializing splines from noise sampled on the `G + 1`
/// interior knots.
pub fn fit_coefficients_ridge(
    grid: &KnotGrid,
    xs: &[f64],
    ys: &[f64],
    ridge: f64,
) -> Result<Vec<f64>, SplineError> {
    check_samples(grid, xs, ys)?;
    let n = grid.num_basis();
    let (mut ata, aty) = normal_equations(grid, xs, ys);
    for i in 0..n {
        ata[i * n + i] += ridge;
    }
    let factor = cholesky(&ata, n).ok_or(SplineError::RankDeficient {
        condition: f64::INFINITY,
    })?;
    Ok(cholesky_solve(&factor, n, &aty))
}

/// Re-expresses a spline on `new_grid` by least squares on the sample
/// points `xs`. Grid adaptation hook; the experiment pipeline never calls it.
pub fn refit_coefficients(
    old_grid: &KnotGrid,
    coeffs: &[f64],
    new_grid: &KnotGrid,
    xs: &[f64],
) -> Result<Vec<f64>, SplineError> {
    let ys: Vec<f64> = xs.iter().map(|&x| old_grid.spline_value(coeffs, x)).collect();
    fit_coefficients_ridge(new_grid, xs, &ys, DEFAULT_RIDGE)
}

fn check_samples(_grid: &KnotGrid, xs: &[f64], ys: &[f64]) -> Result<(), SplineError> {
    if xs.len() != ys.len() {
        return Err(SplineError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if let Some(&x) = xs.iter().chain(ys).find(|v| !v.is_finite()) {
        return Err(SplineError::NonFinite(x));
    }
    Ok(())
}

fn normal_equations(grid: &KnotGrid, xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.num_basis();
    let mut ata = vec![0.0; n * n];
    let mut aty = vec![0.0; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let Some(lb) = grid.local_basis(x) else {
            continue;
        };
        for r in 0..lb.len {
            let a = lb.first + r as isize;
            if a < 0 || a as usize >= n {
                continue;
            }
            let a = a as usize;
            aty[a] += lb.values[r] * y;
            for c in 0..lb.len {
                let b = lb.first + c as isize;
                if b < 0 || b as usize >= n {
                    continue;
                }
                ata[a * n + b as usize] += lb.values[r] * lb.values[c];
            }
        }
    }
    (ata, aty)
}

/// Lower-triangular Cholesky factor, or `None` if a pivot is not positive.
fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    let tiny = scale * f64::EPSILON * n as f64;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= tiny {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Squared ratio of the extreme Cholesky pivots, a cheap lower bound on cond(AᵀA).
fn condition_estimate(l: &[f64], n: usize) -> f64 {
    let diag = (0..n).map(|i| l[i * n + i]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    (hi / lo).powi(2)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
