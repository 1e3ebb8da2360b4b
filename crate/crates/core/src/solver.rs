//! Weighted group Lasso by cyclic block coordinate descent.
//!
//! Minimizes `||y - Z b||^2 + lambda * sum_j w_j ||b_j||_2` over a design whose
//! blocks satisfy `Z_j' Z_j = c_j P_j` (orthonormalized blocks, or single
//! columns), so each block update is an exact group soft-threshold.

use std::ops::Range;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::GroupedDesign;
use crate::error::{Error, Result};

/// Penalty level and per-group weights; an infinite weight excludes the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl PenaltySpec {
    pub fn new(lambda: f64, weights: Vec<f64>) -> Result<Self> {
        let spec = Self { lambda, weights };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit weights on `p` groups.
    pub fn unit(lambda: f64, p: usize) -> Result<Self> {
        Self::new(lambda, vec![1.0; p])
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_excluded(&self, j: usize) -> bool {
        self.weights[j].is_infinite()
    }

    /// `lambda * w_j` with `0 * inf = 0`.
    fn level(&self, j: usize) -> f64 {
        let w = self.weights[j];
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda * w
        }
    }
}

/// Stacked coefficient vector split into contiguous groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedCoefficients {
    pub values: Vec<f64>,
    pub groups: Vec<Range<usize>>,
}

impl GroupedCoefficients {
    pub fn zeros(groups: &[Range<usize>]) -> Self {
        let len = groups.last().map_or(0, |g| g.end);
        Self {
            values: vec![0.0; len],
            groups: groups.to_vec(),
        }
    }

    pub fn group(&self, j: usize) -> &[f64] {
        &self.values[self.groups[j].clone()]
    }

    pub fn group_norm(&self, j: usize) -> f64 {
        norm(self.group(j))
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.groups.len()).map(|j| self.group_norm(j)).collect()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Indices of groups with a nonzero coefficient.
    pub fn nonzero_groups(&self) -> Vec<usize> {
        (0..self.groups.len())
            .filter(|&j| self.group(j).iter().any(|&v| v != 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative objective change below which a sweep counts as stalled.
    pub tol_objective: f64,
    /// Largest KKT violation accepted as converged.
    pub tol_kkt: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_objective: 1e-8,
            tol_kkt: 1e-6,
            max_sweeps: 10_000,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_objective > 0.0 && self.tol_kkt > 0.0 && self.max_sweeps > 0) {
            return Err(Error::InvalidParameter(
                "solver tolerances and sweep budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub sweeps: usize,
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub converged: bool,
}

impl FitDiagnostics {
    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(1 - t / ||s||)_+ s`; the zero vector whenever `||s|| <= t`.
pub fn group_soft_threshold(s: &[f64], t: f64) -> Vec<f64> {
    let nrm = norm(s);
    if nrm <= t || nrm == 0.0 {
        return vec![0.0; s.len()];
    }
    let factor = 1.0 - t / nrm;
    s.iter().map(|v| factor * v).collect()
}

fn check_dims(design: &GroupedDesign, y: &DVector<f64>, weights: &[f64]) -> Result<()> {
    if y.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "response length {} but design has {} rows",
            y.len(),
            design.n()
        )));
    }
    if weights.len() != design.num_groups() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} groups",
            weights.len(),
            design.num_groups()
        )));
    }
    Ok(())
}

fn check_beta(design: &GroupedDesign, beta: &GroupedCoefficients) -> Result<()> {
    if beta.values.len() != design.total_cols() || beta.groups != design.groups {
        return Err(Error::DimensionMismatch(
            "coefficient layout does not match the design".into(),
        ));
    }
    Ok(())
}

fn residual(design: &GroupedDesign, y: &DVector<f64>, beta: &[f64]) -> Vec<f64> {
    let n = design.n();
    let z = design.z.as_slice();
    let mut r: Vec<f64> = y.iter().copied().collect();
    for (c, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            for (ri, zi) in r.iter_mut().zip(&z[c * n..(c + 1) * n]) {
                *ri -= b * zi;
            }
        }
    }
    r
}

fn penalty_value(penalty: &PenaltySpec, beta: &GroupedCoefficients) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..beta.num_groups() {
        let nrm = beta.group_norm(j);
        if penalty.is_excluded(j) {
            if nrm > 0.0 {
                return Err(Error::NonFiniteObjective);
            }
            continue;
        }
        total += penalty.level(j) * nrm;
    }
    Ok(total)
}

/// `||y - Z b||^2 + lambda sum_j w_j ||b_j||`, with `0 * inf = 0`.
pub fn objective(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    penalty: &PenaltySpec,
) -> Result<f64> {
    check_dims(design, y, &penalty.weights)?;
    check_beta(design, beta)?;
    let r = residual(design, y, &beta.values);
    Ok(dot(&r, &r) + penalty_value(penalty, beta)?)
}

/// Smallest `lambda` at which `b = 0` satisfies the optimality conditions:
/// `max_j 2 ||Z_j' y|| / w_j` over finite-weight groups.
pub fn lambda_max(design: &GroupedDesign, y: &DVector<f64>, weights: &[f64]) -> Result<f64> {
    check_dims(design, y, weights)?;
    let n = design.n();
    let z = design.z.as_slice();
    let ys = y.as_slice();
    let mut best: f64 = 0.0;
    let mut any = false;
    for (j, g) in design.groups.iter().enumerate() {
        let w = weights[j];
        if w.is_infinite() {
            continue;
        }
        any = true;
        let grad = 2.0
            * g.clone()
                .map(|c| dot(&z[c * n..(c + 1) * n], ys).powi(2))
                .sum::<f64>()
                .sqrt();
        let level = if w > 0.0 {
            grad / w
        } else if grad > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        best = best.max(level);
    }
    if !any {
        return Err(Error::AllGroupsExcluded);
    }
    Ok(best)
}

/// Largest violation of the optimality conditions over groups, divided by `1 + lambda`.
///
/// Active groups contribute `||2 Z_j' r - lambda w_j b_j / ||b_j|| ||`, zero
/// groups `(2 ||Z_j' r|| - lambda w_j)_+`, where `r = y - Z b`.
pub fn kkt_residual(
    design: &GroupedDesign,
    y: &DVector<f64>,
    beta: &GroupedCoefficients,
    penalty: &PenaltySpec,
) -> Result<f64> {
    check_dims(design, y, &penalty.weights)?;
    check_beta(design, beta)?;
    let r = residual(design, y, &beta.values);
    Ok(kkt_from_residual(design, &r, beta, penalty))
}

fn kkt_from_residual(
    design: &GroupedDesign,
    r: &[f64],
    beta: &GroupedCoefficients,
    penalty: &PenaltySpec,
) -> f64 {
    let n = design.n();
    let z = design.z.as_slice();
    let mut worst: f64 = 0.0;
    let mut grad = Vec::new();
    for (j, g) in design.groups.iter().enumerate() {
        let b = beta.group(j);
        let bn = norm(b);
        if penalty.is_excluded(j) {
            if bn > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        grad.clear();
        grad.extend(g.clone().map(|c| 2.0 * dot(&z[c * n..(c + 1) * n], r)));
        let level = penalty.level(j);
        let violation = if bn > 0.0 {
            grad.iter()
                .zip(b)
                .map(|(gk, bk)| (gk - level * bk / bn).powi(2))
                .sum::<f64>()
                .sqrt()
        } else {
            (norm(&grad) - level).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst / (1.0 + penalty.lambda)
}

struct Descent<'a> {
    design: &'a GroupedDesign,
    y: &'a DVector<f64>,
    penalty: &'a PenaltySpec,
    beta: GroupedCoefficients,
    r: Vec<f64>,
    s: Vec<f64>,
    moved: bool,
}

impl Descent<'_> {
    fn refresh_residual(&mut self) {
        self.r = residual(self.design, self.y, &self.beta.values);
    }

    fn objective(&self) -> f64 {
        let pen: f64 = (0..self.beta.num_groups())
            .filter(|&j| !self.penalty.is_excluded(j))
            .map(|j| self.penalty.level(j) * self.beta.group_norm(j))
            .sum();
        dot(&self.r, &self.r) + pen
    }

    /// Exact minimization over block `j` with the others held fixed.
    fn update(&mut self, j: usize) {
        let c = self.design.gram_scale[j];
        if self.penalty.is_excluded(j) || !(c > 0.0) {
            return;
        }
        let n = self.design.n();
        let z = self.design.z.as_slice();
        let g = self.design.groups[j].clone();
        self.s.clear();
        for col in g.clone() {
            let zc = &z[col * n..(col + 1) * n];
            self.s.push(dot(zc, &self.r) / c + self.beta.values[col]);
        }
        let t = self.penalty.level(j) / (2.0 * c);
        let nrm = norm(&self.s);
        // a few ulps of slack so that lambda_max itself gives an exact zero
        let factor = if nrm <= t * (1.0 + 8.0 * f64::EPSILON) || nrm == 0.0 {
            0.0
        } else {
            1.0 - t / nrm
        };
        for (k, col) in g.enumerate() {
            let new = factor * self.s[k];
            let delta = new - self.beta.values[col];
            if delta != 0.0 {
                let zc = &z[col * n..(col + 1) * n];
                for (ri, zi) in self.r.iter_mut().zip(zc) {
                    *ri -= delta * zi;
                }
                self.beta.values[col] = new;
                self.moved = true;
            }
        }
    }
}

/// Cyclic block coordinate descent for the weighted group Lasso.
///
/// Sweeps alternate between all groups and the current active set. A fit is
/// reported converged only when a full sweep changes the objective by less
/// than `tol_objective` (relative) and the KKT residual is within `tol_kkt`.
pub fn solve_group_lasso(
    design: &GroupedDesign,
    y: &DVector<f64>,
    penalty: &PenaltySpec,
    opts: &SolverOptions,
    warm_start: Option<&GroupedCoefficients>,
) -> Result<(GroupedCoefficients, FitDiagnostics)> {
    check_dims(design, y, &penalty.weights)?;
    penalty.validate()?;
    opts.validate()?;
    if !design.orthonormal && design.groups.iter().any(|g| g.len() > 1) {
        return Err(Error::InvalidParameter(
            "blocks wider than one column must be orthonormalized before solving".into(),
        ));
    }
    let mut beta = match warm_start {
        Some(w) => {
            check_beta(design, w)?;
            w.clone()
        }
        None => GroupedCoefficients::zeros(&design.groups),
    };
    let n = design.n();
    for j in 0..design.num_groups() {
        let g = design.groups[j].clone();
        if penalty.is_excluded(j) {
            beta.values[g].fill(0.0);
        } else if design.ranks[j] < g.len() && beta.group(j).iter().any(|&v| v != 0.0) {
            // keep warm starts inside the block's range: b <- Z'Z b / n
            let block = design.block(j);
            let fitted = block * DVector::from_column_slice(beta.group(j));
            let projected = block.tr_mul(&fitted) / n as f64;
            beta.values[g].copy_from_slice(projected.as_slice());
        }
    }

    let mut state = Descent {
        design,
        y,
        penalty,
        beta,
        r: Vec::new(),
        s: Vec::new(),
        moved: false,
    };
    state.refresh_residual();
    let mut current = state.objective();
    let mut trace = vec![current];
    let mut sweeps = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let rel = |old: f64, new: f64| (old - new).abs() / new.abs().max(f64::MIN_POSITIVE);
    let p = design.num_groups();

    while sweeps < opts.max_sweeps {
        state.refresh_residual();
        state.moved = false;
        for j in 0..p {
            state.update(j);
        }
        sweeps += 1;
        let next = state.objective();
        trace.push(next);
        let change = rel(current, next);
        current = next;
        if change < opts.tol_objective || current == 0.0 {
            kkt = kkt_from_residual(design, &state.r, &state.beta, penalty);
            if kkt <= opts.tol_kkt {
                converged = true;
                break;
            }
            if !state.moved {
                break;
            }
        }
        let active = state.beta.nonzero_groups();
        if active.is_empty() {
            continue;
        }
        while sweeps < opts.max_sweeps {
            for &j in &active {
                state.update(j);
            }
            sweeps += 1;
            let next = state.objective();
            trace.push(next);
            let change = rel(current, next);
            current = next;
            if change < opts.tol_objective {
                break;
            }
        }
    }
    if !converged {
        state.refresh_residual();
        kkt = kkt_from_residual(design, &state.r, &state.beta, penalty);
    }
    Ok((
        state.beta,
        FitDiagnostics {
            sweeps,
            objective_trace: trace,
            kkt_residual: kkt,
            converged,
        },
    ))
}

/// Lasso with an absolute-value penalty on every coefficient, ignoring grouping.
///
/// Runs the block solver with each column as its own group; the returned
/// coefficients keep the layout of `design`.
pub fn solve_ordinary_lasso(
    design: &GroupedDesign,
    y: &DVector<f64>,
    lambda: f64,
    opts: &SolverOptions,
    warm_start: Option<&GroupedCoefficients>,
) -> Result<(GroupedCoefficients, FitDiagnostics)> {
    let single = design.singletons();
    let penalty = PenaltySpec::unit(lambda, single.num_groups())?;
    let warm = warm_start
        .map(|w| {
            check_beta(design, w)?;
            Ok::<_, Error>(GroupedCoefficients {
                values: w.values.clone(),
                groups: single.groups.clone(),
            })
        })
        .transpose()?;
    let (beta, diag) = solve_group_lasso(&single, y, &penalty, opts, warm.as_ref())?;
    Ok((
        GroupedCoefficients {
            values: beta.values,
            groups: design.groups.clone(),
        },
        diag,
    ))
}
