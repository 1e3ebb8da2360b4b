//! Penalty tuning along regularization paths, marginal screening and k-fold
//! cross-validation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Dataset, GroupedDesign};
use crate::error::{Error, Result};
use crate::pipeline::{
    adaptive_step, adaptive_weights, assemble_fit, predict_clamped, ModelFit, Prepared, ZERO_NORM,
};
use crate::solver::{
    lambda_max, solve_group_lasso, solve_ordinary_lasso, FitDiagnostics, GroupedCoefficients,
    PenaltySpec, SolverOptions,
};
use crate::spline::BasisSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Bic,
    Ebic,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Bic => "BIC",
            Criterion::Ebic => "EBIC",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(Criterion::Bic),
            "ebic" => Ok(Criterion::Ebic),
            other => Err(Error::InvalidParameter(format!(
                "unknown criterion {other:?}"
            ))),
        }
    }
}

/// `log(rss) + df log(n) / n`.
pub fn bic(rss: f64, df: f64, n: usize) -> Result<f64> {
    if !(rss > 0.0) {
        return Err(Error::NonPositiveRss(rss));
    }
    if n < 2 || !(df >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bic needs n >= 2 and df >= 0 (n = {n}, df = {df})"
        )));
    }
    let n = n as f64;
    Ok(rss.ln() + df * n.ln() / n)
}

/// `bic + nu df log(p) / n`.
pub fn ebic(rss: f64, df: f64, n: usize, p: usize, nu: f64) -> Result<f64> {
    if p < 1 || !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidParameter(format!(
            "ebic needs p >= 1 and nu in [0, 1] (p = {p}, nu = {nu})"
        )));
    }
    Ok(bic(rss, df, n)? + nu * df * (p as f64).ln() / n as f64)
}

/// Log-spaced decreasing penalty levels starting at `lambda_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub values: Vec<f64>,
    pub ratio: f64,
    pub count: usize,
}

pub fn make_grid(lambda_max: f64, count: usize, ratio: f64) -> Result<LambdaGrid> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) || count < 2 || !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "grid needs lambda_max > 0, count >= 2 and 0 < ratio < 1 (got {lambda_max}, {count}, {ratio})"
        )));
    }
    let step = ratio.ln() / (count - 1) as f64;
    let mut values: Vec<f64> = (0..count)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect();
    values[0] = lambda_max;
    values[count - 1] = lambda_max * ratio;
    Ok(LambdaGrid {
        values,
        ratio,
        count,
    })
}

/// Criterion values at one penalty level. Infinite `bic`/`ebic` flags a zero RSS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub lambda: f64,
    pub bic: f64,
    pub ebic: f64,
    pub df: f64,
    pub rss: f64,
    pub num_selected: usize,
    pub converged: bool,
}

impl CriterionValue {
    pub fn value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Bic => self.bic,
            Criterion::Ebic => self.ebic,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.bic == f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub coefficients: GroupedCoefficients,
    pub criterion: CriterionValue,
    pub diagnostics: FitDiagnostics,
}

fn evaluate(
    design: &GroupedDesign,
    y: &DVector<f64>,
    lambda: f64,
    beta: &GroupedCoefficients,
    diag: &FitDiagnostics,
    nu: f64,
) -> Result<CriterionValue> {
    let fitted = &design.z * DVector::from_column_slice(&beta.values);
    let rss = (y - fitted).norm_squared();
    let selected = (0..beta.num_groups())
        .filter(|&j| beta.group_norm(j) > ZERO_NORM)
        .count();
    let width = design.group_size().unwrap_or(1);
    let df = (selected * width) as f64;
    let n = design.n();
    let p = design.num_groups();
    let (bic_v, ebic_v) = match (bic(rss, df, n), ebic(rss, df, n, p, nu)) {
        (Ok(b), Ok(e)) => (b, e),
        (Err(Error::NonPositiveRss(_)), _) => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(CriterionValue {
        lambda,
        bic: bic_v,
        ebic: ebic_v,
        df,
        rss,
        num_selected: selected,
        converged: diag.converged,
    })
}

fn trace_path<F>(
    design: &GroupedDesign,
    y: &DVector<f64>,
    grid: &LambdaGrid,
    nu: f64,
    max_fit: f64,
    mut solve: F,
) -> Result<Vec<PathPoint>>
where
    F: FnMut(f64, Option<&GroupedCoefficients>) -> Result<(GroupedCoefficients, FitDiagnostics)>,
{
    if !(max_fit > 0.0 && max_fit <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "max_fit must lie in (0, 1], got {max_fit}"
        )));
    }
    let tss = y.norm_squared();
    let mut out: Vec<PathPoint> = Vec::with_capacity(grid.values.len());
    for &lambda in &grid.values {
        let warm = out.last().map(|p| &p.coefficients);
        let (coefficients, diagnostics) = solve(lambda, warm)?;
        let criterion = evaluate(design, y, lambda, &coefficients, &diagnostics, nu)?;
        let saturated = max_fit < 1.0 && tss > 0.0 && 1.0 - criterion.rss / tss >= max_fit;
        out.push(PathPoint {
            coefficients,
            criterion,
            diagnostics,
        });
        if saturated {
            break;
        }
    }
    Ok(out)
}

/// Weighted group Lasso solutions along `grid`, each warm-started from the previous.
/// Non-convergence at a point is recorded in its criterion value; the path continues.
/// The path stops early once the fraction of `‖y‖²` explained reaches `max_fit`
/// (pass 1.0 to fit every point).
pub fn fit_path(
    design: &GroupedDesign,
    y: &DVector<f64>,
    weights: &[f64],
    grid: &LambdaGrid,
    opts: &SolverOptions,
    nu: f64,
    max_fit: f64,
) -> Result<Vec<PathPoint>> {
    trace_path(design, y, grid, nu, max_fit, |lambda, warm| {
        let penalty = PenaltySpec::new(lambda, weights.to_vec())?;
        solve_group_lasso(design, y, &penalty, opts, warm)
    })
}

/// Ordinary Lasso path on the columns of `design`; criterion values count
/// a group as selected when any of its coefficients is nonzero.
pub fn fit_lasso_path(
    design: &GroupedDesign,
    y: &DVector<f64>,
    grid: &LambdaGrid,
    opts: &SolverOptions,
    nu: f64,
    max_fit: f64,
) -> Result<Vec<PathPoint>> {
    trace_path(design, y, grid, nu, max_fit, |lambda, warm| {
        solve_ordinary_lasso(design, y, lambda, opts, warm)
    })
}

/// Index of the point minimizing `criterion`; ties go to the larger penalty
/// (earlier point). Degenerate zero-RSS points are never chosen unless every
/// point is degenerate, in which case the first is returned.
pub fn select_lambda(path: &[CriterionValue], criterion: Criterion) -> Option<usize> {
    if path.is_empty() {
        return None;
    }
    let mut best: Option<usize> = None;
    for (i, point) in path.iter().enumerate() {
        if point.is_degenerate() {
            continue;
        }
        match best {
            Some(b) if path[b].value(criterion) <= point.value(criterion) => {}
            _ => best = Some(i),
        }
    }
    Some(best.unwrap_or(0))
}

/// Estimators compared in the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Group Lasso followed by the adaptive group Lasso.
    #[serde(rename = "AGL")]
    AdaptiveGroupLasso,
    /// The first step alone.
    #[serde(rename = "GL")]
    GroupLasso,
    /// Lasso on the individual spline coefficients.
    #[serde(rename = "OLasso")]
    OrdinaryLasso,
    /// Lasso on the covariates themselves, without spline expansion.
    #[serde(rename = "LinearLasso")]
    LinearLasso,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::AdaptiveGroupLasso,
        Method::GroupLasso,
        Method::OrdinaryLasso,
        Method::LinearLasso,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::AdaptiveGroupLasso => "AGL",
            Method::GroupLasso => "GL",
            Method::OrdinaryLasso => "OLasso",
            Method::LinearLasso => "LinearLasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "agl" => Ok(Method::AdaptiveGroupLasso),
            "gl" => Ok(Method::GroupLasso),
            "olasso" => Ok(Method::OrdinaryLasso),
            "linearlasso" | "linear" => Ok(Method::LinearLasso),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Basis, criterion and path settings shared by every tuned fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub degree: usize,
    pub num_knots: usize,
    pub criterion: Criterion,
    pub nu: f64,
    pub grid_count: usize,
    pub grid_ratio: f64,
    /// Paths stop once this fraction of the response sum of squares is explained.
    pub max_fit: f64,
    pub solver: SolverOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            num_knots: 6,
            criterion: Criterion::Bic,
            nu: 0.5,
            grid_count: 100,
            grid_ratio: 1e-3,
            max_fit: 0.999,
            solver: SolverOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn basis(&self) -> Result<BasisSpec> {
        BasisSpec::unit(self.num_knots, self.degree)
    }

    fn grid(&self, lambda_max: f64) -> Result<LambdaGrid> {
        if lambda_max == 0.0 {
            // zero response: only the empty model exists
            return Ok(LambdaGrid {
                values: vec![0.0],
                ratio: self.grid_ratio,
                count: 1,
            });
        }
        make_grid(lambda_max, self.grid_count, self.grid_ratio)
    }
}

/// A criterion-tuned fit and the criterion profiles it was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedFit {
    pub fit: ModelFit,
    pub step1_path: Vec<CriterionValue>,
    pub step1_index: usize,
    pub step2_path: Option<Vec<CriterionValue>>,
    pub step2_index: Option<usize>,
}

/// Fits `method` to `data`, choosing each penalty by the configured criterion.
pub fn fit_method(data: &Dataset, method: Method, config: &FitConfig) -> Result<TunedFit> {
    let prep = Prepared::new(data, &config.basis()?)?;
    fit_prepared(&prep, method, config)
}

pub fn fit_prepared(prep: &Prepared, method: Method, config: &FitConfig) -> Result<TunedFit> {
    fit_prepared_many(prep, &[method], config)
        .pop()
        .expect("one result per method")
}

/// Fits several methods on one prepared dataset; the group Lasso and the
/// adaptive group Lasso share their first-step path.
pub fn fit_prepared_many(
    prep: &Prepared,
    methods: &[Method],
    config: &FitConfig,
) -> Vec<Result<TunedFit>> {
    let needs_step1 = methods
        .iter()
        .any(|m| matches!(m, Method::AdaptiveGroupLasso | Method::GroupLasso));
    let step1 = if needs_step1 {
        Some(first_step(prep, config))
    } else {
        None
    };
    methods
        .iter()
        .map(|&method| match method {
            Method::GroupLasso => {
                let (path, i) = step1
                    .as_ref()
                    .expect("computed above")
                    .as_ref()
                    .map_err(Clone::clone)?;
                Ok(group_lasso_fit(prep, path, *i))
            }
            Method::AdaptiveGroupLasso => {
                let (path, i) = step1
                    .as_ref()
                    .expect("computed above")
                    .as_ref()
                    .map_err(Clone::clone)?;
                adaptive_fit(prep, path, *i, config)
            }
            Method::OrdinaryLasso => {
                let design = &prep.centered;
                let single = design.singletons();
                let grid = config.grid(lambda_max(
                    &single,
                    &prep.y,
                    &vec![1.0; single.num_groups()],
                )?)?;
                let path = fit_lasso_path(
                    design,
                    &prep.y,
                    &grid,
                    &config.solver,
                    config.nu,
                    config.max_fit,
                )?;
                single_stage(design, prep, &path, config.criterion)
            }
            Method::LinearLasso => {
                let design = prep.linear_design();
                let unit = vec![1.0; design.num_groups()];
                let grid = config.grid(lambda_max(&design, &prep.y, &unit)?)?;
                let path = fit_path(
                    &design,
                    &prep.y,
                    &unit,
                    &grid,
                    &config.solver,
                    config.nu,
                    config.max_fit,
                )?;
                single_stage(&design, prep, &path, config.criterion)
            }
        })
        .collect()
}

fn profile(path: &[PathPoint]) -> Vec<CriterionValue> {
    path.iter().map(|p| p.criterion.clone()).collect()
}

fn first_step(prep: &Prepared, config: &FitConfig) -> Result<(Vec<PathPoint>, usize)> {
    let design = &prep.orthonormal;
    let unit = vec![1.0; design.num_groups()];
    let grid = config.grid(lambda_max(design, &prep.y, &unit)?)?;
    let path = fit_path(
        design,
        &prep.y,
        &unit,
        &grid,
        &config.solver,
        config.nu,
        config.max_fit,
    )?;
    let i = select_lambda(&profile(&path), config.criterion).expect("path is nonempty");
    Ok((path, i))
}

fn group_lasso_fit(prep: &Prepared, path: &[PathPoint], i: usize) -> TunedFit {
    let step1 = &path[i];
    let fit = assemble_fit(
        &prep.orthonormal,
        &step1.coefficients,
        &prep.y,
        prep.mu_hat,
        &prep.scale,
        (step1.criterion.lambda, None),
        vec![step1.diagnostics.clone()],
    );
    TunedFit {
        fit,
        step1_path: profile(path),
        step1_index: i,
        step2_path: None,
        step2_index: None,
    }
}

fn adaptive_fit(
    prep: &Prepared,
    path: &[PathPoint],
    i1: usize,
    config: &FitConfig,
) -> Result<TunedFit> {
    let design = &prep.orthonormal;
    let y = &prep.y;
    let opts = &config.solver;
    let step1 = &path[i1];
    let weights = adaptive_weights(&step1.coefficients);
    let (coef2, diag2, lambda2, profile2, i2) = if weights.finite_groups().is_empty() {
        let (c, d) = adaptive_step(design, y, &weights, 0.0, opts)?;
        let cv = evaluate(design, y, 0.0, &c, &d, config.nu)?;
        (c, d, 0.0, vec![cv], 0)
    } else {
        let grid2 = config.grid(lambda_max(design, y, &weights.weights)?)?;
        let path2 = fit_path(
            design,
            y,
            &weights.weights,
            &grid2,
            opts,
            config.nu,
            config.max_fit,
        )?;
        let profile2 = profile(&path2);
        let i2 = select_lambda(&profile2, config.criterion).expect("path is nonempty");
        let point = &path2[i2];
        (
            point.coefficients.clone(),
            point.diagnostics.clone(),
            point.criterion.lambda,
            profile2,
            i2,
        )
    };
    let fit = assemble_fit(
        design,
        &coef2,
        y,
        prep.mu_hat,
        &prep.scale,
        (step1.criterion.lambda, Some(lambda2)),
        vec![step1.diagnostics.clone(), diag2],
    );
    Ok(TunedFit {
        fit,
        step1_path: profile(path),
        step1_index: i1,
        step2_path: Some(profile2),
        step2_index: Some(i2),
    })
}

fn single_stage(
    design: &GroupedDesign,
    prep: &Prepared,
    path: &[PathPoint],
    criterion: Criterion,
) -> Result<TunedFit> {
    let profile = profile(path);
    let i = select_lambda(&profile, criterion).expect("path is nonempty");
    let point = &path[i];
    let fit = assemble_fit(
        design,
        &point.coefficients,
        &prep.y,
        prep.mu_hat,
        &prep.scale,
        (point.criterion.lambda, None),
        vec![point.diagnostics.clone()],
    );
    Ok(TunedFit {
        fit,
        step1_path: profile,
        step1_index: i,
        step2_path: None,
        step2_index: None,
    })
}

/// Pearson correlation, zero when either vector is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// The `top_k` covariates with largest absolute correlation with `y`, best first
/// (ties by ascending index), paired with their correlations.
pub fn marginal_screen(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    top_k: usize,
) -> Result<Vec<(usize, f64)>> {
    let p = x.ncols();
    if top_k < 1 || top_k > p {
        return Err(Error::InvalidParameter(format!(
            "top_k must lie in 1..={p}, got {top_k}"
        )));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariate rows for {} responses",
            x.nrows(),
            y.len()
        )));
    }
    let ys = y.as_slice();
    let mut scored: Vec<(usize, f64)> = (0..p)
        .map(|j| (j, correlation(x.column(j).as_slice(), ys)))
        .collect();
    scored.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    scored.truncate(top_k);
    Ok(scored)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub per_fold_pe: Vec<f64>,
    pub per_fold_selected: Vec<usize>,
    pub mean_pe: f64,
    pub mean_selected: f64,
}

/// Seeded random split of `0..n` into `k` folds whose sizes differ by at most one.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if n < 2 * k {
        return Err(Error::FoldTooSmall { n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// k-fold prediction error: each fold is predicted by a model tuned on the rest.
/// Held-out covariates outside a training fold's range are clamped to it.
pub fn kfold_cv(
    data: &Dataset,
    k: usize,
    method: Method,
    config: &FitConfig,
    seed: u64,
) -> Result<CvResult> {
    let folds = partition(data.n(), k, seed)?;
    let per_fold: Vec<(f64, usize)> = folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; data.n()];
            for &i in test {
                in_test[i] = true;
            }
            let train: Vec<usize> = (0..data.n()).filter(|&i| !in_test[i]).collect();
            let tuned = fit_method(&data.subset(&train)?, method, config)?;
            let mut sse = 0.0;
            for &i in test {
                let row: Vec<f64> = data.x.row(i).iter().copied().collect();
                sse += (data.y[i] - predict_clamped(&tuned.fit, &row)?).powi(2);
            }
            Ok((sse / test.len() as f64, tuned.fit.selected.len()))
        })
        .collect::<Result<_>>()?;
    let per_fold_pe: Vec<f64> = per_fold.iter().map(|f| f.0).collect();
    let per_fold_selected: Vec<usize> = per_fold.iter().map(|f| f.1).collect();
    Ok(CvResult {
        folds: k,
        mean_pe: per_fold_pe.iter().sum::<f64>() / k as f64,
        mean_selected: per_fold_selected.iter().sum::<usize>() as f64 / k as f64,
        per_fold_pe,
        per_fold_selected,
    })
}
