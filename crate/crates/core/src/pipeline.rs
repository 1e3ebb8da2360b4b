//! Two-step component selection: group Lasso, adaptive weights, adaptive group Lasso.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{
    build_design, build_linear_design, center_response, orthonormalize_groups, scale_covariates,
    Dataset, Expansion, GroupedDesign, ScaleInfo,
};
use crate::error::{Error, Result};
use crate::solver::{
    solve_group_lasso, FitDiagnostics, GroupedCoefficients, PenaltySpec, SolverOptions,
};
use crate::spline::BasisSpec;

/// Group norms at or below this count as zero when forming selected sets.
pub const ZERO_NORM: f64 = 1e-10;

/// Weights for the second step; infinite for groups dropped by the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    pub weights: Vec<f64>,
}

impl AdaptiveWeights {
    pub fn finite_groups(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&j| self.weights[j].is_finite())
            .collect()
    }
}

/// `w_j = 1 / ||b_j||` for groups kept by the first step, `inf` otherwise.
pub fn adaptive_weights(step1: &GroupedCoefficients) -> AdaptiveWeights {
    let weights = step1
        .group_norms()
        .into_iter()
        .map(|nrm| {
            if nrm > ZERO_NORM {
                1.0 / nrm
            } else {
                f64::INFINITY
            }
        })
        .collect();
    AdaptiveWeights { weights }
}

/// One estimated additive component, in centered-basis coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimate {
    pub index: usize,
    pub coefficients: Vec<f64>,
    pub norm: f64,
}

/// A fitted additive model together with everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub mu_hat: f64,
    pub components: Vec<ComponentEstimate>,
    pub selected: Vec<usize>,
    pub rss: f64,
    pub df: f64,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub diagnostics: Vec<FitDiagnostics>,
    pub expansion: Expansion,
    pub scale: ScaleInfo,
}

/// Scaled covariates, their designs and the centered response for one dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scale: ScaleInfo,
    pub scaled_x: DMatrix<f64>,
    /// Centered spline design in the original basis coordinates.
    pub centered: GroupedDesign,
    /// The same design with orthonormalized blocks.
    pub orthonormal: GroupedDesign,
    pub y: DVector<f64>,
    pub mu_hat: f64,
}

impl Prepared {
    pub fn new(data: &Dataset, spec: &BasisSpec) -> Result<Self> {
        let (scaled_x, scale) = scale_covariates(&data.x)?;
        let centered = build_design(&scaled_x, spec)?;
        let orthonormal = orthonormalize_groups(&centered)?;
        let (y, mu_hat) = center_response(&data.y);
        Ok(Self {
            scale,
            scaled_x,
            centered,
            orthonormal,
            y,
            mu_hat,
        })
    }

    pub fn linear_design(&self) -> GroupedDesign {
        build_linear_design(&self.scaled_x)
    }
}

/// Builds a [`ModelFit`] from coefficients laid out by `design`'s groups.
pub(crate) fn assemble_fit(
    design: &GroupedDesign,
    beta: &GroupedCoefficients,
    y: &DVector<f64>,
    mu_hat: f64,
    scale: &ScaleInfo,
    lambdas: (f64, Option<f64>),
    diagnostics: Vec<FitDiagnostics>,
) -> ModelFit {
    let fitted = &design.z * DVector::from_column_slice(&beta.values);
    let rss = (y - fitted).norm_squared();
    let mut components = Vec::with_capacity(design.num_groups());
    let mut selected = Vec::new();
    let mut width = 0;
    for j in 0..design.num_groups() {
        let coefficients = design.back_transform(j, beta.group(j));
        let norm = coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        width = coefficients.len();
        if norm > ZERO_NORM {
            selected.push(j);
        }
        components.push(ComponentEstimate {
            index: j,
            coefficients,
            norm,
        });
    }
    ModelFit {
        mu_hat,
        df: (selected.len() * width) as f64,
        components,
        selected,
        rss,
        lambda1: lambdas.0,
        lambda2: lambdas.1,
        diagnostics,
        expansion: design.expansion.clone(),
        scale: scale.clone(),
    }
}

/// Solves the adaptive step given first-step coefficients.
pub(crate) fn adaptive_step(
    design: &GroupedDesign,
    y: &DVector<f64>,
    weights: &AdaptiveWeights,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<(GroupedCoefficients, FitDiagnostics)> {
    if weights.finite_groups().is_empty() {
        // nothing survived the first step
        let penalty = PenaltySpec::new(lambda2, weights.weights.clone())?;
        let zero = GroupedCoefficients::zeros(&design.groups);
        let obj = y.norm_squared();
        let kkt = crate::solver::kkt_residual(design, y, &zero, &penalty)?;
        return Ok((
            zero,
            FitDiagnostics {
                sweeps: 0,
                objective_trace: vec![obj],
                kkt_residual: kkt,
                converged: true,
            },
        ));
    }
    let penalty = PenaltySpec::new(lambda2, weights.weights.clone())?;
    solve_group_lasso(design, y, &penalty, opts, None)
}

/// Fits the two-step estimator at fixed penalty levels.
pub fn two_step_fit(
    data: &Dataset,
    spec: &BasisSpec,
    lambda1: f64,
    lambda2: f64,
    opts: &SolverOptions,
) -> Result<ModelFit> {
    let prep = Prepared::new(data, spec)?;
    let design = &prep.orthonormal;
    let unit = PenaltySpec::unit(lambda1, design.num_groups())?;
    let (step1, diag1) = solve_group_lasso(design, &prep.y, &unit, opts, None)?;
    let weights = adaptive_weights(&step1);
    let (step2, diag2) = adaptive_step(design, &prep.y, &weights, lambda2, opts)?;
    Ok(assemble_fit(
        design,
        &step2,
        &prep.y,
        prep.mu_hat,
        &prep.scale,
        (lambda1, Some(lambda2)),
        vec![diag1, diag2],
    ))
}

/// Maps `x` onto the unit interval of covariate `j`; `None` if it falls outside.
fn to_unit(scale: &ScaleInfo, j: usize, x: f64) -> Option<f64> {
    let u = scale.forward(j, x);
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&u) {
        return None;
    }
    Some(u.clamp(0.0, 1.0))
}

fn eval_component(fit: &ModelFit, j: usize, u: f64) -> f64 {
    let comp = &fit.components[j];
    if comp.norm <= ZERO_NORM {
        return 0.0;
    }
    match &fit.expansion {
        Expansion::Spline { spec, col_means } => {
            let phi = spec
                .knots
                .eval_basis(u)
                .expect("unit-interval value lies in the knot domain");
            comp.coefficients
                .iter()
                .zip(phi.iter().zip(&col_means[j]))
                .map(|(b, (f, m))| b * (f - m))
                .sum()
        }
        Expansion::Linear { means } => comp.coefficients[0] * (u - means[j]),
        Expansion::Raw => unreachable!("fits are always built from a basis expansion"),
    }
}

/// `f_j(x)` for each `x` (original covariate scale) within the training range.
pub fn predict_component(fit: &ModelFit, j: usize, x: &[f64]) -> Result<Vec<f64>> {
    if j >= fit.components.len() {
        return Err(Error::InvalidParameter(format!(
            "component {j} out of range for {} covariates",
            fit.components.len()
        )));
    }
    x.iter()
        .map(|&v| {
            let u = to_unit(&fit.scale, j, v).ok_or(Error::OutOfDomain {
                x: v,
                lower: fit.scale.min[j],
                upper: fit.scale.max(j),
            })?;
            Ok(eval_component(fit, j, u))
        })
        .collect()
}

/// `mu + sum_j f_j(x_j)` for one covariate row.
pub fn predict(fit: &ModelFit, x_row: &[f64]) -> Result<f64> {
    check_row(fit, x_row)?;
    let mut total = fit.mu_hat;
    for (j, &x) in x_row.iter().enumerate() {
        total += predict_component(fit, j, &[x])?[0];
    }
    Ok(total)
}

/// Like [`predict`], but clamps covariates outside the training range to its boundary.
pub fn predict_clamped(fit: &ModelFit, x_row: &[f64]) -> Result<f64> {
    check_row(fit, x_row)?;
    let mut total = fit.mu_hat;
    for &j in &fit.selected {
        let u = fit.scale.forward(j, x_row[j]);
        if u.is_nan() {
            return Err(Error::InvalidData("non-finite covariate".into()));
        }
        total += eval_component(fit, j, u.clamp(0.0, 1.0));
    }
    Ok(total)
}

fn check_row(fit: &ModelFit, x_row: &[f64]) -> Result<()> {
    if x_row.len() != fit.components.len() {
        return Err(Error::DimensionMismatch(format!(
            "row has {} values for {} covariates",
            x_row.len(),
            fit.components.len()
        )));
    }
    Ok(())
}

/// Fitted values of every component at every training row (`n x p`).
pub fn component_values(fit: &ModelFit, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for &j in &fit.selected {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let vals = predict_component(fit, j, &col)?;
        out.set_column(j, &DVector::from_vec(vals));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::lambda_max;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, p: usize, noise: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 3.0 + 1.0);
        let y = DVector::from_fn(n, |i, _| {
            let u = (x[(i, 0)] - 1.0) / 3.0;
            let v = (x[(i, 1)] - 1.0) / 3.0;
            5.0 * u + 3.0 * (2.0 * v - 1.0).powi(2) + noise * (rng.random::<f64>() - 0.5)
        });
        Dataset::new(y, x, None).unwrap()
    }

    #[test]
    fn weights_examples() {
        let groups = vec![0..2, 2..4, 4..6];
        let b = GroupedCoefficients {
            values: vec![0.0, 2.0, 0.0, 0.0, 1.2, 1.6],
            groups,
        };
        let w = adaptive_weights(&b);
        assert_eq!(w.weights[0], 0.5);
        assert!(w.weights[1].is_infinite());
        assert_eq!(w.weights[2], 0.5);
        assert_eq!(w.finite_groups(), vec![0, 2]);
    }

    #[test]
    fn large_lambda_selects_nothing() {
        let data = toy_data(40, 4, 1.0, 1);
        let spec = BasisSpec::unit(4, 3).unwrap();
        let prep = Prepared::new(&data, &spec).unwrap();
        let lmax = lambda_max(&prep.orthonormal, &prep.y, &[1.0; 4]).unwrap();
        let fit = two_step_fit(&data, &spec, lmax, 0.0, &SolverOptions::default()).unwrap();
        assert!(fit.selected.is_empty());
        assert!(fit
            .components
            .iter()
            .all(|c| c.coefficients.iter().all(|&v| v == 0.0)));
        assert!((fit.mu_hat - data.y.mean()).abs() < 1e-12);
        assert_eq!(predict(&fit, &[2.0, 2.0, 2.0, 2.0]).unwrap(), fit.mu_hat);
    }

    #[test]
    fn fit_invariants() {
        let data = toy_data(80, 6, 0.5, 2);
        let spec = BasisSpec::unit(6, 3).unwrap();
        let prep = Prepared::new(&data, &spec).unwrap();
        let lmax = lambda_max(&prep.orthonormal, &prep.y, &[1.0; 6]).unwrap();
        let fit = two_step_fit(
            &data,
            &spec,
            0.05 * lmax,
            0.05 * lmax,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(fit.selected.contains(&0) && fit.selected.contains(&1));
        assert_eq!(fit.df, (fit.selected.len() * 9) as f64);
        // rss recomputed from the centered design in original coordinates
        let beta: Vec<f64> = fit
            .components
            .iter()
            .flat_map(|c| c.coefficients.clone())
            .collect();
        let resid = &prep.y - &prep.centered.z * DVector::from_vec(beta);
        assert!((resid.norm_squared() - fit.rss).abs() < 1e-8);
        for c in &fit.components {
            let nrm = c.coefficients.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((nrm - c.norm).abs() < 1e-12);
        }
        // centered components, matching the design blocks at training points
        for &j in &fit.selected {
            let col: Vec<f64> = data.x.column(j).iter().copied().collect();
            let vals = predict_component(&fit, j, &col).unwrap();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-8);
            let block = prep.centered.block(j)
                * DVector::from_column_slice(&fit.components[j].coefficients);
            for (a, b) in vals.iter().zip(block.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        // prediction at training rows
        let full: DVector<f64> = fit.components.iter().fold(DVector::zeros(80), |acc, c| {
            acc + prep.centered.block(c.index) * DVector::from_column_slice(&c.coefficients)
        });
        for i in 0..80 {
            let row: Vec<f64> = data.x.row(i).iter().copied().collect();
            assert!((predict(&fit, &row).unwrap() - fit.mu_hat - full[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn additivity_of_predictions() {
        let data = toy_data(60, 3, 0.3, 3);
        let spec = BasisSpec::unit(5, 3).unwrap();
        let fit = two_step_fit(&data, &spec, 1.0, 1.0, &SolverOptions::default()).unwrap();
        let a = [1.5, 2.0, 3.0];
        let b = [1.5, 3.5, 3.0];
        let diff = predict(&fit, &b).unwrap() - predict(&fit, &a).unwrap();
        let comp = predict_component(&fit, 1, &[3.5, 2.0]).unwrap();
        assert!((diff - (comp[0] - comp[1])).abs() < 1e-12);
    }

    #[test]
    fn unselected_component_is_zero_and_range_is_enforced() {
        let data = toy_data(60, 3, 0.3, 4);
        let spec = BasisSpec::unit(5, 3).unwrap();
        let fit = two_step_fit(&data, &spec, 1e9, 1e9, &SolverOptions::default()).unwrap();
        assert_eq!(
            predict_component(&fit, 2, &[2.0, 3.0]).unwrap(),
            vec![0.0, 0.0]
        );
        assert!(matches!(
            predict_component(&fit, 0, &[100.0]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(predict(&fit, &[2.0]).is_err());
    }
}
