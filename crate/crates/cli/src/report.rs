use addsel::pipeline::predict_component;
use addsel::{CriterionValue, Dataset, ModelFit, TunedFit};
use serde::{Deserialize, Serialize};

pub const CURVE_POINTS: usize = 100;

/// One point of a criterion profile; `None` marks a degenerate zero-RSS fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lambda: f64,
    pub bic: Option<f64>,
    pub ebic: Option<f64>,
    pub df: f64,
    pub rss: f64,
    pub num_selected: usize,
    pub converged: bool,
}

impl From<&CriterionValue> for ProfilePoint {
    fn from(v: &CriterionValue) -> Self {
        let finite = |x: f64| x.is_finite().then_some(x);
        Self {
            lambda: v.lambda,
            bic: finite(v.bic),
            ebic: finite(v.ebic),
            df: v.df,
            rss: v.rss,
            num_selected: v.num_selected,
            converged: v.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub index: usize,
    pub name: String,
    pub selected: bool,
    pub norm: f64,
    /// Coefficients on the centered basis of this covariate.
    pub coefficients: Vec<f64>,
    /// Fitted component on an even grid over the covariate's observed range; selected components only.
    pub curve: Option<Curve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub criterion: String,
    pub n: usize,
    pub p: usize,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub mu_hat: f64,
    pub rss: f64,
    pub df: f64,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub components: Vec<ComponentReport>,
    pub step1_profile: Vec<ProfilePoint>,
    pub step1_index: usize,
    pub step2_profile: Option<Vec<ProfilePoint>>,
    pub step2_index: Option<usize>,
    /// Constant columns dropped on input.
    pub excluded: Vec<String>,
    /// Covariates kept by marginal screening with their correlations, when screening ran.
    pub screened: Option<Vec<ScreenEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenEntry {
    pub index: usize,
    pub name: String,
    pub correlation: f64,
}

fn curve(fit: &ModelFit, data: &Dataset, j: usize) -> addsel::Result<Curve> {
    let col = data.x.column(j);
    let (lo, hi) = (col.min(), col.max());
    let x: Vec<f64> = (0..CURVE_POINTS)
        .map(|k| {
            if k + 1 == CURVE_POINTS {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (CURVE_POINTS - 1) as f64
            }
        })
        .collect();
    let y = predict_component(fit, j, &x)?;
    Ok(Curve { x, y })
}

impl FitReport {
    pub fn build(
        tuned: &TunedFit,
        data: &Dataset,
        method: &str,
        criterion: &str,
        excluded: Vec<String>,
        screened: Option<Vec<ScreenEntry>>,
    ) -> addsel::Result<Self> {
        let fit = &tuned.fit;
        let components = fit
            .components
            .iter()
            .map(|c| {
                let selected = fit.selected.contains(&c.index);
                Ok(ComponentReport {
                    index: c.index,
                    name: data.name(c.index),
                    selected,
                    norm: c.norm,
                    coefficients: c.coefficients.clone(),
                    curve: if selected {
                        Some(curve(fit, data, c.index)?)
                    } else {
                        None
                    },
                })
            })
            .collect::<addsel::Result<_>>()?;
        let profile = |p: &[CriterionValue]| p.iter().map(ProfilePoint::from).collect::<Vec<_>>();
        Ok(Self {
            method: method.to_string(),
            criterion: criterion.to_string(),
            n: data.n(),
            p: data.p(),
            selected: fit.selected.clone(),
            selected_names: fit.selected.iter().map(|&j| data.name(j)).collect(),
            mu_hat: fit.mu_hat,
            rss: fit.rss,
            df: fit.df,
            lambda1: fit.lambda1,
            lambda2: fit.lambda2,
            components,
            step1_profile: profile(&tuned.step1_path),
            step1_index: tuned.step1_index,
            step2_profile: tuned.step2_path.as_deref().map(profile),
            step2_index: tuned.step2_index,
            excluded,
            screened,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub point: ProfilePoint,
    pub selected: Vec<usize>,
}

/// The first-step group Lasso path with the points each criterion picks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub n: usize,
    pub p: usize,
    pub names: Vec<String>,
    pub lambda_max: f64,
    pub points: Vec<PathEntry>,
    pub bic_index: usize,
    pub ebic_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub n: usize,
    pub p: usize,
    pub ranking: Vec<ScreenEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: String,
    pub folds: usize,
    pub repetitions: Vec<addsel::CvResult>,
    /// Mean over repetitions of each repetition's mean prediction error.
    pub mean_pe: f64,
    pub sd_pe: f64,
    pub mean_selected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub tables: Vec<addsel::SummaryTable>,
}
