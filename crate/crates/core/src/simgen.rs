//! Monte Carlo designs with four nonzero additive components, and the
//! selection and estimation metrics used to compare methods on them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::{component_values, predict, ModelFit, Prepared};
use crate::selection::{fit_prepared_many, Criterion, FitConfig, Method};

/// Number of nonzero components in the generating model.
pub const NUM_TRUE: usize = 4;

/// Covariate layout of the generating model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Example {
    /// Signal covariates share one latent factor, noise covariates another.
    One,
    /// All covariates share a single latent factor.
    Two,
}

impl Example {
    pub fn default_sigma(&self) -> f64 {
        match self {
            Example::One => 1.27,
            Example::Two => 1.32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub t: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(example: Example, n: usize, p: usize, t: f64, seed: u64) -> Self {
        Self {
            example,
            n,
            p,
            t,
            sigma: example.default_sigma(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidParameter(format!(
                "n must be at least 10, got {}",
                self.n
            )));
        }
        if self.p < NUM_TRUE {
            return Err(Error::InvalidParameter(format!(
                "p must be at least {NUM_TRUE}, got {}",
                self.p
            )));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t must be nonnegative, got {}",
                self.t
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// The same design with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub dataset: Dataset,
    /// `f_j(x_ij)` for the nonzero components, `n x 4`.
    pub f_true: DMatrix<f64>,
    pub f_sum: DVector<f64>,
    /// Zero-based indices of the nonzero components.
    pub truth_set: Vec<usize>,
}

/// Standard normal draw conditioned on `[0, 1]`, by rejection.
pub fn truncated_std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if (0.0..=1.0).contains(&z) {
            return z;
        }
    }
}

/// `(f1, f2, f3, f4)(u)`.
pub fn true_components(u: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfDomain {
            x: u,
            lower: 0.0,
            upper: 1.0,
        });
    }
    let s = (2.0 * PI * u).sin();
    let c = (2.0 * PI * u).cos();
    Ok([
        5.0 * u,
        3.0 * (2.0 * u - 1.0).powi(2),
        4.0 * s / (2.0 - s),
        6.0 * (0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c.powi(3) + 0.5 * s.powi(3)),
    ])
}

fn finish(x: DMatrix<f64>, sigma: f64, rng: &mut ChaCha8Rng) -> Result<GeneratedData> {
    let n = x.nrows();
    let mut f_true = DMatrix::zeros(n, NUM_TRUE);
    for i in 0..n {
        for j in 0..NUM_TRUE {
            f_true[(i, j)] = true_components(x[(i, j)])?[j];
        }
    }
    let f_sum: DVector<f64> = f_true.column_sum();
    let y = DVector::from_fn(n, |i, _| {
        let e: f64 = rng.sample(StandardNormal);
        f_sum[i] + sigma * e
    });
    Ok(GeneratedData {
        dataset: Dataset::new(y, x, None)?,
        f_true,
        f_sum,
        truth_set: (0..NUM_TRUE).collect(),
    })
}

/// Covariates `(w_ik + t u_i)/(1 + t)` for `k < 4` and `(w_ik + t v_i)/(1 + t)`
/// otherwise, all latent draws truncated standard normal.
pub fn gen_example1(config: &GenConfig) -> Result<GeneratedData> {
    if config.example != Example::One {
        return Err(Error::InvalidParameter(
            "configuration is not for example 1".into(),
        ));
    }
    config.validate()?;
    let (n, p, t) = (config.n, config.p, config.t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = DMatrix::zeros(n, p);
    let mut w = vec![0.0; p];
    for i in 0..n {
        for wk in w.iter_mut() {
            *wk = truncated_std_normal(&mut rng);
        }
        let u = truncated_std_normal(&mut rng);
        // u' enters no covariate; drawn to keep the latent stream aligned
        let _u_prime = truncated_std_normal(&mut rng);
        let v = truncated_std_normal(&mut rng);
        for k in 0..p {
            let shared = if k < NUM_TRUE { u } else { v };
            x[(i, k)] = (w[k] + t * shared) / (1.0 + t);
        }
    }
    finish(x, config.sigma, &mut rng)
}

/// Covariates `(W_j + t U)/(1 + t)` with one shared factor `U`.
pub fn gen_example2(config: &GenConfig) -> Result<GeneratedData> {
    if config.example != Example::Two {
        return Err(Error::InvalidParameter(
            "configuration is not for example 2".into(),
        ));
    }
    config.validate()?;
    let (n, p, t) = (config.n, config.p, config.t);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = DMatrix::zeros(n, p);
    let mut w = vec![0.0; p];
    for i in 0..n {
        for wk in w.iter_mut() {
            *wk = truncated_std_normal(&mut rng);
        }
        let u = truncated_std_normal(&mut rng);
        for k in 0..p {
            x[(i, k)] = (w[k] + t * u) / (1.0 + t);
        }
    }
    finish(x, config.sigma, &mut rng)
}

pub fn generate(config: &GenConfig) -> Result<GeneratedData> {
    match config.example {
        Example::One => gen_example1(config),
        Example::Two => gen_example2(config),
    }
}

/// Selection outcome and estimation error of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub nv: usize,
    pub me: f64,
    pub inc: bool,
    pub cs: bool,
    /// `sum_j ||f_hat_j - f_j||_n^2` with each true component centered in-sample.
    pub component_error: f64,
}

/// `(nv, inc, cs)` for a selected set against the true set.
pub fn eval_selection(selected: &[usize], truth_set: &[usize]) -> (usize, bool, bool) {
    let inc = truth_set.iter().all(|j| selected.contains(j));
    let cs = inc && selected.len() == truth_set.len();
    (selected.len(), inc, cs)
}

/// `n^-1 sum_i (f_hat(x_i) - f(x_i))^2`, where `f_hat` includes the intercept.
pub fn model_error(fit: &ModelFit, gen: &GeneratedData) -> Result<f64> {
    let data = &gen.dataset;
    let mut total = 0.0;
    for i in 0..data.n() {
        let row: Vec<f64> = data.x.row(i).iter().copied().collect();
        total += (predict(fit, &row)? - gen.f_sum[i]).powi(2);
    }
    Ok(total / data.n() as f64)
}

/// Sum over all covariates of the mean squared gap between estimated and
/// true components at the training points; true components are centered.
pub fn component_error(fit: &ModelFit, gen: &GeneratedData) -> Result<f64> {
    let data = &gen.dataset;
    let n = data.n() as f64;
    let est = component_values(fit, &data.x)?;
    let mut total = 0.0;
    for j in 0..data.p() {
        let truth: Vec<f64> = if j < NUM_TRUE {
            let col = gen.f_true.column(j);
            let mean = col.mean();
            col.iter().map(|v| v - mean).collect()
        } else {
            vec![0.0; data.n()]
        };
        total += est
            .column(j)
            .iter()
            .zip(&truth)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / n;
    }
    Ok(total)
}

pub fn rep_metrics(fit: &ModelFit, gen: &GeneratedData) -> Result<RepMetrics> {
    let (nv, inc, cs) = eval_selection(&fit.selected, &gen.truth_set);
    Ok(RepMetrics {
        nv,
        me: model_error(fit, gen)?,
        inc,
        cs,
        component_error: component_error(fit, gen)?,
    })
}

/// `sqrt(sum_i fhat(x_i)^2 / sum_i (y_i - mu - fhat(x_i))^2)` with `fhat` the
/// sum of estimated components; infinite when the residuals vanish up to rounding.
pub fn snr_estimate(fit: &ModelFit, data: &Dataset) -> Result<f64> {
    let comps = component_values(fit, &data.x)?;
    let mut signal = 0.0;
    let mut noise = 0.0;
    for i in 0..data.n() {
        let f: f64 = comps.row(i).sum();
        signal += f * f;
        noise += (data.y[i] - fit.mu_hat - f).powi(2);
    }
    if noise <= 1e-20 * data.y.norm_squared() {
        return Ok(f64::INFINITY);
    }
    Ok((signal / noise).sqrt())
}

/// SplitMix64 of `master + index`: independent per-replication seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        if k == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / k as f64;
        let sd = if k > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            sd,
            se: sd / (k as f64).sqrt(),
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor,
            sd: self.sd * factor,
            se: self.se * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub criterion: Criterion,
    pub nv: Stat,
    pub me: Stat,
    /// Percentage of replications selecting every true component.
    pub inc: Stat,
    /// Percentage of replications selecting exactly the true components.
    pub cs: Stat,
    pub component_error: Stat,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    /// `None` when the replication failed for this method.
    pub metrics: Option<RepMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub config: GenConfig,
    pub criterion: Criterion,
    pub reps: usize,
    pub rows: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
}

impl SummaryTable {
    pub fn row(&self, method: Method) -> Option<&MethodSummary> {
        self.rows.iter().find(|r| r.method == method)
    }
}

fn one_replication(
    config: &GenConfig,
    methods: &[Method],
    fit: &FitConfig,
    rep: usize,
) -> Vec<RepRecord> {
    let seed = derive_seed(config.seed, rep as u64);
    let failed = |msg: String| {
        methods
            .iter()
            .map(|&method| RepRecord {
                rep,
                seed,
                method,
                metrics: None,
                error: Some(msg.clone()),
            })
            .collect::<Vec<_>>()
    };
    let gen = match generate(&config.with_seed(seed)) {
        Ok(g) => g,
        Err(e) => return failed(e.to_string()),
    };
    let prep = match fit.basis().and_then(|b| Prepared::new(&gen.dataset, &b)) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    fit_prepared_many(&prep, methods, fit)
        .into_iter()
        .zip(methods)
        .map(|(res, &method)| {
            let outcome = res.and_then(|tuned| rep_metrics(&tuned.fit, &gen));
            RepRecord {
                rep,
                seed,
                method,
                error: outcome.as_ref().err().map(|e| e.to_string()),
                metrics: outcome.ok(),
            }
        })
        .collect()
}

fn summarize(method: Method, criterion: Criterion, records: &[RepRecord]) -> MethodSummary {
    let ok: Vec<&RepMetrics> = records
        .iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.metrics.as_ref())
        .collect();
    let failed = records
        .iter()
        .filter(|r| r.method == method && r.metrics.is_none())
        .count();
    let col =
        |f: &dyn Fn(&RepMetrics) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
    MethodSummary {
        method,
        criterion,
        nv: col(&|m| m.nv as f64),
        me: col(&|m| m.me),
        inc: col(&|m| f64::from(u8::from(m.inc))).scaled(100.0),
        cs: col(&|m| f64::from(u8::from(m.cs))).scaled(100.0),
        component_error: col(&|m| m.component_error),
        completed: ok.len(),
        failed,
    }
}

/// Runs `reps` independent replications of the design and fits every method
/// with criterion-tuned penalties. Replications run in parallel; the result
/// depends only on the inputs. Failed fits are counted, not dropped silently.
pub fn run_replications(
    config: &GenConfig,
    methods: &[Method],
    fit: &FitConfig,
    reps: usize,
) -> Result<SummaryTable> {
    config.validate()?;
    if reps < 1 {
        return Err(Error::InvalidParameter(
            "at least one replication is required".into(),
        ));
    }
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods requested".into()));
    }
    let records: Vec<RepRecord> = (0..reps)
        .into_par_iter()
        .flat_map_iter(|rep| one_replication(config, methods, fit, rep))
        .collect();
    let rows = methods
        .iter()
        .map(|&m| summarize(m, fit.criterion, &records))
        .collect();
    Ok(SummaryTable {
        config: config.clone(),
        criterion: fit.criterion,
        reps,
        rows,
        records,
    })
}
