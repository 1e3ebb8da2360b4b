#![allow(dead_code)]

use addsel::design::orthonormalize_groups;
use addsel::{GroupedDesign, PenaltySpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub design: GroupedDesign,
    pub y: DVector<f64>,
    pub penalty: PenaltySpec,
}

/// Orthonormalized random design with `n <= 30`, `p <= 4`, `m <= 3` and a random
/// penalty, some groups possibly excluded.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=4);
    let m = rng.random_range(1..=3);
    let n = rng.random_range(5..=30);
    let z = DMatrix::from_fn(n, p * m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 2.0);
    let design = orthonormalize_groups(&GroupedDesign::from_blocks(z, m).unwrap()).unwrap();
    let mut weights: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
    if p > 1 && rng.random_bool(0.2) {
        weights[rng.random_range(0..p)] = f64::INFINITY;
    }
    let lmax = addsel::solver::lambda_max(&design, &y, &weights).unwrap();
    let lambda = lmax * rng.random_range(0.01..1.1);
    Instance {
        design,
        y,
        penalty: PenaltySpec::new(lambda, weights).unwrap(),
    }
}

fn oracle_objective(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    groups: &[std::ops::Range<usize>],
    scale: &[f64],
    b: &DVector<f64>,
) -> f64 {
    let r = y - z * b;
    let pen: f64 = groups
        .iter()
        .zip(scale)
        .filter(|(_, s)| s.is_finite())
        .map(|(g, s)| s * b.rows(g.start, g.len()).norm())
        .sum();
    r.norm_squared() + pen
}

/// Accelerated proximal gradient with adaptive restart, run to stagnation.
/// Written against the raw matrix so it shares no code with the solver.
pub fn fista_objective(design: &GroupedDesign, y: &DVector<f64>, penalty: &PenaltySpec) -> f64 {
    let z = &design.z;
    let groups = &design.groups;
    let scale: Vec<f64> = penalty
        .weights
        .iter()
        .map(|w| {
            if w.is_infinite() {
                f64::INFINITY
            } else {
                penalty.lambda * w
            }
        })
        .collect();
    let gram = z.tr_mul(z);
    let lip = 2.0 * gram.symmetric_eigenvalues().max().max(1e-12);
    let zty = z.tr_mul(y);
    let prox = |v: &DVector<f64>| {
        let mut out = v.clone();
        for (g, s) in groups.iter().zip(&scale) {
            let mut block = out.rows_mut(g.start, g.len());
            if s.is_infinite() {
                block.fill(0.0);
                continue;
            }
            let nrm = block.norm();
            let t = s / lip;
            if nrm <= t {
                block.fill(0.0);
            } else {
                block *= 1.0 - t / nrm;
            }
        }
        out
    };
    let k = z.ncols();
    let mut x = DVector::zeros(k);
    let mut v = x.clone();
    let mut t: f64 = 1.0;
    let mut best = oracle_objective(z, y, groups, &scale, &x);
    let mut stall = 0;
    for _ in 0..400_000 {
        let grad = (&gram * &v - &zty) * 2.0;
        let next = prox(&(&v - grad / lip));
        let obj = oracle_objective(z, y, groups, &scale, &next);
        if obj > best {
            // restart momentum
            t = 1.0;
            v = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        v = &next + (&next - &x) * ((t - 1.0) / t_next);
        t = t_next;
        if best - obj <= 1e-15 * best.max(1.0) {
            stall += 1;
            if stall > 200 {
                best = obj;
                break;
            }
        } else {
            stall = 0;
        }
        x = next;
        best = obj;
    }
    best
}

/// Least squares through the normal equations.
pub fn least_squares(z: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let gram = z.tr_mul(z);
    gram.cholesky()
        .expect("full column rank")
        .solve(&z.tr_mul(y))
}
