//! Normalized B-spline bases on a compact interval.
//!
//! Knots are clamped: each boundary knot is repeated `degree + 1` times, so the
//! first basis function equals 1 at the lower end and the last equals 1 at the
//! upper end. Evaluation uses the Cox–de Boor triangle restricted to the
//! `degree + 1` functions that are nonzero on the containing knot span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamped knot sequence of a spline space of fixed degree on `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    lower: f64,
    upper: f64,
    interior: Vec<f64>,
    full: Vec<f64>,
}

impl KnotVector {
    /// Builds a knot vector from explicit interior knots.
    pub fn new(lower: f64, upper: f64, interior: Vec<f64>, degree: usize) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidInterval { lower, upper });
        }
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        let inside = interior.iter().all(|&k| k > lower && k < upper);
        let increasing = interior.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(Error::InvalidKnots { lower, upper });
        }
        let mut full = Vec::with_capacity(interior.len() + 2 * (degree + 1));
        full.extend(std::iter::repeat_n(lower, degree + 1));
        full.extend_from_slice(&interior);
        full.extend(std::iter::repeat_n(upper, degree + 1));
        Ok(Self {
            degree,
            lower,
            upper,
            interior,
            full,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// The clamped sequence, of length `K + 2(degree + 1)`.
    pub fn full_knots(&self) -> &[f64] {
        &self.full
    }

    /// Number of basis functions, `K + degree + 1`.
    pub fn raw_dim(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    /// Index `mu` of the knot span `[t_mu, t_{mu+1})` containing `x`. The upper
    /// endpoint belongs to the last nonempty span.
    fn span(&self, x: f64) -> usize {
        let t = &self.full;
        let last = self.raw_dim() - 1;
        if x >= self.upper {
            return last;
        }
        // first index in degree..=last with t[mu + 1] > x
        let mut lo = self.degree;
        let mut hi = last;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t[mid + 1] > x {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Writes the `degree + 1` nonzero basis values at `x` into `out` and returns
    /// the index of the first of them. `x` must already lie in the domain.
    pub(crate) fn eval_local(&self, x: f64, out: &mut [f64]) -> usize {
        let l = self.degree;
        let t = &self.full;
        let mu = self.span(x);
        let mut left = [0.0; 16];
        let mut right = [0.0; 16];
        let (left, right) = if l < 16 {
            (&mut left[..=l], &mut right[..=l])
        } else {
            unreachable!("degree above 15 is rejected by BasisSpec")
        };
        out[0] = 1.0;
        for j in 1..=l {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { out[r] / denom } else { 0.0 };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        mu - l
    }

    /// Values of all `raw_dim` basis functions at `x`.
    pub fn eval_basis(&self, x: f64) -> Result<Vec<f64>> {
        self.check_domain(x)?;
        let mut local = vec![0.0; self.degree + 1];
        let first = self.eval_local(x, &mut local);
        let mut values = vec![0.0; self.raw_dim()];
        values[first..first + local.len()].copy_from_slice(&local);
        Ok(values)
    }

    pub(crate) fn check_domain(&self, x: f64) -> Result<()> {
        if x.is_nan() || x < self.lower || x > self.upper {
            return Err(Error::OutOfDomain {
                x,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(())
    }
}

/// Evenly spaced interior knots `a + t(b - a)/(K + 1)`, `t = 1..=K`, clamped at both ends.
pub fn make_knots(
    lower: f64,
    upper: f64,
    num_interior: usize,
    degree: usize,
) -> Result<KnotVector> {
    if !(lower < upper) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if degree < 1 {
        return Err(Error::InvalidDegree(degree));
    }
    let width = upper - lower;
    let interior = (1..=num_interior)
        .map(|t| lower + t as f64 * width / (num_interior + 1) as f64)
        .collect();
    KnotVector::new(lower, upper, interior, degree)
}

/// A spline space together with the dimension left after centering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub knots: KnotVector,
}

impl BasisSpec {
    pub fn new(knots: KnotVector) -> Result<Self> {
        if knots.degree() > 15 {
            return Err(Error::InvalidParameter(format!(
                "spline degree {} exceeds the supported maximum of 15",
                knots.degree()
            )));
        }
        Ok(Self { knots })
    }

    /// Evenly spaced knots on the unit interval, the layout used for scaled covariates.
    pub fn unit(num_interior: usize, degree: usize) -> Result<Self> {
        Self::new(make_knots(0.0, 1.0, num_interior, degree)?)
    }

    /// `K + l + 1`.
    pub fn raw_dim(&self) -> usize {
        self.knots.raw_dim()
    }

    /// `K + l`: one column is lost to the centering constraint.
    pub fn centered_dim(&self) -> usize {
        self.raw_dim() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_single_knot() {
        let kv = make_knots(0.0, 1.0, 1, 1).unwrap();
        assert_eq!(kv.interior(), &[0.5]);
        assert_eq!(kv.full_knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(kv.raw_dim(), 3);
    }

    #[test]
    fn cubic_six_interior() {
        let spec = BasisSpec::unit(6, 3).unwrap();
        let interior = spec.knots.interior();
        assert_eq!(interior.len(), 6);
        for (t, k) in interior.iter().enumerate() {
            assert!((k - (t + 1) as f64 / 7.0).abs() < 1e-15);
        }
        assert_eq!(spec.raw_dim(), 10);
        assert_eq!(spec.centered_dim(), 9);
        assert_eq!(spec.knots.full_knots().len(), 6 + 8);
    }

    #[test]
    fn no_interior_knots_gives_bernstein() {
        let kv = make_knots(0.0, 1.0, 0, 3).unwrap();
        assert_eq!(kv.raw_dim(), 4);
        let x: f64 = 0.3;
        let v = kv.eval_basis(x).unwrap();
        let expected = [
            (1.0 - x).powi(3),
            3.0 * x * (1.0 - x).powi(2),
            3.0 * x * x * (1.0 - x),
            x.powi(3),
        ];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(
            make_knots(1.0, 1.0, 3, 3),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(matches!(
            make_knots(2.0, 1.0, 3, 3),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(matches!(
            make_knots(0.0, 1.0, 3, 0),
            Err(Error::InvalidDegree(0))
        ));
        assert!(KnotVector::new(0.0, 1.0, vec![0.5, 0.5], 2).is_err());
        assert!(KnotVector::new(0.0, 1.0, vec![1.0], 2).is_err());
    }

    #[test]
    fn hat_function_peak() {
        let kv = make_knots(0.0, 1.0, 1, 1).unwrap();
        assert_eq!(kv.eval_basis(0.5).unwrap(), vec![0.0, 1.0, 0.0]);
        let v = kv.eval_basis(0.25).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clamped_endpoints() {
        let kv = make_knots(-1.0, 2.0, 4, 3).unwrap();
        let v = kv.eval_basis(-1.0).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        let v = kv.eval_basis(2.0).unwrap();
        assert_eq!(*v.last().unwrap(), 1.0);
        assert!(v[..v.len() - 1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn out_of_domain() {
        let kv = make_knots(0.0, 1.0, 3, 3).unwrap();
        assert!(matches!(
            kv.eval_basis(1.0 + 1e-9),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(kv.eval_basis(-0.1).is_err());
        assert!(kv.eval_basis(f64::NAN).is_err());
    }

    /// Textbook recursive definition, used as an independent check.
    fn cox_de_boor(t: &[f64], i: usize, l: usize, x: f64, upper: f64) -> f64 {
        if l == 0 {
            let last_span = t[i + 1] == upper && t[i] < t[i + 1];
            return if (t[i] <= x && x < t[i + 1]) || (x == upper && last_span) {
                1.0
            } else {
                0.0
            };
        }
        let mut v = 0.0;
        let d1 = t[i + l] - t[i];
        if d1 > 0.0 {
            v += (x - t[i]) / d1 * cox_de_boor(t, i, l - 1, x, upper);
        }
        let d2 = t[i + l + 1] - t[i + 1];
        if d2 > 0.0 {
            v += (t[i + l + 1] - x) / d2 * cox_de_boor(t, i + 1, l - 1, x, upper);
        }
        v
    }

    #[test]
    fn matches_recursive_definition() {
        for (k, l) in [(0, 1), (1, 1), (3, 2), (6, 3), (5, 4)] {
            let kv = make_knots(0.0, 1.0, k, l).unwrap();
            for s in 0..=200 {
                let x = s as f64 / 200.0;
                let fast = kv.eval_basis(x).unwrap();
                for (i, f) in fast.iter().enumerate() {
                    let slow = cox_de_boor(kv.full_knots(), i, l, x, 1.0);
                    assert!((f - slow).abs() < 1e-13, "k={k} l={l} x={x} i={i}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_dense_sample() {
        let kv = make_knots(0.0, 1.0, 6, 3).unwrap();
        for s in 0..1000 {
            let x = s as f64 / 999.0;
            let sum: f64 = kv.eval_basis(x).unwrap().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn continuity_across_knots() {
        // C^{l-1}: one-sided difference quotients agree to O(h) across each knot.
        for l in 2..=4 {
            let kv = make_knots(0.0, 1.0, 5, l).unwrap();
            let h = 1e-5;
            for &knot in kv.interior() {
                let f = |x: f64| kv.eval_basis(x).unwrap();
                let (a, c, b) = (f(knot - h), f(knot), f(knot + h));
                for i in 0..kv.raw_dim() {
                    let left = (c[i] - a[i]) / h;
                    let right = (b[i] - c[i]) / h;
                    assert!((left - right).abs() < 1e3 * h, "l={l} knot={knot} i={i}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn basis_properties(
            k in 0usize..10,
            l in 1usize..6,
            lower in -5.0f64..5.0,
            width in 0.1f64..10.0,
            frac in 0.0f64..=1.0,
        ) {
            let upper = lower + width;
            let kv = make_knots(lower, upper, k, l).unwrap();
            let x = (lower + frac * width).min(upper);
            let v = kv.eval_basis(x).unwrap();
            let sum: f64 = v.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-10);
            prop_assert!(v.iter().all(|&b| (0.0..=1.0 + 1e-12).contains(&b)));
            prop_assert!(v.iter().filter(|&&b| b != 0.0).count() <= l + 1);
            // local support: phi_i vanishes outside [t_i, t_{i+l+1}]
            let t = kv.full_knots();
            for (i, &b) in v.iter().enumerate() {
                if x < t[i] || x > t[i + l + 1] {
                    prop_assert_eq!(b, 0.0);
                }
            }
        }
    }
}
