//! Data containers and the centered, grouped spline design.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::BasisSpec;

/// Response vector, covariate matrix (`n x p`) and optional covariate labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, names: Option<Vec<String>>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "response has {n} rows but covariates have {}",
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::InvalidData("no covariates".into()));
        }
        if let Some(names) = &names {
            if names.len() != x.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "{} names for {} covariates",
                    names.len(),
                    x.ncols()
                )));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("missing or non-finite values".into()));
        }
        for (j, col) in x.column_iter().enumerate() {
            if col.max() == col.min() {
                return Err(Error::ConstantColumn { column: j });
            }
        }
        Ok(Self { y, x, names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Label of covariate `j`, falling back to `x{j+1}`.
    pub fn name(&self, j: usize) -> String {
        match &self.names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        let x = self.x.select_rows(idx);
        Self::new(y, x, self.names.clone())
    }

    /// Columns selected by `cols`, in that order.
    pub fn select_covariates(&self, cols: &[usize]) -> Result<Self> {
        let names = self
            .names
            .as_ref()
            .map(|names| cols.iter().map(|&j| names[j].clone()).collect());
        Self::new(self.y.clone(), self.x.select_columns(cols), names)
    }
}

/// Per-column affine map `u = (x - min) / range` onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleInfo {
    pub min: Vec<f64>,
    pub range: Vec<f64>,
}

impl ScaleInfo {
    pub fn forward(&self, j: usize, x: f64) -> f64 {
        (x - self.min[j]) / self.range[j]
    }

    pub fn inverse(&self, j: usize, u: f64) -> f64 {
        self.min[j] + u * self.range[j]
    }

    pub fn max(&self, j: usize) -> f64 {
        self.min[j] + self.range[j]
    }
}

/// Maps every column onto `[0, 1]` by its sample minimum and range.
pub fn scale_covariates(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, ScaleInfo)> {
    let mut min = Vec::with_capacity(x.ncols());
    let mut range = Vec::with_capacity(x.ncols());
    let mut scaled = x.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let (lo, hi) = (col.min(), col.max());
        if !(hi > lo) {
            return Err(Error::ConstantColumn { column: j });
        }
        let r = hi - lo;
        for v in col.iter_mut() {
            // exact endpoints, whatever the rounding of (v - lo) / r
            *v = if *v == lo {
                0.0
            } else if *v == hi {
                1.0
            } else {
                (*v - lo) / r
            };
        }
        min.push(lo);
        range.push(r);
    }
    Ok((scaled, ScaleInfo { min, range }))
}

/// `(y - mean(y), mean(y))`.
pub fn center_response(y: &DVector<f64>) -> (DVector<f64>, f64) {
    let mu = y.mean();
    (y.add_scalar(-mu), mu)
}

/// How a group's columns were generated from the covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expansion {
    /// Centered B-splines with the last centered column dropped.
    Spline {
        spec: BasisSpec,
        /// Sample means of all `raw_dim` basis functions, one vector per group.
        col_means: Vec<Vec<f64>>,
    },
    /// The centered covariate itself.
    Linear { means: Vec<f64> },
    /// Arbitrary user-supplied columns.
    Raw,
}

/// Column-blocked design matrix in which each block belongs to one covariate.
///
/// After [`orthonormalize_groups`] every block satisfies `Z_j' Z_j = n P_j`
/// with `P_j` an orthogonal projector (the identity unless the block was
/// rank deficient), and `transforms[j]` maps block coordinates back to the
/// coordinates of the original centered basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDesign {
    pub z: DMatrix<f64>,
    pub groups: Vec<Range<usize>>,
    pub expansion: Expansion,
    pub transforms: Vec<DMatrix<f64>>,
    /// `c_j` with `Z_j' Z_j = c_j P_j`; only meaningful for orthonormalized or singleton blocks.
    pub gram_scale: Vec<f64>,
    /// Numerical rank of each block.
    pub ranks: Vec<usize>,
    pub orthonormal: bool,
}

impl GroupedDesign {
    /// Wraps an arbitrary matrix split into contiguous blocks of `group_size` columns.
    pub fn from_blocks(z: DMatrix<f64>, group_size: usize) -> Result<Self> {
        if group_size == 0 || !z.ncols().is_multiple_of(group_size) {
            return Err(Error::DimensionMismatch(format!(
                "{} columns do not split into groups of {group_size}",
                z.ncols()
            )));
        }
        let groups = (0..z.ncols() / group_size)
            .map(|j| j * group_size..(j + 1) * group_size)
            .collect();
        Ok(Self::with_groups(z, groups, Expansion::Raw))
    }

    fn with_groups(z: DMatrix<f64>, groups: Vec<Range<usize>>, expansion: Expansion) -> Self {
        let transforms = groups
            .iter()
            .map(|g| DMatrix::identity(g.len(), g.len()))
            .collect();
        let gram_scale = groups
            .iter()
            .map(|g| z.columns_range(g.clone()).column(0).norm_squared())
            .collect();
        let ranks = groups.iter().map(|g| g.len()).collect();
        Self {
            z,
            groups,
            expansion,
            transforms,
            gram_scale,
            ranks,
            orthonormal: false,
        }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn total_cols(&self) -> usize {
        self.z.ncols()
    }

    /// Common block width, if every block has the same width.
    pub fn group_size(&self) -> Option<usize> {
        let first = self.groups.first()?.len();
        self.groups
            .iter()
            .all(|g| g.len() == first)
            .then_some(first)
    }

    pub fn block(&self, j: usize) -> nalgebra::DMatrixView<'_, f64> {
        self.z.columns_range(self.groups[j].clone())
    }

    /// Every column as its own group, keeping the matrix and its scaling.
    pub fn singletons(&self) -> Self {
        let groups = (0..self.total_cols()).map(|c| c..c + 1).collect();
        Self::with_groups(self.z.clone(), groups, Expansion::Raw)
    }

    /// Maps block coordinates of group `j` back to centered-basis coordinates.
    pub fn back_transform(&self, j: usize, coef: &[f64]) -> Vec<f64> {
        let t = &self.transforms[j];
        (t * DVector::from_column_slice(coef))
            .iter()
            .copied()
            .collect()
    }
}

/// Centered spline design: evaluates the raw basis for every covariate,
/// subtracts column means and drops the last centered column of each group.
pub fn build_design(scaled_x: &DMatrix<f64>, spec: &BasisSpec) -> Result<GroupedDesign> {
    let n = scaled_x.nrows();
    let p = scaled_x.ncols();
    let raw = spec.raw_dim();
    let m = spec.centered_dim();
    let kv = &spec.knots;
    let mut z = DMatrix::<f64>::zeros(n, p * m);
    let mut col_means = Vec::with_capacity(p);
    let mut local = vec![0.0; kv.degree() + 1];
    let mut raw_block = DMatrix::<f64>::zeros(n, raw);
    for j in 0..p {
        raw_block.fill(0.0);
        for i in 0..n {
            let x = scaled_x[(i, j)];
            kv.check_domain(x)?;
            let first = kv.eval_local(x, &mut local);
            for (k, &v) in local.iter().enumerate() {
                raw_block[(i, first + k)] = v;
            }
        }
        let means: Vec<f64> = raw_block.column_iter().map(|c| c.mean()).collect();
        for k in 0..m {
            let mut col = z.column_mut(j * m + k);
            for i in 0..n {
                col[i] = raw_block[(i, k)] - means[k];
            }
        }
        col_means.push(means);
    }
    let groups = (0..p).map(|j| j * m..(j + 1) * m).collect();
    Ok(GroupedDesign::with_groups(
        z,
        groups,
        Expansion::Spline {
            spec: spec.clone(),
            col_means,
        },
    ))
}

/// Centered covariates, one singleton group per column.
pub fn build_linear_design(scaled_x: &DMatrix<f64>) -> GroupedDesign {
    let mut z = scaled_x.clone();
    let mut means = Vec::with_capacity(z.ncols());
    for mut col in z.column_iter_mut() {
        let mu = col.mean();
        col.add_scalar_mut(-mu);
        means.push(mu);
    }
    let groups = (0..z.ncols()).map(|c| c..c + 1).collect();
    GroupedDesign::with_groups(z, groups, Expansion::Linear { means })
}

/// Relative eigenvalue cutoff below which a block direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Replaces each block `Z_j` by `Z_j T_j` with `T_j = G_j^{-1/2}` the symmetric
/// inverse square root of `G_j = Z_j' Z_j / n` restricted to its numerical
/// range, so that the new block has Gram matrix `n` times a projector.
pub fn orthonormalize_groups(design: &GroupedDesign) -> Result<GroupedDesign> {
    let n = design.n() as f64;
    let mut out = design.clone();
    for (j, g) in design.groups.iter().enumerate() {
        let block = design.block(j);
        let gram = block.transpose() * block / n;
        let m = g.len();
        let trace = gram.trace();
        if !(trace > 0.0) {
            return Err(Error::SingularGroup { group: j });
        }
        let eig = gram.symmetric_eigen();
        let cutoff = RANK_TOL * trace / m as f64;
        let mut t = DMatrix::<f64>::zeros(m, m);
        let mut rank = 0;
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > cutoff {
                let v = eig.eigenvectors.column(k);
                t += (v * v.transpose()) / lambda.sqrt();
                rank += 1;
            }
        }
        if rank == 0 {
            return Err(Error::SingularGroup { group: j });
        }
        let new_block = block * &t;
        out.z.columns_range_mut(g.clone()).copy_from(&new_block);
        out.transforms[j] = &design.transforms[j] * &t;
        out.gram_scale[j] = n;
        out.ranks[j] = rank;
    }
    out.orthonormal = true;
    Ok(out)
}
