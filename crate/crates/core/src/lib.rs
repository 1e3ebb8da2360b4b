//! Variable selection in sparse additive models: B-spline expansion, the group
//! Lasso, and the adaptive group Lasso tuned by BIC or EBIC.

// `!(a > b)` reads as "not strictly greater, or NaN" throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod pipeline;
pub mod selection;
pub mod simgen;
pub mod solver;
pub mod spline;

pub use design::{Dataset, Expansion, GroupedDesign, ScaleInfo};
pub use error::{Error, Result};
pub use pipeline::{ComponentEstimate, ModelFit, Prepared};
pub use selection::{Criterion, CriterionValue, CvResult, FitConfig, LambdaGrid, Method, TunedFit};
pub use simgen::{
    Example, GenConfig, GeneratedData, MethodSummary, RepMetrics, Stat, SummaryTable,
};
pub use solver::{FitDiagnostics, GroupedCoefficients, PenaltySpec, SolverOptions};
pub use spline::{BasisSpec, KnotVector};
