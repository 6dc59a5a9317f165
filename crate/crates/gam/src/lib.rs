//! Gaussian additive models with P-spline smooths.
//!
//! Smooth terms use cubic B-splines on quantile-placed knots with a
//! discrete difference penalty. Each smooth carries a sum-to-zero
//! constraint, so the intercept holds the response mean. Smoothing
//! parameters are chosen by minimizing GCV. The design is absorbed into a
//! QR factor block by block, so fitting `n` rows needs `O(p²)` memory.

pub mod basis;
pub mod error;
pub mod gcv;
pub mod model;
pub mod pls;

pub use basis::{build_basis, BSplineBasis, BasisBlock, ConstrainedSmooth, KnotPlacement, SmoothTerm};
pub use error::GamError;
pub use gcv::{optimize_lambda, LambdaOptimum, LambdaSearch};
pub use model::{
    fit_model, model_catalog, partial_effect, ColumnFrame, FitOptions, FitReport, Frame, ModelFit,
    ModelSpec, PartialEffect,
};
pub use pls::{cross_products, fit_penalized_ls, CrossProducts, PenalizedFit, PenalizedLs, Penalty};
