//! Density ridge estimation.
//!
//! The crate implements four iterative ridge/mode finders over a sample in
//! `R^d`:
//!
//! * mean shift ([`ridge_search::mean_shift`]),
//! * subspace-constrained mean shift ([`ridge_search::scms`]),
//! * log-concave ridge search ([`ridge_search::lcrs`]), which steps along the
//!   direction of smallest local conditional variance to the mode of a
//!   weighted univariate log-concave maximum-likelihood fit,
//! * its smoothed variant ([`ridge_search::slcrs`]).
//!
//! Supporting modules provide kernels, local moments, a Jacobi eigensolver,
//! the univariate log-concave estimator, bandwidth selectors and an analytic
//! ground truth for noisy circle data.
//!
//! With the default `parallel` feature, batch entry points (many starting
//! points, Monte Carlo replications) run on the rayon thread pool; without it
//! the same code runs sequentially and produces identical results.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandwidth;
pub mod circle_oracle;
pub mod eigen;
mod error;
pub mod kernels;
pub mod local_moments;
pub mod logconcave;
pub mod parallel;
mod points;
pub mod quadrature;
pub mod ridge_search;
pub mod special;

pub use error::{Error, Result};
pub use points::PointCloud;
