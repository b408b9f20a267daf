//! Covariance estimation from correlated sub-Gaussian samples.
//!
//! The estimator is `Σ̂ = X B Xᴴ / m`, where the columns of `X` are i.i.d.
//! samples with covariance `Σ` and the `m×m` shape matrix `B` encodes how
//! the samples are correlated.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod exec;
pub mod linalg;
pub mod montecarlo;
pub mod patterns;
pub mod report;
pub mod sampling;
pub mod seed;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Scalar};
pub use patterns::{CorrelationPattern, PatternSpec};
pub use sampling::Distribution;
