//! Marginal probabilities of fractional (non-homogeneous) Poisson processes.
//!
//! The marginals are computed from the subordination integral
//!
//! ```text
//! P_β(n, t) = ∫₀^∞ e^{−Λ(z t^β)} Λ(z t^β)^n / n! · M_β(z) dz
//! ```
//!
//! where `M_β` is the M-Wright (Mainardi) function and `Λ` a cumulative
//! intensity. On top of the marginals the crate provides checks of the
//! dynamical-scaling limit `n·P_β(n,t) → (z₀/c)·M_β(z₀)` along
//! `n = Λ(z₀ t^β)`, and residuals of the fractional Kolmogorov-Feller
//! equations under an L1 discretisation of the Caputo derivative.

// `!(x > 0.0)` is used on purpose to reject NaN; quadrature nodes are kept
// at their published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod error;
pub mod fractional_ops;
pub mod intensity;
pub mod marginals;
pub mod quadrature;
pub mod scaling;
pub mod special_fn;
pub mod summation;

pub use error::{Error, Result};
pub use intensity::IntensityModel;
pub use marginals::{MarginalQuery, QuadratureReport};
pub use special_fn::{OrderParam, SeriesEvalConfig};
