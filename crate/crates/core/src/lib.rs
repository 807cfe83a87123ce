//! Transition densities of degenerate Kolmogorov diffusions
//! `dX = b(X, Y)dt + σ(X, Y)dW`, `dY = X dt`: the parametrix series, the
//! macro-scale Markov chain approximation and Monte Carlo references.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod charfn;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod kde;
pub mod model;
pub mod oracle;
pub mod parametrix;
pub mod quadrature;
pub mod rng;

pub use chain::{BaseDistribution, ChainConfig};
pub use error::{Error, Result};
pub use gaussian::{hat_p, Sym2};
pub use grid::DensityGrid;
pub use kde::Bandwidth;
pub use model::{ModelFamily, ModelSpec, PhasePoint};
pub use parametrix::{parametrix_density, ParametrixSolver, SeriesOptions, SeriesResult};
pub use quadrature::QuadratureSpec;
