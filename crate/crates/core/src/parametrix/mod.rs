//! Parametrix expansion `p = Σ_r p̃ ⊗ H^{(r)}` of the transition density.

mod bounds;
mod kernel;
pub(crate) mod lattice;
mod series;

pub use bounds::{gaussian_bound_check, series_majorant, series_tail_bound, BoundReport, LowerBoundReport};
pub use kernel::{kernel_h, kernel_h_with};
pub use series::{convolve_term, parametrix_density, ParametrixSolver, SeriesOptions, SeriesResult};
