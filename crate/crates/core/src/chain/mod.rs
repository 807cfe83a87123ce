//! Macro-scale Markov chain approximating the diffusion: innovations built by
//! aggregating micro variables, simulation, one-step and frozen-chain
//! densities, the discrete parametrix, and the convergence-rate experiment.

mod density;
mod discrete;
mod innovation;
mod rate;
mod simulate;

pub use density::{
    frozen_chain_density, frozen_chain_moments, innovation_density, one_step_density, FrozenChainMoments,
    GaussianInnovation, InnovationDensity,
};
pub use discrete::{discrete_parametrix_density, DiscreteSolver, MAX_DISCRETE_STEPS};
pub use innovation::{
    aggregate, aggregation_weights, gamma_n, innovation_covariance, sample_innovation, BaseDistribution,
    InnovationPair, InnovationSampler,
};
pub use rate::{lil_rate_experiment, lil_weight, pooled_slope, RateReference, RateReport, RateRow, RateSettings, SMOOTHING_NODES};
pub use simulate::{chain_density_kde, chain_kde_at_points, simulate_chain, ChainConfig, ChainPath};

pub(crate) use simulate::Chain1;
