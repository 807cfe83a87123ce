use rand::Rng;
use serde::{Deserialize, Serialize};

use super::innovation::{gamma_n, BaseDistribution, InnovationSampler};
use crate::error::{invalid, Result};
use crate::grid::DensityGrid;
use crate::kde::{mc_kde, Bandwidth, Kde};
use crate::model::{ModelSpec, PhasePoint};
use crate::rng::mix_seed;

/// Macro/micro discretisation of `[0, T]`: `N` macro steps of size `h = T/N`,
/// each aggregating `n` micro variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub horizon: f64,
    pub steps: usize,
    pub micro: usize,
    #[serde(default)]
    pub base: BaseDistribution,
    #[serde(default)]
    pub seed: u64,
}

impl ChainConfig {
    pub fn new(horizon: f64, steps: usize, micro: usize, base: BaseDistribution, seed: u64) -> Result<Self> {
        let cfg = Self { horizon, steps, micro, base, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid(format!("chain horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(invalid("chain needs at least one macro step"));
        }
        if self.micro < 2 {
            return Err(invalid(format!("micro aggregation needs n >= 2, got {}", self.micro)));
        }
        Ok(())
    }

    /// Macro step `h = T/N`.
    pub fn h(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_k = kT/N`, computed without accumulation so that `t_N = T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn gamma(&self) -> f64 {
        gamma_n(self.micro)
    }
}

/// Endpoint of one chain run, with the visited states if requested.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainPath {
    pub end: PhasePoint,
    pub path: Option<Vec<PhasePoint>>,
}

/// One macro step of one coordinate:
/// `X⁺ = X + bh + σ√h η¹`, `Y⁺ = Y + (X + γ_n bh/2 + σ√h η²)h`.
#[inline]
pub(crate) fn step1(model: &ModelSpec, x: f64, y: f64, h: f64, sqrt_h: f64, gamma: f64, eta: (f64, f64)) -> (f64, f64) {
    let b = model.b1(x, y);
    let s = model.sigma1(x, y);
    (x + b * h + s * sqrt_h * eta.0, y + (x + 0.5 * gamma * b * h + s * sqrt_h * eta.1) * h)
}

/// Runs the chain for `cfg.steps` macro steps from `start`. Coordinates of a
/// `d > 1` model receive independent innovations.
pub fn simulate_chain<R: Rng + ?Sized>(
    model: &ModelSpec,
    cfg: &ChainConfig,
    start: &PhasePoint,
    rng: &mut R,
    record_path: bool,
) -> Result<ChainPath> {
    cfg.validate()?;
    model.check_point(start)?;
    let sampler = InnovationSampler::new(cfg.micro, cfg.base)?;
    let (h, gamma) = (cfg.h(), cfg.gamma());
    let sqrt_h = h.sqrt();
    let mut z = start.clone();
    let mut path = record_path.then(|| vec![start.clone()]);
    for _ in 0..cfg.steps {
        for i in 0..model.dim {
            let eta = sampler.sample(rng);
            let (x, y) = step1(model, z.x[i], z.y[i], h, sqrt_h, gamma, (eta.eta1, eta.eta2));
            z.x[i] = x;
            z.y[i] = y;
        }
        if let Some(p) = path.as_mut() {
            p.push(z.clone());
        }
    }
    Ok(ChainPath { end: z, path })
}

/// Scalar chain with everything precomputed, for Monte Carlo loops.
#[derive(Clone, Debug)]
pub(crate) struct Chain1 {
    model: ModelSpec,
    sampler: InnovationSampler,
    steps: usize,
    h: f64,
    sqrt_h: f64,
    gamma: f64,
}

impl Chain1 {
    pub(crate) fn new(model: &ModelSpec, cfg: &ChainConfig) -> Result<Self> {
        cfg.validate()?;
        model.require_scalar("Monte Carlo chain runs are implemented for d = 1")?;
        let h = cfg.h();
        Ok(Self {
            model: model.clone(),
            sampler: InnovationSampler::new(cfg.micro, cfg.base)?,
            steps: cfg.steps,
            h,
            sqrt_h: h.sqrt(),
            gamma: cfg.gamma(),
        })
    }

    #[inline]
    pub(crate) fn endpoint<R: Rng + ?Sized>(&self, x0: f64, y0: f64, rng: &mut R) -> (f64, f64) {
        let (mut x, mut y) = (x0, y0);
        for _ in 0..self.steps {
            let eta = self.sampler.sample(rng);
            (x, y) = step1(&self.model, x, y, self.h, self.sqrt_h, self.gamma, (eta.eta1, eta.eta2));
        }
        (x, y)
    }

    /// Endpoint together with that of the chain with coefficients frozen at the
    /// start, driven by the same innovations.
    #[inline]
    pub(crate) fn endpoint_with_frozen<R: Rng + ?Sized>(&self, x0: f64, y0: f64, rng: &mut R) -> ((f64, f64), (f64, f64)) {
        let (b0, s0) = (self.model.b1(x0, y0), self.model.sigma1(x0, y0));
        let (mut x, mut y) = (x0, y0);
        let (mut xc, mut yc) = (x0, y0);
        for _ in 0..self.steps {
            let eta = self.sampler.sample(rng);
            (x, y) = step1(&self.model, x, y, self.h, self.sqrt_h, self.gamma, (eta.eta1, eta.eta2));
            let dx = b0 * self.h + s0 * self.sqrt_h * eta.eta1;
            yc += (xc + 0.5 * self.gamma * b0 * self.h + s0 * self.sqrt_h * eta.eta2) * self.h;
            xc += dx;
        }
        ((x, y), (xc, yc))
    }
}

/// Kernel density estimate of the chain endpoint law on the axes of `grid`
/// from `samples` runs. Without explicit bandwidths the two-scale rule of
/// thumb at `λ_max` is used.
pub fn chain_density_kde(
    model: &ModelSpec,
    cfg: &ChainConfig,
    start: &PhasePoint,
    grid: &DensityGrid,
    samples: usize,
    bandwidth: Option<Bandwidth>,
) -> Result<DensityGrid> {
    if samples < 10_000 {
        return Err(invalid(format!("density estimates need at least 10^4 samples, got {samples}")));
    }
    model.check_point(start)?;
    let chain = Chain1::new(model, cfg)?;
    let bw = bandwidth.unwrap_or_else(|| Bandwidth::rule_of_thumb(model.lambda_max.max(model.lambda_min), cfg.horizon, samples));
    let (x0, y0) = start.xy();
    let kde = mc_kde(&Kde::on_grid(grid.xs.clone(), grid.ys.clone(), bw), mix_seed(&[cfg.seed, 0xC4A1]), samples, |rng| {
        Some(chain.endpoint(x0, y0, rng))
    });
    let mut out = DensityGrid::new(grid.xs.clone(), grid.ys.clone(), cfg.horizon, start.clone())?;
    kde.fill_grid(&mut out)?;
    Ok(out)
}

/// Kernel estimates of the chain endpoint density at individual points.
pub fn chain_kde_at_points(
    model: &ModelSpec,
    cfg: &ChainConfig,
    start: &PhasePoint,
    points: &[(f64, f64)],
    samples: usize,
    bandwidth: Bandwidth,
) -> Result<crate::kde::KdeEstimate> {
    model.check_point(start)?;
    let chain = Chain1::new(model, cfg)?;
    let (x0, y0) = start.xy();
    let kde = mc_kde(&Kde::at_points(points.to_vec(), bandwidth), mix_seed(&[cfg.seed, 0xC4A2]), samples, |rng| {
        Some(chain.endpoint(x0, y0, rng))
    });
    Ok(kde.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelFamily;
    use crate::rng::stream_rng;

    #[test]
    fn degenerate_model_is_transported() {
        let model = ModelSpec::new(1, ModelFamily::Degenerate);
        let cfg = ChainConfig::new(0.7, 13, 2, BaseDistribution::ScaledUniformMixture, 1).unwrap();
        let out = simulate_chain(&model, &cfg, &PhasePoint::scalar(1.5, -0.2), &mut stream_rng(1, 0), true).unwrap();
        assert!((out.end.x[0] - 1.5).abs() < 1e-15);
        assert!((out.end.y[0] - (-0.2 + 0.7 * 1.5)).abs() < 1e-12);
        assert_eq!(out.path.unwrap().len(), 14);
    }

    #[test]
    fn horizon_is_hit_exactly() {
        let cfg = ChainConfig::new(0.3, 7, 2, BaseDistribution::Gaussian, 0).unwrap();
        assert_eq!(cfg.time(7), 0.3);
        assert_eq!(cfg.h() * 7.0, 0.3);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ChainConfig::new(0.0, 4, 2, BaseDistribution::Gaussian, 0).is_err());
        assert!(ChainConfig::new(1.0, 0, 2, BaseDistribution::Gaussian, 0).is_err());
        assert!(ChainConfig::new(1.0, 4, 1, BaseDistribution::Gaussian, 0).is_err());
    }

    #[test]
    fn reproducible_given_seed() {
        let model = ModelSpec::perturbed_default(2);
        let cfg = ChainConfig::new(1.0, 8, 3, BaseDistribution::StudentLikeSmoothed, 4).unwrap();
        let z = PhasePoint::new(vec![0.1, -0.3], vec![0.0, 0.5]);
        let a = simulate_chain(&model, &cfg, &z, &mut stream_rng(9, 2), false).unwrap();
        let b = simulate_chain(&model, &cfg, &z, &mut stream_rng(9, 2), false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scalar_fast_path_matches_general() {
        let model = ModelSpec::perturbed_default(1);
        let cfg = ChainConfig::new(1.0, 8, 2, BaseDistribution::ScaledUniformMixture, 4).unwrap();
        let chain = Chain1::new(&model, &cfg).unwrap();
        let a = simulate_chain(&model, &cfg, &PhasePoint::scalar(0.2, 0.1), &mut stream_rng(3, 0), false).unwrap();
        let b = chain.endpoint(0.2, 0.1, &mut stream_rng(3, 0));
        assert_eq!(a.end.xy(), b);
    }
}
