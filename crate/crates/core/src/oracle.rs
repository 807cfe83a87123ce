//! Independent references: fine-step Euler–Maruyama with kernel density
//! estimation, and the digital Asian probability under either the Euler scheme
//! or the macro chain.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, Chain1};
use crate::error::{invalid, Result};
use crate::grid::DensityGrid;
use crate::kde::{mc_kde, Bandwidth, Kde, KdeEstimate};
use crate::model::{ModelSpec, PhasePoint};
use crate::rng::{mix_seed, par_batches};

/// Default number of Euler steps on `[0, T]` for `T ≤ 1`.
pub const DEFAULT_MICRO_STEPS: usize = 1000;

/// Euler scheme for `X` with `Y` accumulated by the trapezoid rule.
#[derive(Clone, Debug)]
pub(crate) struct Euler1 {
    model: ModelSpec,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
}

impl Euler1 {
    pub(crate) fn new(model: &ModelSpec, t: f64, steps: usize) -> Result<Self> {
        model.require_scalar("Euler paths are implemented for d = 1")?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("horizon must be positive, got {t}")));
        }
        if steps == 0 {
            return Err(invalid("Euler scheme needs at least one step"));
        }
        let dt = t / steps as f64;
        Ok(Self { model: model.clone(), steps, dt, sqrt_dt: dt.sqrt() })
    }

    #[inline]
    pub(crate) fn endpoint<R: Rng + ?Sized>(&self, x0: f64, y0: f64, rng: &mut R) -> (f64, f64) {
        let (mut x, mut y) = (x0, y0);
        for _ in 0..self.steps {
            let z: f64 = StandardNormal.sample(rng);
            let xn = x + self.model.b1(x, y) * self.dt + self.model.sigma1(x, y) * self.sqrt_dt * z;
            y += 0.5 * (x + xn) * self.dt;
            x = xn;
        }
        (x, y)
    }
}

fn check_oracle_sizes(samples: usize, micro_steps: usize) -> Result<()> {
    if micro_steps < 200 {
        return Err(invalid(format!("oracle needs at least 200 Euler steps, got {micro_steps}")));
    }
    if samples < 100_000 {
        return Err(invalid(format!("oracle needs at least 10^5 paths, got {samples}")));
    }
    Ok(())
}

/// Kernel density estimate of `(X_T, Y_T)` on the axes of `grid`.
#[allow(clippy::too_many_arguments)]
pub fn euler_mc_density(
    model: &ModelSpec,
    t: f64,
    z0: &PhasePoint,
    grid: &DensityGrid,
    samples: usize,
    micro_steps: usize,
    bandwidth: Option<Bandwidth>,
    seed: u64,
) -> Result<DensityGrid> {
    check_oracle_sizes(samples, micro_steps)?;
    model.check_point(z0)?;
    let euler = Euler1::new(model, t, micro_steps)?;
    let bw = bandwidth.unwrap_or_else(|| Bandwidth::rule_of_thumb(model.lambda_max.max(model.lambda_min), t, samples));
    let (x0, y0) = z0.xy();
    let kde = mc_kde(&Kde::on_grid(grid.xs.clone(), grid.ys.clone(), bw), mix_seed(&[seed, 0xE1]), samples, |rng| {
        Some(euler.endpoint(x0, y0, rng))
    });
    let mut out = DensityGrid::new(grid.xs.clone(), grid.ys.clone(), t, z0.clone())?;
    kde.fill_grid(&mut out)?;
    Ok(out)
}

/// Kernel estimates of the Euler endpoint density at individual points.
#[allow(clippy::too_many_arguments)]
pub fn euler_kde_at_points(
    model: &ModelSpec,
    t: f64,
    z0: &PhasePoint,
    points: &[(f64, f64)],
    samples: usize,
    micro_steps: usize,
    bandwidth: Bandwidth,
    seed: u64,
) -> Result<KdeEstimate> {
    check_oracle_sizes(samples, micro_steps)?;
    model.check_point(z0)?;
    let euler = Euler1::new(model, t, micro_steps)?;
    let (x0, y0) = z0.xy();
    let kde = mc_kde(&Kde::at_points(points.to_vec(), bandwidth), mix_seed(&[seed, 0xE2]), samples, |rng| {
        Some(euler.endpoint(x0, y0, rng))
    });
    Ok(kde.estimate())
}

/// Sample means and standard deviations of `(X_T, Y_T)` under the Euler scheme,
/// each with its standard error.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndpointSpread {
    pub mean: [f64; 2],
    pub sd: [f64; 2],
    pub sd_std_err: [f64; 2],
    pub samples: usize,
}

pub fn euler_endpoint_spread(
    model: &ModelSpec,
    t: f64,
    z0: &PhasePoint,
    samples: usize,
    micro_steps: usize,
    seed: u64,
) -> Result<EndpointSpread> {
    model.check_point(z0)?;
    if samples < 2 {
        return Err(invalid("spread needs at least two paths"));
    }
    let euler = Euler1::new(model, t, micro_steps)?;
    let (x0, y0) = z0.xy();
    // Per-batch central moments, merged in batch order.
    let parts = par_batches(mix_seed(&[seed, 0xE3]), samples, |rng, count| {
        let mut acc = [[0.0f64; 4]; 2];
        let mut pts = Vec::with_capacity(count);
        for _ in 0..count {
            let (x, y) = euler.endpoint(x0, y0, rng);
            pts.push([x - x0, y - y0]);
        }
        for p in &pts {
            for k in 0..2 {
                let v = p[k];
                acc[k][0] += v;
                acc[k][1] += v * v;
                acc[k][2] += v * v * v;
                acc[k][3] += v * v * v * v;
            }
        }
        acc
    });
    let m = samples as f64;
    let mut mean = [0.0; 2];
    let mut sd = [0.0; 2];
    let mut sd_se = [0.0; 2];
    for k in 0..2 {
        let s: [f64; 4] = std::array::from_fn(|p| parts.iter().map(|a| a[k][p]).sum::<f64>() / m);
        let mu = s[0];
        let var = s[1] - mu * mu;
        let m4 = s[3] - 4.0 * mu * s[2] + 6.0 * mu * mu * s[1] - 3.0 * mu.powi(4);
        mean[k] = mu + if k == 0 { x0 } else { y0 };
        sd[k] = var.sqrt();
        // Delta method: Var(s) ≈ (m4 - σ⁴)/(4σ²M).
        sd_se[k] = ((m4 - var * var).max(0.0) / (4.0 * var * m)).sqrt();
    }
    Ok(EndpointSpread { mean, sd, sd_std_err: sd_se, samples })
}

/// Path generator for the digital Asian functional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum AsianEngine {
    Euler { micro_steps: usize },
    MacroChain { chain: ChainConfig },
}

impl AsianEngine {
    pub fn key(&self) -> &'static str {
        match self {
            AsianEngine::Euler { .. } => "euler",
            AsianEngine::MacroChain { .. } => "macro-chain",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsianEstimate {
    pub probability: f64,
    pub std_err: f64,
    pub samples: usize,
    pub engine: String,
}

/// `P[(Y_T/T - X_T)⁺ > K]` from `z0`. For the chain engine the horizon of the
/// chain configuration must equal `t`.
pub fn digital_asian_probability(
    model: &ModelSpec,
    t: f64,
    z0: &PhasePoint,
    strike: f64,
    samples: usize,
    engine: &AsianEngine,
    seed: u64,
) -> Result<AsianEstimate> {
    if !strike.is_finite() {
        return Err(invalid("strike must be finite"));
    }
    if samples < 10_000 {
        return Err(invalid(format!("digital probability needs at least 10^4 paths, got {samples}")));
    }
    model.check_point(z0)?;
    let engine_key = engine.key().to_string();
    if strike < 0.0 {
        return Ok(AsianEstimate { probability: 1.0, std_err: 0.0, samples, engine: engine_key });
    }
    let (x0, y0) = z0.xy();
    let hit = |(x, y): (f64, f64)| u64::from((y / t - x).max(0.0) > strike);
    let counts: Vec<u64> = match engine {
        AsianEngine::Euler { micro_steps } => {
            let euler = Euler1::new(model, t, *micro_steps)?;
            par_batches(mix_seed(&[seed, 0xA5]), samples, |rng, count| {
                (0..count).map(|_| hit(euler.endpoint(x0, y0, rng))).sum()
            })
        }
        AsianEngine::MacroChain { chain } => {
            if (chain.horizon - t).abs() > 1e-12 * t {
                return Err(invalid(format!("chain horizon {} differs from T = {t}", chain.horizon)));
            }
            let walker = Chain1::new(model, chain)?;
            par_batches(mix_seed(&[seed, 0xA6]), samples, |rng, count| {
                (0..count).map(|_| hit(walker.endpoint(x0, y0, rng))).sum()
            })
        }
    };
    let p = counts.iter().sum::<u64>() as f64 / samples as f64;
    Ok(AsianEstimate {
        probability: p,
        std_err: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        engine: engine_key,
    })
}
