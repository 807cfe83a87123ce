//! Empirical convergence rate of the chain density towards the diffusion
//! density. Both sides are compared after smoothing with the same product
//! kernel, so the kernel bias cancels and only the Monte Carlo error of the
//! chain estimate (plus that of an Euler reference, if used) remains.

use serde::{Deserialize, Serialize};

use super::innovation::BaseDistribution;
use super::density::{chain_cov, chain_mean, gauss_density};
use super::simulate::{chain_kde_at_points, Chain1, ChainConfig};
use crate::error::{invalid, Error, Result};
use crate::gaussian::hat_p1;
use crate::gaussian::Sym2;
use crate::kde::{Bandwidth, KdeEstimate};
use crate::model::{ModelSpec, PhasePoint};
use crate::oracle::euler_kde_at_points;
use crate::parametrix::{ParametrixSolver, SeriesOptions};
use crate::quadrature::{GaussRule, QuadratureSpec};
use crate::rng::{mix_seed, par_batches};

/// Source of the diffusion density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateReference {
    /// Parametrix series, smoothed by the Gauss-Hermite rule of
    /// [`crate::kde::kernel_smooth`] (deterministic).
    Parametrix {
        #[serde(default)]
        options: SeriesOptions,
    },
    /// Euler Monte Carlo with the same kernel estimator.
    Oracle { samples: usize, micro_steps: usize },
}

/// Inputs of [`lil_rate_experiment`] beyond the model and points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSettings {
    pub ladder: Vec<usize>,
    pub micro: usize,
    pub base: BaseDistribution,
    pub samples: usize,
    pub bandwidth: Bandwidth,
    pub reference: RateReference,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// With the gaussian base, reduce the Monte Carlo variance with the chain
    /// frozen at `z0` as a control (its kernel estimate has a closed-form mean).
    #[serde(default = "yes")]
    pub control_variate: bool,
    /// Envelope constant `c` and tail exponent `S'` of the weight function.
    pub weight_c: f64,
    pub weight_s_prime: f64,
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl RateSettings {
    fn uses_control(&self) -> bool {
        self.control_variate && self.base == BaseDistribution::Gaussian
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 3 {
            return Err(invalid("rate ladder needs at least 3 values of N"));
        }
        if self.ladder.windows(2).any(|w| w[1] <= w[0]) || self.ladder[0] == 0 {
            return Err(invalid("rate ladder must be strictly increasing and positive"));
        }
        let ratios: Vec<f64> = self.ladder.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
        if ratios.iter().any(|r| (r - ratios[0]).abs() > 1e-9 * ratios[0]) {
            return Err(invalid("rate ladder must be geometrically spaced"));
        }
        if self.micro < 2 {
            return Err(invalid("micro aggregation needs n >= 2"));
        }
        if self.samples < 10_000 {
            return Err(invalid("rate experiment needs at least 10^4 chain samples per N"));
        }
        if !(self.weight_c > 0.0) || !(self.weight_s_prime >= 1.0) {
            return Err(invalid("weight needs c > 0 and S' >= 1"));
        }
        Ok(())
    }
}

/// Chain estimates for one `N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub steps: usize,
    pub h: f64,
    pub estimate: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `p_h - p` (smoothed) per test point.
    pub diff: Vec<f64>,
    /// Standard error of `diff`, including reference noise.
    pub diff_std_err: Vec<f64>,
    /// `|diff|` divided by the weight of the local limit theorem.
    pub normalized: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub horizon: f64,
    pub start: (f64, f64),
    pub points: Vec<(f64, f64)>,
    pub base: BaseDistribution,
    pub micro: usize,
    pub samples: usize,
    pub bandwidth: Bandwidth,
    pub control_variate: bool,
    pub reference_kind: String,
    pub reference: Vec<f64>,
    pub reference_std_err: Vec<f64>,
    /// `(1 + |x'| + |x|) sup_δ p̂_c(T(1+δ)) + χ_{√T}(·)` at each point.
    pub weights: Vec<f64>,
    pub rows: Vec<RateRow>,
    /// Pooled weighted least-squares slope of `log|p_h - p|` against `log h`.
    pub slope: f64,
    pub slope_std_err: f64,
    pub point_slopes: Vec<f64>,
    /// Smallest `|diff|/se` over the ladder: below ~2 the fit sees noise.
    pub min_signal_to_noise: f64,
}

/// Normalising weight of the local limit theorem for `d = 1`, with
/// `χ(u, v) = (1 + (u² + v²)^{S'-1})⁻¹` and `χ_ρ(u, v) = ρ⁻⁴χ(u/ρ, v/ρ³)`.
pub fn lil_weight(t: f64, z0: (f64, f64), zp: (f64, f64), c: f64, s_prime: f64) -> f64 {
    let (x, y) = z0;
    let (xp, yp) = zp;
    let sup = (0..=100)
        .map(|k| hat_p1(c, t * (1.0 + k as f64 / 100.0), x, y, xp, yp))
        .fold(0.0, f64::max);
    let rho = t.sqrt();
    let u = (xp - x) / rho;
    let v = (yp - y - t * 0.5 * (xp + x)) / (rho * rho * rho);
    let chi = 1.0 / (1.0 + (u * u + v * v).powf(s_prime - 1.0));
    (1.0 + xp.abs() + x.abs()) * sup + chi / (rho * rho * rho * rho)
}

/// Weighted least squares with a common slope and one intercept per group.
/// Inputs are `(group, x, y, weight)`; returns `(slope, se)`.
pub fn pooled_slope(obs: &[(usize, f64, f64, f64)]) -> Option<(f64, f64)> {
    let groups = obs.iter().map(|o| o.0).max()? + 1;
    let mut sw = vec![0.0; groups];
    let mut sx = vec![0.0; groups];
    let mut sy = vec![0.0; groups];
    for &(g, x, y, w) in obs {
        sw[g] += w;
        sx[g] += w * x;
        sy[g] += w * y;
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(g, x, y, w) in obs {
        if sw[g] <= 0.0 {
            continue;
        }
        let (mx, my) = (sx[g] / sw[g], sy[g] / sw[g]);
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    (sxx > 0.0).then(|| (sxy / sxx, 1.0 / sxx.sqrt()))
}

/// Estimates `|p_h - p|` at `points` across the ladder and fits its rate in `h`.
pub fn lil_rate_experiment(
    model: &ModelSpec,
    horizon: f64,
    z0: &PhasePoint,
    points: &[PhasePoint],
    settings: &RateSettings,
) -> Result<RateReport> {
    settings.validate()?;
    model.require_scalar("the rate experiment is implemented for d = 1")?;
    model.check_point(z0)?;
    if points.is_empty() {
        return Err(invalid("rate experiment needs at least one test point"));
    }
    for p in points {
        model.check_point(p)?;
    }
    let pts: Vec<(f64, f64)> = points.iter().map(|p| p.xy()).collect();
    let bw = settings.bandwidth;

    let (reference, reference_se, reference_kind) = match &settings.reference {
        RateReference::Parametrix { options } => {
            let solver = ParametrixSolver::new(model, horizon, z0, &settings.quadrature, options)
                .map_err(|e| Error::ReferenceUnavailable(format!("parametrix series: {e}")))?;
            let rule = GaussRule::hermite(SMOOTHING_NODES);
            let mut nodes = Vec::with_capacity(pts.len() * rule.len() * rule.len());
            for &(x, y) in &pts {
                for &zy in &rule.nodes {
                    for &zx in &rule.nodes {
                        nodes.push((x + bw.bx * zx, y + bw.by * zy));
                    }
                }
            }
            let values = solver
                .evaluate_many(&nodes)
                .map_err(|e| Error::ReferenceUnavailable(format!("parametrix series: {e}")))?;
            let per = rule.len() * rule.len();
            // Same tensor rule as `kernel_smooth`, applied to the batch.
            let smoothed: Vec<f64> = values
                .chunks(per)
                .map(|block| {
                    let mut acc = 0.0;
                    for (iy, wy) in rule.weights.iter().enumerate() {
                        for (ix, wx) in rule.weights.iter().enumerate() {
                            acc += wx * wy * block[iy * rule.len() + ix].value;
                        }
                    }
                    acc
                })
                .collect();
            (smoothed, vec![0.0; pts.len()], "parametrix".to_string())
        }
        RateReference::Oracle { samples, micro_steps } => {
            let est = euler_kde_at_points(model, horizon, z0, &pts, *samples, *micro_steps, bw, mix_seed(&[settings.seed, 0x0E]))
                .map_err(|e| Error::ReferenceUnavailable(format!("Euler oracle: {e}")))?;
            (est.values, est.std_err, "oracle".to_string())
        }
    };

    let weights: Vec<f64> = pts
        .iter()
        .map(|&zp| lil_weight(horizon, z0.xy(), zp, settings.weight_c, settings.weight_s_prime))
        .collect();

    let mut rows = Vec::with_capacity(settings.ladder.len());
    for &steps in &settings.ladder {
        let cfg = ChainConfig::new(horizon, steps, settings.micro, settings.base, mix_seed(&[settings.seed, steps as u64]))?;
        let est = if settings.uses_control() {
            controlled_kde(model, &cfg, z0, &pts, settings.samples, bw)?
        } else {
            chain_kde_at_points(model, &cfg, z0, &pts, settings.samples, bw)?
        };
        let diff: Vec<f64> = est.values.iter().zip(&reference).map(|(a, b)| a - b).collect();
        let diff_std_err: Vec<f64> = est.std_err.iter().zip(&reference_se).map(|(a, b)| a.hypot(*b)).collect();
        let normalized = diff.iter().zip(&weights).map(|(d, w)| d.abs() / w).collect();
        rows.push(RateRow { steps, h: cfg.h(), estimate: est.values, std_err: est.std_err, diff, diff_std_err, normalized });
    }

    // log|d| has delta-method variance (se/|d|)².
    let mut obs = Vec::new();
    let mut min_snr = f64::INFINITY;
    let mut point_slopes = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let mut own = Vec::new();
        for row in &rows {
            let (d, se) = (row.diff[k].abs(), row.diff_std_err[k]);
            min_snr = min_snr.min(d / se.max(f64::MIN_POSITIVE));
            if d > 0.0 {
                let w = if se > 0.0 { (d / se).powi(2) } else { 1.0 };
                obs.push((k, row.h.ln(), d.ln(), w));
                own.push((0, row.h.ln(), d.ln(), w));
            }
        }
        point_slopes.push(pooled_slope(&own).map_or(f64::NAN, |s| s.0));
    }
    let (slope, slope_std_err) = pooled_slope(&obs).unwrap_or((f64::NAN, f64::NAN));

    Ok(RateReport {
        horizon,
        start: z0.xy(),
        points: pts,
        base: settings.base,
        micro: settings.micro,
        samples: settings.samples,
        bandwidth: bw,
        control_variate: settings.uses_control(),
        reference_kind,
        reference,
        reference_std_err: reference_se,
        weights,
        rows,
        slope,
        slope_std_err,
        point_slopes,
        min_signal_to_noise: min_snr,
    })
}

/// Gauss-Hermite nodes per axis used to smooth the parametrix reference.
pub const SMOOTHING_NODES: usize = 8;

/// Kernel estimate of the gaussian-base chain density at `pts` with the frozen
/// chain as control variate: `F̄ - β(Ḡ - E G)`, `β = Cov(F, G)/Var(G)` per point.
fn controlled_kde(
    model: &ModelSpec,
    cfg: &ChainConfig,
    z0: &PhasePoint,
    pts: &[(f64, f64)],
    samples: usize,
    bw: Bandwidth,
) -> Result<KdeEstimate> {
    let chain = Chain1::new(model, cfg)?;
    let (x0, y0) = z0.xy();
    let (h, n) = (cfg.h(), cfg.micro);
    let mean = chain_mean(cfg.steps, h, n, x0, y0, model.b1(x0, y0));
    let a0 = model.a1(x0, y0);
    let cov = chain_cov(cfg.steps, h, n, |_| a0).add(&Sym2::new(bw.bx * bw.bx, 0.0, bw.by * bw.by));
    let exact: Vec<f64> = pts.iter().map(|&(x, y)| gauss_density(mean, &cov, [x, y])).collect();
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bw.bx * bw.by);
    let kernel = |(x, y): (f64, f64), (px, py): (f64, f64)| {
        let (u, v) = ((x - px) / bw.bx, (y - py) / bw.by);
        norm * (-0.5 * (u * u + v * v)).exp()
    };
    // Per point: Σf, Σg, Σf², Σg², Σfg.
    let parts = par_batches(mix_seed(&[cfg.seed, 0xC4A3]), samples, |rng, count| {
        let mut acc = vec![[0.0f64; 5]; pts.len()];
        for _ in 0..count {
            let (z, zc) = chain.endpoint_with_frozen(x0, y0, rng);
            for (a, &p) in acc.iter_mut().zip(pts) {
                let (f, g) = (kernel(z, p), kernel(zc, p));
                a[0] += f;
                a[1] += g;
                a[2] += f * f;
                a[3] += g * g;
                a[4] += f * g;
            }
        }
        acc
    });
    let m = samples as f64;
    let mut values = Vec::with_capacity(pts.len());
    let mut std_err = Vec::with_capacity(pts.len());
    for (k, &eg) in exact.iter().enumerate() {
        let s: [f64; 5] = std::array::from_fn(|j| parts.iter().map(|p| p[k][j]).sum::<f64>() / m);
        let (vf, vg, cov_fg) = (s[2] - s[0] * s[0], s[3] - s[1] * s[1], s[4] - s[0] * s[1]);
        let beta = if vg > 0.0 { cov_fg / vg } else { 0.0 };
        values.push(s[0] - beta * (s[1] - eg));
        let resid = (vf - 2.0 * beta * cov_fg + beta * beta * vg).max(0.0);
        std_err.push((resid / (m - 1.0).max(1.0)).sqrt());
    }
    Ok(KdeEstimate { values, std_err, samples: samples as u64 })
}
