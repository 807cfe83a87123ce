use std::f64::consts::PI;

use serde::Serialize;

use super::innovation::{gamma_n, innovation_covariance, BaseDistribution};
use crate::charfn::{invert_density, CharFnTable, InversionSettings};
use crate::error::{invalid, Error, Result};
use crate::gaussian::Sym2;
use crate::model::{ModelSpec, PhasePoint};

/// Density `q_n(u, v)` of one aggregated innovation pair.
pub trait InnovationDensity: Send + Sync {
    fn n(&self) -> usize;
    fn density(&self, u: f64, v: f64) -> f64;
}

/// Closed-form `q_n` of the gaussian base: centred Gaussian with covariance
/// [`innovation_covariance`].
#[derive(Clone, Debug)]
pub struct GaussianInnovation {
    n: usize,
    prec: Sym2,
    norm: f64,
}

impl GaussianInnovation {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("innovation density needs n >= 2, got {n}")));
        }
        let cov = innovation_covariance(n);
        Ok(Self { n, prec: cov.inverse().expect("n >= 2"), norm: 1.0 / (2.0 * PI * cov.det().sqrt()) })
    }
}

impl InnovationDensity for GaussianInnovation {
    fn n(&self) -> usize {
        self.n
    }

    fn density(&self, u: f64, v: f64) -> f64 {
        self.norm * (-0.5 * self.prec.quad([u, v])).exp()
    }
}

/// `q_n` for any built-in base: closed form for the gaussian base, otherwise
/// a mass-renormalised Fourier-inversion table.
pub fn innovation_density(base: BaseDistribution, n: usize) -> Result<Box<dyn InnovationDensity>> {
    match base {
        BaseDistribution::Gaussian => Ok(Box::new(GaussianInnovation::new(n)?)),
        other => {
            if n < 2 {
                return Err(invalid(format!("innovation density needs n >= 2, got {n}")));
            }
            // The pair is concentrated along a ridge of conditional spread
            // ~0.25, so the table is twice as fine as the default for
            // cubic interpolation across it.
            let settings = InversionSettings { out_step: 0.05, ..InversionSettings::default() };
            let table = CharFnTable::build(other, n, &settings)?;
            Ok(Box::new(invert_density(&table, &settings)?.renormalized()))
        }
    }
}

/// Density of one chain step from `z` to `zp`:
/// `q_n(u, v)/(det a·h^{2d})` with
/// `u = σ⁻¹(x' - x - bh)/√h`, `v = σ⁻¹(y' - y - (x + γ_n bh/2)h)/h^{3/2}`.
pub fn one_step_density(
    model: &ModelSpec,
    h: f64,
    z: &PhasePoint,
    zp: &PhasePoint,
    q: &dyn InnovationDensity,
) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid(format!("step must be positive, got {h}")));
    }
    model.check_point(z)?;
    model.check_point(zp)?;
    let gamma = gamma_n(q.n());
    let mut p = 1.0;
    for i in 0..model.dim {
        let (x, y) = (z.x[i], z.y[i]);
        let s = model.sigma1(x, y);
        if !(s > 0.0) {
            return Err(Error::Conditioning(format!("zero diffusion at {z}")));
        }
        let b = model.b1(x, y);
        let u = (zp.x[i] - x - b * h) / (s * h.sqrt());
        let v = (zp.y[i] - y - (x + 0.5 * gamma * b * h) * h) / (s * h * h.sqrt());
        p *= q.density(u, v) / (s * s * h * h);
    }
    Ok(p)
}

/// Mean and covariance of `j` steps of the frozen chain (gaussian or not, these
/// are the exact first two moments), with the covariance also reported in the
/// normalised form `V_j ./ [[ρ², ρ⁴], [ρ⁴, ρ⁶]]`, `ρ² = jh`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrozenChainMoments {
    pub j: usize,
    pub h: f64,
    pub mean: [f64; 2],
    #[serde(skip)]
    pub cov: Sym2,
    #[serde(skip)]
    pub normalized: Sym2,
}

/// `Σ_m a_m E_m` where step `m` contributes the innovation covariance
/// transported over the `steps - 1 - m` steps that follow it.
pub(crate) fn chain_cov(steps: usize, h: f64, n: usize, a: impl Fn(usize) -> f64) -> Sym2 {
    let c = innovation_covariance(n);
    let (h2, h3) = (h * h, h * h * h);
    let mut acc = Sym2::new(0.0, 0.0, 0.0);
    for m in 0..steps {
        let r = (steps - 1 - m) as f64;
        let am = a(m);
        acc = acc.add(&Sym2::new(am * h, am * h2 * (c.xy + r), am * h3 * (c.yy + 2.0 * c.xy * r + r * r)));
    }
    acc
}

/// Mean of `steps` chain steps with constant drift `b` from `(x, y)`.
pub(crate) fn chain_mean(steps: usize, h: f64, n: usize, x: f64, y: f64, b: f64) -> [f64; 2] {
    let j = steps as f64;
    [x + b * j * h, y + x * j * h + b * h * h * (0.5 * j * j + 0.5 * j / n as f64)]
}

/// Moments `(m_j, V_j)` of `j` steps of the chain frozen at `freeze`, started
/// at `start`. Step `m` (from 0) uses `a(x', y' - x'(anchor - m)h)`, i.e. the
/// chain ends `anchor` steps after `start` is visited.
pub fn frozen_chain_moments(
    model: &ModelSpec,
    j: usize,
    h: f64,
    n: usize,
    start: &PhasePoint,
    freeze: &PhasePoint,
    anchor: usize,
) -> Result<FrozenChainMoments> {
    model.require_scalar("frozen chain moments are implemented for d = 1")?;
    model.check_point(start)?;
    model.check_point(freeze)?;
    if j == 0 || anchor < j {
        return Err(invalid(format!("need 1 <= j <= anchor, got j={j}, anchor={anchor}")));
    }
    if n < 2 || !(h > 0.0) {
        return Err(invalid("need n >= 2 and h > 0"));
    }
    let (x, y) = start.xy();
    let (xp, yp) = freeze.xy();
    let cov = chain_cov(j, h, n, |m| model.a1(xp, yp - xp * (anchor - m) as f64 * h));
    let rho2 = j as f64 * h;
    let normalized = Sym2::new(cov.xx / rho2, cov.xy / (rho2 * rho2), cov.yy / (rho2 * rho2 * rho2));
    Ok(FrozenChainMoments { j, h, mean: chain_mean(j, h, n, x, y, model.b1(xp, yp)), cov, normalized })
}

/// Gaussian density at `to`.
#[inline]
pub(crate) fn gauss_density(mean: [f64; 2], cov: &Sym2, to: [f64; 2]) -> f64 {
    let det = cov.det();
    if !(det > 0.0) {
        return 0.0;
    }
    let (dx, dy) = (to[0] - mean[0], to[1] - mean[1]);
    let q = (cov.yy * dx * dx - 2.0 * cov.xy * dx * dy + cov.xx * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
}

/// `j`-step density of the gaussian-base chain frozen at its endpoint `zp`.
pub fn frozen_chain_density(model: &ModelSpec, j: usize, h: f64, n: usize, z: &PhasePoint, zp: &PhasePoint) -> Result<f64> {
    let mom = frozen_chain_moments(model, j, h, n, z, zp, j)?;
    Ok(gauss_density(mom.mean, &mom.cov, [zp.x[0], zp.y[0]]))
}
