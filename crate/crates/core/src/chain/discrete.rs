//! Discrete parametrix for the gaussian-base chain (`d = 1`).
//!
//! With `p̃_h` the chain frozen at its endpoint, the chain density is the
//! finite sum `p_h(t_j) = Σ_{r ≤ j} p̃_h ⊗_h H_h^{(r)}`, where
//! `H_h(t_k, w, z1) = h⁻¹[∫p_h(h, w, v)p̃_h(t_k - h, v, z1)dv - p̃_h(t_k, w, z1)]`
//! and `⊗_h` sums `h∫·dw` over intermediate grid times. For gaussian
//! innovations both parts of `H_h` are Gaussians in `z1` and are evaluated in
//! closed form.

use rayon::prelude::*;

use super::density::{chain_cov, chain_mean, gauss_density};
use super::innovation::{gamma_n, innovation_covariance, BaseDistribution};
use super::simulate::ChainConfig;
use crate::error::{invalid, Error, Result};
use crate::gaussian::{hat_p1, Gauss2, Sym2};
use crate::model::{ModelSpec, PhasePoint};
use crate::parametrix::lattice::{encode, Frame, Slice, XiGrid};
use crate::parametrix::{SeriesOptions, SeriesResult};
use crate::quadrature::{GaussRule, QuadratureSpec};
use crate::rng::mix_seed;

/// Largest `N` accepted; the cost grows like `N³` lattices-times-nodes.
pub const MAX_DISCRETE_STEPS: usize = 8;

/// `x ↦ Ax`, `Σ ↦ AΣAᵀ` for `A = [[1, 0], [s, 1]]`.
#[inline]
fn push_cov(c: &Sym2, s: f64) -> Sym2 {
    Sym2::new(c.xx, c.xy + s * c.xx, c.yy + 2.0 * s * c.xy + s * s * c.xx)
}

/// `k` steps to `z1`: one free step from `w` followed by `k - 1` frozen ones.
#[derive(Clone, Debug)]
struct StepKernel {
    k: usize,
    h: f64,
    gamma: f64,
    z1: [f64; 2],
    b_frozen: f64,
    /// One-step innovation covariance in physical units, `[[h, c₁₂h²], [·, c₂₂h³]]`.
    step_cov: Sym2,
    /// Frozen diffusion of the first step.
    a_first: f64,
    /// Shear and offset of the remaining `k - 1` frozen steps.
    shear: f64,
    offset: [f64; 2],
    rest_cov: Sym2,
}

impl StepKernel {
    fn new(model: &ModelSpec, k: usize, h: f64, n: usize, z1: [f64; 2]) -> Self {
        let (xp, yp) = (z1[0], z1[1]);
        let a_frozen = |m: usize| model.a1(xp, yp - xp * (k - m) as f64 * h);
        let b = model.b1(xp, yp);
        let c = innovation_covariance(n);
        let rest = k - 1;
        let rest_cov = chain_cov(rest, h, n, |m| a_frozen(m + 1));
        let mean0 = chain_mean(rest, h, n, 0.0, 0.0, b);
        Self {
            k,
            h,
            gamma: gamma_n(n),
            z1,
            b_frozen: b,
            step_cov: Sym2::new(h, c.xy * h * h, c.yy * h * h * h),
            a_first: a_frozen(0),
            shear: rest as f64 * h,
            offset: mean0,
            rest_cov,
        }
    }

    #[inline]
    fn step_mean(&self, w: [f64; 2], b: f64) -> [f64; 2] {
        let h = self.h;
        [w[0] + b * h, w[1] + (w[0] + 0.5 * self.gamma * b * h) * h]
    }

    #[inline]
    fn through_rest(&self, mu: [f64; 2], a: f64) -> f64 {
        let mean = [mu[0] + self.offset[0], mu[1] + self.shear * mu[0] + self.offset[1]];
        let cov = push_cov(&self.step_cov.scale(a), self.shear).add(&self.rest_cov);
        gauss_density(mean, &cov, self.z1)
    }

    /// `p̃_h(t_k, w, z1)`.
    #[inline]
    fn frozen(&self, w: [f64; 2]) -> f64 {
        self.through_rest(self.step_mean(w, self.b_frozen), self.a_first)
    }

    /// `H_h(t_k, w, z1)`.
    #[inline]
    fn kernel(&self, model: &ModelSpec, w: [f64; 2]) -> f64 {
        let free = self.through_rest(self.step_mean(w, model.b1(w[0], w[1])), model.a1(w[0], w[1]));
        (free - self.frozen(w)) / self.h
    }

    /// The frozen density as a Gaussian factor in the start point `w`.
    fn start_gaussian(&self) -> Option<Gauss2> {
        let h = self.h;
        let total = push_cov(&self.step_cov.scale(self.a_first), self.shear).add(&self.rest_cov);
        let d = [self.b_frozen * h, 0.5 * self.gamma * self.b_frozen * h * h];
        let shift = [d[0] + self.offset[0], d[1] + self.shear * d[0] + self.offset[1]];
        let u = [self.z1[0] - shift[0], self.z1[1] - shift[1]];
        let kh = self.k as f64 * h;
        Some(Gauss2 { mean: [u[0], u[1] - kh * u[0]], prec: total.inverse()?.shear_congruence(kh) })
    }
}

/// Discrete series for one chain configuration and start point.
pub struct DiscreteSolver {
    model: ModelSpec,
    steps: usize,
    micro: usize,
    h: f64,
    horizon: f64,
    z0: (f64, f64),
    a_fwd: f64,
    b0: f64,
    quad: QuadratureSpec,
    grid: XiGrid,
    /// `lattices[r][i]` holds the order-`r` term at time `t_i`, `1 ≤ r ≤ i < N`.
    lattices: Vec<Vec<Option<Slice>>>,
}

impl DiscreteSolver {
    pub fn new(model: &ModelSpec, cfg: &ChainConfig, z0: &PhasePoint, quad: &QuadratureSpec) -> Result<Self> {
        cfg.validate()?;
        quad.validate()?;
        model.require_scalar("the discrete parametrix is implemented for d = 1")?;
        model.check_point(z0)?;
        if cfg.base != BaseDistribution::Gaussian {
            return Err(Error::UnsupportedDistribution(cfg.base.key().to_string()));
        }
        if cfg.steps > MAX_DISCRETE_STEPS {
            return Err(invalid(format!(
                "the discrete parametrix takes N <= {MAX_DISCRETE_STEPS}, got {}",
                cfg.steps
            )));
        }
        let opts = SeriesOptions::default();
        // Half the continuous-time lattice step: with only a handful of
        // convolutions the interpolation error is the dominant one.
        let lattice_step = 0.5 * opts.lattice_step;
        let (x0, y0) = z0.xy();
        let mut solver = Self {
            model: model.clone(),
            steps: cfg.steps,
            micro: cfg.micro,
            h: cfg.h(),
            horizon: cfg.horizon,
            z0: (x0, y0),
            a_fwd: model.a1(x0, y0),
            b0: model.b1(x0, y0),
            quad: quad.clone(),
            grid: XiGrid::new(opts.lattice_half_width, lattice_step),
            lattices: vec![vec![None; cfg.steps]; cfg.steps],
        };
        if !model.is_constant() {
            solver.build()?;
        }
        Ok(solver)
    }

    fn frame(&self, i: usize) -> Result<Frame> {
        let a_ref = self.model.lambda_max.max(self.a_fwd);
        let cov = chain_cov(i, self.h, self.micro, |_| a_ref);
        let (l11, l21, l22) = cov.cholesky().ok_or_else(|| Error::Conditioning(format!("chain covariance at step {i}")))?;
        Ok(Frame { mean: chain_mean(i, self.h, self.micro, self.z0.0, self.z0.1, self.b0), l11, l21, l22 })
    }

    fn build(&mut self) -> Result<()> {
        let gh = GaussRule::hermite(self.quad.space_nodes_per_dim);
        for i in 1..self.steps {
            for r in 1..=i {
                let frame = self.frame(i)?;
                let values = (0..self.grid.len())
                    .into_par_iter()
                    .map(|idx| {
                        let xi = self.grid.point(idx);
                        let w = frame.unwhiten(xi);
                        let seed = mix_seed(&[self.quad.seed, r as u64, i as u64, idx as u64]);
                        let (f, _) = self.term(r, i, w, &gh, seed)?;
                        Ok(encode(f, &frame, xi, 0, 1.0))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                self.lattices[r][i] = Some(Slice::new(frame, 1.0 / frame.det(), values));
            }
        }
        Ok(())
    }

    /// Order-`r` term at `t_i` evaluated at `w`, for `i' < i`.
    fn previous(&self, r: usize, i: usize, w: [f64; 2]) -> f64 {
        if r == 0 {
            StepKernel::new(&self.model, i, self.h, self.micro, w).frozen([self.z0.0, self.z0.1])
        } else {
            self.lattices[r][i].as_ref().map_or(0.0, |s| s.eval(&self.grid, w))
        }
    }

    /// `term_r(t_i, z0, z1)` for `r ≥ 1`, with the largest `|H_h|√(t_k)/p̂` seen.
    fn term(&self, r: usize, i: usize, z1: [f64; 2], gh: &GaussRule, seed: u64) -> Result<(f64, f64)> {
        let h = self.h;
        let mut total = 0.0;
        let mut c_max: f64 = 0.0;
        let z0 = [self.z0.0, self.z0.1];
        if r == 1 {
            total += h * StepKernel::new(&self.model, i, h, self.micro, z1).kernel(&self.model, z0);
        }
        for ip in r.max(2) - 1..i {
            let kern = StepKernel::new(&self.model, i - ip, h, self.micro, z1);
            let singular = || Error::Conditioning(format!("discrete bridge at step {ip} of {i}"));
            let fwd_cov = chain_cov(ip, h, self.micro, |_| self.a_fwd);
            let fwd = Gauss2::from_cov(chain_mean(ip, h, self.micro, z0[0], z0[1], self.b0), fwd_cov).ok_or_else(singular)?;
            let bridge = fwd.product(&kern.start_gaussian().ok_or_else(singular)?).ok_or_else(singular)?;
            let nodes = bridge.nodes(&self.quad, gh, mix_seed(&[seed, ip as u64])).ok_or_else(singular)?;
            let tk = (i - ip) as f64 * h;
            let mut inner = 0.0;
            for (v, wt) in nodes {
                let hk = kern.kernel(&self.model, v);
                if hk == 0.0 {
                    continue;
                }
                inner += wt * self.previous(r - 1, ip, v) * hk;
                let env = hat_p1(1.0, tk, v[0], v[1], z1[0], z1[1]);
                if env > 1e-300 {
                    c_max = c_max.max(hk.abs() * tk.sqrt() / env);
                }
            }
            total += h * inner;
        }
        Ok((total, c_max))
    }

    /// Series value at the chain horizon `t_N`.
    pub fn evaluate(&self, z1: &PhasePoint) -> Result<SeriesResult> {
        self.model.check_point(z1)?;
        let (xp, yp) = z1.xy();
        let z1a = [xp, yp];
        let n = self.steps;
        let term0 = StepKernel::new(&self.model, n, self.h, self.micro, z1a).frozen([self.z0.0, self.z0.1]);
        let env = hat_p1(1.0, self.horizon, self.z0.0, self.z0.1, xp, yp);
        let mut terms = vec![term0];
        let mut diagnostics = vec![0.0];
        let mut c_fit: f64 = if env > 0.0 { term0 / env } else { 0.0 };
        let fine = GaussRule::hermite(self.quad.space_nodes_per_dim);
        let coarse_quad = self.quad.coarsened();
        let coarse = GaussRule::hermite(coarse_quad.space_nodes_per_dim);
        for r in 1..=n {
            if self.model.is_constant() {
                terms.push(0.0);
                diagnostics.push(0.0);
                continue;
            }
            let seed = mix_seed(&[self.quad.seed, 7000 + r as u64, xp.to_bits(), yp.to_bits()]);
            let (value, c) = self.term(r, n, z1a, &fine, seed)?;
            let (rough, _) = self.term(r, n, z1a, &coarse, seed)?;
            c_fit = c_fit.max(c);
            let defect = if env > 0.0 { (value - rough).abs() / env } else { 0.0 };
            if defect > self.quad.defect_tolerance {
                return Err(Error::QuadratureDivergence { order: r, defect, tolerance: self.quad.defect_tolerance });
            }
            terms.push(value);
            diagnostics.push(defect);
        }
        Ok(SeriesResult {
            value: terms.iter().sum(),
            terms,
            // The discrete series is finite: nothing is truncated.
            tail_bound: 0.0,
            c_fit,
            envelope: env,
            quadrature_diagnostics: diagnostics,
        })
    }

    pub fn evaluate_many(&self, targets: &[(f64, f64)]) -> Result<Vec<SeriesResult>> {
        targets.par_iter().map(|&(x, y)| self.evaluate(&PhasePoint::scalar(x, y))).collect()
    }
}

/// Discrete parametrix value of the gaussian-base chain density at `zp`
/// after `cfg.steps ≤ 8` steps.
pub fn discrete_parametrix_density(
    model: &ModelSpec,
    cfg: &ChainConfig,
    z0: &PhasePoint,
    zp: &PhasePoint,
    quad: &QuadratureSpec,
) -> Result<SeriesResult> {
    DiscreteSolver::new(model, cfg, z0, quad)?.evaluate(zp)
}
