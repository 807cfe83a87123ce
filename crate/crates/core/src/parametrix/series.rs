use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::series_tail_bound;
use super::kernel::kernel1;
use super::lattice::{encode, ChebyshevTimes, Slice, TimeLattice, Transport, XiGrid};
use crate::error::{invalid, Error, Result};
use crate::gaussian::{frozen_density, hat_p, hat_p1, Frozen1, Gauss2, Sym2};
use crate::grid::DensityGrid;
use crate::model::{ModelSpec, PhasePoint};
use crate::quadrature::{time_nodes, GaussRule, QuadratureSpec};
use crate::rng::mix_seed;

/// Series truncation, envelope and cache settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesOptions {
    pub r_max: usize,
    /// Exponent constant `c` of the envelope used for `C_fit` and tail bounds.
    pub envelope_c: f64,
    pub lattice_half_width: f64,
    pub lattice_step: f64,
    pub lattice_times: usize,
    /// Re-evaluate each order with a coarser rule to estimate its defect.
    pub estimate_defects: bool,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            r_max: 4,
            envelope_c: 1.0,
            lattice_half_width: 6.0,
            lattice_step: 0.4,
            lattice_times: 10,
            estimate_defects: true,
        }
    }
}

impl SeriesOptions {
    pub fn with_r_max(r_max: usize) -> Self {
        Self { r_max, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.envelope_c > 0.0) {
            return Err(invalid("envelope_c must be positive"));
        }
        if !(self.lattice_half_width > 0.0 && self.lattice_step > 0.0)
            || self.lattice_step * 3.0 > 2.0 * self.lattice_half_width
        {
            return Err(invalid("lattice needs positive half-width and at least 4 points per axis"));
        }
        if self.lattice_times < 2 {
            return Err(invalid("lattice_times must be at least 2"));
        }
        Ok(())
    }
}

/// Truncated parametrix series at one target point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesResult {
    pub value: f64,
    /// Contributions of orders `0..=r_max`.
    pub terms: Vec<f64>,
    /// Majorant of the omitted orders, in density units.
    pub tail_bound: f64,
    /// Fitted kernel constant `C`.
    pub c_fit: f64,
    /// `p̂_c(t, z0, z1)`.
    pub envelope: f64,
    /// Per-order `|fine - coarse| / p̂_c` quadrature defects.
    pub quadrature_diagnostics: Vec<f64>,
}

/// Shared state for the space-time convolution `∫₀ᵗdu∫dw F(u,w) H(t-u,w,z1)`.
#[derive(Clone, Debug)]
pub(crate) struct ConvCtx {
    transport: Transport,
    a_fwd: f64,
    unit_rule: GaussRule,
    c: f64,
}

impl ConvCtx {
    pub(crate) fn new(model: &ModelSpec, z0: (f64, f64), quad: &QuadratureSpec, c: f64) -> Self {
        let a0 = model.a1(z0.0, z0.1);
        ConvCtx {
            transport: Transport { x0: z0.0, y0: z0.1, b0: model.b1(z0.0, z0.1), a_ref: model.lambda_max.max(a0) },
            a_fwd: a0,
            unit_rule: GaussRule::legendre_on(quad.moment_nodes, 0.0, 1.0),
            c,
        }
    }

    /// Returns the convolution and the largest `|H|√s/p̂_c` seen at the nodes.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn convolve(
        &self,
        model: &ModelSpec,
        t: f64,
        target: (f64, f64),
        times: &[f64],
        weights: &[f64],
        gh: &GaussRule,
        quad: &QuadratureSpec,
        seed: u64,
        prev: impl Fn(usize, [f64; 2]) -> Result<f64>,
    ) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut c_max: f64 = 0.0;
        for (i, (&u, &wu)) in times.iter().zip(weights).enumerate() {
            let s = t - u;
            if !(s > 0.0 && u > 0.0) {
                continue;
            }
            let frozen = Frozen1::new(model, s, target, &self.unit_rule)?;
            let singular = || Error::Conditioning(format!("bridge Gaussian at u={u}, t={t}"));
            let fwd = Gauss2::from_cov(self.transport.mean(u), Sym2::kolmogorov(u).scale(self.a_fwd))
                .ok_or_else(singular)?;
            let bridge = fwd.product(&frozen.as_start_gaussian()).ok_or_else(singular)?;
            let nodes = bridge.nodes(quad, gh, mix_seed(&[seed, i as u64])).ok_or_else(singular)?;
            let sqrt_s = s.sqrt();
            let mut inner = 0.0;
            for (v, wt) in nodes {
                let h = kernel1(model, &frozen, v[0], v[1]);
                if h == 0.0 {
                    continue;
                }
                inner += wt * prev(i, v)? * h;
                let env = hat_p1(self.c, s, v[0], v[1], target.0, target.1);
                if env > 1e-300 {
                    c_max = c_max.max(h.abs() * sqrt_s / env);
                }
            }
            total += wu * inner;
        }
        Ok((total, c_max))
    }
}

struct TargetRule {
    quad: QuadratureSpec,
    gh: GaussRule,
    times: Vec<f64>,
    weights: Vec<f64>,
    /// `slices[o][i]`: order-`o` term at time node `i`; empty for `o = 0`.
    slices: Vec<Vec<Slice>>,
}

/// Parametrix series for a fixed horizon `t` and start point `z0` (`d = 1`).
/// Intermediate orders are tabulated once, after which each target costs a
/// single space-time quadrature per order.
pub struct ParametrixSolver {
    model: ModelSpec,
    t: f64,
    z0: (f64, f64),
    quad: QuadratureSpec,
    opts: SeriesOptions,
    ctx: ConvCtx,
    grid: XiGrid,
    fine: TargetRule,
    coarse: Option<TargetRule>,
    c_fit_build: f64,
    trivial: bool,
}

impl ParametrixSolver {
    pub fn new(
        model: &ModelSpec,
        t: f64,
        z0: &PhasePoint,
        quad: &QuadratureSpec,
        opts: &SeriesOptions,
    ) -> Result<Self> {
        quad.validate()?;
        opts.validate()?;
        model.require_scalar("the parametrix series is implemented for d = 1")?;
        model.check_point(z0)?;
        if !(t > 0.0) || !t.is_finite() {
            return Err(invalid(format!("series horizon must be positive, got {t}")));
        }
        let z0 = z0.xy();
        let ctx = ConvCtx::new(model, z0, quad, opts.envelope_c);
        let grid = XiGrid::new(opts.lattice_half_width, opts.lattice_step);
        let trivial = model.is_constant();

        let mut lattices: Vec<TimeLattice> = Vec::new();
        let mut c_fit_build: f64 = 0.0;
        if !trivial && opts.r_max >= 2 {
            let times = ChebyshevTimes::new(opts.lattice_times, t.sqrt());
            lattices.push(Self::order_zero_lattice(model, &ctx, &grid, &times, z0)?);
            let gh = GaussRule::hermite(quad.space_nodes_per_dim);
            for order in 1..opts.r_max {
                let (lat, c) = Self::build_lattice(model, &ctx, &grid, &times, &lattices[order - 1], quad, &gh)?;
                c_fit_build = c_fit_build.max(c);
                lattices.push(lat);
            }
        }
        let make_rule = |q: &QuadratureSpec| {
            let (times, weights) = time_nodes(q.time_rule, q.time_nodes, t);
            let slices = lattices
                .iter()
                .map(|lat| if lat.order == 0 { Vec::new() } else { times.iter().map(|&u| lat.slice(&ctx.transport, u)).collect() })
                .collect();
            TargetRule { gh: GaussRule::hermite(q.space_nodes_per_dim), quad: q.clone(), times, weights, slices }
        };
        let fine = make_rule(quad);
        let coarse = (opts.estimate_defects && !trivial).then(|| make_rule(&quad.coarsened()));
        Ok(Self { model: model.clone(), t, z0, quad: quad.clone(), opts: opts.clone(), ctx, grid, fine, coarse, c_fit_build, trivial })
    }

    fn order_zero_lattice(
        model: &ModelSpec,
        ctx: &ConvCtx,
        grid: &XiGrid,
        times: &ChebyshevTimes,
        z0: (f64, f64),
    ) -> Result<TimeLattice> {
        let values = times
            .s
            .iter()
            .map(|&s| {
                let u = s * s;
                let frame = ctx.transport.frame(u);
                (0..grid.len())
                    .into_par_iter()
                    .map(|idx| {
                        let xi = grid.point(idx);
                        let w = frame.unwhiten(xi);
                        let f = Frozen1::new(model, u, (w[0], w[1]), &ctx.unit_rule)?.density(z0.0, z0.1);
                        Ok(encode(f, &frame, xi, 0, u))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeLattice { order: 0, times: times.clone(), values })
    }

    fn build_lattice(
        model: &ModelSpec,
        ctx: &ConvCtx,
        grid: &XiGrid,
        times: &ChebyshevTimes,
        prev: &TimeLattice,
        quad: &QuadratureSpec,
        gh: &GaussRule,
    ) -> Result<(TimeLattice, f64)> {
        let order = prev.order + 1;
        let mut c_fit: f64 = 0.0;
        let mut values = Vec::with_capacity(times.s.len());
        for (k, &s) in times.s.iter().enumerate() {
            let u = s * s;
            let (inner_t, inner_w) = time_nodes(quad.time_rule, quad.time_nodes, u);
            let slices: Vec<Slice> = inner_t.iter().map(|&v| prev.slice(&ctx.transport, v)).collect();
            let frame = ctx.transport.frame(u);
            let row = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let xi = grid.point(idx);
                    let w = frame.unwhiten(xi);
                    let seed = mix_seed(&[quad.seed, order as u64, k as u64, idx as u64]);
                    let (f, c) = ctx.convolve(model, u, (w[0], w[1]), &inner_t, &inner_w, gh, quad, seed, |i, v| {
                        Ok(slices[i].eval(grid, v))
                    })?;
                    Ok((encode(f, &frame, xi, order, u), c))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            c_fit = row.iter().fold(c_fit, |m, r| m.max(r.1));
            values.push(row.into_iter().map(|r| r.0).collect());
        }
        Ok((TimeLattice { order, times: times.clone(), values }, c_fit))
    }

    pub fn horizon(&self) -> f64 {
        self.t
    }

    pub fn options(&self) -> &SeriesOptions {
        &self.opts
    }

    /// `C` fitted while tabulating intermediate orders.
    pub fn lattice_c_fit(&self) -> f64 {
        self.c_fit_build
    }

    fn term(&self, rule: &TargetRule, order: usize, z1: (f64, f64)) -> Result<(f64, f64)> {
        let seed = mix_seed(&[rule.quad.seed, 1000 + order as u64, z1.0.to_bits(), z1.1.to_bits()]);
        let (x0, y0) = self.z0;
        if order == 1 {
            self.ctx.convolve(&self.model, self.t, z1, &rule.times, &rule.weights, &rule.gh, &rule.quad, seed, |i, v| {
                Ok(Frozen1::new(&self.model, rule.times[i], (v[0], v[1]), &self.ctx.unit_rule)?.density(x0, y0))
            })
        } else {
            let slices = &rule.slices[order - 1];
            self.ctx.convolve(&self.model, self.t, z1, &rule.times, &rule.weights, &rule.gh, &rule.quad, seed, |i, v| {
                Ok(slices[i].eval(&self.grid, v))
            })
        }
    }

    /// Series value at `z1`.
    pub fn evaluate(&self, z1: &PhasePoint) -> Result<SeriesResult> {
        self.model.check_point(z1)?;
        let z1 = z1.xy();
        let (x0, y0) = self.z0;
        let env = hat_p1(self.opts.envelope_c, self.t, x0, y0, z1.0, z1.1);
        let term0 = Frozen1::new(&self.model, self.t, z1, &self.ctx.unit_rule)?.density(x0, y0);
        let mut c_fit = self.c_fit_build;
        if env > 0.0 {
            c_fit = c_fit.max(term0 / env);
        }
        let mut terms = vec![term0];
        let mut diagnostics = vec![0.0];
        for order in 1..=self.opts.r_max {
            if self.trivial {
                terms.push(0.0);
                diagnostics.push(0.0);
                continue;
            }
            let (value, c) = self.term(&self.fine, order, z1)?;
            c_fit = c_fit.max(c);
            let defect = match &self.coarse {
                Some(rule) => {
                    let (coarse, _) = self.term(rule, order, z1)?;
                    if env > 0.0 { (value - coarse).abs() / env } else { 0.0 }
                }
                None => 0.0,
            };
            if defect > self.quad.defect_tolerance {
                return Err(Error::QuadratureDivergence { order, defect, tolerance: self.quad.defect_tolerance });
            }
            terms.push(value);
            diagnostics.push(defect);
        }
        Ok(SeriesResult {
            value: terms.iter().sum(),
            tail_bound: series_tail_bound(c_fit.max(f64::MIN_POSITIVE), self.t, self.opts.r_max + 1) * env,
            terms,
            c_fit,
            envelope: env,
            quadrature_diagnostics: diagnostics,
        })
    }

    /// Evaluates the series at many targets in parallel.
    pub fn evaluate_many(&self, targets: &[(f64, f64)]) -> Result<Vec<SeriesResult>> {
        targets.par_iter().map(|&(x, y)| self.evaluate(&PhasePoint::scalar(x, y))).collect()
    }

    /// Fills `grid` with series values and returns the per-node results.
    pub fn fill_grid(&self, grid: &mut DensityGrid) -> Result<Vec<SeriesResult>> {
        let results = self.evaluate_many(&grid.nodes())?;
        grid.values = results.iter().map(|r| r.value).collect();
        Ok(results)
    }
}

/// Series density `Σ_{r ≤ r_max} p̃⊗H^{(r)}(t, z0, z1)` with its tail bound.
/// Constant coefficients (any `d`) reduce exactly to the frozen density.
pub fn parametrix_density(
    model: &ModelSpec,
    t: f64,
    z0: &PhasePoint,
    z1: &PhasePoint,
    r_max: usize,
    quad: &QuadratureSpec,
) -> Result<SeriesResult> {
    if model.is_constant() {
        let value = frozen_density(model, t, z0, z1, z1, quad)?;
        let env = hat_p(1.0, model.dim, t, z0, z1)?;
        let c_fit = if env > 0.0 { value / env } else { 0.0 };
        let mut terms = vec![0.0; r_max + 1];
        terms[0] = value;
        return Ok(SeriesResult {
            value,
            terms,
            tail_bound: series_tail_bound(c_fit.max(f64::MIN_POSITIVE), t, r_max + 1) * env,
            c_fit,
            envelope: env,
            quadrature_diagnostics: vec![0.0; r_max + 1],
        });
    }
    ParametrixSolver::new(model, t, z0, quad, &SeriesOptions::with_r_max(r_max))?.evaluate(z1)
}

/// One application of the convolution: given the previous term
/// `prev(u, w) = F(u, z0, w)`, returns `∫₀ᵗdu∫dw F(u, z0, w) H(t-u, w, z1)` at
/// each target (`d = 1`).
pub fn convolve_term(
    model: &ModelSpec,
    prev: &(dyn Fn(f64, &PhasePoint) -> f64 + Sync),
    t: f64,
    z0: &PhasePoint,
    targets: &[PhasePoint],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    quad.validate()?;
    model.require_scalar("convolution terms are implemented for d = 1")?;
    model.check_point(z0)?;
    if !(t > 0.0) {
        return Err(invalid("convolution horizon must be positive"));
    }
    let ctx = ConvCtx::new(model, z0.xy(), quad, 1.0);
    let (times, weights) = time_nodes(quad.time_rule, quad.time_nodes, t);
    let gh = GaussRule::hermite(quad.space_nodes_per_dim);
    targets
        .par_iter()
        .enumerate()
        .map(|(k, z1)| {
            model.check_point(z1)?;
            let seed = mix_seed(&[quad.seed, k as u64]);
            let (v, _) = ctx.convolve(model, t, z1.xy(), &times, &weights, &gh, quad, seed, |i, w| {
                Ok(prev(times[i], &PhasePoint::scalar(w[0], w[1])))
            })?;
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::kolmogorov_density;

    #[test]
    fn constant_model_is_exact() {
        let m = ModelSpec::constant_unit(1);
        let z0 = PhasePoint::origin(1);
        let z1 = PhasePoint::scalar(0.3, 0.1);
        let r = parametrix_density(&m, 0.5, &z0, &z1, 4, &QuadratureSpec::default()).unwrap();
        let exact = kolmogorov_density(1.0, 0.0, 0.5, &z0, &z1);
        assert!((r.value - exact).abs() < 1e-14 * exact);
        assert!(r.terms[1..].iter().all(|&t| t == 0.0));
        assert_eq!(r.terms.len(), 5);
    }

    #[test]
    fn zero_input_gives_zero() {
        let m = ModelSpec::perturbed_default(1);
        let out = convolve_term(
            &m,
            &|_, _| 0.0,
            0.3,
            &PhasePoint::origin(1),
            &[PhasePoint::scalar(0.1, 0.0)],
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn higher_dimensions_are_rejected_for_variable_models() {
        let m = ModelSpec::perturbed_default(2);
        let z = PhasePoint::origin(2);
        let err = parametrix_density(&m, 0.3, &z, &z, 2, &QuadratureSpec::default());
        assert!(matches!(err, Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn solver_agrees_with_one_shot_evaluation() {
        let m = ModelSpec::perturbed_default(1);
        let q = QuadratureSpec::default();
        let z0 = PhasePoint::origin(1);
        let z1 = PhasePoint::scalar(0.1, 0.02);
        let solver = ParametrixSolver::new(&m, 0.25, &z0, &q, &SeriesOptions::with_r_max(2)).unwrap();
        let a = solver.evaluate(&z1).unwrap();
        let b = parametrix_density(&m, 0.25, &z0, &z1, 2, &q).unwrap();
        assert_eq!(a, b);
        assert!((a.value - a.terms.iter().sum::<f64>()).abs() < 1e-15);
        assert!(a.tail_bound > 0.0);
    }
}
