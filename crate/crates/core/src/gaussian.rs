//! Two-scale Gaussian envelope `p̂_c` and the frozen (coefficient-fixed)
//! Gaussian transition density with its start-point derivatives.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::model::{ModelSpec, PhasePoint};
use crate::quadrature::{GaussRule, QuadratureSpec, SpaceRule};

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    /// Covariance of the Kolmogorov pair with unit diffusion at time `t`.
    pub fn kolmogorov(t: f64) -> Self {
        Self::new(t, 0.5 * t * t, t * t * t / 3.0)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.xx, k * self.xy, k * self.yy)
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if !(det > 0.0) || !det.is_finite() {
            return None;
        }
        Some(Self::new(self.yy / det, -self.xy / det, self.xx / det))
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    /// Lower Cholesky factor `(l11, l21, l22)`.
    pub fn cholesky(&self) -> Option<(f64, f64, f64)> {
        if !(self.xx > 0.0) {
            return None;
        }
        let l11 = self.xx.sqrt();
        let l21 = self.xy / l11;
        let r = self.yy - l21 * l21;
        if !(r > 0.0) {
            return None;
        }
        Some((l11, l21, r.sqrt()))
    }

    /// `Aᵀ M A` for `A = [[1, 0], [s, 1]]`.
    pub fn shear_congruence(&self, s: f64) -> Self {
        Self::new(self.xx + 2.0 * s * self.xy + s * s * self.yy, self.xy + s * self.yy, self.yy)
    }
}

/// Two-dimensional Gaussian in precision form, used to place quadrature nodes.
#[derive(Clone, Copy, Debug)]
pub struct Gauss2 {
    pub mean: [f64; 2],
    pub prec: Sym2,
}

impl Gauss2 {
    pub fn from_cov(mean: [f64; 2], cov: Sym2) -> Option<Self> {
        Some(Self { mean, prec: cov.inverse()? })
    }

    /// Normalised product of two Gaussian factors.
    pub fn product(&self, other: &Gauss2) -> Option<Self> {
        let prec = self.prec.add(&other.prec);
        let cov = prec.inverse()?;
        let a = self.prec.apply(self.mean);
        let b = other.prec.apply(other.mean);
        Some(Self { mean: cov.apply([a[0] + b[0], a[1] + b[1]]), prec })
    }

    /// Nodes `(w, weight/φ(w))` of a tensor Gauss-Hermite rule so that
    /// `Σ weight·f(w) ≈ ∫ f(w) dw` for `f` close to a multiple of this Gaussian.
    pub fn hermite_nodes(&self, rule: &GaussRule) -> Option<Vec<([f64; 2], f64)>> {
        let (l11, l21, l22) = self.prec.inverse()?.cholesky()?;
        let det_l = l11 * l22;
        let mut out = Vec::with_capacity(rule.len() * rule.len());
        for (i, &z1) in rule.nodes.iter().enumerate() {
            for (j, &z2) in rule.nodes.iter().enumerate() {
                let w = [self.mean[0] + l11 * z1, self.mean[1] + l21 * z1 + l22 * z2];
                let phi_std = (-(z1 * z1 + z2 * z2) / 2.0).exp() / (2.0 * PI);
                out.push((w, rule.weights[i] * rule.weights[j] * det_l / phi_std));
            }
        }
        Some(out)
    }

    /// Importance-sampling nodes with the same convention as [`Gauss2::hermite_nodes`].
    pub fn sample_nodes(&self, samples: usize, seed: u64) -> Option<Vec<([f64; 2], f64)>> {
        let (l11, l21, l22) = self.prec.inverse()?.cholesky()?;
        let det_l = l11 * l22;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inv_m = 1.0 / samples as f64;
        Some(
            (0..samples)
                .map(|_| {
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let z2: f64 = StandardNormal.sample(&mut rng);
                    let w = [self.mean[0] + l11 * z1, self.mean[1] + l21 * z1 + l22 * z2];
                    let phi_std = (-(z1 * z1 + z2 * z2) / 2.0).exp() / (2.0 * PI);
                    (w, inv_m * det_l / phi_std)
                })
                .collect(),
        )
    }

    /// Space nodes for the configured rule.
    pub fn nodes(&self, quad: &QuadratureSpec, rule: &GaussRule, seed: u64) -> Option<Vec<([f64; 2], f64)>> {
        match quad.space_rule {
            SpaceRule::GaussHermiteAdapted => self.hermite_nodes(rule),
            SpaceRule::MonteCarlo => self.sample_nodes(quad.mc_samples, seed),
        }
    }
}

/// Density at `to` of the Kolmogorov pair with constant drift `b` and
/// diffusion `a` in every coordinate, started at `from`.
pub fn kolmogorov_density(a: f64, b: f64, t: f64, from: &PhasePoint, to: &PhasePoint) -> f64 {
    let cov = Sym2::kolmogorov(t).scale(a);
    let prec = cov.inverse().expect("positive time and diffusion");
    let norm = 1.0 / (2.0 * PI * cov.det().sqrt());
    (0..from.dim())
        .map(|i| {
            let r = [
                to.x[i] - from.x[i] - b * t,
                to.y[i] - from.y[i] - from.x[i] * t - 0.5 * b * t * t,
            ];
            norm * (-0.5 * prec.quad(r)).exp()
        })
        .product()
}

/// Closed-form two-scale envelope
/// `c^d 3^{d/2}/(2πt²)^d · exp(-c[|x'-x|²/(4t) + 3|y'-y-(x+x')t/2|²/t³])`.
pub fn hat_p(c: f64, d: usize, t: f64, from: &PhasePoint, to: &PhasePoint) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("envelope needs t > 0, got {t}")));
    }
    if !(c > 0.0) {
        return Err(invalid(format!("envelope needs c > 0, got {c}")));
    }
    if from.dim() != d || to.dim() != d {
        return Err(invalid("envelope points must have dimension d"));
    }
    Ok(hat_p_unchecked(c, t, from, to))
}

pub(crate) fn hat_p_unchecked(c: f64, t: f64, from: &PhasePoint, to: &PhasePoint) -> f64 {
    (0..from.dim()).map(|i| hat_p1(c, t, from.x[i], from.y[i], to.x[i], to.y[i])).product()
}

/// One-dimensional envelope.
#[inline]
pub fn hat_p1(c: f64, t: f64, x: f64, y: f64, xp: f64, yp: f64) -> f64 {
    let dx = xp - x;
    let dy = yp - y - 0.5 * (x + xp) * t;
    c * 3f64.sqrt() / (2.0 * PI * t * t) * (-c * (dx * dx / (4.0 * t) + 3.0 * dy * dy / (t * t * t))).exp()
}

/// Outcome of a Chapman-Kolmogorov check on the envelope.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CkDefect {
    pub defect: f64,
    pub convolution: f64,
    pub direct: f64,
    /// Defect of the same computation with a coarser rule.
    pub coarse_defect: f64,
    pub converged: bool,
}

/// Relative defect `|∫p̂_c(s,z0,·)p̂_c(t-s,·,z1) - p̂_c(t,z0,z1)| / p̂_c(t,z0,z1)`.
pub fn chapman_kolmogorov_defect(
    c: f64,
    s: f64,
    t: f64,
    z0: &PhasePoint,
    z1: &PhasePoint,
    quad: &QuadratureSpec,
) -> Result<CkDefect> {
    quad.validate()?;
    if !(s > 0.0 && s < t) || !t.is_finite() {
        return Err(invalid(format!("need 0 < s < t, got s={s}, t={t}")));
    }
    if !(c > 0.0) {
        return Err(invalid("envelope needs c > 0"));
    }
    if z0.dim() != z1.dim() {
        return Err(invalid("points must share a dimension"));
    }
    let direct = hat_p_unchecked(c, t, z0, z1);
    let convolve = |q: &QuadratureSpec| -> Result<f64> {
        let rule = GaussRule::hermite(q.space_nodes_per_dim);
        let mut total = 1.0;
        for i in 0..z0.dim() {
            let (x0, y0, x1, y1) = (z0.x[i], z0.y[i], z1.x[i], z1.y[i]);
            let r = t - s;
            let fwd = Gauss2::from_cov([x0, y0 + x0 * s], Sym2::kolmogorov(s).scale(2.0 / c));
            let bwd_cov = Sym2::kolmogorov(r).scale(2.0 / c);
            let bwd = bwd_cov
                .inverse()
                .map(|p| Gauss2 { mean: [x1, y1 - x1 * r], prec: p.shear_congruence(r) });
            let bridge = fwd
                .zip(bwd)
                .and_then(|(f, b)| f.product(&b))
                .ok_or_else(|| Error::Conditioning(format!("envelope bridge at s={s}, t={t}")))?;
            let nodes = bridge
                .nodes(q, &rule, q.seed.wrapping_add(i as u64))
                .ok_or_else(|| Error::Conditioning("bridge covariance".into()))?;
            total *= nodes
                .iter()
                .map(|&(w, wt)| wt * hat_p1(c, s, x0, y0, w[0], w[1]) * hat_p1(c, r, w[0], w[1], x1, y1))
                .sum::<f64>();
        }
        Ok(total)
    };
    let convolution = convolve(quad)?;
    let coarse = convolve(&quad.coarsened())?;
    let defect = (convolution - direct).abs() / direct;
    let coarse_defect = (coarse - direct).abs() / direct;
    Ok(CkDefect {
        defect,
        convolution,
        direct,
        coarse_defect,
        converged: (convolution - coarse).abs() <= 1e-6 * direct.max(f64::MIN_POSITIVE),
    })
}

/// Mean and covariance of the frozen pair, with the covariance blocks and
/// their block factorisation `Σ = [[I,0],[L,I]]·diag(M0, S)·[[I,Lᵀ],[0,I]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    pub t: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `∫ã`, `∫(t-s)ã`, `∫(t-s)²ã`.
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    /// `L = M1·M0⁻¹`.
    pub regression: DMatrix<f64>,
    /// Schur complement `M2 - M1 M0⁻¹ M1`, accumulated in centred form.
    pub schur: DMatrix<f64>,
}

impl GaussianMoments {
    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

fn non_finite(freeze: &PhasePoint, what: &str) -> Error {
    Error::ModelEvaluation { point: freeze.clone(), what: what.to_string() }
}

/// Moments of `(X̃_t, Ỹ_t)` started at `start`, with coefficients frozen at
/// `freeze` and `ã_s = a(x', y' - x'(t-s))`.
pub fn frozen_moments(
    model: &ModelSpec,
    t: f64,
    start: &PhasePoint,
    freeze: &PhasePoint,
    quad: &QuadratureSpec,
) -> Result<GaussianMoments> {
    check_time(t)?;
    if quad.moment_nodes < 2 {
        return Err(invalid("moment quadrature needs at least 2 nodes"));
    }
    model.check_point(start)?;
    model.check_point(freeze)?;
    let d = model.dim;
    let rule = GaussRule::legendre_on(quad.moment_nodes, 0.0, t);
    let a_at = |tau: f64| {
        let p = PhasePoint::new(
            freeze.x.clone(),
            freeze.y.iter().zip(&freeze.x).map(|(y, x)| y - x * tau).collect(),
        );
        model.diffusion(&p)
    };
    let mut m0 = DMatrix::zeros(d, d);
    let mut m1 = DMatrix::zeros(d, d);
    let mut m2 = DMatrix::zeros(d, d);
    let samples: Vec<(f64, f64, DMatrix<f64>)> =
        rule.nodes.iter().zip(&rule.weights).map(|(&tau, &w)| (tau, w, a_at(tau))).collect();
    for (tau, w, a) in &samples {
        m0 += a * *w;
        m1 += a * (*w * tau);
        m2 += a * (*w * tau * tau);
    }
    if m0.iter().chain(m1.iter()).chain(m2.iter()).any(|v| !v.is_finite()) {
        return Err(non_finite(freeze, "frozen covariance"));
    }
    let m0_chol = m0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning(format!("∫ã is not positive definite at t={t}")))?;
    let regression = m0_chol.solve(&m1).transpose();
    let mut schur = DMatrix::zeros(d, d);
    for (tau, w, a) in &samples {
        let centred = DMatrix::identity(d, d) * *tau - &regression;
        schur += &centred * a * centred.transpose() * *w;
    }
    let b = model.drift(freeze);
    let mut mean = DVector::zeros(2 * d);
    for i in 0..d {
        mean[i] = start.x[i] + b[i] * t;
        mean[d + i] = start.y[i] + start.x[i] * t + 0.5 * b[i] * t * t;
    }
    let mut cov = DMatrix::zeros(2 * d, 2 * d);
    cov.view_mut((0, 0), (d, d)).copy_from(&m0);
    cov.view_mut((0, d), (d, d)).copy_from(&m1);
    cov.view_mut((d, 0), (d, d)).copy_from(&m1);
    cov.view_mut((d, d), (d, d)).copy_from(&m2);
    Ok(GaussianMoments { t, mean, cov, m0, m1, m2, regression, schur })
}

/// Frozen density together with its start-x gradient and the Hessian of its
/// logarithm.
pub(crate) struct FrozenEval {
    pub(crate) density: f64,
    pub(crate) grad_log: DVector<f64>,
    pub(crate) hess_log: DMatrix<f64>,
}

pub(crate) fn evaluate_frozen(mom: &GaussianMoments, target: &PhasePoint) -> Result<FrozenEval> {
    let d = mom.dim();
    let singular = || Error::Conditioning(format!("frozen covariance at t={}", mom.t));
    let m0c = mom.m0.clone().cholesky().ok_or_else(singular)?;
    let sc = mom.schur.clone().cholesky().ok_or_else(singular)?;
    let scale = mom.m2.diagonal().max().max(f64::MIN_POSITIVE);
    if sc.l().diagonal().iter().any(|l| l * l <= 1e-14 * scale) {
        return Err(singular());
    }
    let r = target.stacked() - &mom.mean;
    let r1 = r.rows(0, d).into_owned();
    let r2 = r.rows(d, d).into_owned();
    let u2 = &r2 - &mom.regression * &r1;
    let m0_inv_r1 = m0c.solve(&r1);
    let s_inv_u2 = sc.solve(&u2);
    let q = r1.dot(&m0_inv_r1) + u2.dot(&s_inv_u2);
    let log_det = 2.0 * (m0c.l().diagonal().map(f64::ln).sum() + sc.l().diagonal().map(f64::ln).sum());
    let density = (-0.5 * q - d as f64 * (2.0 * PI).ln() - 0.5 * log_det).exp();
    let shift = DMatrix::identity(d, d) * mom.t - &mom.regression;
    let grad_log = &m0_inv_r1 + shift.transpose() * &s_inv_u2;
    let hess_log = -(m0c.inverse() + shift.transpose() * sc.solve(&shift));
    Ok(FrozenEval { density, grad_log, hess_log })
}

/// Value at `target` of the frozen Gaussian density started at `start`.
pub fn frozen_density(
    model: &ModelSpec,
    t: f64,
    start: &PhasePoint,
    freeze: &PhasePoint,
    target: &PhasePoint,
    quad: &QuadratureSpec,
) -> Result<f64> {
    model.check_point(target)?;
    let mom = frozen_moments(model, t, start, freeze, quad)?;
    Ok(evaluate_frozen(&mom, target)?.density)
}

/// `∂^α` of the frozen density with respect to the start position `x`,
/// for multi-indices with `|α| ≤ 2`.
pub fn frozen_density_dx(
    model: &ModelSpec,
    t: f64,
    start: &PhasePoint,
    freeze: &PhasePoint,
    target: &PhasePoint,
    alpha: &[u32],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let order: u32 = alpha.iter().sum();
    if order > 2 {
        return Err(Error::UnsupportedOrder(order));
    }
    if alpha.len() != model.dim {
        return Err(invalid(format!("multi-index has length {}, model dimension is {}", alpha.len(), model.dim)));
    }
    model.check_point(target)?;
    let mom = frozen_moments(model, t, start, freeze, quad)?;
    let ev = evaluate_frozen(&mom, target)?;
    let idx: Vec<usize> = alpha.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize)).collect();
    Ok(match idx.as_slice() {
        [] => ev.density,
        [i] => ev.density * ev.grad_log[*i],
        [i, j] => ev.density * (ev.grad_log[*i] * ev.grad_log[*j] + ev.hess_log[(*i, *j)]),
        _ => unreachable!(),
    })
}

/// Scalar (`d = 1`) frozen density for a fixed horizon and freeze point,
/// evaluated cheaply at many start points.
#[derive(Clone, Debug)]
pub struct Frozen1 {
    pub t: f64,
    pub freeze: (f64, f64),
    pub drift: f64,
    /// `a(x', y' - x't)`, the frozen diffusion at the start time.
    pub a_start: f64,
    m0_inv: f64,
    l: f64,
    s_inv: f64,
    log_norm: f64,
    hess_log: f64,
}

impl Frozen1 {
    /// `unit_rule` is a Gauss-Legendre rule on `[0, 1]`.
    pub fn new(model: &ModelSpec, t: f64, freeze: (f64, f64), unit_rule: &GaussRule) -> Result<Self> {
        let (xp, yp) = freeze;
        let (mut m0, mut m1) = (0.0f64, 0.0f64);
        let mut store = Vec::with_capacity(unit_rule.len());
        for (&nu, &w) in unit_rule.nodes.iter().zip(&unit_rule.weights) {
            let tau = t * nu;
            let a = model.a1(xp, yp - xp * tau);
            let w = w * t;
            m0 += w * a;
            m1 += w * tau * a;
            store.push((tau, w, a));
        }
        if !(m0 > 0.0) || !m0.is_finite() || !m1.is_finite() {
            return Err(Error::Conditioning(format!("frozen variance {m0} at t={t}")));
        }
        let l = m1 / m0;
        let (mut s, mut m2) = (0.0, 0.0);
        for &(tau, w, a) in &store {
            s += w * (tau - l) * (tau - l) * a;
            m2 += w * tau * tau * a;
        }
        if !(s > 1e-14 * m2) {
            return Err(Error::Conditioning(format!("frozen Schur complement {s} at t={t}")));
        }
        let shift = t - l;
        Ok(Self {
            t,
            freeze,
            drift: model.b1(xp, yp),
            a_start: model.a1(xp, yp - xp * t),
            m0_inv: 1.0 / m0,
            l,
            s_inv: 1.0 / s,
            log_norm: -(2.0 * PI).ln() - 0.5 * (m0 * s).ln(),
            hess_log: -(1.0 / m0 + shift * shift / s),
        })
    }

    #[inline]
    fn residuals(&self, x: f64, y: f64) -> (f64, f64) {
        let t = self.t;
        let r1 = self.freeze.0 - x - self.drift * t;
        let r2 = self.freeze.1 - y - x * t - 0.5 * self.drift * t * t;
        (r1, r2 - self.l * r1)
    }

    /// Density at the freeze point from start `(x, y)`.
    #[inline]
    pub fn density(&self, x: f64, y: f64) -> f64 {
        let (r1, u2) = self.residuals(x, y);
        (self.log_norm - 0.5 * (r1 * r1 * self.m0_inv + u2 * u2 * self.s_inv)).exp()
    }

    /// `(p, ∂ₓp, ∂ₓ²p)` in the start position.
    #[inline]
    pub fn density_dx(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (r1, u2) = self.residuals(x, y);
        let p = (self.log_norm - 0.5 * (r1 * r1 * self.m0_inv + u2 * u2 * self.s_inv)).exp();
        let g = r1 * self.m0_inv + (self.t - self.l) * u2 * self.s_inv;
        (p, p * g, p * (g * g + self.hess_log))
    }

    /// The density as a Gaussian factor in the start point `(x, y)`.
    pub fn as_start_gaussian(&self) -> Gauss2 {
        let t = self.t;
        let cov_prec = Sym2::new(
            self.m0_inv + self.l * self.l * self.s_inv,
            -self.l * self.s_inv,
            self.s_inv,
        );
        let (xp, yp) = self.freeze;
        let mx = xp - self.drift * t;
        let my = yp - 0.5 * self.drift * t * t - mx * t;
        Gauss2 { mean: [mx, my], prec: cov_prec.shear_congruence(t) }
    }
}
