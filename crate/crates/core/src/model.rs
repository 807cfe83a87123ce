//! Diffusion models `dX = b(X,Y) dt + σ(X,Y) dW`, `dY = X dt` on `ℝ^d × ℝ^d`.
//!
//! Models are built-in coordinate-separable families selected by a string key
//! and a parameter list. Every family has a diagonal `σ`, so the symmetric
//! square root of `a = σσ` is explicit and never computed numerically.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point `(x, y)` of phase space: position and integrated position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "x and y must have the same dimension");
        Self { x, y }
    }

    /// One-dimensional point `(x, y)`.
    pub fn scalar(x: f64, y: f64) -> Self {
        Self { x: vec![x], y: vec![y] }
    }

    pub fn origin(dim: usize) -> Self {
        Self { x: vec![0.0; dim], y: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Stacked `(x, y)` as a vector of length `2d`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.dim(), self.x.iter().chain(&self.y).copied())
    }

    pub fn from_stacked(v: &DVector<f64>) -> Self {
        let d = v.len() / 2;
        Self { x: v.rows(0, d).iter().copied().collect(), y: v.rows(d, d).iter().copied().collect() }
    }

    /// `(x, y)` of a one-dimensional point.
    pub fn xy(&self) -> (f64, f64) {
        (self.x[0], self.y[0])
    }
}

impl fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={:?}, y={:?})", self.x, self.y)
    }
}

/// Regularity of the coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    /// `C¹` and uniformly Lipschitz.
    Lipschitz,
    /// Only uniformly Hölder continuous with the given exponent.
    Hoelder(f64),
}

/// Built-in coefficient families. All act coordinate-wise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelFamily {
    /// `b = drift`, `σ = sigma·I`.
    Constant { drift: f64, sigma: f64 },
    /// `b = 0`, `a = 1 + amp·sin(freq_y·y + freq_x·x)`.
    Trig { amp: f64, freq_y: f64, freq_x: f64 },
    /// `b = amp·tanh(scale·x)`, `σ = I`.
    TanhDrift { amp: f64, scale: f64 },
    /// `a = 1 + a_amp·sin(a_freq·y)`, `b = b_amp·tanh(b_scale·x)`.
    Perturbed { a_amp: f64, a_freq: f64, b_amp: f64, b_scale: f64 },
    /// `b = 0`, `a = 1 + amp·|sin y|^{1/2}` (Hölder-1/2, not Lipschitz at `y ∈ πℤ`).
    Hoelder { amp: f64 },
    /// `b = 0`, `σ = 0`. A control model violating ellipticity.
    Degenerate,
}

impl ModelFamily {
    /// Family keys accepted by [`ModelFamily::from_key`].
    pub const KEYS: [&'static str; 6] =
        ["constant", "trig", "tanh-drift", "perturbed", "hoelder", "degenerate"];

    /// Builds a family from its key and positional parameters. Missing trailing
    /// parameters take their defaults.
    pub fn from_key(key: &str, params: &[f64]) -> Result<Self> {
        let get = |i: usize, default: f64| params.get(i).copied().unwrap_or(default);
        let max_len = match key {
            "constant" | "tanh-drift" => 2,
            "trig" => 3,
            "perturbed" => 4,
            "hoelder" => 1,
            "degenerate" => 0,
            other => return Err(invalid(format!("unknown model family `{other}`"))),
        };
        if params.len() > max_len {
            return Err(invalid(format!(
                "model family `{key}` takes at most {max_len} parameters, got {}",
                params.len()
            )));
        }
        if let Some(p) = params.iter().find(|p| !p.is_finite()) {
            return Err(invalid(format!("non-finite model parameter {p}")));
        }
        let family = match key {
            "constant" => ModelFamily::Constant { drift: get(0, 0.0), sigma: get(1, 1.0) },
            "trig" => ModelFamily::Trig { amp: get(0, 0.5), freq_y: get(1, 1.0), freq_x: get(2, 0.0) },
            "tanh-drift" => ModelFamily::TanhDrift { amp: get(0, 1.0), scale: get(1, 1.0) },
            "perturbed" => ModelFamily::Perturbed {
                a_amp: get(0, 0.1),
                a_freq: get(1, 1.0),
                b_amp: get(2, 0.2),
                b_scale: get(3, 1.0),
            },
            "hoelder" => ModelFamily::Hoelder { amp: get(0, 0.1) },
            _ => ModelFamily::Degenerate,
        };
        family.check()?;
        Ok(family)
    }

    fn check(&self) -> Result<()> {
        let amp_ok = |amp: f64| amp.abs() < 1.0;
        match *self {
            ModelFamily::Constant { sigma, .. } if sigma <= 0.0 => {
                Err(invalid("constant model needs sigma > 0"))
            }
            ModelFamily::Trig { amp, .. } | ModelFamily::Perturbed { a_amp: amp, .. } if !amp_ok(amp) => {
                Err(invalid("diffusion amplitude must satisfy |amp| < 1"))
            }
            ModelFamily::Hoelder { amp } if !(0.0..1.0).contains(&amp) => {
                Err(invalid("hoelder amplitude must lie in [0, 1)"))
            }
            _ => Ok(()),
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            ModelFamily::Constant { .. } => "constant",
            ModelFamily::Trig { .. } => "trig",
            ModelFamily::TanhDrift { .. } => "tanh-drift",
            ModelFamily::Perturbed { .. } => "perturbed",
            ModelFamily::Hoelder { .. } => "hoelder",
            ModelFamily::Degenerate => "degenerate",
        }
    }

    /// Diffusion `a = σ²` of one coordinate.
    #[inline]
    pub fn a1(&self, x: f64, y: f64) -> f64 {
        match *self {
            ModelFamily::Constant { sigma, .. } => sigma * sigma,
            ModelFamily::Trig { amp, freq_y, freq_x } => 1.0 + amp * (freq_y * y + freq_x * x).sin(),
            ModelFamily::TanhDrift { .. } => 1.0,
            ModelFamily::Perturbed { a_amp, a_freq, .. } => 1.0 + a_amp * (a_freq * y).sin(),
            ModelFamily::Hoelder { amp } => 1.0 + amp * y.sin().abs().sqrt(),
            ModelFamily::Degenerate => 0.0,
        }
    }

    /// `σ = √a` of one coordinate.
    #[inline]
    pub fn sigma1(&self, x: f64, y: f64) -> f64 {
        match *self {
            ModelFamily::Constant { sigma, .. } => sigma,
            _ => self.a1(x, y).sqrt(),
        }
    }

    /// Drift of one coordinate.
    #[inline]
    pub fn b1(&self, x: f64, _y: f64) -> f64 {
        match *self {
            ModelFamily::Constant { drift, .. } => drift,
            ModelFamily::TanhDrift { amp, scale } => amp * (scale * x).tanh(),
            ModelFamily::Perturbed { b_amp, b_scale, .. } => b_amp * (b_scale * x).tanh(),
            _ => 0.0,
        }
    }

    /// True when `a` and `b` do not depend on the state.
    pub fn is_constant(&self) -> bool {
        matches!(self, ModelFamily::Constant { .. } | ModelFamily::Degenerate)
            || matches!(*self, ModelFamily::Trig { amp, .. } if amp == 0.0)
            || matches!(*self, ModelFamily::TanhDrift { amp, .. } if amp == 0.0)
            || matches!(*self, ModelFamily::Hoelder { amp } if amp == 0.0)
            || matches!(*self, ModelFamily::Perturbed { a_amp, b_amp, .. } if a_amp == 0.0 && b_amp == 0.0)
    }

    fn declared_window(&self) -> (f64, f64) {
        match *self {
            ModelFamily::Constant { sigma, .. } => (sigma * sigma, sigma * sigma),
            ModelFamily::Trig { amp, .. } | ModelFamily::Perturbed { a_amp: amp, .. } => {
                (1.0 - amp.abs(), 1.0 + amp.abs())
            }
            ModelFamily::TanhDrift { .. } => (1.0, 1.0),
            ModelFamily::Hoelder { amp } => (1.0, 1.0 + amp),
            ModelFamily::Degenerate => (0.0, 0.0),
        }
    }

    fn declared_bound(&self) -> f64 {
        let (_, lmax) = self.declared_window();
        let drift = match *self {
            ModelFamily::Constant { drift, .. } => drift.abs(),
            ModelFamily::TanhDrift { amp, .. } | ModelFamily::Perturbed { b_amp: amp, .. } => amp.abs(),
            _ => 0.0,
        };
        drift.max(lmax.sqrt())
    }

    fn smoothness(&self) -> Smoothness {
        match self {
            ModelFamily::Hoelder { .. } => Smoothness::Hoelder(0.5),
            _ => Smoothness::Lipschitz,
        }
    }
}

/// A model of class `dX = b dt + σ dW, dY = X dt` together with its declared
/// ellipticity window and coefficient bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub family: ModelFamily,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub coeff_bound: f64,
    pub smoothness: Smoothness,
}

/// Coefficients of a model at one phase point.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub drift: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl ModelSpec {
    /// Model with declared constants taken from the family.
    pub fn new(dim: usize, family: ModelFamily) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let (lambda_min, lambda_max) = family.declared_window();
        Self {
            dim,
            coeff_bound: family.declared_bound(),
            smoothness: family.smoothness(),
            lambda_min,
            lambda_max,
            family,
        }
    }

    pub fn from_key(dim: usize, key: &str, params: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self::new(dim, ModelFamily::from_key(key, params)?))
    }

    /// Overrides the declared ellipticity window.
    pub fn with_ellipticity(mut self, lambda_min: f64, lambda_max: f64) -> Self {
        self.lambda_min = lambda_min;
        self.lambda_max = lambda_max;
        self
    }

    /// Unit diffusion, zero drift.
    pub fn constant_unit(dim: usize) -> Self {
        Self::new(dim, ModelFamily::Constant { drift: 0.0, sigma: 1.0 })
    }

    /// `a = 1 + 0.1 sin(y)`, `b = 0.2 tanh(x)`.
    pub fn perturbed_default(dim: usize) -> Self {
        Self::new(dim, ModelFamily::Perturbed { a_amp: 0.1, a_freq: 1.0, b_amp: 0.2, b_scale: 1.0 })
    }

    pub fn is_constant(&self) -> bool {
        self.family.is_constant()
    }

    #[inline]
    pub(crate) fn a1(&self, x: f64, y: f64) -> f64 {
        self.family.a1(x, y)
    }

    #[inline]
    pub(crate) fn b1(&self, x: f64, y: f64) -> f64 {
        self.family.b1(x, y)
    }

    #[inline]
    pub(crate) fn sigma1(&self, x: f64, y: f64) -> f64 {
        self.family.sigma1(x, y)
    }

    pub(crate) fn require_scalar(&self, what: &str) -> Result<()> {
        if self.dim == 1 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension { dim: self.dim, what: what.to_string() })
        }
    }

    pub(crate) fn check_point(&self, p: &PhasePoint) -> Result<()> {
        if p.dim() != self.dim {
            return Err(invalid(format!("point {p} has dimension {}, model has {}", p.dim(), self.dim)));
        }
        if !p.is_finite() {
            return Err(invalid(format!("point {p} is not finite")));
        }
        Ok(())
    }

    pub fn drift(&self, p: &PhasePoint) -> DVector<f64> {
        DVector::from_iterator(self.dim, (0..self.dim).map(|i| self.b1(p.x[i], p.y[i])))
    }

    pub fn sigma(&self, p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| self.sigma1(p.x[i], p.y[i])),
        ))
    }

    pub fn diffusion(&self, p: &PhasePoint) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            (0..self.dim).map(|i| self.a1(p.x[i], p.y[i])),
        ))
    }
}

/// Evaluates drift, symmetric square root `σ` and `a = σσ` at `p`.
pub fn eval_coefficients(model: &ModelSpec, p: &PhasePoint) -> Result<Coefficients> {
    model.check_point(p)?;
    let drift = model.drift(p);
    let sigma = model.sigma(p);
    let a = &sigma * &sigma;
    for (name, values) in [("drift", drift.as_slice()), ("sigma", sigma.as_slice()), ("a", a.as_slice())] {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation { point: p.clone(), what: format!("{name} entry {v}") });
        }
    }
    Ok(Coefficients { drift, sigma, a })
}

/// Result of sampling a model against its declared constants.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub sample_count: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub max_drift_norm: f64,
    pub max_sigma_norm: f64,
    pub max_sigma_asymmetry: f64,
    pub ellipticity_ok: bool,
    pub bound_ok: bool,
    pub symmetric_ok: bool,
    pub passed: bool,
}

/// Samples `sample_count` random points and checks the ellipticity window,
/// the coefficient bound and symmetry of `σ`. Failures are reported, not raised.
pub fn validate_model(model: &ModelSpec, sample_count: usize, rng_seed: u64) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let d = model.dim;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut max_b: f64 = 0.0;
    let mut max_s: f64 = 0.0;
    let mut max_asym: f64 = 0.0;
    let y_range = 4.0 * std::f64::consts::PI;
    for _ in 0..sample_count {
        let x = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y = (0..d).map(|_| rng.random_range(-y_range..y_range)).collect();
        let c = eval_coefficients(model, &PhasePoint::new(x, y))?;
        let eig = c.a.clone().symmetric_eigen().eigenvalues;
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
        max_b = max_b.max(c.drift.norm());
        max_s = max_s.max(c.sigma.norm());
        max_asym = max_asym.max((&c.sigma - c.sigma.transpose()).abs().max());
    }
    let tol = 1e-12 * model.lambda_max.max(1.0);
    let ellipticity_ok = lo >= model.lambda_min - tol && hi <= model.lambda_max + tol && lo > 0.0;
    let bound_ok = max_b <= model.coeff_bound + tol && max_s <= model.coeff_bound * (d as f64).sqrt() + tol;
    let symmetric_ok = max_asym <= 1e-14;
    Ok(ValidationReport {
        sample_count,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        max_drift_norm: max_b,
        max_sigma_norm: max_s,
        max_sigma_asymmetry: max_asym,
        ellipticity_ok,
        bound_ok,
        symmetric_ok,
        passed: ellipticity_ok && bound_ok && symmetric_ok,
    })
}

/// Default finite-difference step for bracket Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Numerical rank of `[A_1 … A_d, [A_0,A_1] … [A_0,A_d]]` at `p`, where
/// `A_0 = (b, x)` and `A_j = (σ_{·j}, 0)`. Jacobians use central differences;
/// the rank threshold is `1e-8` times the largest singular value.
pub fn hormander_rank(model: &ModelSpec, p: &PhasePoint, fd_step: f64) -> Result<usize> {
    model.check_point(p)?;
    let base = p.stacked();
    if !(fd_step.is_finite() && fd_step > 0.0 && fd_step <= 1.0)
        || base.iter().any(|&c| c + fd_step == c || c - fd_step == c)
    {
        return Err(invalid(format!("degenerate finite-difference step {fd_step}")));
    }
    let d = model.dim;
    let n = 2 * d;

    let drift_field = |z: &DVector<f64>| -> DVector<f64> {
        let q = PhasePoint::from_stacked(z);
        let b = model.drift(&q);
        DVector::from_iterator(n, b.iter().copied().chain(q.x.iter().copied()))
    };
    let diffusion_field = |z: &DVector<f64>, j: usize| -> DVector<f64> {
        let s = model.sigma(&PhasePoint::from_stacked(z));
        DVector::from_iterator(n, s.column(j).iter().copied().chain(std::iter::repeat_n(0.0, d)))
    };
    let jacobian = |f: &dyn Fn(&DVector<f64>) -> DVector<f64>| -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += fd_step;
            minus[k] -= fd_step;
            jac.set_column(k, &((f(&plus) - f(&minus)) / (2.0 * fd_step)));
        }
        jac
    };

    let a0 = drift_field(&base);
    let j0 = jacobian(&drift_field);
    let mut span = DMatrix::zeros(n, 2 * d);
    for j in 0..d {
        let aj = diffusion_field(&base, j);
        let jj = jacobian(&|z| diffusion_field(z, j));
        let bracket = &jj * &a0 - &j0 * &aj;
        span.set_column(j, &aj);
        span.set_column(d + j, &bracket);
    }
    for v in span.iter() {
        if !v.is_finite() {
            return Err(Error::ModelEvaluation { point: p.clone(), what: "non-finite bracket".into() });
        }
    }
    let sv = span.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > 1e-8 * smax).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig(amp: f64) -> ModelSpec {
        ModelSpec::new(1, ModelFamily::Trig { amp, freq_y: 1.0, freq_x: 0.0 })
    }

    #[test]
    fn constant_model_coefficients() {
        let c = eval_coefficients(&ModelSpec::constant_unit(1), &PhasePoint::scalar(3.0, -2.0)).unwrap();
        assert_eq!(c.drift[0], 0.0);
        assert_eq!(c.sigma[(0, 0)], 1.0);
        assert_eq!(c.a[(0, 0)], 1.0);
    }

    #[test]
    fn trig_model_at_origin() {
        let c = eval_coefficients(&trig(0.5), &PhasePoint::scalar(0.0, 0.0)).unwrap();
        assert_eq!(c.a[(0, 0)], 1.0);
    }

    #[test]
    fn tanh_drift_value() {
        let m = ModelSpec::from_key(1, "tanh-drift", &[1.0, 1.0]).unwrap();
        let c = eval_coefficients(&m, &PhasePoint::scalar(1.0, 0.0)).unwrap();
        assert!((c.drift[0] - 0.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn sigma_squares_to_a() {
        let m = ModelSpec::perturbed_default(2);
        let p = PhasePoint::new(vec![0.3, -1.2], vec![2.0, 0.7]);
        let c = eval_coefficients(&m, &p).unwrap();
        assert!((&c.sigma * &c.sigma - &c.a).abs().max() < 1e-15);
        assert_eq!(c.sigma, c.sigma.transpose());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = ModelSpec::constant_unit(2);
        assert!(eval_coefficients(&m, &PhasePoint::scalar(0.0, 0.0)).is_err());
        assert!(eval_coefficients(&m, &PhasePoint::new(vec![f64::NAN, 0.0], vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn unknown_family_and_bad_params() {
        assert!(ModelFamily::from_key("quartic", &[]).is_err());
        assert!(ModelFamily::from_key("trig", &[1.5]).is_err());
        assert!(ModelFamily::from_key("constant", &[0.0, -1.0]).is_err());
        assert!(ModelFamily::from_key("hoelder", &[0.1, 2.0]).is_err());
    }

    #[test]
    fn validation_constant_model() {
        let r = validate_model(&ModelSpec::constant_unit(1), 100, 1).unwrap();
        assert!(r.passed);
        assert_eq!((r.min_eigenvalue, r.max_eigenvalue), (1.0, 1.0));
    }

    #[test]
    fn validation_trig_window() {
        let r = validate_model(&trig(0.5), 2000, 7).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.min_eigenvalue >= 0.5 && r.max_eigenvalue <= 1.5);
        let r = validate_model(&trig(0.5).with_ellipticity(0.9, 1.5), 2000, 7).unwrap();
        assert!(!r.passed);
        assert!(!r.ellipticity_ok);
        assert!(r.min_eigenvalue < 0.9);
    }

    #[test]
    fn validation_needs_samples() {
        assert!(validate_model(&trig(0.5), 0, 1).is_err());
    }

    #[test]
    fn rank_of_constant_models() {
        let p1 = PhasePoint::origin(1);
        assert_eq!(hormander_rank(&ModelSpec::constant_unit(1), &p1, DEFAULT_FD_STEP).unwrap(), 2);
        let p2 = PhasePoint::new(vec![0.5, -0.5], vec![1.0, 2.0]);
        assert_eq!(hormander_rank(&ModelSpec::constant_unit(2), &p2, DEFAULT_FD_STEP).unwrap(), 4);
    }

    #[test]
    fn rank_of_degenerate_control() {
        let m = ModelSpec::new(1, ModelFamily::Degenerate);
        assert!(hormander_rank(&m, &PhasePoint::origin(1), DEFAULT_FD_STEP).unwrap() < 2);
    }

    #[test]
    fn rank_rejects_bad_step() {
        let m = ModelSpec::constant_unit(1);
        let p = PhasePoint::scalar(1.0, 1.0);
        assert!(hormander_rank(&m, &p, 0.0).is_err());
        assert!(hormander_rank(&m, &p, f64::NAN).is_err());
        assert!(hormander_rank(&m, &p, 1e-20).is_err());
    }

    #[test]
    fn coefficients_are_deterministic() {
        let m = ModelSpec::perturbed_default(1);
        let p = PhasePoint::scalar(0.123, 4.56);
        let a = eval_coefficients(&m, &p).unwrap();
        let b = eval_coefficients(&m, &p).unwrap();
        assert_eq!(a, b);
    }
}
