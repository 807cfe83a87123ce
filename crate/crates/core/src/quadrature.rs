//! Gaussian quadrature rules (Golub-Welsch) and the discretisation settings
//! used by the convolution integrals.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};

/// Nodes and weights of a one-dimensional rule.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Eigen-decomposition of the Jacobi matrix. `diag` has length n, `off` n-1.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> GaussRule {
    let n = diag.len();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = off[i];
            j[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mu0 * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

impl GaussRule {
    /// Gauss-Legendre on `[-1, 1]`.
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1);
        let off: Vec<f64> = (1..n).map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        }).collect();
        let mut rule = golub_welsch(&vec![0.0; n], &off, 2.0);
        // Enforce exact symmetry, the eigen-solver leaves ~1e-16 noise.
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
            let w = 0.5 * (rule.weights[i] + rule.weights[j]);
            rule.nodes[i] = -x;
            rule.nodes[j] = x;
            rule.weights[i] = w;
            rule.weights[j] = w;
        }
        if n % 2 == 1 {
            rule.nodes[n / 2] = 0.0;
        }
        rule
    }

    /// Gauss-Legendre mapped to `[a, b]`.
    pub fn legendre_on(n: usize, a: f64, b: f64) -> Self {
        let base = Self::legendre(n);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GaussRule {
            nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
            weights: base.weights.iter().map(|w| half * w).collect(),
        }
    }

    /// Gauss-Hermite for the standard normal weight: `Σ wᵢ f(xᵢ) ≈ E f(Z)`.
    pub fn hermite(n: usize) -> Self {
        assert!(n >= 1);
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        let mut rule = golub_welsch(&vec![0.0; n], &off, 1.0);
        let total: f64 = rule.weights.iter().sum();
        rule.weights.iter_mut().for_each(|w| *w /= total);
        rule
    }

    /// Gauss-Jacobi for the weight `(1-x)^α (1+x)^β` on `[-1, 1]`.
    pub fn jacobi(n: usize, alpha: f64, beta: f64) -> Self {
        assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
        let ab = alpha + beta;
        let diag: Vec<f64> = (0..n)
            .map(|k| {
                let s = 2.0 * k as f64 + ab;
                if (s * (s + 2.0)).abs() < 1e-300 {
                    (beta - alpha) / (ab + 2.0)
                } else {
                    (beta * beta - alpha * alpha) / (s * (s + 2.0))
                }
            })
            .collect();
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                let s = 2.0 * k + ab;
                (4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
            })
            .collect();
        let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
        golub_welsch(&diag, &off, mu0)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// How the time integral `∫₀ᵗ du` of a convolution absorbs the `(t-u)^{-1/2}`
/// endpoint singularity of the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeRule {
    /// Gauss-Jacobi with weight `(1-x)^{-1/2}`.
    GaussJacobiSqrtSingularity,
    /// `u = t sin²θ` followed by Gauss-Legendre in `θ`. Regularises both ends.
    #[serde(rename = "substitution-w2")]
    SubstitutionW2,
}

/// How the spatial integral over `ℝ^{2d}` is discretised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceRule {
    /// Tensor Gauss-Hermite nodes matched to the local two-scale Gaussian.
    GaussHermiteAdapted,
    /// Importance sampling from the same Gaussian.
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub time_nodes: usize,
    pub time_rule: TimeRule,
    pub space_nodes_per_dim: usize,
    pub space_rule: SpaceRule,
    pub mc_samples: usize,
    pub seed: u64,
    /// Gauss-Legendre nodes for the frozen covariance time integrals.
    pub moment_nodes: usize,
    /// Per-order defect (relative to the envelope) above which a series
    /// evaluation is rejected.
    pub defect_tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            time_nodes: 12,
            time_rule: TimeRule::SubstitutionW2,
            space_nodes_per_dim: 10,
            space_rule: SpaceRule::GaussHermiteAdapted,
            mc_samples: 4096,
            seed: 0,
            moment_nodes: 32,
            defect_tolerance: 5e-2,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.time_nodes < 2 || self.space_nodes_per_dim < 2 || self.moment_nodes < 2 {
            return Err(invalid("quadrature node counts must be at least 2"));
        }
        if self.space_rule == SpaceRule::MonteCarlo && self.mc_samples < 100 {
            return Err(invalid("monte-carlo space rule needs mc_samples >= 100"));
        }
        if !(self.defect_tolerance > 0.0) {
            return Err(invalid("defect_tolerance must be positive"));
        }
        Ok(())
    }

    /// A rule with roughly two thirds of the nodes, used for defect estimates.
    pub fn coarsened(&self) -> Self {
        Self {
            time_nodes: (self.time_nodes * 2 / 3).max(2),
            space_nodes_per_dim: (self.space_nodes_per_dim * 2 / 3).max(2),
            mc_samples: (self.mc_samples / 2).max(100),
            seed: self.seed.wrapping_add(1),
            ..self.clone()
        }
    }
}

/// Time nodes `uᵢ` and weights `Wᵢ` with `Σ Wᵢ g(uᵢ) ≈ ∫₀ᵗ g(u) du` for
/// integrands carrying a `(t-u)^{-1/2}` factor.
pub fn time_nodes(rule: TimeRule, n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    match rule {
        TimeRule::SubstitutionW2 => {
            let gl = GaussRule::legendre_on(n, 0.0, std::f64::consts::FRAC_PI_2);
            gl.nodes
                .iter()
                .zip(&gl.weights)
                .map(|(&th, &w)| (t * th.sin().powi(2), t * (2.0 * th).sin() * w))
                .unzip()
        }
        TimeRule::GaussJacobiSqrtSingularity => {
            let gj = GaussRule::jacobi(n, -0.5, 0.0);
            gj.nodes
                .iter()
                .zip(&gj.weights)
                .map(|(&x, &w)| (0.5 * t * (1.0 + x), 0.5 * t * w * (1.0 - x).sqrt()))
                .unzip()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = GaussRule::legendre(5);
        // exact through degree 9
        assert!((r.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-14);
        assert!(r.integrate(|x| x.powi(9)).abs() < 1e-15);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_on_interval() {
        let r = GaussRule::legendre_on(32, 0.0, 2.0);
        assert!((r.integrate(f64::exp) - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn hermite_moments() {
        let r = GaussRule::hermite(10);
        assert!((r.integrate(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((r.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((r.integrate(|x| x.powi(6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn jacobi_weight_mass_and_moment() {
        let r = GaussRule::jacobi(8, -0.5, 0.0);
        // ∫(1-x)^{-1/2} dx over [-1,1] = 2√2
        assert!((r.weights.iter().sum::<f64>() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        // ∫ x (1-x)^{-1/2} dx = 2√2/3
        assert!((r.integrate(|x| x) - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn both_time_rules_integrate_beta_kernels() {
        let t: f64 = 0.7;
        for (p, q) in [(0.0, -0.5), (0.5, -0.5), (1.0, -0.5), (1.5, -0.5)] {
            let exact = t.powf(p + q + 1.0) * beta(p + 1.0, q + 1.0);
            for rule in [TimeRule::SubstitutionW2, TimeRule::GaussJacobiSqrtSingularity] {
                let (u, w) = time_nodes(rule, 16, t);
                let got: f64 = u.iter().zip(&w).map(|(&u, &w)| w * u.powf(p) * (t - u).powf(q)).sum();
                // The Jacobi rule is not designed for the u^{1/2} factor at 0.
                let tol = if rule == TimeRule::GaussJacobiSqrtSingularity && p.fract() != 0.0 { 1e-3 } else { 1e-12 };
                assert!((got - exact).abs() < tol * exact, "{rule:?} p={p}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        let bad = QuadratureSpec { time_nodes: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = QuadratureSpec { space_rule: SpaceRule::MonteCarlo, mc_samples: 10, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
