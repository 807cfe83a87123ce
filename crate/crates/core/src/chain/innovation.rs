//! Micro variables, their aggregation into macro innovations, and the
//! built-in base laws.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gaussian::Sym2;

/// Law of the i.i.d. micro variables `ξ_k`. Every variant has mean zero,
/// unit variance, a smooth bounded density and moments of all orders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDistribution {
    #[default]
    Gaussian,
    /// Skewed two-component mixture of uniforms convolved with a narrow
    /// Gaussian, standardised. Skewness ≈ 1.74, so the `h^{1/2}` Edgeworth
    /// term of the chain is switched on.
    ScaledUniformMixture,
    /// Symmetric scale mixture of two centred normals (excess kurtosis 3).
    StudentLikeSmoothed,
}

// Raw mixture: 0.85·U(0 ± 0.5) + 0.15·U(2.5 ± 1), plus N(0, 0.2²).
const MIX_P: [f64; 2] = [0.85, 0.15];
const MIX_CENTER: [f64; 2] = [0.0, 2.5];
const MIX_HALF: [f64; 2] = [0.5, 1.0];
const MIX_SMOOTH: f64 = 0.2;

// Scale mixture: variances 0.5 and 3 with weights 0.8 and 0.2 (mean variance 1).
const SCALE_P: [f64; 2] = [0.8, 0.2];
const SCALE_VAR: [f64; 2] = [0.5, 3.0];

fn mixture_mean_sd() -> (f64, f64) {
    let mean: f64 = (0..2).map(|k| MIX_P[k] * MIX_CENTER[k]).sum();
    let second: f64 = (0..2)
        .map(|k| MIX_P[k] * (MIX_CENTER[k] * MIX_CENTER[k] + MIX_HALF[k] * MIX_HALF[k] / 3.0))
        .sum::<f64>()
        + MIX_SMOOTH * MIX_SMOOTH;
    (mean, (second - mean * mean).sqrt())
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl BaseDistribution {
    pub const KEYS: [&'static str; 3] = ["gaussian", "scaled-uniform-mixture", "student-like-smoothed"];

    pub fn from_key(key: &str) -> Result<Self> {
        match key {
            "gaussian" => Ok(Self::Gaussian),
            "scaled-uniform-mixture" => Ok(Self::ScaledUniformMixture),
            "student-like-smoothed" => Ok(Self::StudentLikeSmoothed),
            other => Err(invalid(format!("unknown base distribution `{other}`"))),
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::ScaledUniformMixture => "scaled-uniform-mixture",
            Self::StudentLikeSmoothed => "student-like-smoothed",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::ScaledUniformMixture => {
                let (mean, sd) = mixture_mean_sd();
                let k = usize::from(rng.random::<f64>() >= MIX_P[0]);
                let u: f64 = rng.random_range(-1.0..1.0);
                let g: f64 = StandardNormal.sample(rng);
                (MIX_CENTER[k] + MIX_HALF[k] * u + MIX_SMOOTH * g - mean) / sd
            }
            Self::StudentLikeSmoothed => {
                let k = usize::from(rng.random::<f64>() >= SCALE_P[0]);
                let g: f64 = StandardNormal.sample(rng);
                SCALE_VAR[k].sqrt() * g
            }
        }
    }

    /// Characteristic function `E e^{iτξ}` in closed form.
    pub fn phi(&self, tau: f64) -> Complex<f64> {
        match self {
            Self::Gaussian => Complex::new((-0.5 * tau * tau).exp(), 0.0),
            Self::ScaledUniformMixture => {
                let (mean, sd) = mixture_mean_sd();
                let s = tau / sd;
                let mut acc = Complex::new(0.0, 0.0);
                for k in 0..2 {
                    acc += Complex::from_polar(MIX_P[k] * sinc(MIX_HALF[k] * s), (MIX_CENTER[k] - mean) * s);
                }
                acc * (-0.5 * MIX_SMOOTH * MIX_SMOOTH * s * s).exp()
            }
            Self::StudentLikeSmoothed => {
                let v: f64 = (0..2).map(|k| SCALE_P[k] * (-0.5 * SCALE_VAR[k] * tau * tau).exp()).sum();
                Complex::new(v, 0.0)
            }
        }
    }

    /// Density of `ξ` in closed form.
    pub fn density(&self, v: f64) -> f64 {
        let normal_cdf = |z: f64| 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        match self {
            Self::Gaussian => (-0.5 * v * v).exp() / (2.0 * PI).sqrt(),
            Self::ScaledUniformMixture => {
                let (mean, sd) = mixture_mean_sd();
                let raw = mean + sd * v;
                let mut f = 0.0;
                for k in 0..2 {
                    let (lo, hi) = (MIX_CENTER[k] - MIX_HALF[k], MIX_CENTER[k] + MIX_HALF[k]);
                    let mass = normal_cdf((raw - lo) / MIX_SMOOTH) - normal_cdf((raw - hi) / MIX_SMOOTH);
                    f += MIX_P[k] * mass / (2.0 * MIX_HALF[k]);
                }
                f * sd
            }
            Self::StudentLikeSmoothed => (0..2)
                .map(|k| SCALE_P[k] * (-0.5 * v * v / SCALE_VAR[k]).exp() / (2.0 * PI * SCALE_VAR[k]).sqrt())
                .sum(),
        }
    }

    /// Exponential decay rate of `|φ(τ)|`: `|φ(τ)| ≤ C e^{-κτ²}`. All built-in
    /// bases have a Gaussian factor, which is what makes the
    /// `|D^β φ| ≤ C(1 + |τ|^{4+2d+1})^{-1}` hypothesis hold.
    pub fn gaussian_decay_rate(&self) -> f64 {
        match self {
            Self::Gaussian => 0.5,
            Self::ScaledUniformMixture => {
                let (_, sd) = mixture_mean_sd();
                0.5 * MIX_SMOOTH * MIX_SMOOTH / (sd * sd)
            }
            Self::StudentLikeSmoothed => 0.5 * SCALE_VAR[0],
        }
    }
}

/// `γ_n = 1 + 1/n`.
pub fn gamma_n(n: usize) -> f64 {
    1.0 + 1.0 / n as f64
}

/// Covariance of `(ξ^{(1)}, ξ^{(2)})` for `n ≥ 1`:
/// `[[1, (n+1)/(2n)], [(n+1)/(2n), (2n²+3n+1)/(6n²)]]`. Singular for `n = 1`.
pub fn innovation_covariance(n: usize) -> Sym2 {
    let n = n as f64;
    Sym2::new(1.0, (n + 1.0) / (2.0 * n), (2.0 * n * n + 3.0 * n + 1.0) / (6.0 * n * n))
}

/// One macro innovation for one coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InnovationPair {
    pub eta1: f64,
    pub eta2: f64,
}

/// Weights of the aggregation: `ξ^{(1)} = n^{-1/2}Σξ_k` and
/// `ξ^{(2)} = n^{-1/2}Σ(1 - (k-1)/n)ξ_k`.
pub fn aggregation_weights(n: usize) -> (f64, Vec<f64>) {
    let root = (n as f64).sqrt();
    (1.0 / root, (0..n).map(|k| (1.0 - k as f64 / n as f64) / root).collect())
}

/// Aggregates given micro variables.
pub fn aggregate(xi: &[f64]) -> InnovationPair {
    let (w1, w2) = aggregation_weights(xi.len());
    InnovationPair {
        eta1: w1 * xi.iter().sum::<f64>(),
        eta2: xi.iter().zip(&w2).map(|(x, w)| x * w).sum(),
    }
}

/// Draws `n` micro variables and aggregates them.
pub fn sample_innovation<R: Rng + ?Sized>(n: usize, base: BaseDistribution, rng: &mut R) -> InnovationPair {
    let mut eta1 = 0.0;
    let mut eta2 = 0.0;
    for k in 0..n {
        let xi = base.sample(rng);
        eta1 += xi;
        eta2 += (1.0 - k as f64 / n as f64) * xi;
    }
    let root = (n as f64).sqrt();
    InnovationPair { eta1: eta1 / root, eta2: eta2 / root }
}

/// Repeated innovation draws for one configuration. For the gaussian base the
/// aggregated pair is itself Gaussian, so it is drawn directly from its
/// covariance (same law, two normals instead of `n`).
#[derive(Clone, Debug)]
pub struct InnovationSampler {
    n: usize,
    base: BaseDistribution,
    chol: (f64, f64, f64),
}

impl InnovationSampler {
    pub fn new(n: usize, base: BaseDistribution) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("micro aggregation needs n >= 2, got {n}")));
        }
        let chol = innovation_covariance(n).cholesky().expect("n >= 2 is non-degenerate");
        Ok(Self { n, base, chol })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> BaseDistribution {
        self.base
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InnovationPair {
        match self.base {
            BaseDistribution::Gaussian => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let (l11, l21, l22) = self.chol;
                InnovationPair { eta1: l11 * z1, eta2: l21 * z1 + l22 * z2 }
            }
            base => sample_innovation(self.n, base, rng),
        }
    }
}
