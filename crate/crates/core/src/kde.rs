//! Product Gaussian kernel density estimates with per-node standard errors,
//! and the matching deterministic smoothing of a known density.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::DensityGrid;
use crate::quadrature::GaussRule;
use crate::rng::par_batches;

/// Kernel contributions beyond this many bandwidths are dropped (`e^{-32}`).
const CUTOFF: f64 = 8.0;

/// Per-axis kernel bandwidths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bandwidth {
    pub bx: f64,
    pub by: f64,
}

impl Bandwidth {
    pub fn new(bx: f64, by: f64) -> Result<Self> {
        if !(bx > 0.0 && by > 0.0) || !bx.is_finite() || !by.is_finite() {
            return Err(invalid(format!("bandwidths must be positive, got ({bx}, {by})")));
        }
        Ok(Self { bx, by })
    }

    /// Scott-type rule `σ·M^{-1/6}` per axis with the spreads of a Kolmogorov
    /// pair of diffusion `a` at time `t`, i.e. scales `√t` and `t^{3/2}`.
    pub fn rule_of_thumb(a: f64, t: f64, samples: usize) -> Self {
        let shrink = (samples.max(1) as f64).powf(-1.0 / 6.0);
        let a = a.max(1e-12);
        Self { bx: (a * t).sqrt() * shrink, by: (a * t * t * t / 3.0).sqrt() * shrink }
    }
}

#[derive(Clone, Debug)]
enum Targets {
    Points(Vec<(f64, f64)>),
    Grid { xs: Vec<f64>, ys: Vec<f64> },
}

/// Running kernel sums `Σ K` and `Σ K²` at a fixed set of evaluation nodes.
#[derive(Clone, Debug)]
pub struct Kde {
    targets: Targets,
    bw: Bandwidth,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: u64,
    // scratch for the grid path
    kx: Vec<(usize, f64)>,
    ky: Vec<(usize, f64)>,
}

/// Estimate and standard error at each node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KdeEstimate {
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: u64,
}

#[inline]
fn kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp()
}

impl Kde {
    pub fn at_points(points: Vec<(f64, f64)>, bw: Bandwidth) -> Self {
        let n = points.len();
        Self::with_targets(Targets::Points(points), n, bw)
    }

    pub fn on_grid(xs: Vec<f64>, ys: Vec<f64>, bw: Bandwidth) -> Self {
        let n = xs.len() * ys.len();
        Self::with_targets(Targets::Grid { xs, ys }, n, bw)
    }

    fn with_targets(targets: Targets, n: usize, bw: Bandwidth) -> Self {
        Self { targets, bw, sum: vec![0.0; n], sum_sq: vec![0.0; n], count: 0, kx: Vec::new(), ky: Vec::new() }
    }

    /// Empty accumulator with the same nodes and bandwidth.
    pub fn fresh(&self) -> Self {
        Self::with_targets(self.targets.clone(), self.sum.len(), self.bw)
    }

    pub fn bandwidth(&self) -> Bandwidth {
        self.bw
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, x: f64, y: f64) {
        self.count += 1;
        let Bandwidth { bx, by } = self.bw;
        match &self.targets {
            Targets::Points(points) => {
                for (k, &(px, py)) in points.iter().enumerate() {
                    let (u, v) = ((x - px) / bx, (y - py) / by);
                    if u.abs() < CUTOFF && v.abs() < CUTOFF {
                        let w = kernel(u) * kernel(v);
                        self.sum[k] += w;
                        self.sum_sq[k] += w * w;
                    }
                }
            }
            Targets::Grid { xs, ys } => {
                near(xs, x, bx, &mut self.kx);
                if self.kx.is_empty() {
                    return;
                }
                near(ys, y, by, &mut self.ky);
                let nx = xs.len();
                for &(iy, wy) in &self.ky {
                    for &(ix, wx) in &self.kx {
                        let w = wx * wy;
                        self.sum[iy * nx + ix] += w;
                        self.sum_sq[iy * nx + ix] += w * w;
                    }
                }
            }
        }
    }

    /// Samples that never reached any node still count towards `M`.
    pub fn add_miss(&mut self) {
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Kde) {
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }

    pub fn estimate(&self) -> KdeEstimate {
        let m = self.count.max(1) as f64;
        let norm = 1.0 / (2.0 * std::f64::consts::PI * self.bw.bx * self.bw.by);
        let mut values = Vec::with_capacity(self.sum.len());
        let mut std_err = Vec::with_capacity(self.sum.len());
        for (&s, &s2) in self.sum.iter().zip(&self.sum_sq) {
            let mean = s / m;
            let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
            values.push(norm * mean);
            std_err.push(norm * (var / m).sqrt());
        }
        KdeEstimate { values, std_err, samples: self.count }
    }

    /// Writes the estimate into a grid with matching axes.
    pub fn fill_grid(&self, grid: &mut DensityGrid) -> Result<()> {
        match &self.targets {
            Targets::Grid { xs, ys } if *xs == grid.xs && *ys == grid.ys => {
                let est = self.estimate();
                grid.values = est.values;
                grid.std_err = Some(est.std_err);
                Ok(())
            }
            _ => Err(invalid("estimator nodes do not match the grid")),
        }
    }
}

/// Kernel weights of the nodes of a sorted axis within the cutoff of `v`.
fn near(axis: &[f64], v: f64, b: f64, out: &mut Vec<(usize, f64)>) {
    out.clear();
    let lo = axis.partition_point(|&a| a < v - CUTOFF * b);
    for (i, &a) in axis.iter().enumerate().skip(lo) {
        let u = (a - v) / b;
        if u > CUTOFF {
            break;
        }
        out.push((i, kernel(u)));
    }
}

/// Monte Carlo estimate: draws `total` samples with `draw` in reproducible
/// parallel batches and accumulates them into copies of `template`.
/// `draw` returns `None` for a sample that should count without contributing.
pub fn mc_kde<F>(template: &Kde, seed: u64, total: usize, draw: F) -> Kde
where
    F: Fn(&mut ChaCha8Rng) -> Option<(f64, f64)> + Sync,
{
    let parts = par_batches(seed, total, |rng, count| {
        let mut acc = template.fresh();
        for _ in 0..count {
            match draw(rng) {
                Some((x, y)) => acc.add(x, y),
                None => acc.add_miss(),
            }
        }
        acc
    });
    let mut out = template.fresh();
    for p in &parts {
        out.merge(p);
    }
    out
}

/// `(K_b * f)(x, y)` for the same Gaussian product kernel, by tensor
/// Gauss-Hermite quadrature with `nodes` points per axis.
pub fn kernel_smooth(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, bw: Bandwidth, nodes: usize) -> f64 {
    let rule = GaussRule::hermite(nodes);
    let mut total = 0.0;
    for (&zy, &wy) in rule.nodes.iter().zip(&rule.weights) {
        for (&zx, &wx) in rule.nodes.iter().zip(&rule.weights) {
            total += wx * wy * f(x + bw.bx * zx, y + bw.by * zy);
        }
    }
    total
}
