//! Characteristic function of the aggregated innovation pair and its Fourier
//! inversion into a density table (`d = 1`, so the transforms are planar).
//!
//! `φ_n(τ₁, τ₂) = Π_{j<n} φ((τ₁ + (1 - j/n)τ₂)/√n)`. Its Gaussian part is
//! `exp(-κ τᵀC_nτ)` with `C_n` the innovation covariance, which is badly
//! conditioned for small `n`. The lattice is therefore square in whitened
//! frequencies `ω`, with `τ = Mω` and `M = L⁻ᵀ` for `LLᵀ = C_n`. Because `M`
//! is upper triangular the inversion still factors into two one-dimensional
//! passes.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{innovation_covariance, BaseDistribution, InnovationDensity};
use crate::error::{invalid, Error, Result};
use crate::gaussian::Sym2;
use crate::grid::linspace;
use crate::rng::stream_rng;

/// `φ_n(τ₁, τ₂)` as an exact `n`-fold product.
pub fn phi_n(base: BaseDistribution, n: usize, tau1: f64, tau2: f64) -> Complex<f64> {
    let root = (n as f64).sqrt();
    let mut acc = Complex::new(1.0, 0.0);
    for j in 0..n {
        acc *= base.phi((tau1 + (1.0 - j as f64 / n as f64) * tau2) / root);
    }
    acc
}

/// Empirical `C(n) = max |φ_n(τ)|(1 + |τ|³)` over a square lattice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub n: usize,
    pub radius: f64,
    pub nodes: usize,
    pub c_n: f64,
    pub argmax: (f64, f64),
    pub finite: bool,
}

/// Scans `[-radius, radius]²` with `nodes` points per axis.
pub fn decay_check(base: BaseDistribution, n: usize, radius: f64, nodes: usize) -> Result<DecayReport> {
    if n == 0 || !(radius > 0.0) || nodes < 2 {
        return Err(invalid("decay check needs n >= 1, radius > 0 and at least 2 nodes"));
    }
    let axis = linspace(-radius, radius, nodes);
    let mut c_n: f64 = 0.0;
    let mut argmax = (0.0, 0.0);
    for &t2 in &axis {
        for &t1 in &axis {
            let r = (t1 * t1 + t2 * t2).sqrt();
            let v = phi_n(base, n, t1, t2).norm() * (1.0 + r * r * r);
            if v > c_n {
                c_n = v;
                argmax = (t1, t2);
            }
        }
    }
    Ok(DecayReport { n, radius, nodes, c_n, argmax, finite: c_n.is_finite() })
}

/// Lattice and output-grid parameters of the inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSettings {
    /// Half-width of the whitened frequency lattice; chosen from the decay of
    /// `|φ_n|` when absent.
    pub radius: Option<f64>,
    /// Largest frequency spacing. Each axis is refined further so that the
    /// periodic copies of `f_n` stay clear of the output grid.
    pub step: f64,
    /// `|φ_n|` on the lattice boundary must fall below this.
    pub decay_tolerance: f64,
    pub max_radius: f64,
    /// Output grid `[-out_radius, out_radius]²` with spacing `out_step`.
    pub out_radius: f64,
    pub out_step: f64,
    pub mass_tolerance: f64,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            radius: None,
            step: 0.25,
            decay_tolerance: 1e-13,
            max_radius: 200.0,
            out_radius: 5.0,
            out_step: 0.1,
            mass_tolerance: 1e-3,
        }
    }
}

impl InversionSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.step) || !pos(self.max_radius) || !pos(self.out_radius) || !pos(self.out_step) {
            return Err(invalid("inversion spacings and radii must be positive"));
        }
        if let Some(r) = self.radius {
            if !pos(r) {
                return Err(invalid("inversion radius must be positive"));
            }
        }
        if !pos(self.decay_tolerance) || !pos(self.mass_tolerance) {
            return Err(invalid("inversion tolerances must be positive"));
        }
        Ok(())
    }
}

/// `φ_n` tabulated on the lattice `τ = Mω`, `ω ∈ [-R, R]²` with spacings
/// `step[0]`, `step[1]`.
#[derive(Clone, Debug)]
pub struct CharFnTable {
    pub base: BaseDistribution,
    pub n: usize,
    pub radius: f64,
    pub step: [f64; 2],
    /// Upper-triangular `M = [[m11, m12], [0, m22]]`.
    pub transform: [f64; 3],
    /// Nodes per axis.
    pub size: [usize; 2],
    /// Row-major with `ω₂` slowest.
    pub values: Vec<Complex<f64>>,
    /// Largest `|φ_n|` on the lattice boundary.
    pub boundary_max: f64,
}

fn whitening(n: usize) -> Result<[f64; 3]> {
    let (l11, l21, l22) = innovation_covariance(n)
        .cholesky()
        .ok_or_else(|| invalid(format!("innovation covariance is singular for n = {n}")))?;
    // L⁻ᵀ for lower-triangular L.
    Ok([1.0 / l11, -l21 / (l11 * l22), 1.0 / l22])
}

impl CharFnTable {
    /// Tabulates `φ_n`, choosing the radius from the decay unless given.
    pub fn build(base: BaseDistribution, n: usize, settings: &InversionSettings) -> Result<Self> {
        settings.validate()?;
        let m = whitening(n)?;
        // The inverse transform repeats on the lattice L·diag(2π/Δ₁, 2π/Δ₂)ℤ²;
        // each period must clear the output window by a margin.
        let period = 2.0 * settings.out_radius + 10.0;
        let (l11, l22) = (1.0 / m[0], 1.0 / m[2]);
        let target = [settings.step.min(2.0 * PI * l11 / period), settings.step.min(2.0 * PI * l22 / period)];
        let phi = |w1: f64, w2: f64| phi_n(base, n, m[0] * w1 + m[1] * w2, m[2] * w2);
        let boundary = |r: f64| {
            let mut worst: f64 = 0.0;
            for (axis, &d) in target.iter().enumerate() {
                let k = (2.0 * r / d).round() as usize;
                for i in 0..=k {
                    let s = -r + i as f64 * (2.0 * r / k as f64);
                    for e in [-r, r] {
                        let (w1, w2) = if axis == 0 { (s, e) } else { (e, s) };
                        worst = worst.max(phi(w1, w2).norm());
                    }
                }
            }
            worst
        };
        let radius = match settings.radius {
            Some(r) => r,
            None => {
                let mut r = 8.0;
                while boundary(r) > settings.decay_tolerance {
                    r += 4.0;
                    if r > settings.max_radius {
                        return Err(Error::InversionQuality(format!(
                            "|φ_n| has not decayed below {:.1e} within radius {}",
                            settings.decay_tolerance, settings.max_radius
                        )));
                    }
                }
                r
            }
        };
        let size = target.map(|d| 2 * (radius / d).ceil() as usize + 1);
        let step = [0, 1].map(|a| 2.0 * radius / (size[a] - 1) as f64);
        let ax = |a: usize| -> Vec<f64> { (0..size[a]).map(|i| -radius + i as f64 * step[a]).collect() };
        let (ax1, ax2) = (ax(0), ax(1));
        let values = ax2.iter().flat_map(|&w2| ax1.iter().map(move |&w1| (w1, w2))).map(|(w1, w2)| phi(w1, w2)).collect();
        Ok(Self { base, n, radius, step, transform: m, size, values, boundary_max: boundary(radius) })
    }

    /// `ω` coordinate of node `i` along `axis` (0 or 1).
    pub fn omega(&self, axis: usize, i: usize) -> f64 {
        -self.radius + i as f64 * self.step[axis]
    }

    /// `(τ₁, τ₂)` of lattice node `(i, k)`.
    pub fn tau(&self, i: usize, k: usize) -> (f64, f64) {
        let (w1, w2) = (self.omega(0, i), self.omega(1, k));
        (self.transform[0] * w1 + self.transform[1] * w2, self.transform[2] * w2)
    }

    pub fn value(&self, i: usize, k: usize) -> Complex<f64> {
        self.values[k * self.size[0] + i]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# n={}", self.n)?;
        writeln!(out, "# base={}", self.base.key())?;
        writeln!(out, "# radius={}", self.radius)?;
        writeln!(out, "# step={},{}", self.step[0], self.step[1])?;
        writeln!(out, "# transform=[[{}, {}], [0, {}]]", self.transform[0], self.transform[1], self.transform[2])?;
        writeln!(out, "omega1,omega2,tau1,tau2,re,im")?;
        for k in 0..self.size[1] {
            for i in 0..self.size[0] {
                let (t1, t2) = self.tau(i, k);
                let v = self.value(i, k);
                writeln!(out, "{},{},{t1},{t2},{},{}", self.omega(0, i), self.omega(1, k), v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Tabulated innovation density `f_n` on a square output grid.
#[derive(Clone, Debug, Serialize)]
pub struct InvertedDensity {
    pub n: usize,
    pub base: BaseDistribution,
    pub axis: Vec<f64>,
    /// Row-major with `θ₂` slowest.
    pub values: Vec<f64>,
    /// Largest `|Im|` of the inverse transform.
    pub imag_residue: f64,
    pub raw_min: f64,
    /// Trapezoid mass of the raw table.
    pub mass: f64,
    pub renormalized: bool,
}

/// `f_n(θ) = (2π)⁻²∫e^{-i⟨θ,τ⟩}φ_n(τ)dτ` by the trapezoid rule on the table.
pub fn invert_density(table: &CharFnTable, settings: &InversionSettings) -> Result<InvertedDensity> {
    settings.validate()?;
    let k = (settings.out_radius / settings.out_step).round() as usize;
    let axis: Vec<f64> = (0..=2 * k).map(|i| (i as f64 - k as f64) * settings.out_step).collect();
    let no = axis.len();
    let [m11, m12, m22] = table.transform;
    let [n1, n2] = table.size;
    let om1: Vec<f64> = (0..n1).map(|i| table.omega(0, i)).collect();
    let om2: Vec<f64> = (0..n2).map(|i| table.omega(1, i)).collect();
    // ⟨θ, Mω⟩ = (m11θ₁)ω₁ + (m12θ₁ + m22θ₂)ω₂.
    // First pass over ω₁ for every θ₁ and lattice row.
    let mut partial = vec![Complex::new(0.0, 0.0); no * n2];
    for (a, &th1) in axis.iter().enumerate() {
        let freq = m11 * th1;
        let rot: Vec<Complex<f64>> = om1.iter().map(|&w| Complex::from_polar(1.0, -freq * w)).collect();
        for row in 0..n2 {
            let vals = &table.values[row * n1..(row + 1) * n1];
            let mut acc = Complex::new(0.0, 0.0);
            for (v, r) in vals.iter().zip(&rot) {
                acc += v * r;
            }
            partial[a * n2 + row] = acc;
        }
    }
    let scale = table.step[0] * table.step[1] * m11 * m22 / (4.0 * PI * PI);
    let mut values = vec![0.0; no * no];
    let mut imag_residue: f64 = 0.0;
    for (a, &th1) in axis.iter().enumerate() {
        let row = &partial[a * n2..(a + 1) * n2];
        for (b, &th2) in axis.iter().enumerate() {
            let freq = m12 * th1 + m22 * th2;
            let mut acc = Complex::new(0.0, 0.0);
            for (v, &w) in row.iter().zip(&om2) {
                acc += v * Complex::from_polar(1.0, -freq * w);
            }
            let f = acc * scale;
            values[b * no + a] = f.re;
            imag_residue = imag_residue.max(f.im.abs());
        }
    }
    let h = settings.out_step;
    let mass = trapezoid(&values, no, h, |_, _| 1.0);
    let raw_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if (mass - 1.0).abs() > settings.mass_tolerance {
        return Err(Error::InversionQuality(format!(
            "mass {mass:.6} on the output grid is outside 1 ± {:.1e}",
            settings.mass_tolerance
        )));
    }
    if table.boundary_max > settings.decay_tolerance {
        return Err(Error::InversionQuality(format!(
            "lattice truncated where |φ_n| = {:.2e} > {:.1e}",
            table.boundary_max, settings.decay_tolerance
        )));
    }
    Ok(InvertedDensity { n: table.n, base: table.base, axis, values, imag_residue, raw_min, mass, renormalized: false })
}

fn trapezoid(values: &[f64], no: usize, h: f64, g: impl Fn(usize, usize) -> f64) -> f64 {
    let w = |i: usize| if i == 0 || i + 1 == no { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for b in 0..no {
        for a in 0..no {
            total += w(a) * w(b) * values[b * no + a] * g(a, b);
        }
    }
    total * h * h
}

/// Cubic Lagrange stencil on a uniform axis.
fn stencil(axis: &[f64], v: f64) -> Option<(usize, [f64; 4])> {
    let n = axis.len();
    let step = axis[1] - axis[0];
    let q = (v - axis[0]) / step;
    if !(q >= 0.0 && q <= (n - 1) as f64) {
        return None;
    }
    let i0 = (q.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let u = q - i0 as f64;
    let (u1, u2, u3) = (u - 1.0, u - 2.0, u - 3.0);
    Some((i0, [-u1 * u2 * u3 / 6.0, u * u2 * u3 / 2.0, -u * u1 * u3 / 2.0, u * u1 * u2 / 6.0]))
}

/// Fitted `ψ(θ) = C/(1 + |θ|^{S+2d+1})` dominating `f_n` and its finite
/// differences up to order 4.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub s: u32,
    pub exponent: u32,
    /// Fitted `C` for derivative orders 0 through 4 (pure axis differences,
    /// plus the mixed `∂₁∂₂` folded into order 2).
    pub c_by_order: [f64; 5],
    pub c_fit: f64,
    /// `∫|θ|^S ψ(θ)dθ < ∞`, i.e. `exponent - S > 2`.
    pub moment_integrable: bool,
}

impl InvertedDensity {
    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn value(&self, a: usize, b: usize) -> f64 {
        self.values[b * self.len() + a]
    }

    fn step(&self) -> f64 {
        self.axis[1] - self.axis[0]
    }

    /// Copy divided by its mass.
    pub fn renormalized(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v /= self.mass;
        }
        out.mass = 1.0;
        out.raw_min = self.raw_min / self.mass;
        out.renormalized = true;
        out
    }

    /// Cubic interpolation; zero outside the table.
    pub fn interp(&self, u: f64, v: f64) -> f64 {
        let (Some((i0, wx)), Some((j0, wy))) = (stencil(&self.axis, u), stencil(&self.axis, v)) else {
            return 0.0;
        };
        let no = self.len();
        let mut acc = 0.0;
        for (b, wb) in wy.iter().enumerate() {
            let row = &self.values[(j0 + b) * no + i0..(j0 + b) * no + i0 + 4];
            acc += wb * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
        }
        acc
    }

    /// Trapezoid first and second moments `(mean, covariance)`.
    pub fn moments(&self) -> ([f64; 2], Sym2) {
        let (no, h) = (self.len(), self.step());
        let ax = &self.axis;
        let mass = trapezoid(&self.values, no, h, |_, _| 1.0);
        let e = |g: &dyn Fn(usize, usize) -> f64| trapezoid(&self.values, no, h, g) / mass;
        let m1 = e(&|a, _| ax[a]);
        let m2 = e(&|_, b| ax[b]);
        let cov = Sym2::new(
            e(&|a, _| ax[a] * ax[a]) - m1 * m1,
            e(&|a, b| ax[a] * ax[b]) - m1 * m2,
            e(&|_, b| ax[b] * ax[b]) - m2 * m2,
        );
        ([m1, m2], cov)
    }

    /// Fits the envelope with moment order `s`.
    pub fn psi_envelope(&self, s: u32) -> EnvelopeReport {
        let exponent = s + 3;
        let (no, h) = (self.len(), self.step());
        let f = |a: isize, b: isize| -> f64 {
            if a < 0 || b < 0 || a >= no as isize || b >= no as isize {
                0.0
            } else {
                self.values[b as usize * no + a as usize]
            }
        };
        let diff = |a: isize, b: isize, order: usize, axis: usize| -> f64 {
            let at = |k: isize| if axis == 0 { f(a + k, b) } else { f(a, b + k) };
            match order {
                0 => at(0),
                1 => (at(1) - at(-1)) / (2.0 * h),
                2 => (at(1) - 2.0 * at(0) + at(-1)) / (h * h),
                3 => (at(2) - 2.0 * at(1) + 2.0 * at(-1) - at(-2)) / (2.0 * h * h * h),
                _ => (at(2) - 4.0 * at(1) + 6.0 * at(0) - 4.0 * at(-1) + at(-2)) / (h * h * h * h),
            }
        };
        let mut c_by_order = [0.0f64; 5];
        for b in 2..no as isize - 2 {
            for a in 2..no as isize - 2 {
                let r = (self.axis[a as usize].powi(2) + self.axis[b as usize].powi(2)).sqrt();
                let weight = 1.0 + r.powi(exponent as i32);
                for (order, c) in c_by_order.iter_mut().enumerate() {
                    let mut d = diff(a, b, order, 0).abs().max(diff(a, b, order, 1).abs());
                    if order == 2 {
                        let mixed = (f(a + 1, b + 1) - f(a + 1, b - 1) - f(a - 1, b + 1) + f(a - 1, b - 1)) / (4.0 * h * h);
                        d = d.max(mixed.abs());
                    }
                    *c = c.max(d * weight);
                }
            }
        }
        EnvelopeReport {
            s,
            exponent,
            c_fit: c_by_order.iter().copied().fold(0.0, f64::max),
            c_by_order,
            moment_integrable: exponent > s + 2,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# n={}", self.n)?;
        writeln!(out, "# base={}", self.base.key())?;
        writeln!(out, "# mass={}", self.mass)?;
        writeln!(out, "# raw_min={}", self.raw_min)?;
        writeln!(out, "# imag_residue={}", self.imag_residue)?;
        writeln!(out, "# renormalized={}", self.renormalized)?;
        writeln!(out, "theta1,theta2,density")?;
        let no = self.len();
        for b in 0..no {
            for a in 0..no {
                writeln!(out, "{},{},{}", self.axis[a], self.axis[b], self.values[b * no + a])?;
            }
        }
        Ok(())
    }
}

impl InnovationDensity for InvertedDensity {
    fn n(&self) -> usize {
        self.n
    }

    fn density(&self, u: f64, v: f64) -> f64 {
        self.interp(u, v)
    }
}

/// Lower bound `max_j |τ₁ + (1 - j/n)τ₂|/√n ≥ |τ|·(c n)^{-3/2}` checked at
/// random frequencies, with the smallest admissible `c` fitted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub n: usize,
    pub samples: usize,
    /// `min` over samples of `max_j |τ₁ + (1 - j/n)τ₂|/(√n|τ|)`.
    pub min_ratio: f64,
    pub c_fit: f64,
    pub holds: bool,
}

pub fn partition_bound(n: usize, samples: usize, seed: u64) -> Result<PartitionReport> {
    if n == 0 || samples == 0 {
        return Err(invalid("partition bound needs n >= 1 and samples >= 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..samples {
        let r: f64 = 10f64.powf(rng.random_range(-2.0..3.0));
        let angle: f64 = rng.random_range(0.0..2.0 * PI);
        let (t1, t2) = (r * angle.cos(), r * angle.sin());
        min_ratio = min_ratio.min(partition_ratio(n, t1, t2));
    }
    let c_fit = min_ratio.powf(-2.0 / 3.0) / n as f64;
    Ok(PartitionReport { n, samples, min_ratio, c_fit, holds: min_ratio > 0.0 && c_fit.is_finite() })
}

/// `max_j |τ₁ + (1 - j/n)τ₂|/(√n|τ|)`.
pub fn partition_ratio(n: usize, t1: f64, t2: f64) -> f64 {
    let norm = (t1 * t1 + t2 * t2).sqrt();
    let best = (0..n).map(|j| (t1 + (1.0 - j as f64 / n as f64) * t2).abs()).fold(0.0, f64::max);
    best / ((n as f64).sqrt() * norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_and_single_factor() {
        for base in [BaseDistribution::Gaussian, BaseDistribution::ScaledUniformMixture] {
            let v = phi_n(base, 4, 0.0, 0.0);
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-15);
            assert!((phi_n(base, 1, 0.7, -0.2) - base.phi(0.5)).norm() < 1e-15);
        }
    }

    #[test]
    fn gaussian_product_closed_form() {
        for n in [2, 3, 7] {
            let c = innovation_covariance(n);
            for (t1, t2) in [(0.3, -1.2), (2.0, 0.5)] {
                let expect = (-0.5 * c.quad([t1, t2])).exp();
                assert!((phi_n(BaseDistribution::Gaussian, n, t1, t2).re - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn hermitian_and_bounded() {
        let base = BaseDistribution::ScaledUniformMixture;
        for (t1, t2) in [(0.4, 1.3), (-3.0, 7.5), (11.0, -2.0)] {
            let a = phi_n(base, 3, t1, t2);
            let b = phi_n(base, 3, -t1, -t2);
            assert!((a - b.conj()).norm() < 1e-15);
            assert!(a.norm() <= 1.0);
        }
    }

    #[test]
    fn whitening_inverts_cholesky_transpose() {
        let m = whitening(3).unwrap();
        let c = innovation_covariance(3);
        // Mᵀ C M = I.
        let col = |j: usize| if j == 0 { [m[0], 0.0] } else { [m[1], m[2]] };
        for i in 0..2 {
            for j in 0..2 {
                let ci = col(i);
                let cj = col(j);
                let v = c.apply(cj);
                let e = ci[0] * v[0] + ci[1] * v[1];
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gaussian_inversion_is_exact() {
        let settings = InversionSettings::default();
        let table = CharFnTable::build(BaseDistribution::Gaussian, 2, &settings).unwrap();
        let f = invert_density(&table, &settings).unwrap();
        let c = innovation_covariance(2);
        let prec = c.inverse().unwrap();
        let norm = 1.0 / (2.0 * PI * c.det().sqrt());
        let mut worst: f64 = 0.0;
        for b in 0..f.len() {
            for a in 0..f.len() {
                let exact = norm * (-0.5 * prec.quad([f.axis[a], f.axis[b]])).exp();
                worst = worst.max((f.value(a, b) - exact).abs());
            }
        }
        assert!(worst < 1e-6, "sup error {worst}");
        assert!(f.imag_residue < 1e-10);
    }

    #[test]
    fn partition_ratio_has_a_floor() {
        // Exact minimum over directions by a fine angular scan.
        let n = 8;
        let exact = (0..200_000)
            .map(|k| {
                let a = PI * k as f64 / 200_000.0;
                partition_ratio(n, a.cos(), a.sin())
            })
            .fold(f64::INFINITY, f64::min);
        let rep = partition_bound(n, 1000, 3).unwrap();
        assert!(rep.holds);
        assert!(rep.min_ratio >= exact - 1e-9);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let settings = InversionSettings::default();
        let table = CharFnTable::build(BaseDistribution::Gaussian, 3, &settings).unwrap();
        let f = invert_density(&table, &settings).unwrap();
        let (a, b) = (37, 61);
        assert!((f.interp(f.axis[a], f.axis[b]) - f.value(a, b)).abs() < 1e-14);
    }
}
