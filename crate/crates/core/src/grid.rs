//! Rectangular evaluation lattices over `(x', y')` for `d = 1`.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::{ModelSpec, PhasePoint};

/// Density values (and optional standard errors) on a tensor grid. Values are
/// stored row-major with `y` the slow index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Option<Vec<f64>>,
    pub t: f64,
    pub start: PhasePoint,
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl DensityGrid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, t: f64, start: PhasePoint) -> Result<Self> {
        if xs.is_empty() || ys.is_empty() {
            return Err(invalid("grid axes must be non-empty"));
        }
        if start.dim() != 1 {
            return Err(invalid("density grids are two-dimensional (d = 1)"));
        }
        let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !sorted(&xs) || !sorted(&ys) {
            return Err(invalid("grid axes must be finite and strictly increasing"));
        }
        let n = xs.len() * ys.len();
        Ok(Self { xs, ys, values: vec![0.0; n], std_err: None, t, start })
    }

    /// Grid centred on the frozen transport of `start` spanning `width`
    /// standard deviations (at diffusion `λ_max`) in each direction.
    pub fn around_transport(
        model: &ModelSpec,
        t: f64,
        start: &PhasePoint,
        nx: usize,
        ny: usize,
        width: f64,
    ) -> Result<Self> {
        model.check_point(start)?;
        if !(t > 0.0) || !(width > 0.0) || nx == 0 || ny == 0 {
            return Err(invalid("grid needs t > 0, width > 0 and at least one node per axis"));
        }
        let (x0, y0) = start.xy();
        let b0 = model.b1(x0, y0);
        let a = model.lambda_max.max(model.lambda_min).max(1e-12);
        let (cx, cy) = (x0 + b0 * t, y0 + x0 * t + 0.5 * b0 * t * t);
        let (hx, hy) = (width * (a * t).sqrt(), width * (a * t * t * t / 3.0).sqrt());
        Self::new(linspace(cx - hx, cx + hx, nx), linspace(cy - hy, cy + hy, ny), t, start.clone())
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.xs[idx % self.nx()], self.ys[idx / self.nx()])
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx() + ix]
    }

    pub fn fill(&mut self, f: impl Fn(f64, f64) -> f64) {
        for i in 0..self.len() {
            let (x, y) = self.node(i);
            self.values[i] = f(x, y);
        }
    }

    /// Trapezoid-rule integral of the values.
    pub fn mass(&self) -> f64 {
        let w = |v: &[f64], i: usize| -> f64 {
            if v.len() == 1 {
                return 1.0;
            }
            let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
            let right = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut total = 0.0;
        for iy in 0..self.ny() {
            let wy = w(&self.ys, iy);
            for ix in 0..self.nx() {
                total += wy * w(&self.xs, ix) * self.value(ix, iy);
            }
        }
        total
    }

    pub fn max_abs_diff(&self, other: &DensityGrid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// CSV with `# key=value` metadata lines and header `x,y,density,std_err`.
    pub fn write_csv<W: Write>(&self, mut out: W, meta: &[(String, String)]) -> io::Result<()> {
        writeln!(out, "# t={}", self.t)?;
        writeln!(out, "# start_x={}", self.start.x[0])?;
        writeln!(out, "# start_y={}", self.start.y[0])?;
        writeln!(out, "# axes=x (position; scale sqrt(t)), y (integrated position; scale t^1.5)")?;
        for (k, v) in meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "x,y,density,std_err")?;
        for i in 0..self.len() {
            let (x, y) = self.node(i);
            match &self.std_err {
                Some(se) => writeln!(out, "{x},{y},{},{}", self.values[i], se[i])?,
                None => writeln!(out, "{x},{y},{},", self.values[i])?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_mass_of_linear_function() {
        let mut g = DensityGrid::new(linspace(0.0, 1.0, 11), linspace(0.0, 2.0, 5), 1.0, PhasePoint::origin(1)).unwrap();
        g.fill(|x, y| x + y);
        // ∫₀¹∫₀² (x+y) dy dx = 1 + 2 = 3
        assert!((g.mass() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_axes() {
        assert!(DensityGrid::new(vec![], vec![0.0], 1.0, PhasePoint::origin(1)).is_err());
        assert!(DensityGrid::new(vec![1.0, 0.0], vec![0.0], 1.0, PhasePoint::origin(1)).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut g = DensityGrid::new(vec![0.0, 1.0], vec![0.5], 0.25, PhasePoint::origin(1)).unwrap();
        g.fill(|x, _| x);
        let mut buf = Vec::new();
        g.write_csv(&mut buf, &[("model".into(), "constant".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines, ["x,y,density,std_err", "0,0.5,0,", "1,0.5,1,"]);
        assert!(text.contains("# model=constant"));
    }
}
