//! Cached convolution terms for the nested series.
//!
//! A term `F_r(u, z0, w)` is stored on a fixed grid in whitened coordinates
//! `ξ = L_u⁻¹(w - m_u)`, where `m_u` is the frozen transport of `z0` and
//! `L_u L_uᵀ = a_ref·C_u`. The stored quantity
//! `G = F·det L_u / (φ(ξ)·s^r)`, `s = √u`, is smooth and of order one in both
//! `ξ` and `s`, so it interpolates well: cubic Lagrange in `ξ`, barycentric
//! Chebyshev in `s`.

use std::f64::consts::PI;

/// Frozen transport of the start point, `m_u = (x0 + b0 u, y0 + x0 u + b0 u²/2)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Transport {
    pub x0: f64,
    pub y0: f64,
    pub b0: f64,
    pub a_ref: f64,
}

/// Affine whitening frame at one time.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    pub mean: [f64; 2],
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

impl Transport {
    pub fn mean(&self, u: f64) -> [f64; 2] {
        [self.x0 + self.b0 * u, self.y0 + self.x0 * u + 0.5 * self.b0 * u * u]
    }

    pub fn frame(&self, u: f64) -> Frame {
        let sa = self.a_ref.sqrt();
        let u32 = u * u.sqrt();
        Frame { mean: self.mean(u), l11: sa * u.sqrt(), l21: 0.5 * sa * u32, l22: sa * u32 / 12f64.sqrt() }
    }
}

impl Frame {
    pub fn det(&self) -> f64 {
        self.l11 * self.l22
    }

    #[inline]
    pub fn whiten(&self, w: [f64; 2]) -> [f64; 2] {
        let x1 = (w[0] - self.mean[0]) / self.l11;
        [x1, (w[1] - self.mean[1] - self.l21 * x1) / self.l22]
    }

    #[inline]
    pub fn unwhiten(&self, xi: [f64; 2]) -> [f64; 2] {
        [self.mean[0] + self.l11 * xi[0], self.mean[1] + self.l21 * xi[0] + self.l22 * xi[1]]
    }
}

#[inline]
pub(crate) fn phi_std2(xi: [f64; 2]) -> f64 {
    (-0.5 * (xi[0] * xi[0] + xi[1] * xi[1])).exp() / (2.0 * PI)
}

/// Uniform square grid `[-h, h]²` in `ξ`, row-major with `ξ₂` slowest.
#[derive(Clone, Debug)]
pub(crate) struct XiGrid {
    pub half_width: f64,
    pub step: f64,
    pub n: usize,
}

impl XiGrid {
    pub fn new(half_width: f64, step: f64) -> Self {
        let n = (2.0 * half_width / step).round() as usize + 1;
        Self { half_width, step: 2.0 * half_width / (n - 1) as f64, n }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        let (i, j) = (idx % self.n, idx / self.n);
        [-self.half_width + i as f64 * self.step, -self.half_width + j as f64 * self.step]
    }

    /// Cubic Lagrange weights for one axis: first index and four weights.
    #[inline]
    fn stencil(&self, v: f64) -> Option<(usize, [f64; 4])> {
        let q = (v + self.half_width) / self.step;
        if !(q >= 0.0 && q <= (self.n - 1) as f64) {
            return None;
        }
        let i0 = (q.floor() as isize - 1).clamp(0, self.n as isize - 4) as usize;
        let u = q - i0 as f64;
        let (u1, u2, u3) = (u - 1.0, u - 2.0, u - 3.0);
        Some((i0, [-u1 * u2 * u3 / 6.0, u * u2 * u3 / 2.0, -u * u1 * u3 / 2.0, u * u1 * u2 / 6.0]))
    }

    /// Interpolated value; zero outside the grid.
    #[inline]
    pub fn interp(&self, values: &[f64], xi: [f64; 2]) -> f64 {
        let (Some((i0, wx)), Some((j0, wy))) = (self.stencil(xi[0]), self.stencil(xi[1])) else {
            return 0.0;
        };
        let mut acc = 0.0;
        for (b, wyb) in wy.iter().enumerate() {
            let row = &values[(j0 + b) * self.n + i0..(j0 + b) * self.n + i0 + 4];
            acc += wyb * (wx[0] * row[0] + wx[1] * row[1] + wx[2] * row[2] + wx[3] * row[3]);
        }
        acc
    }
}

/// Chebyshev points of the first kind on `(0, s_max)` with barycentric weights.
#[derive(Clone, Debug)]
pub(crate) struct ChebyshevTimes {
    pub s: Vec<f64>,
    bary: Vec<f64>,
}

impl ChebyshevTimes {
    pub fn new(k: usize, s_max: f64) -> Self {
        let s = (0..k)
            .map(|i| 0.5 * s_max * (1.0 - ((2 * i + 1) as f64 * PI / (2 * k) as f64).cos()))
            .collect();
        let bary = (0..k)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * ((2 * i + 1) as f64 * PI / (2 * k) as f64).sin()
            })
            .collect();
        Self { s, bary }
    }

    /// Interpolation weights at `s`.
    pub fn weights(&self, s: f64) -> Vec<f64> {
        if let Some(hit) = self.s.iter().position(|&sk| sk == s) {
            let mut w = vec![0.0; self.s.len()];
            w[hit] = 1.0;
            return w;
        }
        let raw: Vec<f64> = self.s.iter().zip(&self.bary).map(|(&sk, &b)| b / (s - sk)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / total).collect()
    }
}

/// `G_r` tabulated at Chebyshev times.
#[derive(Clone, Debug)]
pub(crate) struct TimeLattice {
    pub order: usize,
    pub times: ChebyshevTimes,
    /// `values[k][grid index]`.
    pub values: Vec<Vec<f64>>,
}

/// The term at one time, ready for pointwise evaluation in `w`.
#[derive(Clone, Debug)]
pub(crate) struct Slice {
    frame: Frame,
    scale: f64,
    values: Vec<f64>,
}

impl TimeLattice {
    pub fn slice(&self, transport: &Transport, u: f64) -> Slice {
        let s = u.sqrt();
        let w = self.times.weights(s);
        let n = self.values[0].len();
        let mut values = vec![0.0; n];
        for (wk, vk) in w.iter().zip(&self.values) {
            for (acc, v) in values.iter_mut().zip(vk) {
                *acc += wk * v;
            }
        }
        let frame = transport.frame(u);
        Slice { frame, scale: s.powi(self.order as i32) / frame.det(), values }
    }
}

impl Slice {
    /// Slice from stored `G` values at a single time; `scale` multiplies
    /// `G·φ(ξ)` back into the term.
    pub fn new(frame: Frame, scale: f64, values: Vec<f64>) -> Self {
        Self { frame, scale, values }
    }

    #[inline]
    pub fn eval(&self, grid: &XiGrid, w: [f64; 2]) -> f64 {
        let xi = self.frame.whiten(w);
        if xi[0].abs() > grid.half_width || xi[1].abs() > grid.half_width {
            return 0.0;
        }
        grid.interp(&self.values, xi) * phi_std2(xi) * self.scale
    }
}

/// Converts a value `F` at grid point `ξ` and time `u` into the stored `G`.
#[inline]
pub(crate) fn encode(f: f64, frame: &Frame, xi: [f64; 2], order: usize, u: f64) -> f64 {
    f * frame.det() / (phi_std2(xi) * u.sqrt().powi(order as i32))
}
