use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::gaussian::hat_p1;
use crate::grid::DensityGrid;
use crate::model::ModelSpec;

/// Order-`r` majorant `C^{r+1} t^{r/2} B(1,½)B(3/2,½)···B((r+1)/2,½)`, with the
/// Beta product telescoped to `π^{r/2}/Γ((r+2)/2)`.
pub fn series_majorant(c_fit: f64, t: f64, r: usize) -> f64 {
    let r = r as f64;
    ((r + 1.0) * c_fit.ln() + 0.5 * r * (t * std::f64::consts::PI).ln() - ln_gamma(0.5 * r + 1.0)).exp()
}

/// `Σ_{r ≥ r_from}` of [`series_majorant`]. Converges for every `t` because the
/// Gamma factor grows faster than any geometric sequence.
pub fn series_tail_bound(c_fit: f64, t: f64, r_from: usize) -> f64 {
    let mut total = 0.0;
    let mut r = r_from;
    loop {
        let term = series_majorant(c_fit, t, r);
        total += term;
        // Past the peak of the terms the tail is dominated geometrically.
        let peaked = (r as f64) > 2.0 * c_fit * c_fit * t * std::f64::consts::PI;
        if (peaked && term <= 1e-17 * total) || r > r_from + 100_000 || !total.is_finite() {
            break;
        }
        r += 1;
    }
    total
}

/// Lower-bound clause evaluated on the ball `|Δx|²/t + |Δỹ|²/t³ ≤ C₀`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub c0: f64,
    pub nodes_in_ball: usize,
    /// `min p/p̂_{1/c}` over the ball.
    pub min_ratio: f64,
    /// Fitted constant with `p ≥ C⁻¹ p̂_{1/c}` on the ball.
    pub c_lower: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub c: f64,
    pub t: f64,
    pub nodes: usize,
    /// `max p/p̂_c` over the grid.
    pub c_upper: f64,
    pub argmax: (f64, f64),
    pub lower: LowerBoundReport,
}

/// Fits the constants of the two-sided Gaussian bound on a grid of density
/// values started at `grid.start`.
pub fn gaussian_bound_check(model: &ModelSpec, t: f64, grid: &DensityGrid, c: f64) -> Result<BoundReport> {
    if grid.is_empty() {
        return Err(invalid("bound check needs a non-empty grid"));
    }
    if !(c > 0.0) || !(t > 0.0) {
        return Err(invalid("bound check needs c > 0 and t > 0"));
    }
    model.check_point(&grid.start)?;
    let (x0, y0) = grid.start.xy();
    let c0 = 1.0;
    let mut c_upper = f64::NEG_INFINITY;
    let mut argmax = (f64::NAN, f64::NAN);
    let mut min_ratio = f64::INFINITY;
    let mut in_ball = 0;
    for (i, (x, y)) in grid.nodes().into_iter().enumerate() {
        let p = grid.values[i];
        let upper = hat_p1(c, t, x0, y0, x, y);
        if upper > 0.0 && p / upper > c_upper {
            c_upper = p / upper;
            argmax = (x, y);
        }
        let dx = x - x0;
        let dy = y - y0 - 0.5 * (x + x0) * t;
        if dx * dx / t + dy * dy / (t * t * t) <= c0 {
            in_ball += 1;
            min_ratio = min_ratio.min(p / hat_p1(1.0 / c, t, x0, y0, x, y));
        }
    }
    let holds = in_ball > 0 && min_ratio > 0.0;
    Ok(BoundReport {
        c,
        t,
        nodes: grid.len(),
        c_upper,
        argmax,
        lower: LowerBoundReport {
            c0,
            nodes_in_ball: in_ball,
            min_ratio: if in_ball > 0 { min_ratio } else { f64::NAN },
            c_lower: if holds { 1.0 / min_ratio } else { f64::INFINITY },
            holds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta;

    #[test]
    fn majorant_small_orders() {
        assert!((series_majorant(1.7, 0.3, 0) - 1.7).abs() < 1e-14);
        let expect = 1.7f64.powi(2) * 0.3f64.sqrt() * 2.0;
        assert!((series_majorant(1.7, 0.3, 1) - expect).abs() < 1e-13 * expect);
    }

    #[test]
    fn telescoped_beta_product() {
        for r in 0..=6usize {
            let direct: f64 = (0..r).map(|k| beta(0.5 * k as f64 + 1.0, 0.5)).product();
            let closed = series_majorant(1.0, 1.0, r);
            assert!((direct - closed).abs() < 1e-12 * direct, "r={r}");
        }
    }

    #[test]
    fn tail_is_monotone_in_start_order() {
        let mut last = f64::INFINITY;
        for r in 0..10 {
            let v = series_tail_bound(2.0, 0.5, r);
            assert!(v < last && v >= 0.0);
            last = v;
        }
    }
}
