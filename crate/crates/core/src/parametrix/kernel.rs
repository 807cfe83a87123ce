//! The kernel `H = (L - L̃) p̃`. Terms with `y`-derivatives cancel because both
//! generators share the transport part `x·∂_y`, leaving
//! `½Tr[(a(z) - a(x', y'-x't)) D²ₓp̃] + ⟨b(z) - b(z'), ∇ₓp̃⟩`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::gaussian::{evaluate_frozen, frozen_moments, Frozen1};
use crate::model::{ModelSpec, PhasePoint};
use crate::quadrature::QuadratureSpec;

/// `H(t, z, z')` for any dimension, with the default moment quadrature.
pub fn kernel_h(model: &ModelSpec, t: f64, z: &PhasePoint, zp: &PhasePoint) -> Result<f64> {
    kernel_h_with(model, t, z, zp, &QuadratureSpec::default())
}

pub fn kernel_h_with(
    model: &ModelSpec,
    t: f64,
    z: &PhasePoint,
    zp: &PhasePoint,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let mom = frozen_moments(model, t, z, zp, quad)?;
    let ev = evaluate_frozen(&mom, zp)?;
    let d = model.dim;
    let frozen_start = PhasePoint::new(
        zp.x.clone(),
        zp.y.iter().zip(&zp.x).map(|(y, x)| y - x * t).collect(),
    );
    let da = model.diffusion(z) - model.diffusion(&frozen_start);
    let db = model.drift(z) - model.drift(zp);
    let second: DMatrix<f64> = (&ev.grad_log * ev.grad_log.transpose() + &ev.hess_log) * ev.density;
    let mut h = 0.0;
    for i in 0..d {
        for j in 0..d {
            h += 0.5 * da[(i, j)] * second[(j, i)];
        }
        h += db[i] * ev.density * ev.grad_log[i];
    }
    Ok(h)
}

/// Scalar kernel from start `(x, y)` with a prepared frozen density.
#[inline]
pub(crate) fn kernel1(model: &ModelSpec, frozen: &Frozen1, x: f64, y: f64) -> f64 {
    let (_, dp, d2p) = frozen.density_dx(x, y);
    0.5 * (model.a1(x, y) - frozen.a_start) * d2p + (model.b1(x, y) - frozen.drift) * dp
}
