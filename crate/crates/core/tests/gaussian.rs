use kolmo_core::gaussian::{chapman_kolmogorov_defect, frozen_density, frozen_density_dx, frozen_moments, hat_p};
use kolmo_core::rng::stream_rng;
use kolmo_core::{ModelFamily, ModelSpec, PhasePoint, QuadratureSpec};
use rand::Rng;

fn sin_model() -> ModelSpec {
    ModelSpec::new(1, ModelFamily::Trig { amp: 0.5, freq_y: 1.0, freq_x: 0.0 })
}

#[test]
fn covariance_blocks_match_riemann_sums() {
    let model = sin_model();
    let (t, xp, yp) = (0.5, 1.0, 1.0);
    let freeze = PhasePoint::scalar(xp, yp);
    let mom = frozen_moments(&model, t, &PhasePoint::origin(1), &freeze, &QuadratureSpec::default()).unwrap();
    // Midpoint sums over s ∈ [0, t] of ã_s = a(x', y' - x'(t - s)).
    let panels = 1_000_000;
    let ds = t / panels as f64;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for k in 0..panels {
        let s = (k as f64 + 0.5) * ds;
        let a = 1.0 + 0.5 * (yp - xp * (t - s)).sin();
        m0 += a * ds;
        m1 += (t - s) * a * ds;
        m2 += (t - s) * (t - s) * a * ds;
    }
    for (got, want) in [(mom.m0[(0, 0)], m0), (mom.m1[(0, 0)], m1), (mom.m2[(0, 0)], m2)] {
        assert!((got - want).abs() < 1e-8 * want.abs(), "{got} vs {want}");
    }
    assert!((mom.cov[(0, 0)] - m0).abs() < 1e-8 * m0);
    assert!((mom.cov[(1, 1)] - m2).abs() < 1e-8 * m2);
}

#[test]
fn start_derivatives_match_finite_differences() {
    let model = ModelSpec::perturbed_default(1);
    let quad = QuadratureSpec::default();
    let mut rng = stream_rng(17, 0);
    let h = 1e-4;
    for _ in 0..20 {
        let t: f64 = rng.random_range(0.2..1.5);
        let start = PhasePoint::scalar(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let freeze = PhasePoint::scalar(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let (x0, y0) = start.xy();
        let target = PhasePoint::scalar(x0 + rng.random_range(-0.8..0.8) * t.sqrt(), y0 + x0 * t + rng.random_range(-0.3..0.3) * t.powf(1.5));
        let p = |dx: f64| frozen_density(&model, t, &PhasePoint::scalar(x0 + dx, y0), &freeze, &target, &quad).unwrap();
        let (pm, p0, pp) = (p(-h), p(0.0), p(h));
        let fd1 = (pp - pm) / (2.0 * h);
        let fd2 = (pp - 2.0 * p0 + pm) / (h * h);
        let d1 = frozen_density_dx(&model, t, &start, &freeze, &target, &[1], &quad).unwrap();
        let d2 = frozen_density_dx(&model, t, &start, &freeze, &target, &[2], &quad).unwrap();
        let d0 = frozen_density_dx(&model, t, &start, &freeze, &target, &[0], &quad).unwrap();
        assert_eq!(d0, p0);
        // Scale floors keep the comparison meaningful near sign changes.
        let floor1 = 1e-3 * p0 / t.sqrt();
        let floor2 = 1e-3 * p0 / t;
        assert!((d1 - fd1).abs() <= 1e-5 * (d1.abs() + floor1), "first: {d1} vs {fd1} at t={t}");
        assert!((d2 - fd2).abs() <= 1e-5 * (d2.abs() + floor2), "second: {d2} vs {fd2} at t={t}");
    }
}

#[test]
fn third_order_is_rejected() {
    let model = ModelSpec::constant_unit(1);
    let p = PhasePoint::origin(1);
    assert!(frozen_density_dx(&model, 1.0, &p, &p, &p, &[3], &QuadratureSpec::default()).is_err());
}

#[test]
fn twice_the_envelope_dominates_the_unit_density() {
    let model = ModelSpec::constant_unit(1);
    let quad = QuadratureSpec::default();
    let z0 = PhasePoint::scalar(0.2, -0.4);
    for t in [0.1, 1.0, 3.0] {
        let (x0, y0) = z0.xy();
        let center = PhasePoint::scalar(x0, y0 + x0 * t);
        let ratio = frozen_density(&model, t, &z0, &center, &center, &quad).unwrap() / hat_p(1.0, 1, t, &z0, &center).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12, "t={t}: {ratio}");
        for i in -6..=6 {
            for k in -6..=6 {
                let zp = PhasePoint::scalar(x0 + 0.5 * i as f64 * t.sqrt(), y0 + x0 * t + 0.3 * k as f64 * t.powf(1.5));
                let p = frozen_density(&model, t, &z0, &zp, &zp, &quad).unwrap();
                // p/p̂₁ = 2·exp(-[Δx²/(4t) + 3Δỹ²/t³]), at most 2 with equality at the centre.
                assert!(p <= 2.0 * hat_p(1.0, 1, t, &z0, &zp).unwrap() * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn frozen_density_has_unit_mass() {
    let model = ModelSpec::perturbed_default(1);
    let quad = QuadratureSpec::default();
    let (t, z0, freeze) = (0.4, PhasePoint::scalar(0.3, -0.5), PhasePoint::scalar(0.6, 0.1));
    let mom = frozen_moments(&model, t, &z0, &freeze, &quad).unwrap();
    let (sx, sy) = (mom.cov[(0, 0)].sqrt(), mom.cov[(1, 1)].sqrt());
    let (mx, my) = (mom.mean[0], mom.mean[1]);
    let n = 161;
    let (dx, dy) = (20.0 * sx / (n - 1) as f64, 20.0 * sy / (n - 1) as f64);
    let mut mass = 0.0;
    for i in 0..n {
        for k in 0..n {
            let target = PhasePoint::scalar(mx - 10.0 * sx + i as f64 * dx, my - 10.0 * sy + k as f64 * dy);
            mass += frozen_density(&model, t, &z0, &freeze, &target, &quad).unwrap() * dx * dy;
        }
    }
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
}

#[test]
fn two_dimensional_density_factorises() {
    let model = ModelSpec::perturbed_default(2);
    let scalar = ModelSpec::perturbed_default(1);
    let quad = QuadratureSpec::default();
    let t = 0.7;
    let start = PhasePoint::new(vec![0.1, -0.3], vec![0.4, 0.0]);
    let freeze = PhasePoint::new(vec![0.5, 0.2], vec![1.1, -0.6]);
    let target = PhasePoint::new(vec![0.3, -0.1], vec![0.5, -0.2]);
    let joint = frozen_density(&model, t, &start, &freeze, &target, &quad).unwrap();
    let part = |i: usize| {
        let p = |q: &PhasePoint| PhasePoint::scalar(q.x[i], q.y[i]);
        frozen_density(&scalar, t, &p(&start), &p(&freeze), &p(&target), &quad).unwrap()
    };
    assert!((joint - part(0) * part(1)).abs() < 1e-12 * joint);
}

#[test]
fn semigroup_defect_is_symmetric_on_the_transport_line() {
    let quad = QuadratureSpec::default();
    let mut rng = stream_rng(3, 1);
    for _ in 0..10 {
        let c = rng.random_range(0.5..2.0);
        let t = rng.random_range(0.2..3.0);
        let s = rng.random_range(0.1..0.9) * t;
        let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let z0 = PhasePoint::scalar(x, y);
        let z1 = PhasePoint::scalar(x, y + x * t);
        let a = chapman_kolmogorov_defect(c, s, t, &z0, &z1, &quad).unwrap();
        let b = chapman_kolmogorov_defect(c, t - s, t, &z0, &z1, &quad).unwrap();
        assert!(a.defect < 1e-5 && b.defect < 1e-5);
        assert!((a.convolution - b.convolution).abs() < 1e-10 * a.direct);
    }
}
