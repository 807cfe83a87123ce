use kolmo_core::chain::{frozen_chain_moments, gamma_n, innovation_covariance, sample_innovation, BaseDistribution};
use kolmo_core::charfn::{partition_ratio, phi_n};
use kolmo_core::gaussian::{frozen_moments, hat_p};
use kolmo_core::model::{eval_coefficients, hormander_rank, DEFAULT_FD_STEP};
use kolmo_core::rng::stream_rng;
use kolmo_core::{ModelFamily, ModelSpec, PhasePoint, QuadratureSpec};
use proptest::prelude::*;

fn bases() -> impl Strategy<Value = BaseDistribution> {
    prop_oneof![
        Just(BaseDistribution::Gaussian),
        Just(BaseDistribution::ScaledUniformMixture),
        Just(BaseDistribution::StudentLikeSmoothed),
    ]
}

fn models() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (0.0..0.5f64, 0.2..3.0f64, -1.0..1.0f64)
            .prop_map(|(amp, fy, fx)| ModelSpec::new(1, ModelFamily::Trig { amp, freq_y: fy, freq_x: fx })),
        (0.0..0.4f64, 0.2..2.0f64, 0.0..1.0f64, 0.2..2.0f64).prop_map(|(a_amp, a_freq, b_amp, b_scale)| {
            ModelSpec::new(1, ModelFamily::Perturbed { a_amp, a_freq, b_amp, b_scale })
        }),
        (0.0..0.5f64).prop_map(|amp| ModelSpec::new(1, ModelFamily::Hoelder { amp })),
        (-1.0..1.0f64, 0.3..2.0f64).prop_map(|(drift, sigma)| ModelSpec::new(1, ModelFamily::Constant { drift, sigma })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn innovation_covariance_is_nondegenerate(n in 2usize..500) {
        let c = innovation_covariance(n);
        prop_assert!(c.det() > 0.0);
        prop_assert!((c.xx - 1.0).abs() < 1e-14);
        // The limit n → ∞ is the Kolmogorov pair (1/2, 1/3).
        prop_assert!(c.xy > 0.5 - 1e-12 && c.yy > 1.0 / 3.0 - 1e-12);
        prop_assert!((gamma_n(n) - (1.0 + 1.0 / n as f64)).abs() < 1e-15);
    }

    #[test]
    fn aggregated_pair_is_collinear_for_one_micro_step(seed in any::<u64>(), base in bases()) {
        let p = sample_innovation(1, base, &mut stream_rng(seed, 0));
        prop_assert!((p.eta1 - p.eta2).abs() < 1e-12);
    }

    #[test]
    fn phi_n_is_bounded_and_hermitian(base in bases(), n in 1usize..40, t1 in -60.0..60.0f64, t2 in -60.0..60.0f64) {
        let v = phi_n(base, n, t1, t2);
        let w = phi_n(base, n, -t1, -t2);
        prop_assert!(v.norm() <= 1.0 + 1e-12);
        prop_assert!((v.re - w.re).abs() < 1e-12 && (v.im + w.im).abs() < 1e-12);
        prop_assert!((phi_n(base, n, 0.0, 0.0).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn partition_ratio_is_positive(n in 1usize..64, t1 in -100.0..100.0f64, t2 in -100.0..100.0f64) {
        prop_assume!(t1.abs() + t2.abs() > 1e-6);
        let r = partition_ratio(n, t1, t2);
        prop_assert!(r > 0.0);
        prop_assert!(r <= std::f64::consts::SQRT_2 / (n as f64).sqrt() + 1e-12);
    }

    #[test]
    fn chain_covariance_is_positive_definite(model in models(), j in 1usize..40, n in 2usize..10, h in 0.01..0.5f64,
                                             x in -2.0..2.0f64, y in -3.0..3.0f64) {
        let z = PhasePoint::scalar(x, y);
        let m = frozen_chain_moments(&model, j, h, n, &z, &z, j).unwrap();
        prop_assert!(m.cov.xx > 0.0 && m.cov.det() > 0.0);
    }

    #[test]
    fn envelope_scales_with_dilation(c in 0.3..3.0f64, t in 0.05..3.0f64, rho in 0.3..3.0f64,
                                     x in -2.0..2.0f64, y in -2.0..2.0f64, xp in -2.0..2.0f64, yp in -2.0..2.0f64) {
        let (z, zp) = (PhasePoint::scalar(x, y), PhasePoint::scalar(xp, yp));
        let dil = |p: &PhasePoint| PhasePoint::scalar(rho * p.x[0], rho.powi(3) * p.y[0]);
        let base = hat_p(c, 1, t, &z, &zp).unwrap();
        let scaled = hat_p(c, 1, rho * rho * t, &dil(&z), &dil(&zp)).unwrap();
        prop_assert!((scaled * rho.powi(4) - base).abs() <= 1e-10 * base.max(1e-300));
    }

    #[test]
    fn envelope_is_invariant_under_time_reversal(c in 0.3..3.0f64, t in 0.05..3.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64,
                                                 xp in -2.0..2.0f64, yp in -2.0..2.0f64) {
        // Swapping the endpoints and reversing velocities maps the pair onto itself.
        let z = PhasePoint::scalar(x, y);
        let zp = PhasePoint::scalar(xp, yp);
        let fwd = hat_p(c, 1, t, &z, &zp).unwrap();
        let back = hat_p(c, 1, t, &PhasePoint::scalar(-zp.x[0], zp.y[0]), &PhasePoint::scalar(-x, y)).unwrap();
        prop_assert!((fwd - back).abs() <= 1e-12 * fwd);
    }

    #[test]
    fn coefficients_are_deterministic_and_consistent(model in models(), x in -5.0..5.0f64, y in -10.0..10.0f64) {
        let p = PhasePoint::scalar(x, y);
        let a = eval_coefficients(&model, &p).unwrap();
        let b = eval_coefficients(&model, &p).unwrap();
        prop_assert_eq!(&a, &b);
        let s = &a.sigma;
        prop_assert!((s * s.transpose() - &a.a).abs().max() < 1e-14);
        prop_assert!(a.a[(0, 0)] >= model.lambda_min - 1e-12 && a.a[(0, 0)] <= model.lambda_max + 1e-12);
    }

    #[test]
    fn bracket_condition_holds(model in models(), x in -3.0..3.0f64, y in -3.0..3.0f64) {
        prop_assert_eq!(hormander_rank(&model, &PhasePoint::scalar(x, y), DEFAULT_FD_STEP).unwrap(), 2);
    }

    #[test]
    fn frozen_covariance_dominates_scaled_kolmogorov(model in models(), t in 0.05..3.0f64,
                                                     x in -2.0..2.0f64, y in -3.0..3.0f64) {
        let p = PhasePoint::scalar(x, y);
        let m = frozen_moments(&model, t, &p, &p, &QuadratureSpec::default()).unwrap();
        let half = 0.5 * model.lambda_min;
        // Σ - (λ_min/2)·C_t must be positive definite.
        let (c11, c12, c22) = (t, t * t / 2.0, t * t * t / 3.0);
        let (d11, d12, d22) = (m.cov[(0, 0)] - half * c11, m.cov[(0, 1)] - half * c12, m.cov[(1, 1)] - half * c22);
        prop_assert!(d11 > 0.0 && d11 * d22 - d12 * d12 > 0.0);
    }
}

#[test]
fn two_dimensional_models_have_full_rank() {
    let model = ModelSpec::perturbed_default(2);
    let p = PhasePoint::new(vec![0.3, -1.2], vec![0.7, 2.0]);
    assert_eq!(hormander_rank(&model, &p, DEFAULT_FD_STEP).unwrap(), 4);
}
