//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured quantity and wall time. Pass criterion numbers as arguments to run
//! a subset, e.g. `cargo test --test acceptance -- 6 8`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kolmo_core::chain::{
    lil_rate_experiment, sample_innovation, chain_kde_at_points, DiscreteSolver, RateReference, RateSettings,
};
use kolmo_core::charfn::{invert_density, CharFnTable, InversionSettings};
use kolmo_core::gaussian::chapman_kolmogorov_defect;
use kolmo_core::grid::linspace;
use kolmo_core::kde::kernel_smooth;
use kolmo_core::oracle::{digital_asian_probability, AsianEngine};
use kolmo_core::parametrix::{gaussian_bound_check, series_majorant, series_tail_bound};
use kolmo_core::rng::{mix_seed, par_batches};
use kolmo_core::{
    parametrix_density, Bandwidth, BaseDistribution, ChainConfig, DensityGrid, ModelFamily, ModelSpec,
    ParametrixSolver, PhasePoint, QuadratureSpec, SeriesOptions,
};
use statrs::distribution::{ContinuousCDF, Normal};

type Check = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn() -> Check,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "constant-coefficient exactness", limit: Duration::from_secs(5), run: c1_constant_exactness },
    Criterion { id: 2, name: "envelope semigroup", limit: Duration::from_secs(30), run: c2_semigroup },
    Criterion { id: 3, name: "upper bound constant", limit: Duration::from_secs(120), run: c3_upper_bound },
    Criterion { id: 4, name: "series decay", limit: Duration::from_secs(120), run: c4_series_decay },
    Criterion { id: 5, name: "innovation covariance", limit: Duration::from_secs(30), run: c5_innovation_covariance },
    Criterion { id: 6, name: "local limit rate", limit: Duration::from_secs(1200), run: c6_rate },
    Criterion { id: 7, name: "characteristic-function inversion", limit: Duration::from_secs(60), run: c7_charfn },
    Criterion { id: 8, name: "digital Asian cross-check", limit: Duration::from_secs(300), run: c8_asian },
    Criterion { id: 9, name: "discrete parametrix vs KDE", limit: Duration::from_secs(600), run: c9_discrete },
    Criterion { id: 10, name: "Hoelder smoke test", limit: Duration::from_secs(120), run: c10_hoelder },
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {}: {} [{:.1} s, limit {} s{}]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Kolmogorov pair density with `a = 1`, `b = 0`: Gaussian with mean
/// `(x, y + xt)` and covariance `[[t, t²/2], [t²/2, t³/3]]`.
fn kolmogorov_oracle(t: f64, (x, y): (f64, f64), (xp, yp): (f64, f64)) -> f64 {
    let (c11, c12, c22) = (t, t * t / 2.0, t * t * t / 3.0);
    let det = c11 * c22 - c12 * c12;
    let (dx, dy) = (xp - x, yp - y - x * t);
    let q = (c22 * dx * dx - 2.0 * c12 * dx * dy + c11 * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
}

fn c1_constant_exactness() -> Check {
    let model = ModelSpec::constant_unit(1);
    let quad = QuadratureSpec::default();
    let z0 = (0.3, -0.2);
    let mut worst: f64 = 0.0;
    for t in [0.25, 1.0] {
        let grid = DensityGrid::around_transport(&model, t, &PhasePoint::scalar(z0.0, z0.1), 21, 21, 4.0).map_err(err)?;
        for (x, y) in grid.nodes() {
            let got = parametrix_density(&model, t, &PhasePoint::scalar(z0.0, z0.1), &PhasePoint::scalar(x, y), 4, &quad)
                .map_err(err)?
                .value;
            let exact = kolmogorov_oracle(t, z0, (x, y));
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    Ok((worst <= 1e-12, format!("max relative error {worst:.2e} over 2 x 21x21 nodes (tol 1e-12)")))
}

fn c2_semigroup() -> Check {
    let quad = QuadratureSpec::default();
    let z0 = PhasePoint::scalar(0.2, -0.1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c in [0.5, 1.0, 2.0] {
        for t in [0.25f64, 1.0, 4.0] {
            // Target half a standard deviation off the transport line in both scales.
            let z1 = PhasePoint::scalar(0.2 + 0.5 * t.sqrt(), -0.1 + 0.2 * t + 0.3 * t.powf(1.5));
            for frac in [0.25, 0.5, 0.75] {
                let d = chapman_kolmogorov_defect(c, frac * t, t, &z0, &z1, &quad).map_err(err)?;
                worst = worst.max(d.defect);
                count += 1;
            }
        }
    }
    Ok((worst < 1e-5 && count == 27, format!("max relative defect {worst:.2e} over {count} configurations (tol 1e-5)")))
}

fn c3_upper_bound() -> Check {
    let quad = QuadratureSpec::default();
    let t = 0.25;
    let model = ModelSpec::perturbed_default(1);
    let z0 = PhasePoint::origin(1);
    let solver = ParametrixSolver::new(&model, t, &z0, &quad, &SeriesOptions::default()).map_err(err)?;
    let fitted = |n: usize| -> Result<f64, String> {
        let mut grid = DensityGrid::around_transport(&model, t, &z0, n, n, 4.0).map_err(err)?;
        solver.fill_grid(&mut grid).map_err(err)?;
        Ok(gaussian_bound_check(&model, t, &grid, 1.0).map_err(err)?.c_upper)
    };
    let (coarse, fine) = (fitted(31)?, fitted(61)?);
    let drift = (fine / coarse - 1.0).abs();

    // Constant unit model: ratio p/p̂_1 is exactly 2 at the centre.
    let unit = ModelSpec::constant_unit(1);
    let mut grid = DensityGrid::around_transport(&unit, t, &z0, 31, 31, 4.0).map_err(err)?;
    let values: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&(x, y)| parametrix_density(&unit, t, &z0, &PhasePoint::scalar(x, y), 0, &quad).map(|r| r.value))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    grid.values = values;
    let unit_report = gaussian_bound_check(&unit, t, &grid, 1.0).map_err(err)?;
    let center_ok = unit_report.argmax.0.abs() < 1e-12 && unit_report.argmax.1.abs() < 1e-12;
    let unit_err = (unit_report.c_upper - 2.0).abs();
    Ok((
        coarse.is_finite() && drift <= 0.10 && unit_err <= 1e-9 && center_ok,
        format!(
            "perturbed C_upper {coarse:.4} (31x31) vs {fine:.4} (61x61), change {:.2}% (tol 10%); unit model C_upper {:.12} at ({:.1e}, {:.1e})",
            100.0 * drift,
            unit_report.c_upper,
            unit_report.argmax.0,
            unit_report.argmax.1
        ),
    ))
}

fn c4_series_decay() -> Check {
    let quad = QuadratureSpec::default();
    let t = 0.25;
    let model = ModelSpec::perturbed_default(1);
    let z0 = PhasePoint::origin(1);
    let solver = ParametrixSolver::new(&model, t, &z0, &quad, &SeriesOptions::with_r_max(4)).map_err(err)?;
    let targets: Vec<(f64, f64)> =
        linspace(-1.0, 1.0, 5).into_iter().flat_map(|x| linspace(-0.3, 0.3, 5).into_iter().map(move |d| (x, 0.5 * x * t + d))).collect();
    let results = solver.evaluate_many(&targets).map_err(err)?;
    let mut worst_order: f64 = 0.0;
    let mut worst_increment: f64 = 0.0;
    for r in &results {
        for (order, term) in r.terms.iter().enumerate() {
            worst_order = worst_order.max(term.abs() / (series_majorant(r.c_fit, t, order) * r.envelope));
            if order >= 1 {
                // Adding order `order` moves the partial sum by exactly this term.
                worst_increment = worst_increment.max(term.abs() / (series_tail_bound(r.c_fit, t, order) * r.envelope));
            }
        }
    }
    Ok((
        worst_order <= 1.0 && worst_increment <= 1.0,
        format!(
            "max |term_r|/majorant {worst_order:.3}, max increment/tail bound {worst_increment:.3} over {} targets, r <= 4 (both must be <= 1)",
            results.len()
        ),
    ))
}

fn c5_innovation_covariance() -> Check {
    let draws = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for base in [BaseDistribution::Gaussian, BaseDistribution::ScaledUniformMixture] {
        for n in [2usize, 3, 5, 10] {
            let nf = n as f64;
            let exact = [1.0, (nf + 1.0) / (2.0 * nf), (2.0 * nf * nf + 3.0 * nf + 1.0) / (6.0 * nf * nf)];
            let parts = par_batches(mix_seed(&[5, n as u64, base as u64]), draws, |rng, count| {
                let mut s = [0.0f64; 5];
                for _ in 0..count {
                    let e = sample_innovation(n, base, rng);
                    s[0] += e.eta1;
                    s[1] += e.eta2;
                    s[2] += e.eta1 * e.eta1;
                    s[3] += e.eta1 * e.eta2;
                    s[4] += e.eta2 * e.eta2;
                }
                s
            });
            let m = draws as f64;
            let s: [f64; 5] = std::array::from_fn(|k| parts.iter().map(|p| p[k]).sum::<f64>() / m);
            let cov = [s[2] - s[0] * s[0], s[3] - s[0] * s[1], s[4] - s[1] * s[1]];
            let dev = (0..3).map(|k| (cov[k] - exact[k]).abs()).fold(0.0, f64::max);
            worst = worst.max(dev);
            lines.push(format!("{}/n={n}: {dev:.1e}", base.key()));
        }
    }
    Ok((worst <= 3e-3, format!("max entry deviation {worst:.2e} (tol 3e-3); {}", lines.join(", "))))
}

fn c6_rate() -> Check {
    let model = ModelSpec::perturbed_default(1);
    let z0 = PhasePoint::origin(1);
    let points: Vec<PhasePoint> = [(0.6, 0.0), (1.2, 0.3), (-0.6, -0.6)].iter().map(|&(x, y)| PhasePoint::scalar(x, y)).collect();
    let settings = |base, lo: f64, hi: f64| {
        (
            RateSettings {
                ladder: vec![8, 16, 32, 64],
                micro: 2,
                base,
                samples: 10_000_000,
                bandwidth: Bandwidth::new(0.35, 0.2).unwrap(),
                reference: RateReference::Parametrix { options: SeriesOptions::default() },
                quadrature: QuadratureSpec::default(),
                control_variate: true,
                weight_c: 1.0,
                weight_s_prime: 2.0,
                seed: 2024,
            },
            lo,
            hi,
        )
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (s, lo, hi) in [settings(BaseDistribution::ScaledUniformMixture, 0.35, 0.8), settings(BaseDistribution::Gaussian, 0.8, 1.3)] {
        let report = lil_rate_experiment(&model, 1.0, &z0, &points, &s).map_err(err)?;
        ok &= (lo..=hi).contains(&report.slope);
        parts.push(format!("{} slope {:.3} +- {:.3} in [{lo}, {hi}]", s.base.key(), report.slope, report.slope_std_err));
    }
    Ok((ok, parts.join("; ")))
}

fn c7_charfn() -> Check {
    let settings = InversionSettings::default();
    let mut worst_moment: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for n in [2usize, 3, 5, 10] {
        let nf = n as f64;
        let exact = [1.0, (nf + 1.0) / (2.0 * nf), (2.0 * nf * nf + 3.0 * nf + 1.0) / (6.0 * nf * nf)];
        let table = CharFnTable::build(BaseDistribution::Gaussian, n, &settings).map_err(err)?;
        let f = invert_density(&table, &settings).map_err(err)?;
        let (_, cov) = f.moments();
        for (got, want) in [cov.xx, cov.xy, cov.yy].iter().zip(exact) {
            worst_moment = worst_moment.max((got - want).abs() / want);
        }
        let table = CharFnTable::build(BaseDistribution::ScaledUniformMixture, n, &settings).map_err(err)?;
        let f = invert_density(&table, &settings).map_err(err)?;
        worst_mass = worst_mass.max((f.mass - 1.0).abs());
        min_value = min_value.min(f.raw_min);
    }
    Ok((
        worst_moment <= 1e-4 && worst_mass <= 1e-3 && min_value > -1e-4,
        format!(
            "gaussian moment rel error {worst_moment:.1e} (tol 1e-4); mixture |mass - 1| {worst_mass:.1e} (tol 1e-3), min {min_value:.1e} (> -1e-4); n in {{2, 3, 5, 10}}"
        ),
    ))
}

fn c8_asian() -> Check {
    let z0 = PhasePoint::origin(1);
    let samples = 1_000_000;
    let chain = ChainConfig::new(1.0, 128, 8, BaseDistribution::Gaussian, 3).map_err(err)?;
    let engines = [AsianEngine::Euler { micro_steps: 500 }, AsianEngine::MacroChain { chain }];
    // (Y/T - X) ~ N(0, T/3) for the unit model.
    let exact = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(0.5 * 3f64.sqrt());
    let unit = ModelSpec::constant_unit(1);
    let mut ok = true;
    let mut parts = Vec::new();
    for engine in &engines {
        let est = digital_asian_probability(&unit, 1.0, &z0, 0.5, samples, engine, 17).map_err(err)?;
        let z = (est.probability - exact) / est.std_err;
        ok &= z.abs() <= 3.0;
        parts.push(format!("{} {:.5} ({z:+.2} SE from {exact:.5})", est.engine, est.probability));
    }
    let model = ModelSpec::perturbed_default(1);
    let a = digital_asian_probability(&model, 1.0, &z0, 0.5, samples, &engines[0], 18).map_err(err)?;
    let b = digital_asian_probability(&model, 1.0, &z0, 0.5, samples, &engines[1], 19).map_err(err)?;
    let z = (a.probability - b.probability) / a.std_err.hypot(b.std_err);
    ok &= z.abs() <= 3.0;
    parts.push(format!("perturbed euler {:.5} vs chain {:.5} ({z:+.2} combined SE)", a.probability, b.probability));
    Ok((ok, parts.join("; ")))
}

fn c9_discrete() -> Check {
    let model = ModelSpec::perturbed_default(1);
    let z0 = PhasePoint::origin(1);
    let cfg = ChainConfig::new(1.0, 4, 2, BaseDistribution::Gaussian, 11).map_err(err)?;
    let solver = DiscreteSolver::new(&model, &cfg, &z0, &QuadratureSpec::default()).map_err(err)?;
    let bw = Bandwidth::new(0.2, 0.12).map_err(err)?;
    let nodes: Vec<(f64, f64)> =
        [-0.8, 0.0, 0.8].iter().flat_map(|&x| [-0.4, 0.0, 0.4].iter().map(move |&d| (x, 0.5 * x + d))).collect();
    let kde = chain_kde_at_points(&model, &cfg, &z0, &nodes, 4_000_000, bw).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (k, &(x, y)) in nodes.iter().enumerate() {
        // The estimate targets the density smoothed by its kernel; compare like with like.
        let failure = std::cell::RefCell::new(None);
        let smoothed = kernel_smooth(
            |a, b| match solver.evaluate(&PhasePoint::scalar(a, b)) {
                Ok(r) => r.value,
                Err(e) => {
                    *failure.borrow_mut() = Some(e.to_string());
                    f64::NAN
                }
            },
            x,
            y,
            bw,
            8,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        worst = worst.max((smoothed - kde.values[k]).abs() / kde.std_err[k]);
    }
    Ok((worst <= 3.0, format!("max |series - KDE| {worst:.2} SE over 9 nodes (tol 3)")))
}

fn c10_hoelder() -> Check {
    let model = ModelSpec::new(1, ModelFamily::Hoelder { amp: 0.1 });
    let t = 0.25;
    let z0 = PhasePoint::scalar(0.0, 0.0);
    let solver = ParametrixSolver::new(&model, t, &z0, &QuadratureSpec::default(), &SeriesOptions::default()).map_err(err)?;
    let mut grid = DensityGrid::around_transport(&model, t, &z0, 61, 61, 6.0).map_err(err)?;
    let results = solver.fill_grid(&mut grid).map_err(err)?;
    let mass = grid.mass();
    let peak = grid.values.iter().copied().fold(0.0, f64::max);
    // Size of the last computed order where the density is not negligible.
    let last = results
        .iter()
        .filter(|r| r.value > 1e-3 * peak)
        .map(|r| (r.terms[r.terms.len() - 1] / r.value).abs())
        .fold(0.0, f64::max);
    Ok((
        (mass - 1.0).abs() <= 5e-3 && last < 1e-3,
        format!("mass {mass:.6} (tol 5e-3) on 61x61 nodes; last order at most {last:.1e} of the value (tol 1e-3)"),
    ))
}
