//! The nine experiments. Each one computes everything in memory and hands
//! back its artifacts; nothing touches the disk here.

use kolmo_core::chain::{
    chain_density_kde, chain_kde_at_points, innovation_covariance, lil_rate_experiment, DiscreteSolver, RateSettings,
};
use kolmo_core::charfn::{decay_check, invert_density, partition_bound, CharFnTable};
use kolmo_core::gaussian::chapman_kolmogorov_defect;
use kolmo_core::kde::kernel_smooth;
use kolmo_core::model::{hormander_rank, validate_model};
use kolmo_core::oracle::{digital_asian_probability, euler_mc_density, AsianEngine};
use kolmo_core::rng::mix_seed;
use kolmo_core::{
    parametrix_density, ChainConfig, DensityGrid, ModelFamily, ModelSpec, ParametrixSolver, PhasePoint, SeriesResult,
};
use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{DensityMethod, ExperimentConfig, ExperimentKind};
use crate::error::CliError;

/// One file of a run, held in memory until the run has succeeded.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Headline constants copied into the manifest.
    pub fitted: Value,
}

/// Row of the `list` table.
#[derive(Clone, Debug, Serialize)]
pub struct Descriptor {
    pub name: &'static str,
    pub summary: &'static str,
    pub required: &'static [&'static str],
    pub optional: &'static [&'static str],
    pub artifacts: &'static [&'static str],
}

pub static DESCRIPTORS: [Descriptor; 9] = [
    Descriptor {
        name: "validate",
        summary: "sample a model against its ellipticity window and check the bracket rank",
        required: &["model"],
        optional: &["validate"],
        artifacts: &["validate.json"],
    },
    Descriptor {
        name: "density",
        summary: "transition density on a grid by the parametrix series, Euler Monte Carlo or the macro chain",
        required: &["model", "horizon"],
        optional: &["start", "grid", "quadrature", "series", "chain", "density"],
        artifacts: &["density.csv", "density.json"],
    },
    Descriptor {
        name: "semigroup",
        summary: "Chapman-Kolmogorov defect of the two-scale Gaussian envelope",
        required: &[],
        optional: &["start", "quadrature", "semigroup"],
        artifacts: &["semigroup.csv", "semigroup.json"],
    },
    Descriptor {
        name: "bound-check",
        summary: "fit the constants of the two-sided Gaussian bound on a series density grid",
        required: &["model", "horizon"],
        optional: &["start", "grid", "quadrature", "series", "bound-check"],
        artifacts: &["bound-check.csv", "bound-check.json"],
    },
    Descriptor {
        name: "rate",
        summary: "local limit rate of the macro chain density against the diffusion density",
        required: &["model", "horizon", "rate"],
        optional: &["start", "quadrature"],
        artifacts: &["rate.csv", "rate.json"],
    },
    Descriptor {
        name: "charfn",
        summary: "decay, inversion and envelope of the aggregated innovation characteristic function",
        required: &[],
        optional: &["charfn"],
        artifacts: &["charfn-density.csv", "charfn.json", "charfn-table.csv (with charfn.table)"],
    },
    Descriptor {
        name: "asian",
        summary: "digital Asian probability by Euler and macro-chain Monte Carlo",
        required: &["model", "horizon"],
        optional: &["start", "chain", "asian"],
        artifacts: &["asian.json"],
    },
    Descriptor {
        name: "discrete-parametrix",
        summary: "discrete parametrix density of the gaussian-base chain, optionally against a chain kernel estimate",
        required: &["model", "horizon"],
        optional: &["start", "grid", "quadrature", "chain", "discrete-parametrix"],
        artifacts: &["discrete-parametrix.csv", "discrete-parametrix.json"],
    },
    Descriptor {
        name: "hoelder-smoke",
        summary: "parametrix series for a diffusion coefficient that is only Hoelder in y",
        required: &["horizon"],
        optional: &["model", "start", "grid", "quadrature", "series", "hoelder-smoke"],
        artifacts: &["hoelder-smoke.csv", "hoelder-smoke.json"],
    },
];

pub fn descriptor(kind: ExperimentKind) -> &'static Descriptor {
    let idx = ExperimentKind::ALL.iter().position(|&k| k == kind).expect("every kind is listed");
    &DESCRIPTORS[idx]
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    match cfg.experiment {
        ExperimentKind::Validate => validate(cfg),
        ExperimentKind::Density => density(cfg),
        ExperimentKind::Semigroup => semigroup(cfg),
        ExperimentKind::BoundCheck => bound_check(cfg),
        ExperimentKind::Rate => rate(cfg),
        ExperimentKind::Charfn => charfn(cfg),
        ExperimentKind::Asian => asian(cfg),
        ExperimentKind::DiscreteParametrix => discrete(cfg),
        ExperimentKind::HoelderSmoke => hoelder(cfg),
    }
}

fn json_artifact(name: &str, value: &impl Serialize) -> Artifact {
    let mut bytes = serde_json::to_vec_pretty(value).expect("results serialise to JSON");
    bytes.push(b'\n');
    Artifact { name: name.to_string(), bytes }
}

fn grid_artifact(name: &str, grid: &DensityGrid, meta: &[(&str, String)]) -> Artifact {
    let meta: Vec<(String, String)> = meta.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let mut bytes = Vec::new();
    grid.write_csv(&mut bytes, &meta).expect("writing to memory cannot fail");
    Artifact { name: name.to_string(), bytes }
}

fn model_meta(model: &ModelSpec) -> (&'static str, String) {
    ("model", serde_json::to_string(&model.family).expect("model family serialises"))
}

/// Series values on the configured grid. Constant models take the exact
/// frozen path, which also covers `r_max = 0`.
fn series_grid(cfg: &ExperimentConfig, model: &ModelSpec, t: f64) -> kolmo_core::Result<(DensityGrid, Vec<SeriesResult>)> {
    let (g, quad, opts, z0) = (cfg.grid(), cfg.quadrature(), cfg.series(), cfg.start_point());
    let mut grid = DensityGrid::around_transport(model, t, &z0, g.nx, g.ny, g.width)?;
    let results = if model.is_constant() {
        let r = grid
            .nodes()
            .iter()
            .map(|&(x, y)| parametrix_density(model, t, &z0, &PhasePoint::scalar(x, y), opts.r_max, &quad))
            .collect::<kolmo_core::Result<Vec<_>>>()?;
        grid.values = r.iter().map(|r| r.value).collect();
        r
    } else {
        ParametrixSolver::new(model, t, &z0, &quad, &opts)?.fill_grid(&mut grid)?
    };
    Ok((grid, results))
}

fn series_summary(results: &[SeriesResult]) -> Value {
    let max = |f: &dyn Fn(&SeriesResult) -> f64| results.iter().map(f).fold(0.0, f64::max);
    json!({
        "c_fit_max": max(&|r| r.c_fit),
        "tail_bound_max": max(&|r| r.tail_bound),
        "quadrature_defect_max": max(&|r| r.quadrature_diagnostics.iter().copied().fold(0.0, f64::max)),
    })
}

fn validate(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("validate", e);
    let model = cfg.model_spec()?;
    let sec = cfg.validate.clone().unwrap_or_default();
    let report = validate_model(&model, sec.samples, cfg.seed).map_err(ctx)?;
    let d = model.dim;
    let k = sec.rank_lattice;
    let coord = |i: usize, lo: f64, hi: f64| if k == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 };
    let mut ranks = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (x, y) = (coord(i, -3.0, 3.0), coord(j, -6.0, 6.0));
            // Shift the coordinates apart so that d > 1 does not sit on a diagonal.
            let p = PhasePoint::new((0..d).map(|c| x + 0.1 * c as f64).collect(), (0..d).map(|c| y - 0.2 * c as f64).collect());
            ranks.push(hormander_rank(&model, &p, sec.fd_step).map_err(ctx)?);
        }
    }
    let (min_rank, max_rank) = (ranks.iter().copied().min().unwrap_or(0), ranks.iter().copied().max().unwrap_or(0));
    let full = min_rank == 2 * d;
    let summary = json!({
        "model": model,
        "report": report,
        "hormander": { "points": ranks.len(), "min_rank": min_rank, "max_rank": max_rank, "full_rank": full },
    });
    Ok(RunOutput {
        artifacts: vec![json_artifact("validate.json", &summary)],
        fitted: json!({
            "passed": report.passed && full,
            "min_eigenvalue": report.min_eigenvalue,
            "max_eigenvalue": report.max_eigenvalue,
            "min_rank": min_rank,
        }),
    })
}

fn density(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("density", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let z0 = cfg.start_point();
    let sec = cfg.density.clone().unwrap_or_default();
    let g = cfg.grid();
    let (grid, extra) = match sec.method {
        DensityMethod::Parametrix => {
            let (grid, results) = series_grid(cfg, &model, t).map_err(ctx)?;
            (grid, json!({ "series": series_summary(&results) }))
        }
        DensityMethod::Euler => {
            let template = DensityGrid::around_transport(&model, t, &z0, g.nx, g.ny, g.width).map_err(ctx)?;
            let grid = euler_mc_density(&model, t, &z0, &template, sec.samples, sec.micro_steps, sec.bandwidth, cfg.seed)
                .map_err(ctx)?;
            (grid, json!({ "samples": sec.samples, "micro_steps": sec.micro_steps }))
        }
        DensityMethod::Chain => {
            let c = cfg.chain();
            let chain = ChainConfig::new(t, c.steps, c.micro, c.base, cfg.seed).map_err(ctx)?;
            let template = DensityGrid::around_transport(&model, t, &z0, g.nx, g.ny, g.width).map_err(ctx)?;
            let grid = chain_density_kde(&model, &chain, &z0, &template, sec.samples, sec.bandwidth).map_err(ctx)?;
            (grid, json!({ "samples": sec.samples, "chain": chain }))
        }
    };
    let method = serde_json::to_value(sec.method).expect("method serialises");
    let mass = grid.mass();
    let peak = grid.values.iter().copied().fold(0.0, f64::max);
    let max_se = grid.std_err.as_ref().map(|s| s.iter().copied().fold(0.0, f64::max));
    let summary = json!({
        "method": method,
        "nodes": [grid.nx(), grid.ny()],
        "mass": mass,
        "peak": peak,
        "max_std_err": max_se,
        "details": extra,
    });
    let meta = [model_meta(&model), ("method", method.as_str().unwrap_or_default().to_string())];
    Ok(RunOutput {
        artifacts: vec![grid_artifact("density.csv", &grid, &meta), json_artifact("density.json", &summary)],
        fitted: json!({ "mass": mass, "peak": peak, "c_fit_max": summary["details"]["series"]["c_fit_max"] }),
    })
}

fn semigroup(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("semigroup", e);
    let sec = cfg.semigroup.clone().unwrap_or_default();
    let quad = cfg.quadrature();
    let z0 = cfg.start_point();
    let (x, y) = z0.xy();
    let mut csv = String::from("c,t,s,defect,coarse_defect,convolution,direct,converged\n");
    let (mut worst, mut count, mut converged) = (0.0f64, 0usize, true);
    for &c in &sec.c {
        for &t in &sec.t {
            let z1 = match sec.end {
                Some([a, b]) => PhasePoint::scalar(a, b),
                None => PhasePoint::scalar(x, y + x * t),
            };
            for &f in &sec.fractions {
                let s = f * t;
                let d = chapman_kolmogorov_defect(c, s, t, &z0, &z1, &quad).map_err(ctx)?;
                csv.push_str(&format!(
                    "{c},{t},{s},{},{},{},{},{}\n",
                    d.defect, d.coarse_defect, d.convolution, d.direct, d.converged
                ));
                worst = worst.max(d.defect);
                converged &= d.converged;
                count += 1;
            }
        }
    }
    let summary = json!({ "configurations": count, "max_defect": worst, "all_converged": converged });
    Ok(RunOutput {
        artifacts: vec![
            Artifact { name: "semigroup.csv".into(), bytes: csv.into_bytes() },
            json_artifact("semigroup.json", &summary),
        ],
        fitted: summary,
    })
}

fn bound_check(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("bound-check", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let c = cfg.bound_check.clone().unwrap_or_default().c;
    let (grid, results) = series_grid(cfg, &model, t).map_err(ctx)?;
    let report = kolmo_core::parametrix::gaussian_bound_check(&model, t, &grid, c).map_err(ctx)?;
    let summary = json!({ "bound": report, "mass": grid.mass(), "series": series_summary(&results) });
    let meta = [model_meta(&model), ("c", c.to_string()), ("c_upper", report.c_upper.to_string())];
    Ok(RunOutput {
        artifacts: vec![grid_artifact("bound-check.csv", &grid, &meta), json_artifact("bound-check.json", &summary)],
        fitted: json!({
            "c": c,
            "c_upper": report.c_upper,
            "c_lower": report.lower.c_lower,
            "lower_holds": report.lower.holds,
        }),
    })
}

fn rate(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("rate", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let sec = cfg.rate.clone().unwrap_or_default();
    let settings = RateSettings {
        ladder: sec.ladder,
        micro: sec.micro,
        base: sec.base,
        samples: sec.samples,
        bandwidth: sec.bandwidth,
        reference: sec.reference,
        quadrature: cfg.quadrature(),
        control_variate: sec.control_variate,
        weight_c: sec.weight_c,
        weight_s_prime: sec.weight_s_prime,
        seed: cfg.seed,
    };
    let points: Vec<PhasePoint> = sec.points.iter().map(|&[x, y]| PhasePoint::scalar(x, y)).collect();
    let report = lil_rate_experiment(&model, t, &cfg.start_point(), &points, &settings).map_err(ctx)?;
    let mut csv = String::from("steps,h,x,y,estimate,std_err,diff,diff_std_err,normalized\n");
    for row in &report.rows {
        for (k, &(x, y)) in report.points.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{x},{y},{},{},{},{},{}\n",
                row.steps, row.h, row.estimate[k], row.std_err[k], row.diff[k], row.diff_std_err[k], row.normalized[k]
            ));
        }
    }
    Ok(RunOutput {
        artifacts: vec![Artifact { name: "rate.csv".into(), bytes: csv.into_bytes() }, json_artifact("rate.json", &report)],
        fitted: json!({
            "slope": report.slope,
            "slope_std_err": report.slope_std_err,
            "point_slopes": report.point_slopes,
            "min_signal_to_noise": report.min_signal_to_noise,
        }),
    })
}

fn charfn(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("charfn", e);
    let sec = cfg.charfn.clone().unwrap_or_default();
    let decay = decay_check(sec.base, sec.n, sec.decay_radius, sec.decay_nodes).map_err(ctx)?;
    let table = CharFnTable::build(sec.base, sec.n, &sec.inversion).map_err(ctx)?;
    let f = invert_density(&table, &sec.inversion).map_err(ctx)?;
    let envelope = f.psi_envelope(sec.envelope_s);
    let partition = partition_bound(sec.n, sec.partition_samples, cfg.seed).map_err(ctx)?;
    let (mean, cov) = f.moments();
    let exact = innovation_covariance(sec.n);
    let summary = json!({
        "base": sec.base,
        "n": sec.n,
        "decay": decay,
        "inversion": {
            "mass": f.mass,
            "raw_min": f.raw_min,
            "imag_residue": f.imag_residue,
            "renormalized": f.renormalized,
            "table_size": table.size,
            "mean": mean,
            "covariance": [cov.xx, cov.xy, cov.yy],
            "exact_covariance": [exact.xx, exact.xy, exact.yy],
        },
        "envelope": envelope,
        "partition": partition,
    });
    let mut artifacts = Vec::new();
    let mut bytes = Vec::new();
    f.write_csv(&mut bytes).expect("writing to memory cannot fail");
    artifacts.push(Artifact { name: "charfn-density.csv".into(), bytes });
    artifacts.push(json_artifact("charfn.json", &summary));
    if sec.table {
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).expect("writing to memory cannot fail");
        artifacts.push(Artifact { name: "charfn-table.csv".into(), bytes });
    }
    Ok(RunOutput {
        artifacts,
        fitted: json!({
            "c_n": decay.c_n,
            "psi_c_fit": envelope.c_fit,
            "partition_c_fit": partition.c_fit,
            "mass": f.mass,
        }),
    })
}

/// Closed form for constant coefficients: `Y_T/T - X_T` is normal with mean
/// `y0/T - βT/2` and variance `σ²T/3`.
fn asian_exact(family: &ModelFamily, t: f64, y0: f64, strike: f64) -> Option<f64> {
    let ModelFamily::Constant { drift, sigma } = *family else { return None };
    if strike < 0.0 {
        return Some(1.0);
    }
    let normal = Normal::new(y0 / t - 0.5 * drift * t, sigma * (t / 3.0).sqrt()).ok()?;
    Some(1.0 - normal.cdf(strike))
}

fn asian(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("asian", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let z0 = cfg.start_point();
    let sec = cfg.asian.clone().unwrap_or_default();
    let c = cfg.chain();
    let chain = ChainConfig::new(t, c.steps, c.micro, c.base, cfg.seed).map_err(ctx)?;
    let engines = [AsianEngine::Euler { micro_steps: sec.euler_steps }, AsianEngine::MacroChain { chain }];
    let est = engines
        .iter()
        .enumerate()
        .map(|(k, e)| digital_asian_probability(&model, t, &z0, sec.strike, sec.samples, e, mix_seed(&[cfg.seed, k as u64])))
        .collect::<kolmo_core::Result<Vec<_>>>()
        .map_err(ctx)?;
    let combined_z = (est[0].probability - est[1].probability) / est[0].std_err.hypot(est[1].std_err);
    let exact = asian_exact(&model.family, t, z0.xy().1, sec.strike);
    let z_exact: Option<Vec<f64>> = exact.map(|p| est.iter().map(|e| (e.probability - p) / e.std_err).collect());
    let summary = json!({
        "strike": sec.strike,
        "engines": engines,
        "estimates": est,
        "combined_z": combined_z,
        "exact": exact,
        "z_against_exact": z_exact,
    });
    Ok(RunOutput {
        artifacts: vec![json_artifact("asian.json", &summary)],
        fitted: json!({
            "euler": { "probability": est[0].probability, "std_err": est[0].std_err },
            "macro_chain": { "probability": est[1].probability, "std_err": est[1].std_err },
            "combined_z": combined_z,
        }),
    })
}

fn discrete(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("discrete-parametrix", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let z0 = cfg.start_point();
    let (g, quad, c) = (cfg.grid(), cfg.quadrature(), cfg.chain());
    let sec = cfg.discrete.clone().unwrap_or_default();
    let chain = ChainConfig::new(t, c.steps, c.micro, c.base, cfg.seed).map_err(ctx)?;
    let solver = DiscreteSolver::new(&model, &chain, &z0, &quad).map_err(ctx)?;
    let mut grid = DensityGrid::around_transport(&model, t, &z0, g.nx, g.ny, g.width).map_err(ctx)?;
    let results = solver.evaluate_many(&grid.nodes()).map_err(ctx)?;
    grid.values = results.iter().map(|r| r.value).collect();

    let mut comparison = Vec::new();
    let mut max_z = None::<f64>;
    if !sec.points.is_empty() {
        let points: Vec<(f64, f64)> = sec.points.iter().map(|&[x, y]| (x, y)).collect();
        let kde = chain_kde_at_points(&model, &chain, &z0, &points, sec.kde_samples, sec.bandwidth).map_err(ctx)?;
        for (k, &(x, y)) in points.iter().enumerate() {
            // The kernel estimate targets the smoothed density.
            let failure = std::cell::RefCell::new(None);
            let smoothed = kernel_smooth(
                |a, b| match solver.evaluate(&PhasePoint::scalar(a, b)) {
                    Ok(r) => r.value,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                },
                x,
                y,
                sec.bandwidth,
                sec.smoothing_nodes,
            );
            if let Some(e) = failure.into_inner() {
                return Err(ctx(e));
            }
            let z = (smoothed - kde.values[k]) / kde.std_err[k];
            max_z = Some(max_z.unwrap_or(0.0).max(z.abs()));
            comparison.push(json!({
                "x": x, "y": y, "series_smoothed": smoothed, "kde": kde.values[k], "kde_std_err": kde.std_err[k], "z": z,
            }));
        }
    }
    let mass = grid.mass();
    let summary = json!({
        "chain": chain,
        "mass": mass,
        "series": series_summary(&results),
        "comparison": comparison,
        "max_abs_z": max_z,
    });
    let meta = [model_meta(&model), ("chain_steps", chain.steps.to_string()), ("micro", chain.micro.to_string())];
    Ok(RunOutput {
        artifacts: vec![
            grid_artifact("discrete-parametrix.csv", &grid, &meta),
            json_artifact("discrete-parametrix.json", &summary),
        ],
        fitted: json!({ "mass": mass, "c_fit_max": summary["series"]["c_fit_max"], "max_abs_z": max_z }),
    })
}

fn hoelder(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let ctx = |e| CliError::from_core("hoelder-smoke", e);
    let model = cfg.model_spec()?;
    let t = cfg.horizon()?;
    let significance = cfg.hoelder.clone().unwrap_or_default().significance;
    let (grid, results) = series_grid(cfg, &model, t).map_err(ctx)?;
    let mass = grid.mass();
    let peak = grid.values.iter().copied().fold(0.0, f64::max);
    let last_order = results
        .iter()
        .filter(|r| r.value > significance * peak)
        .map(|r| (r.terms[r.terms.len() - 1] / r.value).abs())
        .fold(0.0, f64::max);
    let summary = json!({
        "mass": mass,
        "peak": peak,
        "last_order_ratio": last_order,
        "significance": significance,
        "series": series_summary(&results),
    });
    Ok(RunOutput {
        artifacts: vec![
            grid_artifact("hoelder-smoke.csv", &grid, &[model_meta(&model)]),
            json_artifact("hoelder-smoke.json", &summary),
        ],
        fitted: json!({ "mass": mass, "last_order_ratio": last_order, "c_fit_max": summary["series"]["c_fit_max"] }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors_follow_the_kind_order() {
        for kind in ExperimentKind::ALL {
            assert_eq!(descriptor(kind).name, kind.key());
        }
    }

    #[test]
    fn asian_closed_form_matches_the_unit_value() {
        let p = asian_exact(&ModelFamily::Constant { drift: 0.0, sigma: 1.0 }, 1.0, 0.0, 0.5).unwrap();
        assert!((p - 0.193_238).abs() < 1e-5, "{p}");
        // Mean y0/T - βT/2 = 5 - 3 and sd σ√(T/3) = 2, so K = 3 sits half a deviation up.
        let q = asian_exact(&ModelFamily::Constant { drift: 2.0, sigma: 2.0 }, 3.0, 15.0, 3.0).unwrap();
        assert!((q - 0.308_537_5).abs() < 1e-6, "{q}");
        assert_eq!(asian_exact(&ModelFamily::Constant { drift: 0.0, sigma: 1.0 }, 1.0, 0.0, -0.1), Some(1.0));
        assert_eq!(asian_exact(&ModelFamily::Hoelder { amp: 0.1 }, 1.0, 0.0, 0.5), None);
    }
}
