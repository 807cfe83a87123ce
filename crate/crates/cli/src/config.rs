//! TOML experiment configuration, `--set` overrides and schema checks.
//!
//! Every table is closed (`deny_unknown_fields`). Sections that the selected
//! experiment does not read are rejected rather than silently ignored, and the
//! sections it does read are filled with their defaults before the run, so
//! the manifest echoes the configuration that was actually executed.

use std::fs;
use std::path::{Path, PathBuf};

use kolmo_core::chain::RateReference;
use kolmo_core::charfn::InversionSettings;
use kolmo_core::{Bandwidth, BaseDistribution, ModelFamily, ModelSpec, PhasePoint, QuadratureSpec, SeriesOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Validate,
    Density,
    Semigroup,
    BoundCheck,
    Rate,
    Charfn,
    Asian,
    DiscreteParametrix,
    HoelderSmoke,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Validate,
        ExperimentKind::Density,
        ExperimentKind::Semigroup,
        ExperimentKind::BoundCheck,
        ExperimentKind::Rate,
        ExperimentKind::Charfn,
        ExperimentKind::Asian,
        ExperimentKind::DiscreteParametrix,
        ExperimentKind::HoelderSmoke,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ExperimentKind::Validate => "validate",
            ExperimentKind::Density => "density",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::BoundCheck => "bound-check",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Charfn => "charfn",
            ExperimentKind::Asian => "asian",
            ExperimentKind::DiscreteParametrix => "discrete-parametrix",
            ExperimentKind::HoelderSmoke => "hoelder-smoke",
        }
    }
}

/// Model family by key plus positional parameters (see
/// [`ModelFamily::from_key`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
}

fn one() -> usize {
    1
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, CliError> {
        let spec = ModelSpec::from_key(self.dim, &self.family, &self.params).map_err(|e| {
            CliError::Config(format!("[model]: {e} (known families: {})", ModelFamily::KEYS.join(", ")))
        })?;
        let lo = self.lambda_min.unwrap_or(spec.lambda_min);
        let hi = self.lambda_max.unwrap_or(spec.lambda_max);
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(CliError::Config(format!("[model]: need 0 < lambda_min <= lambda_max, got {lo}, {hi}")));
        }
        Ok(spec.with_ellipticity(lo, hi))
    }
}

/// Tensor grid centred on the frozen transport of the start point, `width`
/// standard deviations per side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 41, ny: 41, width: 5.0 }
    }
}

/// Macro chain parameters; the horizon and seed come from the top level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub steps: usize,
    pub micro: usize,
    pub base: BaseDistribution,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self { steps: 64, micro: 2, base: BaseDistribution::Gaussian }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub samples: usize,
    /// Bracket ranks are checked on a `rank_lattice × rank_lattice` lattice.
    pub rank_lattice: usize,
    pub fd_step: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { samples: 10_000, rank_lattice: 8, fd_step: kolmo_core::model::DEFAULT_FD_STEP }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMethod {
    Parametrix,
    Euler,
    Chain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySection {
    pub method: DensityMethod,
    /// Monte Carlo paths for the `euler` and `chain` methods.
    pub samples: usize,
    pub micro_steps: usize,
    /// Kernel bandwidths; the two-scale rule of thumb when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<Bandwidth>,
}

impl Default for DensitySection {
    fn default() -> Self {
        Self { method: DensityMethod::Parametrix, samples: 200_000, micro_steps: 500, bandwidth: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemigroupSection {
    pub c: Vec<f64>,
    pub t: Vec<f64>,
    /// Split times as fractions `s/t`.
    pub fractions: Vec<f64>,
    /// End point; the transport `(x, y + x t)` of the start when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<[f64; 2]>,
}

impl Default for SemigroupSection {
    fn default() -> Self {
        Self { c: vec![0.5, 1.0, 2.0], t: vec![0.25, 1.0, 4.0], fractions: vec![0.25, 0.5, 0.75], end: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSection {
    /// Exponent constant of the envelope `p̂_c`.
    pub c: f64,
}

impl Default for BoundSection {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub points: Vec<[f64; 2]>,
    pub ladder: Vec<usize>,
    pub micro: usize,
    pub base: BaseDistribution,
    pub samples: usize,
    pub bandwidth: Bandwidth,
    pub reference: RateReference,
    pub control_variate: bool,
    pub weight_c: f64,
    pub weight_s_prime: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            ladder: vec![8, 16, 32, 64],
            micro: 2,
            base: BaseDistribution::Gaussian,
            samples: 1_000_000,
            bandwidth: Bandwidth { bx: 0.35, by: 0.2 },
            reference: RateReference::Parametrix { options: SeriesOptions::default() },
            control_variate: true,
            weight_c: 1.0,
            weight_s_prime: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharfnSection {
    pub base: BaseDistribution,
    pub n: usize,
    pub decay_radius: f64,
    pub decay_nodes: usize,
    /// Moment order `S` of the `ψ` envelope.
    pub envelope_s: u32,
    pub partition_samples: usize,
    /// Also write the frequency table (large).
    pub table: bool,
    pub inversion: InversionSettings,
}

impl Default for CharfnSection {
    fn default() -> Self {
        Self {
            base: BaseDistribution::ScaledUniformMixture,
            n: 4,
            decay_radius: 40.0,
            decay_nodes: 321,
            envelope_s: 8,
            partition_samples: 1000,
            table: false,
            inversion: InversionSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsianSection {
    pub strike: f64,
    pub samples: usize,
    pub euler_steps: usize,
}

impl Default for AsianSection {
    fn default() -> Self {
        Self { strike: 0.5, samples: 1_000_000, euler_steps: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscreteSection {
    /// Points where the series is compared with a chain kernel estimate.
    pub points: Vec<[f64; 2]>,
    pub kde_samples: usize,
    pub bandwidth: Bandwidth,
    /// Gauss-Hermite nodes per axis for smoothing the series with the kernel.
    pub smoothing_nodes: usize,
}

impl Default for DiscreteSection {
    fn default() -> Self {
        Self { points: Vec::new(), kde_samples: 1_000_000, bandwidth: Bandwidth { bx: 0.2, by: 0.12 }, smoothing_nodes: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoelderSection {
    /// Orders are compared only where the density exceeds this fraction of its peak.
    pub significance: f64,
}

impl Default for HoelderSection {
    fn default() -> Self {
        Self { significance: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory. Not echoed: reruns elsewhere must hash identically.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<DensitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semigroup: Option<SemigroupSection>,
    #[serde(rename = "bound-check", skip_serializing_if = "Option::is_none")]
    pub bound_check: Option<BoundSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charfn: Option<CharfnSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asian: Option<AsianSection>,
    #[serde(rename = "discrete-parametrix", skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSection>,
    #[serde(rename = "hoelder-smoke", skip_serializing_if = "Option::is_none")]
    pub hoelder: Option<HoelderSection>,
}

/// Reads a config file, applies `key=value` overrides and checks the schema.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    cfg.resolve()
}

/// `a.b.c=value`, where `value` is read as a TOML literal and falls back to a
/// bare string (so `--set model.family=trig` works unquoted).
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override `{item}` has an empty key segment")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed table holds `v`"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let (last, parents) = path.split_last().expect("split yields at least one segment");
    let mut node = table;
    for p in parents {
        let entry = node.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("override `{item}`: `{p}` is not a table"))),
        };
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ExperimentConfig {
    fn present(&self) -> [(&'static str, bool); 16] {
        [
            ("model", self.model.is_some()),
            ("horizon", self.horizon.is_some()),
            ("start", self.start.is_some()),
            ("grid", self.grid.is_some()),
            ("quadrature", self.quadrature.is_some()),
            ("series", self.series.is_some()),
            ("chain", self.chain.is_some()),
            ("validate", self.validate.is_some()),
            ("density", self.density.is_some()),
            ("semigroup", self.semigroup.is_some()),
            ("bound-check", self.bound_check.is_some()),
            ("rate", self.rate.is_some()),
            ("charfn", self.charfn.is_some()),
            ("asian", self.asian.is_some()),
            ("discrete-parametrix", self.discrete.is_some()),
            ("hoelder-smoke", self.hoelder.is_some()),
        ]
    }

    /// Rejects keys the experiment does not read, checks ranges and fills
    /// every section it reads with defaults.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let desc = crate::experiments::descriptor(self.experiment);
        let name = desc.name;
        for (key, present) in self.present() {
            let required = desc.required.contains(&key);
            let allowed = required || desc.optional.contains(&key);
            check(!present || allowed, || format!("`{key}` does not apply to experiment `{name}`"))?;
            check(present || !required, || format!("experiment `{name}` requires `{key}`"))?;
        }
        let reads = |key: &str| desc.required.contains(&key) || desc.optional.contains(&key);

        if let Some(m) = &self.model {
            let spec = m.build()?;
            let scalar_only = self.experiment != ExperimentKind::Validate;
            check(!scalar_only || spec.dim == 1, || format!("experiment `{name}` is implemented for model.dim = 1"))?;
        }
        if let Some(t) = self.horizon {
            check(t > 0.0 && t.is_finite(), || format!("horizon must be positive and finite, got {t}"))?;
        }
        if reads("start") {
            let s = *self.start.get_or_insert([0.0, 0.0]);
            check(finite(&s), || "start must be finite".into())?;
        }
        if reads("grid") {
            let g = self.grid.get_or_insert_with(GridConfig::default);
            check((2..=4001).contains(&g.nx) && (2..=4001).contains(&g.ny), || {
                format!("grid needs 2..=4001 nodes per axis, got {}x{}", g.nx, g.ny)
            })?;
            check(g.width > 0.0 && g.width <= 50.0, || format!("grid.width must lie in (0, 50], got {}", g.width))?;
        }
        if reads("quadrature") {
            let q = self.quadrature.get_or_insert_with(QuadratureSpec::default);
            q.validate().map_err(|e| CliError::Config(format!("[quadrature]: {e}")))?;
        }
        if reads("series") {
            let s = self.series.get_or_insert_with(SeriesOptions::default);
            s.validate().map_err(|e| CliError::Config(format!("[series]: {e}")))?;
            check(s.r_max <= 12, || format!("series.r_max must be at most 12, got {}", s.r_max))?;
        }
        let uses_chain = match self.experiment {
            ExperimentKind::Density => {
                self.density.as_ref().is_some_and(|d| d.method == DensityMethod::Chain) || self.chain.is_some()
            }
            _ => reads("chain"),
        };
        if uses_chain {
            let c = self.chain.get_or_insert_with(ChainSection::default);
            check(c.steps >= 1 && c.micro >= 2, || format!("chain needs steps >= 1 and micro >= 2, got {} and {}", c.steps, c.micro))?;
        }
        self.resolve_section()?;
        Ok(self)
    }

    fn resolve_section(&mut self) -> Result<(), CliError> {
        let bw_ok = |b: &Bandwidth| Bandwidth::new(b.bx, b.by).map(|_| ()).map_err(|e| CliError::Config(e.to_string()));
        match self.experiment {
            ExperimentKind::Validate => {
                let v = self.validate.get_or_insert_with(Default::default);
                check(v.samples >= 1 && v.rank_lattice >= 1, || "validate needs samples >= 1 and rank_lattice >= 1".into())?;
                check(v.fd_step > 0.0 && v.fd_step <= 1e-2, || format!("validate.fd_step must lie in (0, 1e-2], got {}", v.fd_step))?;
            }
            ExperimentKind::Density => {
                let d = self.density.get_or_insert_with(Default::default);
                check(d.samples >= 1, || "density.samples must be positive".into())?;
                if let Some(b) = &d.bandwidth {
                    bw_ok(b)?;
                }
            }
            ExperimentKind::Semigroup => {
                let s = self.semigroup.get_or_insert_with(Default::default);
                check(!s.c.is_empty() && s.c.iter().all(|&c| c > 0.0 && c.is_finite()), || "semigroup.c needs positive values".into())?;
                check(!s.t.is_empty() && s.t.iter().all(|&t| t > 0.0 && t.is_finite()), || "semigroup.t needs positive values".into())?;
                check(!s.fractions.is_empty() && s.fractions.iter().all(|&f| f > 0.0 && f < 1.0), || {
                    "semigroup.fractions must lie in (0, 1)".into()
                })?;
                check(s.end.iter().all(|e| finite(e)), || "semigroup.end must be finite".into())?;
            }
            ExperimentKind::BoundCheck => {
                let b = self.bound_check.get_or_insert_with(Default::default);
                check(b.c > 0.0 && b.c.is_finite(), || format!("bound-check.c must be positive, got {}", b.c))?;
            }
            ExperimentKind::Rate => {
                let r = self.rate.get_or_insert_with(Default::default);
                check(!r.points.is_empty(), || "rate.points needs at least one test point".into())?;
                check(r.points.iter().all(|p| finite(p)), || "rate.points must be finite".into())?;
                bw_ok(&r.bandwidth)?;
            }
            ExperimentKind::Charfn => {
                let c = self.charfn.get_or_insert_with(Default::default);
                check(c.n >= 2, || format!("charfn.n must be at least 2, got {}", c.n))?;
                check(c.decay_radius > 0.0 && c.decay_radius.is_finite() && c.decay_nodes >= 2, || {
                    "charfn needs decay_radius > 0 and decay_nodes >= 2".into()
                })?;
                check(c.partition_samples >= 1, || "charfn.partition_samples must be positive".into())?;
                check(c.envelope_s <= 64, || "charfn.envelope_s must be at most 64".into())?;
                c.inversion.validate().map_err(|e| CliError::Config(format!("[charfn.inversion]: {e}")))?;
            }
            ExperimentKind::Asian => {
                let a = self.asian.get_or_insert_with(Default::default);
                check(a.strike.is_finite(), || "asian.strike must be finite".into())?;
            }
            ExperimentKind::DiscreteParametrix => {
                let d = self.discrete.get_or_insert_with(Default::default);
                check(d.points.iter().all(|p| finite(p)), || "discrete-parametrix.points must be finite".into())?;
                check(d.smoothing_nodes >= 1, || "discrete-parametrix.smoothing_nodes must be positive".into())?;
                bw_ok(&d.bandwidth)?;
            }
            ExperimentKind::HoelderSmoke => {
                let h = self.hoelder.get_or_insert_with(Default::default);
                check(h.significance > 0.0 && h.significance < 1.0, || "hoelder-smoke.significance must lie in (0, 1)".into())?;
                let m = self.model.get_or_insert_with(|| ModelConfig {
                    family: "hoelder".into(),
                    params: vec![0.1],
                    dim: 1,
                    lambda_min: None,
                    lambda_max: None,
                });
                check(m.family == "hoelder", || format!("hoelder-smoke needs the `hoelder` model family, got `{}`", m.family))?;
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("missing [model]".into()))?.build()
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        self.horizon.ok_or_else(|| CliError::Config("missing `horizon`".into()))
    }

    pub fn start_point(&self) -> PhasePoint {
        let [x, y] = self.start.unwrap_or([0.0, 0.0]);
        PhasePoint::scalar(x, y)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        self.quadrature.clone().unwrap_or_default()
    }

    pub fn series(&self) -> SeriesOptions {
        self.series.clone().unwrap_or_default()
    }

    pub fn grid(&self) -> GridConfig {
        self.grid.clone().unwrap_or_default()
    }

    pub fn chain(&self) -> ChainSection {
        self.chain.clone().unwrap_or_default()
    }
}
