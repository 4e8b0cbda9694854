//! Run configuration: JSON schema, defaults, validation and the config hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use projflow_core::lyapunov::LyapParams;
use projflow_core::median::{SkeletonParams, Thresholds};
use projflow_core::noise::{TableEntry, TensorEntry};
use projflow_core::run::SeminormProbe;
use projflow_core::{
    Complex64, DriftForm, Model, ModelParams, NoiseForm, NoiseSpec, Scheme, SpectralField,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    Lyapunov,
    Contraction,
    Instability,
    ValidateNoise,
    Selftest,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Lyapunov => "lyapunov",
            Scenario::Contraction => "contraction",
            Scenario::Instability => "instability",
            Scenario::ValidateNoise => "validate-noise",
            Scenario::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    ExponentialEuler,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftName {
    #[default]
    Ito,
    StratonovichCorrected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub nu: Vec<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
    pub radius: u32,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: SchemeName,
    #[serde(default)]
    pub drift_form: DriftName,
}

/// Noise coefficients. Table rows are `[α, β, k₁..k_d, value]` for the
/// diagonal form and `[α, α', β, β', k₁..k_d, value]` for the general form.
/// `radius` defaults to the field radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum NoiseConfig {
    DiagonalParametric {
        c: f64,
        gamma0: f64,
        #[serde(default)]
        radius: Option<u32>,
    },
    DiagonalTable {
        entries: Vec<Vec<f64>>,
        #[serde(default)]
        radius: Option<u32>,
    },
    GeneralTable {
        entries: Vec<Vec<f64>>,
        #[serde(default)]
        radius: Option<u32>,
    },
    Zero {
        #[serde(default)]
        radius: Option<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    #[serde(default)]
    pub component: usize,
    pub k: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Initial field. Amplitudes at `k` also set the conjugate at `-k`; the
/// field is normalized before use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialConfig {
    Basis {
        #[serde(default)]
        component: usize,
        k: Vec<i32>,
    },
    Modes { modes: Vec<ModeAmplitude> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapConfig {
    #[serde(default = "default_one")]
    pub kappa0: f64,
    #[serde(default = "default_k0")]
    pub k0: u32,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

impl Default for LyapConfig {
    fn default() -> Self {
        LyapConfig { kappa0: 1.0, k0: 1, kappa: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_padding")]
    pub padding: f64,
    #[serde(default = "default_dilution")]
    pub dilution: f64,
    #[serde(default = "default_dissipation")]
    pub dissipation: f64,
    #[serde(default = "default_marker")]
    pub marker: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        ThresholdConfig {
            tau: t.tau,
            padding: t.padding,
            dilution: t.dilution,
            dissipation: t.dissipation,
            marker: t.marker,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    /// Regularity of the recorded `w` seminorms.
    #[serde(default = "default_half")]
    pub gamma: f64,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig { enabled: false, delta: 0.5, thresholds: ThresholdConfig::default(), gamma: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeminormConfig {
    pub gamma: f64,
    #[serde(default = "default_k0")]
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_true")]
    pub fk: bool,
    #[serde(default)]
    pub seminorms: Vec<SeminormConfig>,
    #[serde(default = "default_true")]
    pub log_g: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { fk: true, seminorms: Vec::new(), log_g: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default)]
    pub burn_in: f64,
    /// Defaults to the end of the run.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Recorded intervals per batch for the FK standard error.
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_true")]
    pub fk: bool,
    /// Several initial conditions; empty means the top-level `initial`.
    #[serde(default)]
    pub initials: Vec<InitialConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionConfig {
    /// Initial data `e_M` in component 0 along the first axis.
    pub levels: Vec<u32>,
    pub t_star: f64,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default)]
    pub j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstabilityConfig {
    pub levels: Vec<u32>,
    pub horizon: f64,
    /// Mass placed at `k = 0` by the initial-data construction.
    #[serde(default)]
    pub low_mass: f64,
    /// Start level `M₀` of the skeleton-median drift check, from `e_{M₀}`.
    #[serde(default)]
    pub drift_start: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateNoiseConfig {
    pub gamma0: f64,
    pub bound: f64,
    /// Defaults to `3 ν_min^{-1/(2a)}`.
    #[serde(default)]
    pub support_b: Option<f64>,
    #[serde(default = "default_k0")]
    pub k0: u32,
    pub m_max: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub lyap: LyapConfig,
    #[serde(default)]
    pub skeleton: SkeletonConfig,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub n_steps: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: String,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default)]
    pub contraction: Option<ContractionConfig>,
    #[serde(default)]
    pub instability: Option<InstabilityConfig>,
    #[serde(default)]
    pub validate_noise: Option<ValidateNoiseConfig>,
}

fn default_dim() -> usize {
    1
}
fn default_a() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_one() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}
fn default_k0() -> u32 {
    1
}
fn default_kappa() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    Thresholds::default().tau
}
fn default_padding() -> f64 {
    Thresholds::default().padding
}
fn default_dilution() -> f64 {
    Thresholds::default().dilution
}
fn default_dissipation() -> f64 {
    Thresholds::default().dissipation
}
fn default_marker() -> f64 {
    Thresholds::default().marker
}
fn default_delta() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}
fn default_batch() -> usize {
    100
}
fn default_paths() -> usize {
    1
}
fn default_stride() -> u64 {
    100
}
fn default_out() -> String {
    "out".to_string()
}

/// One failed check, located by its JSON path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration:\n{}", list(.0))]
    Invalid(Vec<Violation>),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl ConfigError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ConfigError::Invalid(v) => v,
            _ => &[],
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    RunConfig::from_json_str(&text)
}

impl RunConfig {
    /// Parses and validates; parse errors carry the JSON path of the offending value.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse { path: if path == "." { "$".into() } else { path }, message: e.into_inner().to_string() }
        })?;
        let violations = cfg.validate();
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    /// Canonical JSON: defaults filled in, object keys sorted.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&sort_keys(value)).expect("value serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut bad = |path: &str, message: &str| {
            v.push(Violation { path: path.to_string(), message: message.to_string() })
        };
        let m = &self.model;
        if m.dim == 0 {
            bad("model.dim", "dimension must be >= 1");
        }
        if m.nu.is_empty() {
            bad("model.nu", "at least one viscosity is required");
        }
        for (i, nu) in m.nu.iter().enumerate() {
            if !(*nu > 0.0) || !nu.is_finite() {
                bad(&format!("model.nu[{i}]"), "viscosities must be > 0");
            }
        }
        if !(m.a >= 1.0) || !m.a.is_finite() {
            bad("model.a", "a must be >= 1 (the median and Lyapunov-functional constructions need a >= 1)");
        }
        if m.radius == 0 {
            bad("model.radius", "truncation radius must be >= 1");
        }
        if !(m.dt > 0.0) || !m.dt.is_finite() {
            bad("model.dt", "time step must be > 0");
        }
        let comps = m.nu.len();
        match &self.noise {
            NoiseConfig::DiagonalParametric { c, gamma0, radius } => {
                if !(*c > 0.0) {
                    bad("noise.c", "c must be > 0");
                }
                if !(*gamma0 > 0.0) {
                    bad("noise.gamma0", "gamma0 must be > 0");
                }
                if *radius == Some(0) {
                    bad("noise.radius", "noise radius must be >= 1");
                }
            }
            NoiseConfig::DiagonalTable { entries, radius } | NoiseConfig::GeneralTable { entries, radius } => {
                if *radius == Some(0) {
                    bad("noise.radius", "noise radius must be >= 1");
                }
                let general = matches!(self.noise, NoiseConfig::GeneralTable { .. });
                let idx = if general { 4 } else { 2 };
                let k_radius = radius.unwrap_or(m.radius) as f64;
                let mut seen: BTreeMap<(Vec<i64>, Vec<i32>), usize> = BTreeMap::new();
                for (row_i, row) in entries.iter().enumerate() {
                    let path = format!("noise.entries[{row_i}]");
                    if row.len() != idx + m.dim + 1 {
                        bad(&path, &format!("expected {} numbers per entry", idx + m.dim + 1));
                        continue;
                    }
                    if row.iter().any(|x| !x.is_finite()) {
                        bad(&path, "entries must be finite");
                        continue;
                    }
                    let ints: Vec<i64> = row[..idx + m.dim].iter().map(|x| *x as i64).collect();
                    if row[..idx + m.dim].iter().zip(&ints).any(|(x, i)| *x != *i as f64) {
                        bad(&path, "component indices and mode coordinates must be integers");
                        continue;
                    }
                    if ints[..idx].iter().any(|&c| c < 0 || c as usize >= comps) {
                        bad(&path, "component index out of range");
                        continue;
                    }
                    let k: Vec<i32> = ints[idx..].iter().map(|&c| c as i32).collect();
                    let norm = k.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
                    if norm > k_radius {
                        bad(&path, "mode lies outside the noise radius");
                        continue;
                    }
                    let value = row[idx + m.dim];
                    if !general && value < 0.0 {
                        bad(&path, "diagonal coefficients must be >= 0");
                    }
                    // An entry at k also fixes -k.
                    let neg: Vec<i32> = k.iter().map(|c| -c).collect();
                    let canon = if neg < k { neg } else { k };
                    if let Some(first) = seen.insert((ints[..idx].to_vec(), canon), row_i) {
                        bad(&path, &format!("duplicates noise.entries[{first}] (entries {first} and {row_i})"));
                    }
                }
                if general && v.is_empty() {
                    check_psd(entries, comps, m.dim, &mut v);
                }
            }
            NoiseConfig::Zero { radius } => {
                if *radius == Some(0) {
                    bad_push(&mut v, "noise.radius", "noise radius must be >= 1");
                }
            }
        }
        let mut bad = |path: &str, message: &str| bad_push(&mut v, path, message);
        let l = &self.lyap;
        if !(l.kappa0 > 0.0) {
            bad("lyap.kappa0", "kappa0 must be > 0");
        }
        if l.k0 == 0 {
            bad("lyap.k0", "k0 must be >= 1");
        }
        if !(l.kappa > 0.0) {
            bad("lyap.kappa", "kappa must be > 0");
        }
        let s = &self.skeleton;
        if !(s.delta > 0.0 && s.delta < 1.0) {
            bad("skeleton.delta", "delta must lie in (0, 1)");
        }
        let t = &s.thresholds;
        for (name, x) in [
            ("tau", t.tau),
            ("padding", t.padding),
            ("dilution", t.dilution),
            ("dissipation", t.dissipation),
            ("marker", t.marker),
        ] {
            if !(x > 0.0) {
                bad(&format!("skeleton.thresholds.{name}"), "thresholds must be > 0");
            }
        }
        if self.n_paths == 0 {
            bad("n_paths", "n_paths must be >= 1");
        }
        if self.record_stride == 0 {
            bad("record_stride", "record_stride must be >= 1");
        }
        for (i, p) in self.simulate.seminorms.iter().enumerate() {
            if !(p.gamma >= 0.0) {
                bad(&format!("simulate.seminorms[{i}].gamma"), "gamma must be >= 0");
            }
        }
        let run_end = self.n_steps as f64 * m.dt;
        match self.scenario {
            Scenario::Simulate => {
                if self.initial.is_none() {
                    bad("initial", "simulate needs an initial condition");
                }
            }
            Scenario::Lyapunov => match &self.lyapunov {
                None => bad("lyapunov", "the lyapunov scenario needs a lyapunov section"),
                Some(ly) => {
                    if ly.initials.is_empty() && self.initial.is_none() {
                        bad("initial", "lyapunov needs an initial condition");
                    }
                    let horizon = ly.horizon.unwrap_or(run_end);
                    if !(ly.burn_in >= 0.0) {
                        bad("lyapunov.burn_in", "burn_in must be >= 0");
                    }
                    if !(horizon > ly.burn_in) {
                        bad("lyapunov.horizon", "horizon must exceed burn_in");
                    }
                    if horizon > run_end * (1.0 + 1e-12) {
                        bad("lyapunov.horizon", "horizon exceeds n_steps * dt");
                    }
                    if ly.batch == 0 {
                        bad("lyapunov.batch", "batch must be >= 1");
                    }
                }
            },
            Scenario::Contraction => match &self.contraction {
                None => bad("contraction", "the contraction scenario needs a contraction section"),
                Some(c) => {
                    if c.levels.is_empty() {
                        bad("contraction.levels", "at least one level is required");
                    }
                    if c.levels.iter().any(|&l| l > m.radius) {
                        bad("contraction.levels", "levels must not exceed the truncation radius");
                    }
                    if !(c.t_star > 0.0) {
                        bad("contraction.t_star", "t_star must be > 0");
                    }
                    if !(c.c > 0.0) || !(c.j >= 0.0) {
                        bad("contraction.c", "c must be > 0 and j >= 0");
                    }
                }
            },
            Scenario::Instability => match &self.instability {
                None => bad("instability", "the instability scenario needs an instability section"),
                Some(c) => {
                    if c.levels.is_empty() {
                        bad("instability.levels", "at least one level is required");
                    }
                    if c.levels.iter().any(|&l| l < 2) {
                        bad("instability.levels", "levels must be >= 2");
                    }
                    if !(c.horizon > 0.0) {
                        bad("instability.horizon", "horizon must be > 0");
                    }
                    if !(0.0..1.0).contains(&c.low_mass) {
                        bad("instability.low_mass", "low_mass must lie in [0, 1)");
                    }
                    if c.drift_start.is_some_and(|l| l > m.radius) {
                        bad("instability.drift_start", "drift_start must not exceed the truncation radius");
                    }
                }
            },
            Scenario::ValidateNoise => match &self.validate_noise {
                None => bad("validate_noise", "the validate-noise scenario needs a validate_noise section"),
                Some(c) => {
                    if !(c.bound > 0.0) {
                        bad("validate_noise.bound", "bound must be > 0");
                    }
                    if c.m_max < c.k0 {
                        bad("validate_noise.m_max", "m_max must be >= k0");
                    }
                }
            },
            Scenario::Selftest => {}
        }
        v
    }

    pub fn model_params(&self) -> ModelParams {
        let m = &self.model;
        let mut p = ModelParams::new(m.dim, m.nu.clone(), m.a, m.radius, m.dt);
        p.scheme = match m.scheme {
            SchemeName::ExponentialEuler => Scheme::ExponentialEuler,
        };
        p.drift_form = match m.drift_form {
            DriftName::Ito => DriftForm::Ito,
            DriftName::StratonovichCorrected => DriftForm::StratonovichCorrected,
        };
        p
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        let comps = self.model.nu.len();
        let dim = self.model.dim;
        let default = self.model.radius;
        match &self.noise {
            NoiseConfig::DiagonalParametric { c, gamma0, radius } => {
                NoiseSpec::parametric(comps, *c, *gamma0, radius.unwrap_or(default))
            }
            NoiseConfig::Zero { radius } => NoiseSpec::zero(comps, radius.unwrap_or(default)),
            NoiseConfig::DiagonalTable { entries, radius } => {
                let rows = entries
                    .iter()
                    .map(|r| TableEntry {
                        alpha: r[0] as usize,
                        beta: r[1] as usize,
                        mode: r[2..2 + dim].iter().map(|&x| x as i32).collect(),
                        value: r[2 + dim],
                    })
                    .collect();
                NoiseSpec { components: comps, form: NoiseForm::DiagonalTable(rows), radius: radius.unwrap_or(default) }
            }
            NoiseConfig::GeneralTable { entries, radius } => {
                let rows = entries
                    .iter()
                    .map(|r| TensorEntry {
                        alpha: r[0] as usize,
                        alpha2: r[1] as usize,
                        beta: r[2] as usize,
                        beta2: r[3] as usize,
                        mode: r[4..4 + dim].iter().map(|&x| x as i32).collect(),
                        value: r[4 + dim],
                    })
                    .collect();
                NoiseSpec { components: comps, form: NoiseForm::General(rows), radius: radius.unwrap_or(default) }
            }
        }
    }

    pub fn build_model(&self) -> projflow_core::Result<Model> {
        Model::new(self.model_params(), &self.noise_spec())
    }

    pub fn lyap_params(&self) -> LyapParams {
        LyapParams { kappa0: self.lyap.kappa0, k0: self.lyap.k0, kappa: self.lyap.kappa }
    }

    pub fn skeleton_params(&self) -> SkeletonParams {
        let t = &self.skeleton.thresholds;
        SkeletonParams {
            delta: self.skeleton.delta,
            thresholds: Thresholds {
                tau: t.tau,
                padding: t.padding,
                dilution: t.dilution,
                dissipation: t.dissipation,
                marker: t.marker,
            },
            gamma: self.skeleton.gamma,
            k0: self.lyap.k0,
        }
    }

    pub fn seminorm_probes(&self) -> Vec<SeminormProbe> {
        self.simulate.seminorms.iter().map(|s| SeminormProbe { gamma: s.gamma, offset: s.offset }).collect()
    }
}

fn bad_push(v: &mut Vec<Violation>, path: &str, message: &str) {
    v.push(Violation { path: path.to_string(), message: message.to_string() });
}

/// Per-mode covariance of a general tensor, as a matrix over index pairs
/// `(α, β)`, must be positive semidefinite.
fn check_psd(entries: &[Vec<f64>], comps: usize, dim: usize, v: &mut Vec<Violation>) {
    if comps > 4 {
        return;
    }
    let n = comps * comps;
    let mut per_mode: BTreeMap<Vec<i32>, DMatrix<f64>> = BTreeMap::new();
    for r in entries {
        let k: Vec<i32> = r[4..4 + dim].iter().map(|&x| x as i32).collect();
        let neg: Vec<i32> = k.iter().map(|c| -c).collect();
        let canon = if neg < k { neg } else { k };
        let mat = per_mode.entry(canon).or_insert_with(|| DMatrix::zeros(n, n));
        let (a, a2, b, b2) = (r[0] as usize, r[1] as usize, r[2] as usize, r[3] as usize);
        mat[(a * comps + b, a2 * comps + b2)] = r[4 + dim];
    }
    for (k, mat) in per_mode {
        let asym = (&mat - mat.transpose()).abs().max();
        if asym > 1e-12 {
            bad_push(v, "noise.entries", &format!("covariance at mode {k:?} is not symmetric"));
            continue;
        }
        let min_eig = mat.symmetric_eigenvalues().min();
        if min_eig < -1e-12 {
            bad_push(v, "noise.entries", &format!("covariance at mode {k:?} is not positive semidefinite (eigenvalue {min_eig})"));
        }
    }
}

fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Normalized initial field for `init` on `model`.
pub fn initial_field(init: &InitialConfig, model: &Model) -> anyhow::Result<SpectralField> {
    let mut u = model.zero_field();
    match init {
        InitialConfig::Basis { component, k } => {
            u = model.basis(*component, k).map_err(|e| anyhow::anyhow!("initial.k: {e}"))?;
        }
        InitialConfig::Modes { modes } => {
            for (i, md) in modes.iter().enumerate() {
                let idx = model
                    .lattice()
                    .index_of(&md.k)
                    .ok_or_else(|| anyhow::anyhow!("initial.modes[{i}].k: mode not on the lattice"))?;
                if md.component >= model.params().components {
                    anyhow::bail!("initial.modes[{i}].component: out of range");
                }
                u.set_pair(md.component, idx, Complex64::new(md.re, md.im));
            }
        }
    }
    let n = u.norm();
    if !(n > 0.0) {
        anyhow::bail!("initial: the initial field is zero");
    }
    u.scale(1.0 / n);
    Ok(u)
}
