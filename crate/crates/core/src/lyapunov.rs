//! Lyapunov functionals, exponent estimators and per-trajectory kernels of
//! the contraction and instability experiments.
//!
//! Functional values are carried as logarithms: `G` is the exponential of an
//! `O(M)` quantity and overflows for moderate medians.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::bands::{LevelProfile, Shells};
use crate::integrator::{Model, SimState, Stepper};
use crate::lattice::SpectralField;
use crate::math;
use crate::median::Marker;
use crate::run::RunRecord;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapParams {
    /// Weight `κ₀ > 0` of the median.
    pub kappa0: f64,
    /// Level offset `k₀ ≥ 1` of the seminorm.
    pub k0: u32,
    /// Weight `κ > 0` of the skeleton functional.
    pub kappa: f64,
}

impl Default for LyapParams {
    fn default() -> Self {
        LyapParams { kappa0: 1.0, k0: 1, kappa: 0.5 }
    }
}

impl LyapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0) || !self.kappa0.is_finite() {
            return Err(Error::invalid("kappa0", "kappa0 must be > 0"));
        }
        if self.k0 == 0 {
            return Err(Error::invalid("k0", "k0 must be >= 1"));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid("kappa", "kappa must be > 0"));
        }
        Ok(())
    }
}

/// `log G(π) = κ₀ M(π) + ‖π‖²_{1/2, M(π)+k₀}`.
pub fn log_g(shells: &Shells, pi: &SpectralField, p: &LyapParams) -> Result<f64> {
    let profile = shells.profile(pi)?;
    log_g_from_profile(shells, pi, &profile, p)
}

pub(crate) fn log_g_from_profile(
    shells: &Shells,
    pi: &SpectralField,
    profile: &LevelProfile,
    p: &LyapParams,
) -> Result<f64> {
    let m = profile.median().map_err(|_| Error::ZeroField)?;
    let semi = shells.shifted_seminorm_sq(pi, 0.5, m as i64 + p.k0 as i64)?;
    Ok(p.kappa0 * m as f64 + semi)
}

/// `G(π)`; `+∞` once the exponent exceeds the `f64` range.
pub fn functional_g(shells: &Shells, pi: &SpectralField, p: &LyapParams) -> Result<f64> {
    Ok(math::exp(log_g(shells, pi, p)?))
}

/// `log F = κ₀ M + κ ‖w‖²_{1/2, M+k₀}` with `w = Π^>_M π / ‖Π^<_M π‖`.
pub fn log_f(shells: &Shells, kappa: f64, level: u32, pi: &SpectralField, p: &LyapParams) -> Result<f64> {
    let low = shells.profile(pi)?.low(level as i64);
    if !(low > 0.0) {
        return Err(Error::WUndefined { level: level as i64 });
    }
    if kappa == 0.0 {
        return Ok(p.kappa0 * level as f64);
    }
    let high = shells.project(pi, crate::BandSpec::new(level as i64, crate::Band::High))?;
    let semi = shells.shifted_seminorm_sq(&high, 0.5, level as i64 + p.k0 as i64)?;
    Ok(p.kappa0 * level as f64 + kappa * semi / low)
}

pub fn functional_f(shells: &Shells, kappa: f64, level: u32, pi: &SpectralField, p: &LyapParams) -> Result<f64> {
    Ok(math::exp(log_f(shells, kappa, level, pi, p)?))
}

/// Constants with `c₁ ‖π‖²_{H^{1/2}} ≤ log G(π) ≤ c₂ ‖π‖²_{H^{1/2}}` on unit fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichConstants {
    pub c1: f64,
    pub c2: f64,
}

impl SandwichConstants {
    /// Upper: `M ≤ (1 + 2 ν_max^{1/(2a)}) ‖π‖²_{H^{1/2}}` because more than half
    /// the mass sits above `(M-1)_α` when `M ≥ 2`.
    /// Lower: at most half the mass lies at level `> M`, so
    /// `‖π‖²_{H^{1/2}} ≤ A M + ‖π‖²_{1/2, M+k₀}` with `A = 2 ν_min^{-1/(2a)} (1+k₀) + 1`.
    pub fn new(p: &LyapParams, nu_min: f64, nu_max: f64, a: f64) -> Self {
        let c2 = p.kappa0 * (1.0 + 2.0 * math::pow(nu_max, 1.0 / (2.0 * a))) + 1.0;
        let big_a = 2.0 * math::pow(nu_min, -1.0 / (2.0 * a)) * (1.0 + p.k0 as f64) + 1.0;
        let c1 = 1.0 / (big_a / p.kappa0).max(1.0);
        SandwichConstants { c1, c2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Direct,
    Fk,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Fk => "fk",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentEstimate {
    pub lambda: f64,
    pub stderr: f64,
    pub method: Method,
    pub burn_in: f64,
    pub horizon: f64,
    pub n_paths: usize,
}

impl ExponentEstimate {
    /// Whether the `z`-sigma intervals of two estimates intersect.
    pub fn overlaps(&self, other: &ExponentEstimate, z: f64) -> bool {
        (self.lambda - other.lambda).abs() <= z * (self.stderr + other.stderr)
    }

    /// `|λ̂₁ - λ̂₂| / sqrt(se₁² + se₂²)`; infinite when both errors vanish and the values differ.
    pub fn z_distance(&self, other: &ExponentEstimate) -> f64 {
        let diff = (self.lambda - other.lambda).abs();
        let se = math::sqrt(self.stderr * self.stderr + other.stderr * other.stderr);
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }
}

/// Indices of the first sample at or after `burn_in` and the last at or before `horizon`.
fn window(rec: &RunRecord, burn_in: f64, horizon: f64) -> Result<(usize, usize)> {
    let last = rec.samples.last().ok_or(Error::EmptyWindow)?;
    let tol = 1e-9 * horizon.abs().max(1.0);
    if horizon > last.t + tol {
        return Err(Error::HorizonBeyondRecord { horizon, recorded: last.t });
    }
    let b = rec.samples.partition_point(|s| s.t < burn_in - tol);
    let h = rec.samples.partition_point(|s| s.t <= horizon + tol);
    if h == 0 || b >= h - 1 {
        return Err(Error::EmptyWindow);
    }
    Ok((b, h - 1))
}

fn check_window(burn_in: f64, horizon: f64) -> Result<()> {
    if !(horizon > burn_in) {
        return Err(Error::HorizonBeforeBurnIn { burn_in, horizon });
    }
    Ok(())
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var / n))
}

/// Mean over paths of `(log r(horizon) - log r(burn_in)) / (horizon - burn_in)`.
pub fn estimate_lambda_direct(records: &[RunRecord], burn_in: f64, horizon: f64) -> Result<ExponentEstimate> {
    check_window(burn_in, horizon)?;
    if records.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let mut per_path = Vec::with_capacity(records.len());
    for rec in records {
        let (b, h) = window(rec, burn_in, horizon)?;
        let (sb, sh) = (&rec.samples[b], &rec.samples[h]);
        per_path.push((sh.logr - sb.logr) / (sh.t - sb.t));
    }
    let (lambda, stderr) = mean_and_stderr(&per_path);
    Ok(ExponentEstimate { lambda, stderr, method: Method::Direct, burn_in, horizon, n_paths: records.len() })
}

/// Time-and-ensemble average of the FK integrand over the window. The
/// standard error comes from means over batches of `batch` consecutive
/// recorded intervals, pooled across paths.
pub fn estimate_lambda_fk(
    records: &[RunRecord],
    burn_in: f64,
    horizon: f64,
    batch: usize,
) -> Result<ExponentEstimate> {
    check_window(burn_in, horizon)?;
    if records.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let batch = batch.max(1);
    let mut per_path = Vec::with_capacity(records.len());
    let mut batches = Vec::new();
    for rec in records {
        let (b, h) = window(rec, burn_in, horizon)?;
        let cum = |i: usize| {
            rec.samples[i].fk_cumulative.ok_or(Error::invalid("fk", "FK samples were not recorded"))
        };
        per_path.push((cum(h)? - cum(b)?) / (rec.samples[h].t - rec.samples[b].t));
        let mut start = b;
        while start + batch <= h {
            let end = start + batch;
            batches.push((cum(end)? - cum(start)?) / (rec.samples[end].t - rec.samples[start].t));
            start = end;
        }
    }
    let lambda = per_path.iter().sum::<f64>() / per_path.len() as f64;
    let stderr = if batches.len() >= 2 { mean_and_stderr(&batches).1 } else { mean_and_stderr(&per_path).1 };
    Ok(ExponentEstimate { lambda, stderr, method: Method::Fk, burn_in, horizon, n_paths: records.len() })
}

/// `log Σ exp(x_i)`, `-∞` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + math::ln(xs.iter().map(|x| math::exp(x - max)).sum::<f64>())
}

/// `log((1/n) Σ exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - math::ln(xs.len() as f64)
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * math::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo estimate of `E[G(π_{t⋆})]` from one initial condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionRow {
    pub level: u32,
    pub log_g0: f64,
    pub log_mean_g: f64,
    /// `log(Ê[G(π_{t⋆})] / G(π₀))`
    pub log_ratio: f64,
    /// Standard error of `Ê[G]` relative to `Ê[G]`.
    pub rel_stderr: f64,
    pub n_paths: usize,
    /// `Ê[G] ≤ c G(π₀) + J` for the configured constants.
    pub within_envelope: bool,
}

impl ContractionRow {
    pub fn new(level: u32, log_g0: f64, log_values: &[f64], c: f64, j: f64) -> Result<Self> {
        if log_values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let log_mean_g = log_mean_exp(log_values);
        let n = log_values.len() as f64;
        // Relative moments of exp(x - log_mean), which has mean 1.
        let second = log_values.iter().map(|x| math::exp(2.0 * (x - log_mean_g))).sum::<f64>() / n;
        let rel_stderr = if log_values.len() > 1 {
            math::sqrt(((second - 1.0) * n / (n - 1.0)).max(0.0) / n)
        } else {
            0.0
        };
        let bound = log_sum_exp(&[math::ln(c) + log_g0, math::ln(j)]);
        Ok(ContractionRow {
            level,
            log_g0,
            log_mean_g,
            log_ratio: log_mean_g - log_g0,
            rel_stderr,
            n_paths: log_values.len(),
            within_envelope: log_mean_g <= bound,
        })
    }
}

/// Runs `n_steps` from `u0` and returns `log G(π_{t⋆})`.
pub fn contraction_trajectory<R: Rng + ?Sized>(
    model: &Model,
    u0: &SpectralField,
    n_steps: u64,
    p: &LyapParams,
    rng: &mut R,
) -> Result<f64> {
    let mut state = SimState::new(u0)?;
    let mut stepper = Stepper::new(model)?;
    for _ in 0..n_steps {
        stepper.step(&mut state, rng)?;
    }
    log_g(model.shells(), &state.pi, p)
}

/// Deterministic initial data for the dilution experiment: mass `eps` at
/// `k = 0` and `1 - eps` spread evenly over the modes at levels `M` and
/// `M - 1` of every component.
pub fn instability_initial_data(model: &Model, level: u32, eps: f64) -> Result<SpectralField> {
    if level < 2 {
        return Err(Error::InfeasibleInitialData("the dilution level needs M >= 2"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InfeasibleInitialData("low-band mass must lie in [0, 1)"));
    }
    // ‖central‖ ≥ ¼ ‖low‖ needs 1 - eps ≥ eps / 16.
    if 1.0 - eps < eps / 16.0 {
        return Err(Error::InfeasibleInitialData("low-band mass too large for a concentrated start"));
    }
    let shells = model.shells();
    let lat = model.lattice();
    let m = model.params().components;
    let mut targets = Vec::new();
    for alpha in 0..m {
        for i in lat.center() + 1..lat.len() {
            let lv = shells.level(alpha, i);
            if lv == level || lv + 1 == level {
                targets.push((alpha, i));
            }
        }
    }
    if targets.is_empty() {
        return Err(Error::InfeasibleInitialData("no lattice modes at levels M and M - 1"));
    }
    let mut u = model.zero_field();
    // Each representative mode carries its conjugate partner as well.
    let amp = math::sqrt((1.0 - eps) / (2.0 * targets.len() as f64));
    for (alpha, i) in targets {
        u.set_pair(alpha, i, Complex64::new(amp, 0.0));
    }
    if eps > 0.0 {
        for alpha in 0..m {
            u.set_pair(alpha, lat.center(), Complex64::new(math::sqrt(eps / m as f64), 0.0));
        }
    }
    let profile = shells.profile(&u)?;
    let lv = level as i64;
    if math::sqrt(profile.geq(lv)) > 2.0 * math::sqrt(profile.low(lv)) {
        return Err(Error::InfeasibleInitialData("high band exceeds twice the low band"));
    }
    Ok(u)
}

/// First grid time `t ≤ n_steps·dt` at which the state is diluted about
/// level `M - 1`, i.e. `‖(Π^c_{M-1} + Π^c_{M-2}) u‖ < ¼ ‖Π^<_{M-2} u‖`.
pub fn first_dilution<R: Rng + ?Sized>(
    model: &Model,
    level: u32,
    u0: &SpectralField,
    n_steps: u64,
    rng: &mut R,
) -> Result<Option<f64>> {
    if level < 2 {
        return Err(Error::LevelTooSmall { level: level as i64 - 1 });
    }
    let shells = model.shells();
    let mut state = SimState::new(u0)?;
    let mut stepper = Stepper::new(model)?;
    let mut profile = LevelProfile::default();
    let marker_level = level as i64 - 1;
    let diluted = |profile: &LevelProfile| {
        let central = math::sqrt(profile.central(marker_level) + profile.central(marker_level - 1));
        central < 0.25 * math::sqrt(profile.low(marker_level - 1))
    };
    shells.fill_profile(&state.pi, &mut profile)?;
    if diluted(&profile) {
        return Ok(Some(0.0));
    }
    for _ in 0..n_steps {
        stepper.step(&mut state, rng)?;
        shells.fill_profile(&state.pi, &mut profile)?;
        if diluted(&profile) {
            return Ok(Some(state.t));
        }
    }
    Ok(None)
}

/// Dilution probability at one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstabilityRow {
    pub level: u32,
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl InstabilityRow {
    pub fn new(level: u32, hits: u64, n: u64) -> Self {
        let (wilson_lo, wilson_hi) = wilson_interval(hits, n, 1.959_963_984_540_054);
        let p_hat = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        InstabilityRow { level, hits, n, p_hat, wilson_lo, wilson_hi }
    }

    /// `self` sits at a lower level; a strict reversal means its whole
    /// interval lies above the interval of `higher`.
    pub fn reversed_against(&self, higher: &InstabilityRow) -> bool {
        self.wilson_lo > higher.wilson_hi
    }
}

/// Marker of `u` about level `M - 1`, as used by the dilution experiment.
pub fn dilution_marker(shells: &Shells, level: u32, u: &SpectralField) -> Result<Marker> {
    crate::median::marker(shells, level as i64 - 1, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::ModelParams;
    use crate::noise::NoiseSpec;

    fn model(k: u32) -> Model {
        Model::new(ModelParams::new(1, alloc::vec![1.0], 1.0, k, 1e-3), &NoiseSpec::zero(1, k)).unwrap()
    }

    #[test]
    fn g_examples() {
        let m = model(10);
        let p = LyapParams::default();
        assert!((log_g(m.shells(), &m.basis(0, &[0]).unwrap(), &p).unwrap() - 1.0).abs() < 1e-15);
        assert!((log_g(m.shells(), &m.basis(0, &[5]).unwrap(), &p).unwrap() - 5.0).abs() < 1e-15);
        assert!((functional_g(m.shells(), &m.basis(0, &[0]).unwrap(), &p).unwrap() - 1f64.exp()).abs() < 1e-14);
        assert_eq!(log_g(m.shells(), &m.zero_field(), &p), Err(Error::ZeroField));
    }

    #[test]
    fn f_examples() {
        let m = model(10);
        let p = LyapParams::default();
        let e0 = m.basis(0, &[0]).unwrap();
        assert_eq!(log_f(m.shells(), 0.5, 1, &e0, &p).unwrap(), 1.0);
        let mut mixed = m.basis(0, &[1]).unwrap();
        mixed.add_scaled(1.0, &m.basis(0, &[9]).unwrap()).unwrap();
        assert_eq!(log_f(m.shells(), 0.0, 3, &mixed, &p).unwrap(), 3.0);
        // w = Π^>_3 part at |k| = 9, seminorm level 4: weight 1 + 9 - 4 = 6, low mass 1.
        assert!((log_f(m.shells(), 1.0, 3, &mixed, &p).unwrap() - 9.0).abs() < 1e-12);
        let e9 = m.basis(0, &[9]).unwrap();
        assert_eq!(log_f(m.shells(), 1.0, 3, &e9, &p), Err(Error::WUndefined { level: 3 }));
    }

    #[test]
    fn log_space_helpers() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_mean_exp(&[3.0, 3.0, 3.0]) - 3.0).abs() < 1e-15);
        let (lo, hi) = wilson_interval(0, 200, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
        let (lo, hi) = wilson_interval(100, 200, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && ((lo + hi) / 2.0 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn initial_data_constraints() {
        let m = model(16);
        let u = instability_initial_data(&m, 10, 0.0).unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-14);
        assert_eq!(dilution_marker(m.shells(), 10, &u).unwrap(), Marker::Concentrated);
        assert!(instability_initial_data(&m, 1, 0.0).is_err());
        assert!(instability_initial_data(&m, 30, 0.0).is_err());
        assert!(instability_initial_data(&m, 10, 0.95).is_err());
    }

    #[test]
    fn contraction_row_noise_free_ground_state() {
        let row = ContractionRow::new(0, 1.0, &[1.0; 8], 1.0, 0.0).unwrap();
        assert_eq!(row.log_ratio, 0.0);
        assert_eq!(row.rel_stderr, 0.0);
        assert!(row.within_envelope);
    }
}
