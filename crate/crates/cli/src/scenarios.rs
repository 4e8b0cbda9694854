//! Scenario drivers. Each scenario has a pure computation returning a
//! serializable report, and `run` adds artifact writing around it.
//!
//! Trajectory `g·n_paths + i` of ensemble group `g` draws from the stream
//! `derive_seed(master_seed, g·n_paths + i)`.

use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use projflow_core::lyapunov::{
    contraction_trajectory, estimate_lambda_direct, estimate_lambda_fk, first_dilution, instability_initial_data,
    log_g, ContractionRow, ExponentEstimate, InstabilityRow,
};
use projflow_core::noise::{check_decay, check_support_condition};
use projflow_core::median::Violations;
use projflow_core::{simulate, Model, RunRecord, RunSpec, SpectralField};
use serde::Serialize;

use crate::checks::{self, CheckResult};
use crate::config::{initial_field, InitialConfig, RunConfig, Scenario};
use crate::ensemble::{run_indexed, seeds};
use crate::io::{Artifacts, RunManifest};

/// Result of one CLI invocation.
pub struct Outcome {
    pub manifest: RunManifest,
    /// 0 on success, 2 when a self-check failed.
    pub exit_code: i32,
    /// Human-readable summary, one item per line.
    pub lines: Vec<String>,
}

/// Trajectories of one ensemble group plus warnings for paths that died.
pub struct Ensemble {
    pub records: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

fn steps_for(t: f64, dt: f64) -> u64 {
    (t / dt - 1e-9).ceil() as u64
}

/// `n_paths` trajectories of group `group` from `u0`.
pub fn run_ensemble(cfg: &RunConfig, model: &Model, u0: &SpectralField, spec: &RunSpec, group: usize) -> Ensemble {
    let start = group * cfg.n_paths;
    let results = run_indexed(cfg.master_seed, start..start + cfg.n_paths, |idx, seed, rng| {
        simulate(model, u0, spec, rng).map(|mut r| {
            r.trajectory = idx as u64;
            r.seed = seed;
            r
        })
    });
    let mut records = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => {
                if let Some(t) = rec.skeleton_aborted_at {
                    warnings.push(format!("trajectory {}: skeleton machine stopped at t = {t}", start + i));
                }
                records.push(rec)
            }
            Err(e) => warnings.push(format!("trajectory {}: {e}", start + i)),
        }
    }
    Ensemble { records, warnings }
}

fn run_spec(cfg: &RunConfig) -> RunSpec {
    let mut spec = RunSpec::new(cfg.n_steps, cfg.record_stride);
    spec.fk = cfg.simulate.fk;
    spec.seminorms = cfg.seminorm_probes();
    if cfg.skeleton.enabled {
        spec.skeleton = Some(cfg.skeleton_params());
    }
    if cfg.simulate.log_g {
        spec.lyap = Some(cfg.lyap_params());
    }
    spec
}

/// Serialized skeleton violation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCounts {
    pub grid_points: u64,
    pub jumps: u64,
    pub median_bound: u64,
    pub downward_step: u64,
    pub median_dominance: u64,
    pub gap: u64,
    pub event_a: u64,
    pub dilution_exit: u64,
    pub seminorm_jump: u64,
}

impl From<Violations> for ViolationCounts {
    fn from(v: Violations) -> Self {
        ViolationCounts {
            grid_points: v.grid_points,
            jumps: v.jumps,
            median_bound: v.median_bound,
            downward_step: v.downward_step,
            median_dominance: v.median_dominance,
            gap: v.gap,
            event_a: v.event_a,
            dilution_exit: v.dilution_exit,
            seminorm_jump: v.seminorm_jump,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub n_paths: usize,
    pub completed: usize,
    pub jumps: usize,
    pub violations: Option<ViolationCounts>,
    pub skeleton_aborted: usize,
    pub config_hash: String,
}

pub fn simulate_runs(cfg: &RunConfig) -> anyhow::Result<(Ensemble, SimulateSummary)> {
    let model = cfg.build_model()?;
    let init = cfg.initial.as_ref().context("initial condition required")?;
    let u0 = initial_field(init, &model)?;
    let ens = run_ensemble(cfg, &model, &u0, &run_spec(cfg), 0);
    let violations = if cfg.skeleton.enabled {
        let mut total = Violations::default();
        for r in &ens.records {
            if let Some(v) = &r.violations {
                total.merge(v);
            }
        }
        Some(ViolationCounts::from(total))
    } else {
        None
    };
    let summary = SimulateSummary {
        n_paths: cfg.n_paths,
        completed: ens.records.len(),
        jumps: ens.records.iter().map(|r| r.jumps.len()).sum(),
        violations,
        skeleton_aborted: ens.records.iter().filter(|r| r.skeleton_aborted_at.is_some()).count(),
        config_hash: cfg.hash(),
    };
    Ok((ens, summary))
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateRow {
    pub initial: usize,
    pub method: String,
    pub lambda: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub burn_in: f64,
    pub horizon: f64,
    pub config_hash: String,
}

impl EstimateRow {
    fn new(initial: usize, e: &ExponentEstimate, hash: &str) -> Self {
        EstimateRow {
            initial,
            method: e.method.name().to_string(),
            lambda: e.lambda,
            stderr: e.stderr,
            n_paths: e.n_paths,
            burn_in: e.burn_in,
            horizon: e.horizon,
            config_hash: hash.to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub estimates: Vec<EstimateRow>,
    /// Per initial condition: `|λ̂_fk - λ̂_direct| / combined stderr`.
    pub fk_direct_z: Vec<f64>,
    /// Whether the 3σ intervals of every pair of initial conditions overlap (direct estimator).
    pub initials_overlap: bool,
    pub config_hash: String,
}

/// Per initial condition: its direct estimate and, if recorded, its FK estimate.
pub struct LyapunovResult {
    pub direct: Vec<ExponentEstimate>,
    pub fk: Vec<Option<ExponentEstimate>>,
    pub report: LyapunovReport,
}

pub fn lyapunov_initials(cfg: &RunConfig) -> anyhow::Result<Vec<InitialConfig>> {
    let ly = cfg.lyapunov.as_ref().context("lyapunov section required")?;
    Ok(if ly.initials.is_empty() {
        vec![cfg.initial.clone().context("initial condition required")?]
    } else {
        ly.initials.clone()
    })
}

/// Trajectories for every initial condition of a lyapunov config, group `g` for initial `g`.
pub fn lyapunov_runs(cfg: &RunConfig) -> anyhow::Result<Vec<Ensemble>> {
    let ly = cfg.lyapunov.as_ref().context("lyapunov section required")?;
    let model = cfg.build_model()?;
    let mut spec = RunSpec::new(cfg.n_steps, cfg.record_stride);
    spec.fk = ly.fk;
    spec.seminorms = cfg.seminorm_probes();
    let mut out = Vec::new();
    for (g, init) in lyapunov_initials(cfg)?.iter().enumerate() {
        let u0 = initial_field(init, &model)?;
        out.push(run_ensemble(cfg, &model, &u0, &spec, g));
    }
    Ok(out)
}

pub fn lyapunov_estimates(cfg: &RunConfig, runs: &[Ensemble]) -> anyhow::Result<LyapunovResult> {
    let ly = cfg.lyapunov.as_ref().context("lyapunov section required")?;
    let horizon = ly.horizon.unwrap_or(cfg.n_steps as f64 * cfg.model.dt);
    let hash = cfg.hash();
    let mut direct = Vec::new();
    let mut fk = Vec::new();
    let mut rows = Vec::new();
    let mut zs = Vec::new();
    for (g, ens) in runs.iter().enumerate() {
        let d = estimate_lambda_direct(&ens.records, ly.burn_in, horizon)?;
        rows.push(EstimateRow::new(g, &d, &hash));
        let f = if ly.fk { Some(estimate_lambda_fk(&ens.records, ly.burn_in, horizon, ly.batch)?) } else { None };
        if let Some(f) = &f {
            rows.push(EstimateRow::new(g, f, &hash));
            zs.push(f.z_distance(&d));
        }
        direct.push(d);
        fk.push(f);
    }
    let mut overlap = true;
    for i in 0..direct.len() {
        for j in i + 1..direct.len() {
            overlap &= direct[i].overlaps(&direct[j], 3.0);
        }
    }
    let report = LyapunovReport { estimates: rows, fk_direct_z: zs, initials_overlap: overlap, config_hash: hash };
    Ok(LyapunovResult { direct, fk, report })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionRowOut {
    #[serde(rename = "M")]
    pub level: u32,
    pub log_g0: f64,
    pub log_mean_g: f64,
    pub log_ratio: f64,
    pub rel_stderr: f64,
    pub n_paths: usize,
    pub within_envelope: bool,
    pub contracts: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub t_star: f64,
    pub c: f64,
    pub j: f64,
    pub rows: Vec<ContractionRowOut>,
    pub all_contract: bool,
    pub warnings: Vec<String>,
    pub config_hash: String,
}

/// `Ê[G(π_{t⋆})]` from `e_M` (component 0, first axis) for each configured `M`.
pub fn contraction_report(cfg: &RunConfig) -> anyhow::Result<ContractionReport> {
    let cc = cfg.contraction.as_ref().context("contraction section required")?;
    let model = cfg.build_model()?;
    let p = cfg.lyap_params();
    let n_steps = steps_for(cc.t_star, cfg.model.dt);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (g, &level) in cc.levels.iter().enumerate() {
        let mut k = vec![0i32; cfg.model.dim];
        k[0] = level as i32;
        let u0 = model.basis(0, &k)?;
        let log_g0 = log_g(model.shells(), &u0, &p)?;
        let start = g * cfg.n_paths;
        let values = run_indexed(cfg.master_seed, start..start + cfg.n_paths, |_, _, rng| {
            contraction_trajectory(&model, &u0, n_steps, &p, rng)
        });
        let mut logs = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            match v {
                Ok(x) => logs.push(x),
                Err(e) => warnings.push(format!("trajectory {}: {e}", start + i)),
            }
        }
        let row = ContractionRow::new(level, log_g0, &logs, cc.c, cc.j)?;
        rows.push(ContractionRowOut {
            level,
            log_g0: row.log_g0,
            log_mean_g: row.log_mean_g,
            log_ratio: row.log_ratio,
            rel_stderr: row.rel_stderr,
            n_paths: row.n_paths,
            within_envelope: row.within_envelope,
            contracts: row.log_ratio < 0.0,
        });
    }
    Ok(ContractionReport {
        t_star: cc.t_star,
        c: cc.c,
        j: cc.j,
        all_contract: rows.iter().all(|r| r.contracts),
        rows,
        warnings,
        config_hash: cfg.hash(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InstabilityRowOut {
    #[serde(rename = "M")]
    pub level: u32,
    pub hits: u64,
    pub n: u64,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

impl From<InstabilityRow> for InstabilityRowOut {
    fn from(r: InstabilityRow) -> Self {
        InstabilityRowOut { level: r.level, hits: r.hits, n: r.n, p_hat: r.p_hat, wilson_lo: r.wilson_lo, wilson_hi: r.wilson_hi }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftCheck {
    pub start_level: u32,
    pub horizon: f64,
    pub n_paths: usize,
    /// Mean skeleton median at the horizon.
    pub mean_skeleton_median: f64,
    /// Mean energy median at the horizon.
    pub mean_energy_median: f64,
    pub below_start: bool,
    pub skeleton_aborted: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstabilityReport {
    pub horizon: f64,
    pub low_mass: f64,
    pub rows: Vec<InstabilityRowOut>,
    /// No lower level has its Wilson interval strictly above that of a higher level.
    pub no_reversal: bool,
    pub drift: Option<DriftCheck>,
    pub warnings: Vec<String>,
    pub config_hash: String,
}

pub fn instability_report(cfg: &RunConfig) -> anyhow::Result<InstabilityReport> {
    let ic = cfg.instability.as_ref().context("instability section required")?;
    let model = cfg.build_model()?;
    let n_steps = steps_for(ic.horizon, cfg.model.dt);
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (g, &level) in ic.levels.iter().enumerate() {
        let u0 = instability_initial_data(&model, level, ic.low_mass)?;
        let start = g * cfg.n_paths;
        let hits = run_indexed(cfg.master_seed, start..start + cfg.n_paths, |_, _, rng| {
            first_dilution(&model, level, &u0, n_steps, rng)
        });
        let (mut h, mut n) = (0u64, 0u64);
        for (i, r) in hits.into_iter().enumerate() {
            match r {
                Ok(t) => {
                    n += 1;
                    h += u64::from(t.is_some());
                }
                Err(e) => warnings.push(format!("trajectory {}: {e}", start + i)),
            }
        }
        rows.push(InstabilityRow::new(level, h, n));
    }
    let mut no_reversal = true;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            if rows[i].level < rows[j].level && rows[i].reversed_against(&rows[j]) {
                no_reversal = false;
            }
        }
    }
    let drift = match ic.drift_start {
        None => None,
        Some(m0) => {
            let mut k = vec![0i32; cfg.model.dim];
            k[0] = m0 as i32;
            let u0 = model.basis(0, &k)?;
            let mut spec = RunSpec::new(n_steps, n_steps.max(1));
            spec.skeleton = Some(cfg.skeleton_params());
            let ens = run_ensemble(cfg, &model, &u0, &spec, ic.levels.len());
            warnings.extend(ens.warnings.iter().cloned());
            let finals: Vec<_> = ens.records.iter().filter_map(|r| r.samples.last()).collect();
            let n = finals.len().max(1) as f64;
            let mean_skeleton_median =
                finals.iter().map(|s| s.skeleton_median.unwrap_or(s.median) as f64).sum::<f64>() / n;
            let mean_energy_median = finals.iter().map(|s| s.median as f64).sum::<f64>() / n;
            Some(DriftCheck {
                start_level: m0,
                horizon: ic.horizon,
                n_paths: finals.len(),
                mean_skeleton_median,
                mean_energy_median,
                below_start: mean_skeleton_median < m0 as f64,
                skeleton_aborted: ens.records.iter().filter(|r| r.skeleton_aborted_at.is_some()).count(),
            })
        }
    };
    Ok(InstabilityReport {
        horizon: ic.horizon,
        low_mass: ic.low_mass,
        rows: rows.into_iter().map(Into::into).collect(),
        no_reversal,
        drift,
        warnings,
        config_hash: cfg.hash(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportRow {
    pub alpha: usize,
    pub beta: usize,
    pub level: u32,
    pub pass: bool,
    pub witness: Option<Vec<i32>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoiseReport {
    pub decay_pass: bool,
    pub decay_max_ratio: f64,
    pub decay_worst_mode: Vec<i32>,
    pub support_b: f64,
    pub support: Vec<SupportRow>,
    /// Every component has a noise pair passing the support condition at every level.
    pub support_pass: bool,
    pub trace_u: Vec<f64>,
    pub sup_bound: f64,
    pub config_hash: String,
}

pub fn validate_noise_report(cfg: &RunConfig) -> anyhow::Result<NoiseReport> {
    let vc = cfg.validate_noise.as_ref().context("validate_noise section required")?;
    let model = cfg.build_model()?;
    let coeffs = model.noise();
    let decay = check_decay(coeffs, vc.gamma0, vc.bound);
    let p = model.params();
    let b = vc.support_b.unwrap_or(3.0 * p.nu_min().powf(-1.0 / (2.0 * p.a)));
    let m = p.components;
    let mut support = Vec::new();
    let mut support_pass = true;
    for alpha in 0..m {
        let mut any = false;
        for beta in 0..m {
            let modes = coeffs.support(alpha, beta);
            if modes.is_empty() {
                continue;
            }
            let checks = check_support_condition(&modes, p.dim, b, vc.k0, vc.m_max)?;
            any |= checks.iter().all(|c| c.pass);
            support.extend(checks.into_iter().map(|c| SupportRow {
                alpha,
                beta,
                level: c.level,
                pass: c.pass,
                witness: c.witness,
            }));
        }
        support_pass &= any;
    }
    let tensors = model.tensors();
    Ok(NoiseReport {
        decay_pass: decay.pass,
        decay_max_ratio: decay.max_ratio,
        decay_worst_mode: decay.worst_mode,
        support_b: b,
        support,
        support_pass,
        trace_u: tensors.trace_u.clone(),
        sup_bound: tensors.sup_bound,
        config_hash: cfg.hash(),
    })
}

/// Dispatches `cfg.scenario`, writes artifacts under `out` and the manifest last.
pub fn run(cfg: &RunConfig, out: &Path) -> anyhow::Result<Outcome> {
    let clock = Instant::now();
    let mut art = Artifacts::create(out)?;
    let mut lines = Vec::new();
    let mut warnings = Vec::new();
    let mut exit_code = 0;
    let n = cfg.n_paths;
    let traj_seeds;
    match cfg.scenario {
        Scenario::Simulate => {
            let (ens, summary) = simulate_runs(cfg)?;
            art.write_trajectories("trajectories.csv", &ens.records)?;
            if cfg.skeleton.enabled {
                art.write_jumps("jumps.csv", &ens.records)?;
            }
            art.write_json("summary.json", &summary)?;
            lines.push(format!("{} of {} trajectories completed, {} jumps", summary.completed, n, summary.jumps));
            if let Some(v) = &summary.violations {
                lines.push(format!("skeleton checks: {v:?}"));
            }
            warnings.extend(ens.warnings);
            traj_seeds = seeds(cfg.master_seed, 0..n);
        }
        Scenario::Lyapunov => {
            let runs = lyapunov_runs(cfg)?;
            let res = lyapunov_estimates(cfg, &runs)?;
            let all: Vec<RunRecord> = runs.iter().flat_map(|e| e.records.iter().cloned()).collect();
            art.write_trajectories("trajectories.csv", &all)?;
            art.write_json("report.json", &res.report)?;
            for e in &res.report.estimates {
                lines.push(format!(
                    "initial {} {:>6}: lambda = {:.6} +/- {:.6} ({} paths)",
                    e.initial, e.method, e.lambda, e.stderr, e.n_paths
                ));
            }
            for e in runs {
                warnings.extend(e.warnings);
            }
            traj_seeds = seeds(cfg.master_seed, 0..n * res.direct.len());
        }
        Scenario::Contraction => {
            let rep = contraction_report(cfg)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.to_string(),
                        r.log_g0.to_string(),
                        r.log_mean_g.to_string(),
                        r.log_ratio.to_string(),
                        r.rel_stderr.to_string(),
                        r.n_paths.to_string(),
                        r.within_envelope.to_string(),
                    ]
                })
                .collect();
            art.write_table(
                "contraction.csv",
                &["M", "log_G0", "log_mean_G", "log_ratio", "rel_stderr", "n_paths", "within_envelope"],
                &rows,
            )?;
            art.write_json("report.json", &rep)?;
            for r in &rep.rows {
                lines.push(format!("M = {:>3}: log(E[G]/G0) = {:.4} (rel stderr {:.3})", r.level, r.log_ratio, r.rel_stderr));
            }
            traj_seeds = seeds(cfg.master_seed, 0..n * rep.rows.len());
            warnings.extend(rep.warnings);
        }
        Scenario::Instability => {
            let rep = instability_report(cfg)?;
            let rows: Vec<Vec<String>> = rep
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.to_string(),
                        r.hits.to_string(),
                        r.n.to_string(),
                        r.p_hat.to_string(),
                        r.wilson_lo.to_string(),
                        r.wilson_hi.to_string(),
                    ]
                })
                .collect();
            art.write_table("instability.csv", &["M", "hits", "n", "p_hat", "wilson_lo", "wilson_hi"], &rows)?;
            art.write_json("report.json", &rep)?;
            for r in &rep.rows {
                lines.push(format!("M = {:>3}: p = {:.3} [{:.3}, {:.3}]", r.level, r.p_hat, r.wilson_lo, r.wilson_hi));
            }
            if let Some(d) = &rep.drift {
                lines.push(format!(
                    "skeleton median at t = {} from M0 = {}: mean {:.3}",
                    d.horizon, d.start_level, d.mean_skeleton_median
                ));
            }
            let groups = rep.rows.len() + usize::from(rep.drift.is_some());
            traj_seeds = seeds(cfg.master_seed, 0..n * groups);
            warnings.extend(rep.warnings);
        }
        Scenario::ValidateNoise => {
            let rep = validate_noise_report(cfg)?;
            art.write_json("report.json", &rep)?;
            lines.push(format!("decay check: {} (max ratio {:.4})", pass_word(rep.decay_pass), rep.decay_max_ratio));
            lines.push(format!("support condition (b = {:.3}): {}", rep.support_b, pass_word(rep.support_pass)));
            traj_seeds = Vec::new();
        }
        Scenario::Selftest => {
            let results = checks::selftest(cfg.master_seed);
            art.write_json("selftest.json", &results)?;
            lines.extend(results.iter().map(CheckResult::line));
            let passed = results.iter().filter(|r| r.pass()).count();
            lines.push(format!("{passed}/{} checks passed", results.len()));
            if passed != results.len() {
                exit_code = 2;
            }
            traj_seeds = Vec::new();
        }
    }
    let manifest = RunManifest::new(cfg, traj_seeds, clock.elapsed().as_secs_f64(), &art, warnings);
    manifest.write(&mut art)?;
    Ok(Outcome { manifest, exit_code, lines })
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}
