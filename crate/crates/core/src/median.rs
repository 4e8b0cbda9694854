//! Concentrated/diluted marker, relative energies, grid-time stopping rules
//! and the skeleton median state machine.
//!
//! The machine runs alongside a trajectory and sees the state at every grid
//! time. Each cycle has three phases:
//!
//! * padding ends at `V = min(T_i + δ, σ^≥_{5/4}(M_i, T_i))`,
//! * dilution ends at `S = min(σ^D(V), σ^≥_{3/2}(M_i, V))`,
//! * dissipation ends at `T_{i+1} = min(τ^<(M_i - 2, S), σ^≥_2(M_i - 2, S))`,
//!
//! after which `M_{i+1} = M_i - 1` if `M(π_{T_{i+1}}) < M_i` and
//! `M(π_{T_{i+1}})` otherwise. Capped rules stop one time unit after their
//! window opens. Stopping times are the first grid points satisfying the rule,
//! and several phases may end at the same grid point.

use alloc::vec::Vec;

use crate::bands::{LevelProfile, Shells};
use crate::integrator::Model;
use crate::lattice::{gap, SpectralField};
use crate::math;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Marker {
    Concentrated,
    Diluted,
}

impl Marker {
    pub fn symbol(self) -> char {
        match self {
            Marker::Concentrated => 'C',
            Marker::Diluted => 'D',
        }
    }
}

/// Threshold constants of the stopping rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// `τ^<` fires once `w ≤ tau`.
    pub tau: f64,
    pub padding: f64,
    pub dilution: f64,
    pub dissipation: f64,
    /// Marker ratio: `C` iff central mass is at least this fraction of the low mass.
    pub marker: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { tau: 0.5, padding: 1.25, dilution: 1.5, dissipation: 2.0, marker: 0.25 }
    }
}

impl Thresholds {
    /// Bound on `w^≥(M_i - 2)` at a diluted dilution exit.
    pub fn dilution_exit_bound(&self) -> f64 {
        let r2 = self.marker * self.marker;
        math::sqrt(r2 + (1.0 + r2) * self.dilution * self.dilution)
    }
}

fn marker_of(p: &LevelProfile, level: i64, ratio: f64) -> Marker {
    let central = math::sqrt(p.central(level) + p.central(level - 1));
    if central >= ratio * math::sqrt(p.low(level - 1)) {
        Marker::Concentrated
    } else {
        Marker::Diluted
    }
}

/// `C` iff `‖(Π^c_L + Π^c_{L-1}) u‖ ≥ ¼ ‖Π^<_{L-1} u‖`.
pub fn marker(shells: &Shells, level: i64, u: &SpectralField) -> Result<Marker> {
    if level < 1 {
        return Err(Error::LevelTooSmall { level });
    }
    let p = shells.profile(u)?;
    if !(p.total() > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok(marker_of(&p, level, Thresholds::default().marker))
}

/// `w = ‖Π^>_L u‖ / ‖Π^<_L u‖` and `w^≥ = ‖Π^≥_L u‖ / ‖Π^<_L u‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeEnergy {
    pub w: f64,
    pub wgeq: f64,
}

impl RelativeEnergy {
    pub fn from_profile(p: &LevelProfile, level: i64) -> Result<Self> {
        let low = p.low(level);
        if !(low > 0.0) {
            return Err(Error::WUndefined { level });
        }
        let low = math::sqrt(low);
        Ok(RelativeEnergy { w: math::sqrt(p.high(level)) / low, wgeq: math::sqrt(p.geq(level)) / low })
    }
}

pub fn relative_energy(shells: &Shells, u: &SpectralField, level: i64) -> Result<RelativeEnergy> {
    RelativeEnergy::from_profile(&shells.profile(u)?, level)
}

/// Stopping rules evaluated at grid times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopKind {
    /// First time `w(L) ≤ threshold`; capped.
    TauLess { level: i64, threshold: f64 },
    /// First time `w^≥(L) ≥ beta`; capped.
    SigmaGeq { level: i64, beta: f64 },
    /// First time the marker at the frozen level is `D`; uncapped.
    SigmaD { level: i64 },
}

impl StopKind {
    fn capped(&self) -> bool {
        !matches!(self, StopKind::SigmaD { .. })
    }

    fn holds(&self, p: &LevelProfile, ratio: f64) -> Result<bool> {
        Ok(match *self {
            StopKind::TauLess { level, threshold } => {
                RelativeEnergy::from_profile(p, level)?.w <= threshold
            }
            StopKind::SigmaGeq { level, beta } => {
                RelativeEnergy::from_profile(p, level)?.wgeq >= beta
            }
            StopKind::SigmaD { level } => {
                if level < 1 {
                    return Err(Error::LevelTooSmall { level });
                }
                marker_of(p, level, ratio) == Marker::Diluted
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopOutcome {
    pub time: f64,
    /// `false` when the cap (or the end of the stream) was reached instead.
    pub fired: bool,
}

/// First grid time `t ≥ window_start` where `kind` holds, else the cap
/// `window_start + 1` for capped rules. An uncapped rule that never fires
/// reports `+∞`.
pub fn detect_stop<'a, I>(
    shells: &Shells,
    kind: StopKind,
    window_start: f64,
    stream: I,
) -> Result<StopOutcome>
where
    I: IntoIterator<Item = (f64, &'a SpectralField)>,
{
    let cap = window_start + 1.0;
    let slack = 1e-9 * cap.abs().max(1.0);
    let mut profile = LevelProfile::default();
    for (t, u) in stream {
        if t < window_start - slack {
            continue;
        }
        shells.fill_profile(u, &mut profile)?;
        if kind.holds(&profile, Thresholds::default().marker)? {
            return Ok(StopOutcome { time: t, fired: true });
        }
        if kind.capped() && t >= cap - slack {
            return Ok(StopOutcome { time: t, fired: false });
        }
    }
    Ok(StopOutcome { time: if kind.capped() { cap } else { f64::INFINITY }, fired: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Padding,
    Dilution,
    Dissipation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Event {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PaddingExit {
    /// `V = T_i + δ`
    Delta,
    /// `σ^≥_{5/4}` fired first.
    Escape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DilutionExit {
    Diluted,
    Escape,
    Cap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DissipationExit {
    /// `w ≤ ½` was observed.
    Tau,
    Escape,
    Cap,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkeletonParams {
    /// Padding length `δ ∈ (0, 1)`.
    pub delta: f64,
    pub thresholds: Thresholds,
    /// Regularity of the recorded `w` seminorms.
    pub gamma: f64,
    /// Level offset `k₀` of the recorded `w` seminorms.
    pub k0: u32,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        SkeletonParams { delta: 0.5, thresholds: Thresholds::default(), gamma: 0.5, k0: 1 }
    }
}

/// One completed cycle `[T_i, T_{i+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpRecord {
    pub i: u64,
    pub t_start: f64,
    pub t_next: f64,
    pub m_start: u32,
    pub m_next: u32,
    pub event: Event,
    pub padding_exit: PaddingExit,
    pub dilution_exit: DilutionExit,
    pub dissipation_exit: DissipationExit,
    /// Running marker at `S_{i+1}`.
    pub marker: Marker,
    /// `‖w_{T-}‖_{γ, M_i + k₀}`
    pub w_seminorm_before: f64,
    /// `‖w_T‖_{γ, M_{i+1} + k₀}`
    pub w_seminorm_after: f64,
    /// `M(π_{T_{i+1}})`
    pub median_at_jump: u32,
    /// `w^≥(M_i - 2; S_{i+1})` when the dilution phase ended diluted.
    pub dilution_wgeq: Option<f64>,
    /// Dissipation level clamped at 0 because `M_i < 2`.
    pub clamped: bool,
}

/// Mutable state of the machine between grid points.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonState {
    pub i: u64,
    pub jump_step: u64,
    pub jump_time: f64,
    pub median: u32,
    pub phase: Phase,
    pub phase_entry_step: u64,
    pub phase_entry_time: f64,
    padding_exit: Option<PaddingExit>,
    dilution_exit: Option<DilutionExit>,
    marker_at_exit: Option<Marker>,
    dilution_wgeq: Option<f64>,
    dissipation_level: i64,
    clamped: bool,
}

/// Counts of pathwise property violations seen by a machine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub grid_points: u64,
    pub jumps: u64,
    /// `‖Π^≥_{M_t} π‖ > 2 ‖Π^<_{M_t} π‖` after processing a grid point.
    pub median_bound: u64,
    /// `M_{i+1} < M_i - 1`
    pub downward_step: u64,
    /// `M_i < M(π_{T_i})`
    pub median_dominance: u64,
    /// `T_{i+1} - T_i > 3 + dt`
    pub gap: u64,
    /// Event `A` without a decrement of exactly one.
    pub event_a: u64,
    /// Diluted exit with `w^≥(M_i - 2) > E`.
    pub dilution_exit: u64,
    /// Seminorm jump bound.
    pub seminorm_jump: u64,
}

impl Violations {
    pub fn total(&self) -> u64 {
        self.median_bound
            + self.downward_step
            + self.median_dominance
            + self.gap
            + self.event_a
            + self.dilution_exit
            + self.seminorm_jump
    }

    pub fn merge(&mut self, other: &Violations) {
        self.grid_points += other.grid_points;
        self.jumps += other.jumps;
        self.median_bound += other.median_bound;
        self.downward_step += other.downward_step;
        self.median_dominance += other.median_dominance;
        self.gap += other.gap;
        self.event_a += other.event_a;
        self.dilution_exit += other.dilution_exit;
        self.seminorm_jump += other.seminorm_jump;
    }
}

/// Skeleton median process driven by a grid-time stream of states.
#[derive(Clone, Debug)]
pub struct SkeletonMachine<'m> {
    shells: &'m Shells,
    params: SkeletonParams,
    dt: f64,
    delta_steps: u64,
    cap_steps: u64,
    nu_min_weight: f64,
    state: SkeletonState,
    profile: LevelProfile,
    violations: Violations,
    aborted: Option<Error>,
}

impl<'m> SkeletonMachine<'m> {
    /// Starts at `T_0 = t0` with `M_0 = M(π_0)`.
    pub fn new(
        shells: &'m Shells,
        params: SkeletonParams,
        dt: f64,
        step0: u64,
        t0: f64,
        pi0: &SpectralField,
    ) -> Result<Self> {
        if !(params.delta > 0.0 && params.delta < 1.0) {
            return Err(Error::invalid("delta", "padding length must lie in (0, 1)"));
        }
        if !(dt > 0.0) {
            return Err(Error::NonPositiveTimeStep { dt });
        }
        let profile = shells.profile(pi0)?;
        let median = profile.median()?;
        // Grid index of the first point at or after the continuous deadline.
        let delta_steps = (math::ceil(params.delta / dt - 1e-9)).max(1.0) as u64;
        let cap_steps = (math::ceil(1.0 / dt - 1e-9)).max(1.0) as u64;
        // ν_min^{-1/(2a)} is the largest threshold scale.
        let max_scale = (0..shells.components())
            .map(|a| shells.threshold(a, 1))
            .fold(0.0, f64::max);
        let nu_min_weight = math::pow(max_scale, 2.0 * params.gamma);
        Ok(SkeletonMachine {
            shells,
            params,
            dt,
            delta_steps,
            cap_steps,
            nu_min_weight,
            state: SkeletonState {
                i: 0,
                jump_step: step0,
                jump_time: t0,
                median,
                phase: Phase::Padding,
                phase_entry_step: step0,
                phase_entry_time: t0,
                padding_exit: None,
                dilution_exit: None,
                marker_at_exit: None,
                dilution_wgeq: None,
                dissipation_level: 0,
                clamped: false,
            },
            profile,
            violations: Violations::default(),
            aborted: None,
        })
    }

    pub fn state(&self) -> &SkeletonState {
        &self.state
    }

    /// Current skeleton median `M_t`.
    pub fn median(&self) -> u32 {
        self.state.median
    }

    pub fn violations(&self) -> &Violations {
        &self.violations
    }

    /// Set once a relative energy became undefined; the machine then ignores input.
    pub fn aborted(&self) -> Option<&Error> {
        self.aborted.as_ref()
    }

    /// Processes the state at grid index `step` (time `t`), possibly closing a
    /// cycle. Returns an error only for malformed input; an undefined relative
    /// energy aborts the machine instead.
    pub fn advance(&mut self, step: u64, t: f64, pi: &SpectralField) -> Result<Option<JumpRecord>> {
        if self.aborted.is_some() {
            return Ok(None);
        }
        self.shells.fill_profile(pi, &mut self.profile)?;
        match self.process(step, t, pi) {
            Ok(jump) => {
                self.violations.grid_points += 1;
                let m = self.state.median as i64;
                let low = self.profile.low(m);
                if math::sqrt(self.profile.geq(m)) > 2.0 * math::sqrt(low) {
                    self.violations.median_bound += 1;
                }
                Ok(jump)
            }
            Err(e @ Error::WUndefined { .. }) => {
                self.aborted = Some(e);
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn process(&mut self, step: u64, t: f64, pi: &SpectralField) -> Result<Option<JumpRecord>> {
        let th = self.params.thresholds;
        loop {
            let m = self.state.median as i64;
            let elapsed = step - self.state.phase_entry_step;
            match self.state.phase {
                Phase::Padding => {
                    let by_delta = elapsed >= self.delta_steps;
                    let escape = RelativeEnergy::from_profile(&self.profile, m)?.wgeq >= th.padding;
                    if !(by_delta || escape) {
                        return Ok(None);
                    }
                    self.state.padding_exit =
                        Some(if by_delta { PaddingExit::Delta } else { PaddingExit::Escape });
                    self.enter(Phase::Dilution, step, t);
                }
                Phase::Dilution => {
                    // σ^D uses the level frozen at phase entry; M_t is constant here anyway.
                    let mark = marker_of(&self.profile, m - 1, th.marker);
                    let diluted = m - 1 >= 1 && mark == Marker::Diluted;
                    let escape = RelativeEnergy::from_profile(&self.profile, m)?.wgeq >= th.dilution;
                    let cap = elapsed >= self.cap_steps;
                    if !(diluted || escape || cap) {
                        return Ok(None);
                    }
                    let exit = if diluted {
                        DilutionExit::Diluted
                    } else if escape {
                        DilutionExit::Escape
                    } else {
                        DilutionExit::Cap
                    };
                    let running = if m - 1 >= 1 { mark } else { Marker::Concentrated };
                    self.state.dilution_exit = Some(exit);
                    self.state.marker_at_exit = Some(running);
                    self.state.clamped = m - 2 < 0;
                    self.state.dissipation_level = (m - 2).max(0);
                    self.state.dilution_wgeq = None;
                    if running == Marker::Diluted {
                        let wgeq = RelativeEnergy::from_profile(&self.profile, m - 2)?.wgeq;
                        self.state.dilution_wgeq = Some(wgeq);
                        // The bound needs wgeq(M_i) ≤ 3/2 at S, which grid overshoot can break.
                        if !escape && wgeq > th.dilution_exit_bound() {
                            self.violations.dilution_exit += 1;
                        }
                    }
                    self.enter(Phase::Dissipation, step, t);
                }
                Phase::Dissipation => {
                    let level = self.state.dissipation_level;
                    let re = RelativeEnergy::from_profile(&self.profile, level)?;
                    let tau = re.w <= th.tau;
                    let escape = re.wgeq >= th.dissipation;
                    let cap = elapsed >= self.cap_steps;
                    if !(tau || escape || cap) {
                        return Ok(None);
                    }
                    let exit = if tau {
                        DissipationExit::Tau
                    } else if escape {
                        DissipationExit::Escape
                    } else {
                        DissipationExit::Cap
                    };
                    return self.jump(step, t, pi, exit).map(Some);
                }
            }
        }
    }

    fn enter(&mut self, phase: Phase, step: u64, t: f64) {
        self.state.phase = phase;
        self.state.phase_entry_step = step;
        self.state.phase_entry_time = t;
    }

    fn w_seminorm_sq(&self, pi: &SpectralField, level: i64) -> Result<f64> {
        let low = self.profile.low(level);
        if !(low > 0.0) {
            return Err(Error::WUndefined { level });
        }
        // For k₀ ≥ 1 the seminorm only sees modes of Π^>_level.
        let k0 = self.params.k0.max(1) as i64;
        Ok(self.shells.shifted_seminorm_sq(pi, self.params.gamma, level + k0)? / low)
    }

    fn jump(&mut self, step: u64, t: f64, pi: &SpectralField, exit: DissipationExit) -> Result<JumpRecord> {
        let m_start = self.state.median;
        let median_at_jump = self.profile.median()?;
        let m_next = if median_at_jump < m_start { m_start - 1 } else { median_at_jump };
        let padding_exit = self.state.padding_exit.unwrap_or(PaddingExit::Escape);
        let dilution_exit = self.state.dilution_exit.unwrap_or(DilutionExit::Cap);
        let marker = self.state.marker_at_exit.unwrap_or(Marker::Concentrated);
        let event = if padding_exit == PaddingExit::Delta
            && marker == Marker::Diluted
            && exit == DissipationExit::Tau
            && !self.state.clamped
        {
            Event::A
        } else {
            Event::B
        };
        let before = self.w_seminorm_sq(pi, m_start as i64)?;
        let after = self.w_seminorm_sq(pi, m_next as i64)?;

        let v = &mut self.violations;
        v.jumps += 1;
        if (m_next as i64) < m_start as i64 - 1 {
            v.downward_step += 1;
        }
        if m_next < median_at_jump {
            v.median_dominance += 1;
        }
        if (step - self.state.jump_step) as f64 * self.dt > 3.0 + self.dt * (1.0 + 1e-9) {
            v.gap += 1;
        }
        if event == Event::A && m_next + 1 != m_start {
            v.event_a += 1;
        }
        let g = self.params.gamma;
        let allowed = if m_next >= m_start {
            before
        } else {
            5.0 * math::pow(2.0, 2.0 * g) * (self.nu_min_weight + 1.0 + 0.5 * before)
        };
        if after > allowed * (1.0 + 1e-12) {
            v.seminorm_jump += 1;
        }

        let record = JumpRecord {
            i: self.state.i,
            t_start: self.state.jump_time,
            t_next: t,
            m_start,
            m_next,
            event,
            padding_exit,
            dilution_exit,
            dissipation_exit: exit,
            marker,
            w_seminorm_before: math::sqrt(before),
            w_seminorm_after: math::sqrt(after),
            median_at_jump,
            dilution_wgeq: self.state.dilution_wgeq,
            clamped: self.state.clamped,
        };
        self.state.i += 1;
        self.state.jump_step = step;
        self.state.jump_time = t;
        self.state.median = m_next;
        self.state.padding_exit = None;
        self.state.dilution_exit = None;
        self.state.marker_at_exit = None;
        self.state.dilution_wgeq = None;
        self.state.clamped = false;
        self.enter(Phase::Padding, step, t);
        Ok(record)
    }
}

/// Equal-width histogram.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
}

/// Empirical statistics of the cycle lengths `T_{i+1} - T_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct StoppingSummary {
    pub n: usize,
    sorted_gaps: Vec<f64>,
    pub max_gap: f64,
    pub histogram: Histogram,
    pub a_fraction: f64,
    pub mean_increment: f64,
    /// Jump times per trajectory, split where the index restarts at 0.
    paths: Vec<Vec<f64>>,
}

impl StoppingSummary {
    /// Empirical `P(T_{i+1} - T_i > eps)`.
    pub fn tail_fraction(&self, eps: f64) -> f64 {
        let above = self.sorted_gaps.len() - self.sorted_gaps.partition_point(|&g| g <= eps);
        above as f64 / self.n as f64
    }

    /// Empirical law of the cycle index `j` with `t ∈ [T_j, T_{j+1})`,
    /// counting only trajectories whose records extend past `t`.
    pub fn index_distribution(&self, t: f64) -> Vec<f64> {
        let mut counts: Vec<u64> = Vec::new();
        let mut total = 0u64;
        for path in &self.paths {
            if !matches!(path.last(), Some(&last) if last > t) {
                continue;
            }
            // path holds T_1, T_2, ...; j counts jumps at or before t.
            let j = path.partition_point(|&tj| tj <= t);
            if counts.len() <= j {
                counts.resize(j + 1, 0);
            }
            counts[j] += 1;
            total += 1;
        }
        counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect()
    }

    /// Least-squares fit `log P(j) ≈ intercept - rate · j` over the indices with
    /// positive mass; `None` with fewer than two such indices.
    pub fn index_tail_fit(&self, t: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .index_distribution(t)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(j, &p)| (j as f64, math::ln(p)))
            .collect();
        let (slope, intercept) = least_squares(&pts)?;
        Some((intercept, -slope))
    }
}

/// Slope and intercept of the ordinary least squares line.
fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn stopping_time_stats(records: &[JumpRecord]) -> Result<StoppingSummary> {
    if records.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let n = records.len();
    let mut gaps: Vec<f64> = records.iter().map(|r| r.t_next - r.t_start).collect();
    gaps.sort_by(f64::total_cmp);
    let (lo, hi) = (gaps[0], gaps[n - 1]);
    let bins = (math::ceil(math::sqrt(n as f64)) as usize).max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = alloc::vec![0u64; if hi > lo { bins } else { 1 }];
    for &g in &gaps {
        let b = (((g - lo) / width) as usize).min(counts.len() - 1);
        counts[b] += 1;
    }
    let a_count = records.iter().filter(|r| r.event == Event::A).count();
    let mean_increment =
        records.iter().map(|r| r.m_next as f64 - r.m_start as f64).sum::<f64>() / n as f64;
    let mut paths: Vec<Vec<f64>> = Vec::new();
    for r in records {
        if r.i == 0 || paths.is_empty() {
            paths.push(Vec::new());
        }
        if let Some(p) = paths.last_mut() {
            p.push(r.t_next);
        }
    }
    Ok(StoppingSummary {
        n,
        sorted_gaps: gaps,
        max_gap: hi,
        histogram: Histogram { lo, width, counts },
        a_fraction: a_count as f64 / n as f64,
        mean_increment,
        paths,
    })
}

/// Regression of `‖w‖²` increments on `‖w‖²` over a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftReport {
    pub n_steps: usize,
    /// Fitted drift slope per unit `‖w‖²`.
    pub slope: f64,
    /// Fitted constant drift.
    pub intercept: f64,
    /// Residual quadratic-variation rate: residual increment variance per unit time.
    pub qv_rate: f64,
    /// Empirical envelope constant `max(intercept, qv_rate)`.
    pub r_hat: f64,
    /// `-2 ν_min Δ_L`
    pub reference_slope: f64,
    /// `slope ≤ reference (1 - tol)`
    pub dissipation_dominates: bool,
    /// `slope ≤ reference (1 - tol) + R̂`
    pub within_envelope: bool,
}

/// Fits `Δ‖w‖² ≈ (slope ‖w‖² + intercept) dt` along a segment at level `L`,
/// truncated at the first point with `w^≥ ≥ β`.
pub fn dissipation_diagnostic<'a, I>(
    model: &Model,
    segment: I,
    level: u32,
    beta: f64,
    tol: f64,
) -> Result<DriftReport>
where
    I: IntoIterator<Item = (f64, &'a SpectralField)>,
{
    const MIN_STEPS: usize = 50;
    let shells = model.shells();
    let mut profile = LevelProfile::default();
    let mut series: Vec<(f64, f64)> = Vec::new();
    for (t, u) in segment {
        shells.fill_profile(u, &mut profile)?;
        let re = RelativeEnergy::from_profile(&profile, level as i64)?;
        series.push((t, re.w * re.w));
        if re.wgeq >= beta {
            break;
        }
    }
    let steps = series.len().saturating_sub(1);
    if steps < MIN_STEPS {
        return Err(Error::SegmentTooShort { len: steps, min: MIN_STEPS });
    }
    let pts: Vec<(f64, f64)> =
        series.windows(2).map(|w| (w[0].1, (w[1].1 - w[0].1) / (w[1].0 - w[0].0))).collect();
    let (slope, intercept) = match least_squares(&pts) {
        Some(fit) => fit,
        // Constant ‖w‖²: no slope information; treat the mean rate as the constant.
        None => (0.0, pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64),
    };
    let mut ss = 0.0;
    let mut span = 0.0;
    for w in series.windows(2) {
        let dt = w[1].0 - w[0].0;
        let resid = (w[1].1 - w[0].1) - (slope * w[0].1 + intercept) * dt;
        ss += resid * resid;
        span += dt;
    }
    let qv_rate = ss / span;
    let r_hat = intercept.max(qv_rate);
    let reference_slope = -2.0 * model.params().nu_min() * gap(level, model.params().a);
    let cutoff = reference_slope * (1.0 - tol);
    Ok(DriftReport {
        n_steps: steps,
        slope,
        intercept,
        qv_rate,
        r_hat,
        reference_slope,
        dissipation_dominates: slope <= cutoff,
        within_envelope: slope <= cutoff + r_hat.max(0.0),
    })
}
