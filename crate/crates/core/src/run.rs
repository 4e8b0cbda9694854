//! Single-trajectory driver that records observables at a fixed stride.

use alloc::vec::Vec;

use rand::Rng;

use crate::bands::LevelProfile;
use crate::integrator::{Model, SimState, Stepper};
use crate::lattice::SpectralField;
use crate::lyapunov::{log_g_from_profile, LyapParams};
use crate::median::{JumpRecord, SkeletonMachine, SkeletonParams, Violations};
use crate::projective::fk_integrand;
use crate::{Error, Result};

/// Shifted seminorm `‖π‖_{γ, M(π) + offset}` recorded at every sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeminormProbe {
    pub gamma: f64,
    pub offset: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub n_steps: u64,
    /// Record every `stride` steps; the initial and final states are always recorded.
    pub stride: u64,
    /// Evaluate the FK integrand at every step and accumulate its time integral.
    pub fk: bool,
    pub seminorms: Vec<SeminormProbe>,
    pub skeleton: Option<SkeletonParams>,
    /// Record `log G(π)` with these parameters.
    pub lyap: Option<LyapParams>,
}

impl RunSpec {
    pub fn new(n_steps: u64, stride: u64) -> Self {
        RunSpec { n_steps, stride, fk: false, seminorms: Vec::new(), skeleton: None, lyap: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub t: f64,
    pub logr: f64,
    /// Energy median `M(π_t)`.
    pub median: u32,
    /// Skeleton median `M_t`, when the machine runs.
    pub skeleton_median: Option<u32>,
    /// FK integrand at `t`.
    pub fk_integrand: Option<f64>,
    /// Left-point integral of the FK integrand over `[0, t]`.
    pub fk_cumulative: Option<f64>,
    pub seminorms: Vec<f64>,
    pub log_g: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub trajectory: u64,
    pub seed: u64,
    pub samples: Vec<Sample>,
    pub jumps: Vec<JumpRecord>,
    pub violations: Option<Violations>,
    /// Time at which the skeleton machine stopped on an undefined relative energy.
    pub skeleton_aborted_at: Option<f64>,
    pub final_state: SimState,
}

struct Recorder<'m> {
    model: &'m Model,
    spec: &'m RunSpec,
    profile: LevelProfile,
}

impl Recorder<'_> {
    fn sample(
        &mut self,
        state: &SimState,
        fk_now: Option<f64>,
        fk_cum: Option<f64>,
        skeleton: Option<u32>,
    ) -> Result<Sample> {
        let shells = self.model.shells();
        shells.fill_profile(&state.pi, &mut self.profile)?;
        let median = self.profile.median()?;
        let seminorms = self
            .spec
            .seminorms
            .iter()
            .map(|p| shells.shifted_seminorm(&state.pi, p.gamma, median as i64 + p.offset as i64))
            .collect::<Result<Vec<_>>>()?;
        let log_g = match &self.spec.lyap {
            Some(lp) => Some(log_g_from_profile(shells, &state.pi, &self.profile, lp)?),
            None => None,
        };
        Ok(Sample {
            step: state.steps,
            t: state.t,
            logr: state.logr,
            median,
            skeleton_median: skeleton,
            fk_integrand: fk_now,
            fk_cumulative: fk_cum,
            seminorms,
            log_g,
        })
    }
}

/// Integrates one trajectory from `u0` and records it. Step errors carry the
/// failing time.
pub fn simulate<R: Rng + ?Sized>(
    model: &Model,
    u0: &SpectralField,
    spec: &RunSpec,
    rng: &mut R,
) -> Result<RunRecord> {
    if spec.stride == 0 {
        return Err(Error::invalid("record_stride", "stride must be >= 1"));
    }
    let mut state = SimState::new(u0)?;
    let mut stepper = Stepper::new(model)?;
    let dt = model.params().dt;
    let mut recorder = Recorder { model, spec, profile: LevelProfile::default() };
    let mut machine = match &spec.skeleton {
        Some(sp) => Some(SkeletonMachine::new(model.shells(), *sp, dt, 0, 0.0, &state.pi)?),
        None => None,
    };
    let mut fk_cum = 0.0;
    let mut fk_now =
        if spec.fk { Some(fk_integrand(&state.pi, model, state.t)?.integrand) } else { None };
    let mut samples = Vec::with_capacity((spec.n_steps / spec.stride + 2) as usize);
    let mut jumps = Vec::new();
    let mut aborted_at = None;

    let mut record = |state: &SimState,
                      fk_now: Option<f64>,
                      fk_cum: f64,
                      machine: &Option<SkeletonMachine>|
     -> Result<Sample> {
        recorder.sample(state, fk_now, fk_now.map(|_| fk_cum), machine.as_ref().map(|m| m.median()))
    };
    samples.push(record(&state, fk_now, fk_cum, &machine)?);

    // The integrand is evaluated at recorded samples only; the cumulative
    // integral uses the left-point rule over sample intervals.
    let mut t_prev = state.t;
    for _ in 0..spec.n_steps {
        stepper.step(&mut state, rng)?;
        if let Some(m) = machine.as_mut() {
            if let Some(j) = m.advance(state.steps, state.t, &state.pi)? {
                jumps.push(j);
            }
            if aborted_at.is_none() && m.aborted().is_some() {
                aborted_at = Some(state.t);
            }
        }
        if state.steps % spec.stride == 0 || state.steps == spec.n_steps {
            if let Some(f) = fk_now {
                fk_cum += f * (state.t - t_prev);
                fk_now = Some(fk_integrand(&state.pi, model, state.t)?.integrand);
            }
            t_prev = state.t;
            samples.push(record(&state, fk_now, fk_cum, &machine)?);
        }
    }
    Ok(RunRecord {
        trajectory: 0,
        seed: 0,
        samples,
        jumps,
        violations: machine.as_ref().map(|m| *m.violations()),
        skeleton_aborted_at: aborted_at,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::ModelParams;
    use crate::noise::NoiseSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_steps_records_initial_state() {
        let model = Model::new(ModelParams::new(1, alloc::vec![1.0], 1.0, 4, 1e-3), &NoiseSpec::zero(1, 4)).unwrap();
        let u0 = model.basis(0, &[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = simulate(&model, &u0, &RunSpec::new(0, 10), &mut rng).unwrap();
        assert_eq!(rec.samples.len(), 1);
        assert_eq!(rec.samples[0].median, 2);
        assert_eq!(rec.samples[0].logr, 0.0);
    }

    #[test]
    fn records_at_stride_and_end() {
        let model =
            Model::new(ModelParams::new(1, alloc::vec![1.0], 1.0, 4, 1e-3), &NoiseSpec::parametric(1, 0.5, 1.0, 2))
                .unwrap();
        let u0 = model.basis(0, &[1]).unwrap();
        let mut spec = RunSpec::new(25, 10);
        spec.fk = true;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = simulate(&model, &u0, &spec, &mut rng).unwrap();
        let steps: Vec<u64> = rec.samples.iter().map(|s| s.step).collect();
        assert_eq!(steps, alloc::vec![0, 10, 20, 25]);
        assert!(rec.samples.iter().all(|s| s.fk_cumulative.is_some()));
    }
}
