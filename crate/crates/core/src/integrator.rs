//! Exponential Euler-Maruyama stepping of the truncated Fourier system
//! `dû^{α,k} = -ν^α ζ_k û^{α,k} dt + Σ_l Σ_β û^{β,k-l} dB^{α,β}_l`
//! with renormalization after every step.

use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::bands::Shells;
use crate::lattice::{eigenvalue, Lattice, SpectralField};
use crate::math;
use crate::noise::{CorrelationTensors, IncrementSampler, NoiseCoefficients, NoiseIncrement, NoiseSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    ExponentialEuler,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DriftForm {
    #[default]
    Ito,
    /// Adds `-½ u · Tr(Λ) dt`, folded into the integrating factor.
    StratonovichCorrected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub components: usize,
    /// Hyperviscosity exponent, `a ≥ 1`.
    pub a: f64,
    /// Per-component viscosities `ν^α > 0`.
    pub nu: Vec<f64>,
    /// Field truncation radius `K`.
    pub radius: u32,
    pub dt: f64,
    pub scheme: Scheme,
    pub drift_form: DriftForm,
}

impl ModelParams {
    pub fn new(dim: usize, nu: Vec<f64>, a: f64, radius: u32, dt: f64) -> Self {
        ModelParams {
            dim,
            components: nu.len(),
            a,
            nu,
            radius,
            dt,
            scheme: Scheme::ExponentialEuler,
            drift_form: DriftForm::Ito,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.nu.len() != self.components {
            return Err(Error::invalid("nu", "one viscosity per component is required"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::NonPositiveTimeStep { dt: self.dt });
        }
        if !(self.a >= 1.0) {
            return Err(Error::invalid("a", "a must be >= 1"));
        }
        Ok(())
    }

    pub fn nu_min(&self) -> f64 {
        self.nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn nu_max(&self) -> f64 {
        self.nu.iter().copied().fold(0.0, f64::max)
    }
}

/// Immutable model data shared by every trajectory.
#[derive(Clone, Debug)]
pub struct Model {
    params: ModelParams,
    lattice: Arc<Lattice>,
    shells: Shells,
    noise: NoiseCoefficients,
    tensors: CorrelationTensors,
    zeta: Vec<f64>,
}

impl Model {
    pub fn new(params: ModelParams, noise: &NoiseSpec) -> Result<Self> {
        params.validate()?;
        if noise.components != params.components {
            return Err(Error::ShapeMismatch("noise and model disagree on m"));
        }
        let lattice = Arc::new(Lattice::new(params.dim, params.radius)?);
        let shells = Shells::new(lattice.clone(), &params.nu, params.a)?;
        let noise = NoiseCoefficients::new(noise, params.dim)?;
        let tensors = CorrelationTensors::new(&noise);
        let zeta = (0..lattice.len()).map(|i| eigenvalue(lattice.mode(i), params.a)).collect();
        Ok(Model { params, lattice, shells, noise, tensors, zeta })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn shells(&self) -> &Shells {
        &self.shells
    }

    pub fn noise(&self) -> &NoiseCoefficients {
        &self.noise
    }

    pub fn tensors(&self) -> &CorrelationTensors {
        &self.tensors
    }

    /// `ζ_k` at field-lattice index `i`.
    pub fn zeta(&self, i: usize) -> f64 {
        self.zeta[i]
    }

    pub fn zero_field(&self) -> SpectralField {
        SpectralField::zeros(self.lattice.clone(), self.params.components)
    }

    /// Unit cosine mode `e_k` in component `alpha`.
    pub fn basis(&self, alpha: usize, k: &[i32]) -> Result<SpectralField> {
        SpectralField::basis(self.lattice.clone(), self.params.components, alpha, k)
    }

    /// Per-coefficient integrating factor for a step of length `dt`.
    fn factors(&self, dt: f64) -> Result<Vec<f64>> {
        let m = self.params.components;
        let strat = self.params.drift_form == DriftForm::StratonovichCorrected;
        if strat {
            let off_diagonal =
                (0..m).any(|a| (0..m).any(|b| a != b && self.tensors.trace(a, b) != 0.0));
            if off_diagonal {
                return Err(Error::Unsupported("Stratonovich correction with a non-diagonal Tr(Λ)"));
            }
        }
        let mut f = Vec::with_capacity(m * self.lattice.len());
        for alpha in 0..m {
            let corr = if strat { 0.5 * self.tensors.trace(alpha, alpha) } else { 0.0 };
            for &z in &self.zeta {
                f.push(math::exp(-(self.params.nu[alpha] * z + corr) * dt));
            }
        }
        Ok(f)
    }
}

/// Multiplies each coefficient by `exp(-ν^α ζ_k dt)`.
pub fn linear_decay(phi: &SpectralField, dt: f64, model: &Model) -> Result<SpectralField> {
    if !(dt >= 0.0) {
        return Err(Error::invalid("dt", "decay time must be >= 0"));
    }
    let nu = &model.params.nu;
    let n = model.lattice.len();
    let mut out = phi.clone();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= math::exp(-nu[idx / n] * model.zeta[idx % n] * dt);
    }
    Ok(out)
}

/// `ψ^{α,k} = Σ_l Σ_β φ^{β,k-l} ΔB^{α,β}_l`, keeping only terms with both `l`
/// and `k - l` stored.
pub fn apply_noise(phi: &SpectralField, inc: &NoiseIncrement) -> Result<SpectralField> {
    let mut out = SpectralField::zeros(phi.lattice().clone(), phi.components());
    apply_noise_into(phi, inc, &mut out)?;
    Ok(out)
}

pub(crate) fn apply_noise_into(
    phi: &SpectralField,
    inc: &NoiseIncrement,
    out: &mut SpectralField,
) -> Result<()> {
    let m = phi.components();
    if inc.components() != m || inc.lattice().dim() != phi.lattice().dim() {
        return Err(Error::ShapeMismatch("noise increment does not match the field"));
    }
    let lat = phi.lattice();
    let nlat = inc.lattice();
    let n = lat.len();
    let center = lat.center();
    let zero = Complex64::new(0.0, 0.0);
    let dst = out.coeffs_mut();
    for c in dst.iter_mut() {
        *c = zero;
    }
    for (p, modes) in inc.active() {
        let (alpha, beta) = (p / m, p % m);
        let db = inc.pair(*p);
        let src = phi.component(beta);
        let acc = &mut dst[alpha * n..(alpha + 1) * n];
        for &j in modes {
            let l = nlat.mode(j);
            let w = db[j];
            for i in center..n {
                if let Some(s) = lat.difference_index(i, l) {
                    acc[i] += src[s] * w;
                }
            }
        }
    }
    for alpha in 0..m {
        let acc = &mut dst[alpha * n..(alpha + 1) * n];
        acc[center].im = 0.0;
        for i in center + 1..n {
            acc[n - 1 - i] = acc[i].conj();
        }
    }
    Ok(())
}

/// Direction, log-radius and clock of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub steps: u64,
    /// Unit-norm direction `π = u/‖u‖`.
    pub pi: SpectralField,
    /// `log ‖u_t‖ - log ‖u_0‖`.
    pub logr: f64,
}

impl SimState {
    pub fn new(u0: &SpectralField) -> Result<Self> {
        let r = u0.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::ZeroField);
        }
        Ok(SimState { t: 0.0, steps: 0, pi: u0.scaled(1.0 / r), logr: 0.0 })
    }
}

/// Per-trajectory stepping workspace.
#[derive(Clone, Debug)]
pub struct Stepper<'m> {
    model: &'m Model,
    sampler: Option<IncrementSampler>,
    increment: NoiseIncrement,
    scratch: SpectralField,
    factors: Vec<f64>,
    factors_dt: f64,
}

impl<'m> Stepper<'m> {
    pub fn new(model: &'m Model) -> Result<Self> {
        let dt = model.params.dt;
        // Sampling is only needed by `step`; `step_with` accepts any increments.
        let sampler = IncrementSampler::new(&model.noise, dt).ok();
        Ok(Stepper {
            model,
            sampler,
            increment: NoiseIncrement::zeros(&model.noise, dt),
            scratch: model.zero_field(),
            factors: model.factors(dt)?,
            factors_dt: dt,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// The increment drawn by the most recent call to `step`.
    pub fn last_increment(&self) -> &NoiseIncrement {
        &self.increment
    }

    /// Draws fresh increments and advances by the model time step.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut SimState, rng: &mut R) -> Result<()> {
        let sampler = self
            .sampler
            .as_ref()
            .ok_or(Error::Unsupported("sampling of non-diagonal noise tensors"))?;
        sampler.sample_into(&mut self.increment, rng);
        if self.factors_dt != self.model.params.dt {
            self.factors = self.model.factors(self.model.params.dt)?;
            self.factors_dt = self.model.params.dt;
        }
        let next_t = (state.steps + 1) as f64 * self.model.params.dt;
        advance(&self.increment, &self.factors, &mut self.scratch, state, next_t)?;
        state.steps += 1;
        state.t = next_t;
        Ok(())
    }

    /// Advances by `inc.dt()` with externally supplied increments.
    pub fn step_with(&mut self, state: &mut SimState, inc: &NoiseIncrement) -> Result<()> {
        if !(inc.dt() > 0.0) {
            return Err(Error::NonPositiveTimeStep { dt: inc.dt() });
        }
        if self.factors_dt != inc.dt() {
            self.factors = self.model.factors(inc.dt())?;
            self.factors_dt = inc.dt();
        }
        let next_t = state.t + inc.dt();
        advance(inc, &self.factors, &mut self.scratch, state, next_t)?;
        state.steps += 1;
        state.t = next_t;
        Ok(())
    }
}

fn advance(
    inc: &NoiseIncrement,
    factors: &[f64],
    scratch: &mut SpectralField,
    state: &mut SimState,
    next_t: f64,
) -> Result<()> {
    apply_noise_into(&state.pi, inc, scratch)?;
    let mut norm_sq = 0.0;
    for ((c, s), &f) in state.pi.coeffs_mut().iter_mut().zip(scratch.coeffs()).zip(factors) {
        *c = (*c + s) * f;
        norm_sq += c.norm_sqr();
    }
    let r = math::sqrt(norm_sq);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::TrajectoryDied { time: next_t });
    }
    state.logr += math::ln(r);
    state.pi.scale(1.0 / r);
    Ok(())
}
