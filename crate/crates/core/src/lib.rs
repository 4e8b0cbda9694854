//! Spectral Galerkin core for the angular dynamics of vector-valued linear
//! hyperviscous SPDEs on the torus.
//!
//! The solution `u` of `du = L u dt + u · dW` is carried in Fourier
//! coordinates on a truncated integer lattice and split into a log-radius and
//! a unit-norm direction `π`. On top of that sit the band projections and the
//! energy median, the Furstenberg-Khasminskii integrand, the skeleton median
//! state machine and the Lyapunov functionals used by the estimators.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, command line
//! handling and parallel ensembles live in the companion `projflow` crate.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod bands;
pub mod integrator;
pub mod lattice;
pub mod lyapunov;
pub mod median;
pub mod noise;
pub mod projective;
pub mod run;

pub use bands::{Band, BandSpec, LevelProfile, Shells};
pub use error::Error;
pub use integrator::{DriftForm, Model, ModelParams, Scheme, SimState, Stepper};
pub use lattice::{Lattice, SpectralField};
pub use lyapunov::{ExponentEstimate, LyapParams};
pub use median::{JumpRecord, SkeletonMachine, SkeletonParams, Thresholds};
pub use noise::{CorrelationTensors, NoiseCoefficients, NoiseForm, NoiseIncrement, NoiseSpec};
pub use run::{simulate, RunRecord, RunSpec, Sample};

pub type Result<T> = core::result::Result<T, Error>;
pub use num_complex::Complex64;
