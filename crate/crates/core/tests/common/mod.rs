#![allow(dead_code)]

use std::sync::Arc;

use projflow_core::{Complex64, Lattice, Model, ModelParams, NoiseSpec, Shells, SpectralField};
use rand::Rng;

/// Random Hermitian unit field. Amplitudes are log-uniform over `span`
/// decades so that band ratios cover many scales; about 40% of modes vanish.
pub fn random_unit_field<R: Rng>(lat: &Arc<Lattice>, m: usize, span: f64, rng: &mut R) -> SpectralField {
    loop {
        let mut f = SpectralField::zeros(lat.clone(), m);
        for alpha in 0..m {
            for i in lat.center()..lat.len() {
                if rng.random_bool(0.4) {
                    continue;
                }
                let mag = 10f64.powf(-span * rng.random::<f64>());
                let phase = std::f64::consts::TAU * rng.random::<f64>();
                f.set_pair(alpha, i, Complex64::new(mag * phase.cos(), mag * phase.sin()));
            }
        }
        let n = f.norm();
        if n > 0.0 {
            f.scale(1.0 / n);
            return f;
        }
    }
}

pub fn shells(dim: usize, radius: u32, nu: &[f64], a: f64) -> Shells {
    let lat = Arc::new(Lattice::new(dim, radius).unwrap());
    Shells::new(lat, nu, a).unwrap()
}

pub fn model(dim: usize, nu: Vec<f64>, a: f64, radius: u32, dt: f64, noise: NoiseSpec) -> Model {
    Model::new(ModelParams::new(dim, nu, a, radius, dt), &noise).unwrap()
}
