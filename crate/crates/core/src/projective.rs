//! Radial/angular split and the Furstenberg-Khasminskii integrand.
//!
//! In Itô form `d log r = (⟨π, Lπ⟩ + ½ C(π, Λ)) dt + dM`, with corrector
//! `C(π, Λ) = ⟨π, π · Tr^u(Λ)⟩ - 2 ⟨π^{⊗2}, Λ π^{⊗2}⟩`.

use alloc::vec;

use num_complex::Complex64;

use crate::integrator::Model;
use crate::lattice::SpectralField;
use crate::noise::{CorrelationTensors, NoiseCoefficients};
use crate::{Error, Result};

/// One evaluation of the FK integrand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FkSample {
    pub t: f64,
    /// `⟨π, Lπ⟩ ≤ 0`
    pub dissipation: f64,
    /// `C(π, Λ)`
    pub corrector: f64,
    /// `dissipation + corrector / 2`
    pub integrand: f64,
}

/// `u ↦ (‖u‖, u/‖u‖)`.
pub fn decompose(u: &SpectralField) -> Result<(f64, SpectralField)> {
    let r = u.norm();
    if !(r > 0.0) {
        return Err(Error::ZeroField);
    }
    Ok((r, u.scaled(1.0 / r)))
}

/// `q^{αγ}(k) = Σ_m π̂^{α,m} π̂^{γ,k-m}` at each noise-lattice index in `modes`.
fn pair_products(
    pi: &SpectralField,
    coeffs: &NoiseCoefficients,
    alpha: usize,
    gamma: usize,
    modes: &[usize],
    out: &mut [Complex64],
) {
    let lat = pi.lattice();
    let nlat = coeffs.lattice();
    let a = pi.component(alpha);
    let g = pi.component(gamma);
    for &j in modes {
        let k = nlat.mode(j);
        let mut acc = Complex64::new(0.0, 0.0);
        for (mi, &am) in a.iter().enumerate() {
            if am.re == 0.0 && am.im == 0.0 {
                continue;
            }
            // Index of k - m is the negation of m - k.
            if let Some(s) = lat.difference_index(mi, k) {
                acc += am * g[lat.neg(s)];
            }
        }
        out[j] = acc;
    }
}

/// `Σ_{α,β,γ,η} Σ_k Γ^{α,β}_{γ,η,k} q^{αγ}(-k) q^{βη}(k)` before taking the
/// real part; the imaginary part is rounding residue.
pub fn quartic_form_complex(pi: &SpectralField, coeffs: &NoiseCoefficients) -> Result<Complex64> {
    let m = pi.components();
    if coeffs.components() != m || coeffs.lattice().dim() != pi.lattice().dim() {
        return Err(Error::ShapeMismatch("noise does not match the field"));
    }
    let nlat = coeffs.lattice();
    let n = nlat.len();
    let active = coeffs.active_modes();
    if active.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // The active set is closed under k ↦ -k, so q is available at both.
    let mut q = vec![Complex64::new(0.0, 0.0); m * m * n];
    for a in 0..m {
        for g in 0..m {
            pair_products(pi, coeffs, a, g, active, &mut q[(a * m + g) * n..(a * m + g + 1) * n]);
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &j in active {
        let jn = nlat.neg(j);
        for a in 0..m {
            for g in 0..m {
                let left = q[(a * m + g) * n + jn];
                if coeffs.is_diagonal() {
                    let w = coeffs.entry(a, a, g, g, j);
                    if w != 0.0 {
                        acc += left * q[(a * m + g) * n + j] * w;
                    }
                    continue;
                }
                for b in 0..m {
                    for e in 0..m {
                        let w = coeffs.entry(a, b, g, e, j);
                        if w != 0.0 {
                            acc += left * q[(b * m + e) * n + j] * w;
                        }
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// `⟨π^{⊗2}, Λ π^{⊗2}⟩`, Galerkin-truncated.
pub fn quartic_form(pi: &SpectralField, coeffs: &NoiseCoefficients) -> Result<f64> {
    Ok(quartic_form_complex(pi, coeffs)?.re)
}

/// `⟨π, π · Tr^u(Λ)⟩` with `(π · T)^α = Σ_β π^β T^α_β`.
pub fn trace_term(pi: &SpectralField, tensors: &CorrelationTensors) -> Result<f64> {
    let m = pi.components();
    if tensors.components() != m {
        return Err(Error::ShapeMismatch("tensors do not match the field"));
    }
    let mut acc = 0.0;
    for a in 0..m {
        for b in 0..m {
            let t = tensors.trace_u(a, b);
            if t == 0.0 {
                continue;
            }
            let dot: f64 = pi
                .component(a)
                .iter()
                .zip(pi.component(b))
                .map(|(x, y)| x.re * y.re + x.im * y.im)
                .sum();
            acc += t * dot;
        }
    }
    Ok(acc)
}

/// Itô-Stratonovich corrector `C(π, Λ)`.
pub fn corrector(
    pi: &SpectralField,
    coeffs: &NoiseCoefficients,
    tensors: &CorrelationTensors,
) -> Result<f64> {
    Ok(trace_term(pi, tensors)? - 2.0 * quartic_form(pi, coeffs)?)
}

/// `⟨π, Lπ⟩ = -Σ_α ν^α Σ_k ζ_k |π̂^{α,k}|²`.
pub fn dissipation(pi: &SpectralField, model: &Model) -> f64 {
    let nu = &model.params().nu;
    (0..pi.components())
        .map(|a| {
            let s: f64 =
                pi.component(a).iter().enumerate().map(|(i, c)| model.zeta(i) * c.norm_sqr()).sum();
            -nu[a] * s
        })
        .sum()
}

/// `⟨π, Lπ⟩ + ½ C(π, Λ)` at time `t`.
pub fn fk_integrand(pi: &SpectralField, model: &Model, t: f64) -> Result<FkSample> {
    let diss = dissipation(pi, model);
    let corr = corrector(pi, model.noise(), model.tensors())?;
    Ok(FkSample { t, dissipation: diss, corrector: corr, integrand: diss + 0.5 * corr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::ModelParams;
    use crate::noise::NoiseSpec;

    fn model(nu: f64, noise: NoiseSpec, k: u32) -> Model {
        Model::new(ModelParams::new(1, alloc::vec![nu], 1.0, k, 1e-3), &noise).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let m = model(1.0, NoiseSpec::zero(1, 2), 4);
        let e0 = m.basis(0, &[0]).unwrap();
        let (r, pi) = decompose(&e0.scaled(3.0)).unwrap();
        assert_eq!(r, 3.0);
        assert!((pi.norm() - 1.0).abs() < 1e-15);
        assert_eq!(decompose(&m.zero_field()), Err(Error::ZeroField));
    }

    #[test]
    fn constant_mode_noise() {
        let m = model(1.0, NoiseSpec::constant_mode(1, 0.8), 6);
        let mut pi = m.zero_field();
        for i in 0..m.lattice().len() {
            pi.set_pair(0, i, Complex64::new(0.1 * i as f64, 0.05));
        }
        let pi = decompose(&pi).unwrap().1;
        assert!((quartic_form(&pi, m.noise()).unwrap() - 0.8).abs() < 1e-14);
        assert!((corrector(&pi, m.noise(), m.tensors()).unwrap() + 0.8).abs() < 1e-14);
        let e0 = m.basis(0, &[0]).unwrap();
        let s = fk_integrand(&e0, &m, 0.0).unwrap();
        assert!((s.integrand + 0.4).abs() < 1e-15);
    }

    #[test]
    fn noise_free_integrand_is_dissipation() {
        let m = model(2.0, NoiseSpec::zero(1, 3), 8);
        let e3 = m.basis(0, &[3]).unwrap();
        let s = fk_integrand(&e3, &m, 0.0).unwrap();
        assert_eq!(s.corrector, 0.0);
        assert!((s.integrand + 18.0).abs() < 1e-12);

        let mut two = e3.scaled(0.6f64.sqrt());
        two.add_scaled(0.4f64.sqrt(), &m.basis(0, &[5]).unwrap()).unwrap();
        let s = fk_integrand(&two, &m, 0.0).unwrap();
        assert!((s.integrand + 2.0 * (0.6 * 9.0 + 0.4 * 25.0)).abs() < 1e-12);
    }
}
