//! Frequency bands, shifted Sobolev seminorms and the energy median.
//!
//! Component `α` uses the threshold `L_α = ν_α^{-1/(2a)} L`. Every stored mode
//! gets a level: the smallest integer `L ≥ 0` with `|k| ≤ L_α`. All band
//! projections reduce to comparisons of that level with `L`, so band energies
//! come from a single per-level histogram.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::lattice::{Lattice, SpectralField};
use crate::math;
use crate::{Error, Result};

/// Band selector relative to a level `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Band {
    /// `|k| ≤ L_α`
    Low,
    /// `L_α < |k| ≤ (L+1)_α`
    Central,
    /// `|k| > (L+1)_α`
    High,
    /// `|k| ≤ (L+1)_α`
    Leq,
    /// `|k| > L_α`
    Geq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BandSpec {
    pub level: i64,
    pub band: Band,
}

impl BandSpec {
    pub fn new(level: i64, band: Band) -> Self {
        BandSpec { level, band }
    }

    #[inline]
    fn contains(&self, mode_level: u32) -> bool {
        let l = mode_level as i64;
        match self.band {
            Band::Low => l <= self.level,
            Band::Central => l == self.level + 1,
            Band::High => l > self.level + 1,
            Band::Leq => l <= self.level + 1,
            Band::Geq => l > self.level,
        }
    }
}

/// Per-component band geometry for a lattice and viscosities `(ν, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shells {
    lattice: Arc<Lattice>,
    scales: Vec<f64>,
    levels: Vec<u32>,
    max_level: u32,
}

impl Shells {
    pub fn new(lattice: Arc<Lattice>, nu: &[f64], a: f64) -> Result<Self> {
        if nu.is_empty() {
            return Err(Error::invalid("nu", "at least one component is required"));
        }
        if !(a >= 1.0) || !a.is_finite() {
            return Err(Error::invalid("a", "a must be >= 1"));
        }
        if let Some(bad) = nu.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("nu", alloc::format!("viscosities must be positive, got {bad}")));
        }
        let scales: Vec<f64> = nu.iter().map(|&v| math::pow(v, -1.0 / (2.0 * a))).collect();
        let n = lattice.len();
        let mut levels = Vec::with_capacity(n * scales.len());
        let mut max_level = 0;
        for &s in &scales {
            for i in 0..n {
                let lv = level_of(lattice.norm(i), s);
                max_level = max_level.max(lv);
                levels.push(lv);
            }
        }
        Ok(Shells { lattice, scales, levels, max_level })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn components(&self) -> usize {
        self.scales.len()
    }

    /// Threshold `L_α = ν_α^{-1/(2a)} L`.
    #[inline]
    pub fn threshold(&self, alpha: usize, level: i64) -> f64 {
        level as f64 * self.scales[alpha]
    }

    /// Level of the mode at `i` in component `alpha`.
    #[inline]
    pub fn level(&self, alpha: usize, i: usize) -> u32 {
        self.levels[alpha * self.lattice.len() + i]
    }

    /// Highest level occupied by any stored mode.
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    fn check(&self, phi: &SpectralField) -> Result<()> {
        if phi.components() != self.components() || phi.lattice().len() != self.lattice.len() {
            return Err(Error::ShapeMismatch("field does not match the band geometry"));
        }
        Ok(())
    }

    pub fn project(&self, phi: &SpectralField, band: BandSpec) -> Result<SpectralField> {
        self.check(phi)?;
        let mut out = phi.clone();
        for (c, &lv) in out.coeffs_mut().iter_mut().zip(&self.levels) {
            if !band.contains(lv) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// `‖Π φ‖²` for the band, without materializing the projection.
    pub fn band_norm_sq(&self, phi: &SpectralField, band: BandSpec) -> Result<f64> {
        self.check(phi)?;
        Ok(phi
            .coeffs()
            .iter()
            .zip(&self.levels)
            .filter(|(_, &lv)| band.contains(lv))
            .map(|(c, _)| c.norm_sqr())
            .sum())
    }

    /// Energy per level, summed over components.
    pub fn profile(&self, phi: &SpectralField) -> Result<LevelProfile> {
        let mut p = LevelProfile::with_levels(self.max_level);
        self.fill_profile(phi, &mut p)?;
        Ok(p)
    }

    /// Recomputes `profile` in place, reusing its buffers.
    pub fn fill_profile(&self, phi: &SpectralField, profile: &mut LevelProfile) -> Result<()> {
        self.check(phi)?;
        profile.reset(self.max_level);
        for (c, &lv) in phi.coeffs().iter().zip(&self.levels) {
            profile.energy[lv as usize] += c.norm_sqr();
        }
        profile.accumulate();
        Ok(())
    }

    /// `‖φ‖_{γ,L}` with weight `(1+|k|-L_α)^{2γ}` over `|k| > L_α`.
    pub fn shifted_seminorm(&self, phi: &SpectralField, gamma: f64, level: i64) -> Result<f64> {
        Ok(math::sqrt(self.shifted_seminorm_sq(phi, gamma, level)?))
    }

    pub fn shifted_seminorm_sq(&self, phi: &SpectralField, gamma: f64, level: i64) -> Result<f64> {
        self.check(phi)?;
        let n = self.lattice.len();
        let norms = self.lattice.norms();
        let mut acc = 0.0;
        for alpha in 0..self.components() {
            let thr = self.threshold(alpha, level);
            for (c, &kn) in phi.component(alpha).iter().zip(norms).take(n) {
                if kn > thr {
                    acc += shifted_weight(kn, thr, gamma) * c.norm_sqr();
                }
            }
        }
        Ok(acc)
    }

    /// `‖φ‖_{H^γ}` with weight `(1+|k|)^{2γ}`.
    pub fn sobolev_norm(&self, phi: &SpectralField, gamma: f64) -> Result<f64> {
        self.check(phi)?;
        Ok(math::sqrt(sobolev_norm_sq(phi, gamma)))
    }

    /// Smallest `M ≥ 1` with `‖Π^≥_M φ‖ ≤ ‖Π^<_M φ‖`.
    pub fn energy_median(&self, phi: &SpectralField) -> Result<u32> {
        self.profile(phi)?.median()
    }
}

/// `ρ^L_k = (1 + (|k| - L)_+)^{2γ}` for a mode of norm `|k|` and threshold `L`.
#[inline]
pub fn shifted_weight(norm: f64, threshold: f64, gamma: f64) -> f64 {
    math::weight_pow(1.0 + (norm - threshold).max(0.0), 2.0 * gamma)
}

/// `ρ_k = (1 + |k|)^{2γ}`.
#[inline]
pub fn sobolev_weight(norm: f64, gamma: f64) -> f64 {
    math::weight_pow(1.0 + norm, 2.0 * gamma)
}

/// `‖φ‖²_{H^γ}`; needs no band geometry.
pub fn sobolev_norm_sq(phi: &SpectralField, gamma: f64) -> f64 {
    let lat = phi.lattice();
    let n = lat.len();
    let mut acc = 0.0;
    for alpha in 0..phi.components() {
        for (c, &kn) in phi.component(alpha).iter().zip(lat.norms()).take(n) {
            acc += sobolev_weight(kn, gamma) * c.norm_sqr();
        }
    }
    acc
}

fn level_of(norm: f64, scale: f64) -> u32 {
    if norm == 0.0 {
        return 0;
    }
    let mut l = math::ceil(norm / scale).max(0.0) as i64;
    // The quotient may round across an integer; settle on the exact comparison.
    while l > 0 && norm <= (l - 1) as f64 * scale {
        l -= 1;
    }
    while norm > l as f64 * scale {
        l += 1;
    }
    l as u32
}

/// Squared band energies indexed by level, with prefix and suffix sums.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelProfile {
    energy: Vec<f64>,
    prefix: Vec<f64>,
    suffix: Vec<f64>,
}

impl LevelProfile {
    pub fn with_levels(max_level: u32) -> Self {
        let n = max_level as usize + 1;
        LevelProfile { energy: vec![0.0; n], prefix: vec![0.0; n], suffix: vec![0.0; n + 1] }
    }

    fn reset(&mut self, max_level: u32) {
        let n = max_level as usize + 1;
        self.energy.clear();
        self.energy.resize(n, 0.0);
        self.prefix.resize(n, 0.0);
        self.suffix.resize(n + 1, 0.0);
    }

    fn accumulate(&mut self) {
        let n = self.energy.len();
        let mut run = 0.0;
        for l in 0..n {
            run += self.energy[l];
            self.prefix[l] = run;
        }
        let mut run = 0.0;
        self.suffix[n] = 0.0;
        for l in (0..n).rev() {
            run += self.energy[l];
            self.suffix[l] = run;
        }
    }

    pub fn total(&self) -> f64 {
        self.suffix[0]
    }

    /// Energy on modes with level exactly `l`.
    pub fn at(&self, l: i64) -> f64 {
        if l < 0 || l as usize >= self.energy.len() {
            0.0
        } else {
            self.energy[l as usize]
        }
    }

    fn upto(&self, l: i64) -> f64 {
        if l < 0 {
            0.0
        } else {
            self.prefix[(l as usize).min(self.prefix.len() - 1)]
        }
    }

    fn from(&self, l: i64) -> f64 {
        if l <= 0 {
            self.suffix[0]
        } else {
            self.suffix[(l as usize).min(self.suffix.len() - 1)]
        }
    }

    /// `‖Π^<_L‖²`
    pub fn low(&self, level: i64) -> f64 {
        self.upto(level)
    }

    /// `‖Π^c_L‖²`
    pub fn central(&self, level: i64) -> f64 {
        self.at(level + 1)
    }

    /// `‖Π^>_L‖²`
    pub fn high(&self, level: i64) -> f64 {
        self.from(level + 2)
    }

    /// `‖Π^≥_L‖²`
    pub fn geq(&self, level: i64) -> f64 {
        self.from(level + 1)
    }

    /// `‖Π^≤_L‖²`
    pub fn leq(&self, level: i64) -> f64 {
        self.upto(level + 1)
    }

    pub fn band(&self, band: BandSpec) -> f64 {
        match band.band {
            Band::Low => self.low(band.level),
            Band::Central => self.central(band.level),
            Band::High => self.high(band.level),
            Band::Leq => self.leq(band.level),
            Band::Geq => self.geq(band.level),
        }
    }

    /// Energy median of the profiled field.
    pub fn median(&self) -> Result<u32> {
        if !(self.total() > 0.0) {
            return Err(Error::MedianUndefined);
        }
        let top = self.energy.len() as i64;
        for m in 1..=top {
            if self.geq(m) <= self.low(m) {
                return Ok(m as u32);
            }
        }
        // geq(top) is zero, so the loop always returns.
        Ok(top as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn line(k: u32) -> Arc<Lattice> {
        Arc::new(Lattice::new(1, k).unwrap())
    }

    fn shell_field(lat: &Arc<Lattice>, shells: &[(i32, f64)]) -> SpectralField {
        let mut f = SpectralField::zeros(lat.clone(), 1);
        for &(k, mass) in shells {
            let i = lat.index_of(&[k]).unwrap();
            let amp = if k == 0 { math::sqrt(mass) } else { math::sqrt(mass / 2.0) };
            f.set_pair(0, i, Complex64::new(amp, 0.0));
        }
        f
    }

    #[test]
    fn project_examples() {
        let lat = line(10);
        let s = Shells::new(lat.clone(), &[1.0], 1.0).unwrap();
        let phi = shell_field(&lat, &[(5, 1.0)]);
        assert_eq!(s.project(&phi, BandSpec::new(5, Band::Low)).unwrap(), phi);
        assert_eq!(s.project(&phi, BandSpec::new(4, Band::Geq)).unwrap(), phi);
        assert_eq!(s.project(&phi, BandSpec::new(5, Band::Geq)).unwrap().norm_sq(), 0.0);
    }

    #[test]
    fn per_component_threshold() {
        let lat = line(6);
        let s = Shells::new(lat.clone(), &[1.0, 16.0], 1.0).unwrap();
        assert_eq!(s.threshold(1, 2), 0.5);
        let mut phi = SpectralField::zeros(lat.clone(), 2);
        for i in 0..lat.len() {
            phi.set_pair(1, i, Complex64::new(1.0, 0.0));
        }
        let low = s.project(&phi, BandSpec::new(2, Band::Low)).unwrap();
        for i in 0..lat.len() {
            let kept = low.get(1, i) != Complex64::new(0.0, 0.0);
            assert_eq!(kept, i == lat.center());
        }
    }

    #[test]
    fn seminorm_examples() {
        let lat = line(10);
        let s = Shells::new(lat.clone(), &[1.0], 1.0).unwrap();
        let phi = shell_field(&lat, &[(5, 1.0)]);
        assert!((s.shifted_seminorm(&phi, 0.5, 3).unwrap() - math::sqrt(3.0)).abs() < 1e-14);
        assert_eq!(s.shifted_seminorm(&phi, 0.5, 5).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_examples() {
        let lat = line(10);
        let s = Shells::new(lat.clone(), &[1.0], 1.0).unwrap();
        let e0 = shell_field(&lat, &[(0, 1.0)]);
        for g in [0.0, 0.5, 3.0] {
            assert!((s.sobolev_norm(&e0, g).unwrap() - 1.0).abs() < 1e-15);
        }
        let e3 = shell_field(&lat, &[(3, 1.0)]);
        assert!((s.sobolev_norm(&e3, 1.0).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn median_examples() {
        let lat = line(10);
        let s = Shells::new(lat.clone(), &[1.0], 1.0).unwrap();
        assert_eq!(s.energy_median(&shell_field(&lat, &[(0, 1.0)])).unwrap(), 1);
        assert_eq!(s.energy_median(&shell_field(&lat, &[(5, 1.0)])).unwrap(), 5);
        // Hand-computed: M = 1..6 keep the 0.6 shell in Π^≥_M.
        assert_eq!(s.energy_median(&shell_field(&lat, &[(1, 0.4), (7, 0.6)])).unwrap(), 7);
        let zero = SpectralField::zeros(lat, 1);
        assert_eq!(s.energy_median(&zero), Err(Error::MedianUndefined));
    }

    #[test]
    fn level_matches_threshold_comparison() {
        let lat = Arc::new(Lattice::new(2, 9).unwrap());
        let s = Shells::new(lat.clone(), &[0.3, 1.0, 7.0], 1.5).unwrap();
        for alpha in 0..3 {
            for i in 0..lat.len() {
                let lv = s.level(alpha, i) as i64;
                assert!(lat.norm(i) <= s.threshold(alpha, lv));
                if lv > 0 {
                    assert!(lat.norm(i) > s.threshold(alpha, lv - 1));
                }
            }
        }
    }
}
