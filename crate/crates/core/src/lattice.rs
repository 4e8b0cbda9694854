//! Truncated Fourier lattice and fields stored on it.
//!
//! Modes `k ∈ Z^d` with `|k| ≤ K` are enumerated in lexicographic order over
//! the box `[-K, K]^d`. The enumeration is symmetric under `k ↦ -k`, which
//! reverses the order, so the partner of index `i` is `len - 1 - i` and
//! `k = 0` sits at the centre index. Indices at or above the centre are the
//! half-lattice representatives.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::math;
use crate::{Error, Result};

const OUTSIDE: u32 = u32::MAX;

/// Integer modes `k ∈ Z^d` with `|k| ≤ K`.
#[derive(Clone, PartialEq)]
pub struct Lattice {
    dim: usize,
    radius: u32,
    coords: Vec<i32>,
    norm_sq: Vec<u64>,
    norms: Vec<f64>,
    box_side: usize,
    box_lookup: Vec<u32>,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("dim", &self.dim)
            .field("radius", &self.radius)
            .field("modes", &self.len())
            .finish()
    }
}

impl Lattice {
    pub fn new(dim: usize, radius: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if radius == 0 {
            return Err(Error::invalid("K", "truncation radius must be at least 1"));
        }
        let side = 2 * radius as usize + 1;
        let box_len = side
            .checked_pow(dim as u32)
            .filter(|&n| n < OUTSIDE as usize)
            .ok_or_else(|| Error::invalid("K", "lattice box too large"))?;
        let r = radius as i64;
        let mut coords = Vec::new();
        let mut norm_sq = Vec::new();
        let mut box_lookup = vec![OUTSIDE; box_len];
        let mut k = vec![-(radius as i32); dim];
        for (slot, entry) in box_lookup.iter_mut().enumerate() {
            let n2: i64 = k.iter().map(|&c| (c as i64) * (c as i64)).sum();
            if n2 <= r * r {
                *entry = norm_sq.len() as u32;
                coords.extend_from_slice(&k);
                norm_sq.push(n2 as u64);
            }
            if slot + 1 < box_len {
                // Odometer increment, last coordinate fastest.
                for c in k.iter_mut().rev() {
                    if *c < radius as i32 {
                        *c += 1;
                        break;
                    }
                    *c = -(radius as i32);
                }
            }
        }
        let norms = norm_sq.iter().map(|&n| math::sqrt(n as f64)).collect();
        Ok(Lattice { dim, radius, coords, norm_sq, norms, box_side: side, box_lookup })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Number of stored modes.
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Index of `k = 0`.
    pub fn center(&self) -> usize {
        self.len() / 2
    }

    /// Index of `-k` for the mode at `i`.
    #[inline]
    pub fn neg(&self, i: usize) -> usize {
        self.len() - 1 - i
    }

    /// Half-lattice representative of the pair `{k, -k}`.
    #[inline]
    pub fn representative(&self, i: usize) -> usize {
        i.max(self.neg(i))
    }

    #[inline]
    pub fn mode(&self, i: usize) -> &[i32] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Euclidean norm `|k|`.
    #[inline]
    pub fn norm(&self, i: usize) -> f64 {
        self.norms[i]
    }

    #[inline]
    pub fn norm_sq(&self, i: usize) -> u64 {
        self.norm_sq[i]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let r = self.radius as i32;
        let mut slot = 0usize;
        for &c in k {
            if c < -r || c > r {
                return None;
            }
            slot = slot * self.box_side + (c + r) as usize;
        }
        match self.box_lookup[slot] {
            OUTSIDE => None,
            idx => Some(idx as usize),
        }
    }

    /// Index of `k - l` where `k` is the mode at `i`, if it is stored.
    #[inline]
    pub fn difference_index(&self, i: usize, l: &[i32]) -> Option<usize> {
        let r = self.radius as i32;
        let mut slot = 0usize;
        for (&c, &s) in self.mode(i).iter().zip(l) {
            let v = c - s;
            if v < -r || v > r {
                return None;
            }
            slot = slot * self.box_side + (v + r) as usize;
        }
        match self.box_lookup[slot] {
            OUTSIDE => None,
            idx => Some(idx as usize),
        }
    }
}

/// Eigenvalue `ζ_k = |k|^{2a}` of `(-Δ)^a` at mode `k`.
pub fn eigenvalue(k: &[i32], a: f64) -> f64 {
    let n2: f64 = k.iter().map(|&c| (c as f64) * (c as f64)).sum();
    if n2 == 0.0 {
        0.0
    } else {
        math::pow(n2, a)
    }
}

/// Spectral gap `Δ_L = (L+1)^{2a} - L^{2a}`.
pub fn gap(level: u32, a: f64) -> f64 {
    let l = level as f64;
    math::pow(l + 1.0, 2.0 * a) - if level == 0 { 0.0 } else { math::pow(l, 2.0 * a) }
}

/// Fourier coefficients of an `m`-component real field.
///
/// Coefficients are stored component-major: entry `α * len + i` holds
/// `û^{α}(k_i)`. Real-valuedness is the Hermitian condition
/// `û(-k) = conj û(k)`; the constructors below preserve it, raw mutable access
/// does not.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    lattice: Arc<Lattice>,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(lattice: Arc<Lattice>, components: usize) -> Self {
        let n = lattice.len() * components;
        SpectralField { lattice, components, coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_coeffs(
        lattice: Arc<Lattice>,
        components: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != lattice.len() * components {
            return Err(Error::ShapeMismatch("coefficient count differs from m * lattice size"));
        }
        Ok(SpectralField { lattice, components, coeffs })
    }

    /// Unit-norm real field `e_k` in component `alpha`: a cosine mode with
    /// weight `1/√2` on each of `±k`, or the constant mode when `k = 0`.
    pub fn basis(lattice: Arc<Lattice>, components: usize, alpha: usize, k: &[i32]) -> Result<Self> {
        if alpha >= components {
            return Err(Error::ShapeMismatch("component index out of range"));
        }
        let i = lattice
            .index_of(k)
            .ok_or(Error::ShapeMismatch("mode outside the lattice"))?;
        let mut f = SpectralField::zeros(lattice, components);
        if i == f.lattice.center() {
            f.set_pair(alpha, i, Complex64::new(1.0, 0.0));
        } else {
            f.set_pair(alpha, i, Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0));
        }
        Ok(f)
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Raw coefficient access. Callers keep the Hermitian pairing intact.
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, alpha: usize) -> &[Complex64] {
        let n = self.lattice.len();
        &self.coeffs[alpha * n..(alpha + 1) * n]
    }

    #[inline]
    pub fn get(&self, alpha: usize, i: usize) -> Complex64 {
        self.coeffs[alpha * self.lattice.len() + i]
    }

    /// Sets the coefficient at `k_i` and its conjugate at `-k_i`. At `k = 0`
    /// only the real part is kept.
    pub fn set_pair(&mut self, alpha: usize, i: usize, value: Complex64) {
        let n = self.lattice.len();
        let j = self.lattice.neg(i);
        if i == j {
            self.coeffs[alpha * n + i] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[alpha * n + i] = value;
            self.coeffs[alpha * n + j] = value.conj();
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &SpectralField) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * factor;
        }
        Ok(())
    }

    /// Real inner product `Σ_α Σ_k Re(û^α_k conj v̂^α_k)`.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum())
    }

    /// Largest violation of `û(-k) = conj û(k)` and of a real `k = 0` mode.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.lattice.len();
        let mut worst = 0.0f64;
        for alpha in 0..self.components {
            let comp = &self.coeffs[alpha * n..(alpha + 1) * n];
            for i in self.lattice.center()..n {
                let d = (comp[i] - comp[self.lattice.neg(i)].conj()).norm_sqr();
                worst = worst.max(math::sqrt(d));
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_defect() == 0.0
    }

    /// Coefficients as interleaved `(re, im)` pairs in storage order.
    pub fn to_interleaved(&self) -> Vec<f64> {
        self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub(crate) fn check_shape(&self, other: &SpectralField) -> Result<()> {
        if self.components != other.components || self.coeffs.len() != other.coeffs.len() {
            return Err(Error::ShapeMismatch("fields live on different shapes"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_symmetric_and_lexicographic() {
        for (d, k) in [(1, 5), (2, 4), (3, 3)] {
            let lat = Lattice::new(d, k).unwrap();
            let c = lat.center();
            assert!(lat.mode(c).iter().all(|&x| x == 0));
            for i in 0..lat.len() {
                let neg: Vec<i32> = lat.mode(i).iter().map(|&x| -x).collect();
                assert_eq!(lat.mode(lat.neg(i)), &neg[..]);
                assert!(lat.norm_sq(i) <= (k as u64).pow(2));
                assert_eq!(lat.index_of(lat.mode(i)), Some(i));
                if i > 0 {
                    assert!(lat.mode(i - 1) < lat.mode(i));
                }
            }
        }
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(Lattice::new(1, 8).unwrap().len(), 17);
        // Gauss circle count N(4) = 49.
        assert_eq!(Lattice::new(2, 4).unwrap().len(), 49);
    }

    #[test]
    fn difference_index_matches_lookup() {
        let lat = Lattice::new(2, 5).unwrap();
        let l = [2, -1];
        for i in 0..lat.len() {
            let k = lat.mode(i);
            let diff = [k[0] - l[0], k[1] - l[1]];
            assert_eq!(lat.difference_index(i, &l), lat.index_of(&diff));
        }
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(&[3, 4], 1.0), 25.0);
        assert_eq!(eigenvalue(&[0, 0, 0], 2.5), 0.0);
        assert!((eigenvalue(&[2, 0], 1.5) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap(5, 1.0), 11.0);
        assert_eq!(gap(0, 1.0), 1.0);
        assert_eq!(gap(1, 2.0), 15.0);
    }

    #[test]
    fn basis_is_unit_and_real() {
        let lat = Arc::new(Lattice::new(1, 6).unwrap());
        for k in -6..=6 {
            let e = SpectralField::basis(lat.clone(), 2, 1, &[k]).unwrap();
            assert!((e.norm() - 1.0).abs() < 1e-15);
            assert!(e.is_hermitian());
        }
    }
}
