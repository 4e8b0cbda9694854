//! Spatially homogeneous matrix-valued noise in Fourier coordinates.
//!
//! Coefficient `B^{α,β}_k` couples component `β` of the field into component
//! `α` at frequency shift `k`, with `E|ΔB^{α,β}_k|² = Γ^α_{β,k} dt` for the
//! diagonal forms. Real-valued noise forces `ΔB_{-k} = conj ΔB_k` and a real
//! `k = 0` increment.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::lattice::Lattice;
use crate::math;
use crate::{Error, Result};

/// Tabulated diagonal coefficient `Γ^α_{β,k}`; also sets the value at `-k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub alpha: usize,
    pub beta: usize,
    pub mode: Vec<i32>,
    pub value: f64,
}

/// Tabulated general coefficient `Γ^{α,α'}_{β,β',k}`; also sets the value at `-k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorEntry {
    pub alpha: usize,
    pub alpha2: usize,
    pub beta: usize,
    pub beta2: usize,
    pub mode: Vec<i32>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseForm {
    /// `Γ^α_{β,k} = c (1+|k|)^{-2γ₀}` for every pair `(α, β)`.
    DiagonalParametric { c: f64, gamma0: f64 },
    /// Entries not listed are zero; an empty table is the noise-free model.
    DiagonalTable(Vec<TableEntry>),
    /// Positive semidefiniteness per mode is the caller's responsibility.
    General(Vec<TensorEntry>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub components: usize,
    pub form: NoiseForm,
    /// Noise truncation radius `K_noise`.
    pub radius: u32,
}

impl NoiseSpec {
    pub fn parametric(components: usize, c: f64, gamma0: f64, radius: u32) -> Self {
        NoiseSpec { components, form: NoiseForm::DiagonalParametric { c, gamma0 }, radius }
    }

    pub fn zero(components: usize, radius: u32) -> Self {
        NoiseSpec { components, form: NoiseForm::DiagonalTable(Vec::new()), radius }
    }

    /// Scalar noise acting only through the constant mode.
    pub fn constant_mode(dim: usize, gamma0: f64) -> Self {
        let entry = TableEntry { alpha: 0, beta: 0, mode: vec![0; dim], value: gamma0 };
        NoiseSpec { components: 1, form: NoiseForm::DiagonalTable(vec![entry]), radius: 1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    /// Index `(α m + β) n + j`.
    Diagonal(Vec<f64>),
    /// Index `(((α m + α') m + β) m + β') n + j`.
    General(Vec<f64>),
}

/// Noise coefficients resolved on the noise lattice `|k| ≤ K_noise`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCoefficients {
    lattice: Arc<Lattice>,
    components: usize,
    kind: Kind,
    /// Noise-lattice indices with any nonzero coefficient; closed under `k ↦ -k`.
    active: Vec<usize>,
}

impl NoiseCoefficients {
    pub fn new(spec: &NoiseSpec, dim: usize) -> Result<Self> {
        let m = spec.components;
        if m == 0 {
            return Err(Error::invalid("noise.m", "at least one component is required"));
        }
        let lattice = Arc::new(Lattice::new(dim, spec.radius)?);
        let n = lattice.len();
        let locate = |mode: &[i32]| -> Result<(usize, usize)> {
            let i = lattice
                .index_of(mode)
                .ok_or_else(|| Error::invalid("noise.entries", "mode outside the noise lattice"))?;
            Ok((i, lattice.neg(i)))
        };
        let kind = match &spec.form {
            NoiseForm::DiagonalParametric { c, gamma0 } => {
                if !(*c > 0.0) || !c.is_finite() {
                    return Err(Error::invalid("noise.c", "c must be positive"));
                }
                if !(*gamma0 > 0.0) || !gamma0.is_finite() {
                    return Err(Error::invalid("noise.gamma0", "gamma0 must be positive"));
                }
                let per_mode: Vec<f64> =
                    (0..n).map(|j| c * math::pow(1.0 + lattice.norm(j), -2.0 * gamma0)).collect();
                let mut g = Vec::with_capacity(m * m * n);
                for _ in 0..m * m {
                    g.extend_from_slice(&per_mode);
                }
                Kind::Diagonal(g)
            }
            NoiseForm::DiagonalTable(entries) => {
                let mut g = vec![0.0; m * m * n];
                let mut owner = vec![usize::MAX; m * m * n];
                for (e_idx, e) in entries.iter().enumerate() {
                    if e.alpha >= m || e.beta >= m {
                        return Err(Error::invalid("noise.entries", "component index out of range"));
                    }
                    if !(e.value >= 0.0) || !e.value.is_finite() {
                        return Err(Error::invalid("noise.entries", "diagonal coefficients must be finite and >= 0"));
                    }
                    if e.mode.len() != dim {
                        return Err(Error::invalid("noise.entries", "mode has the wrong dimension"));
                    }
                    let (i, j) = locate(&e.mode)?;
                    let base = (e.alpha * m + e.beta) * n;
                    for slot in [base + i, base + j] {
                        if owner[slot] != usize::MAX && owner[slot] != e_idx {
                            return Err(Error::DuplicateEntry { first: owner[slot], second: e_idx });
                        }
                        owner[slot] = e_idx;
                        g[slot] = e.value;
                    }
                }
                Kind::Diagonal(g)
            }
            NoiseForm::General(entries) => {
                let mut g = vec![0.0; m * m * m * m * n];
                let mut owner = vec![usize::MAX; g.len()];
                for (e_idx, e) in entries.iter().enumerate() {
                    if [e.alpha, e.alpha2, e.beta, e.beta2].iter().any(|&x| x >= m) {
                        return Err(Error::invalid("noise.entries", "component index out of range"));
                    }
                    if !e.value.is_finite() {
                        return Err(Error::invalid("noise.entries", "coefficients must be finite"));
                    }
                    if e.mode.len() != dim {
                        return Err(Error::invalid("noise.entries", "mode has the wrong dimension"));
                    }
                    let (i, j) = locate(&e.mode)?;
                    let base = (((e.alpha * m + e.alpha2) * m + e.beta) * m + e.beta2) * n;
                    for slot in [base + i, base + j] {
                        if owner[slot] != usize::MAX && owner[slot] != e_idx {
                            return Err(Error::DuplicateEntry { first: owner[slot], second: e_idx });
                        }
                        owner[slot] = e_idx;
                        g[slot] = e.value;
                    }
                }
                Kind::General(g)
            }
        };
        let mut out = NoiseCoefficients { lattice, components: m, kind, active: Vec::new() };
        out.active = out.find_active();
        Ok(out)
    }

    fn find_active(&self) -> Vec<usize> {
        let n = self.lattice.len();
        let raw = self.raw();
        // Storage is blocks of length n indexed by component tuples.
        (0..n).filter(|&j| raw.chunks(n).any(|block| block[j] != 0.0)).collect()
    }

    /// Noise-lattice indices carrying a nonzero coefficient.
    pub fn active_modes(&self) -> &[usize] {
        &self.active
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, Kind::Diagonal(_))
    }

    /// `Γ^{α,α'}_{β,β'}` at noise-lattice index `j`, for either storage form.
    pub fn entry(&self, alpha: usize, alpha2: usize, beta: usize, beta2: usize, j: usize) -> f64 {
        let (m, n) = (self.components, self.lattice.len());
        match &self.kind {
            Kind::Diagonal(g) => {
                if alpha == alpha2 && beta == beta2 {
                    g[(alpha * m + beta) * n + j]
                } else {
                    0.0
                }
            }
            Kind::General(g) => g[(((alpha * m + alpha2) * m + beta) * m + beta2) * n + j],
        }
    }

    /// Diagonal coefficient `Γ^α_{β}` at index `j`; `None` for general tensors.
    #[inline]
    pub fn diagonal(&self, alpha: usize, beta: usize, j: usize) -> Option<f64> {
        match &self.kind {
            Kind::Diagonal(g) => {
                Some(g[(alpha * self.components + beta) * self.lattice.len() + j])
            }
            Kind::General(_) => None,
        }
    }

    /// Copy with every coefficient multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        let g = match &mut out.kind {
            Kind::Diagonal(g) | Kind::General(g) => g,
        };
        for v in g.iter_mut() {
            *v *= factor;
        }
        out.active = out.find_active();
        out
    }

    fn raw(&self) -> &[f64] {
        match &self.kind {
            Kind::Diagonal(g) | Kind::General(g) => g,
        }
    }

    /// Modes (as coordinates) where `Γ^α_β` is positive.
    pub fn support(&self, alpha: usize, beta: usize) -> Vec<Vec<i32>> {
        (0..self.lattice.len())
            .filter(|&j| self.entry(alpha, alpha, beta, beta, j) > 0.0)
            .map(|j| self.lattice.mode(j).to_vec())
            .collect()
    }

    /// `Λ(x) = Σ_k Γ_k e^{ik·x}`, real by the `±k` symmetry; layout as `lambda0`.
    pub fn lambda_at(&self, x: &[f64]) -> Vec<f64> {
        let m = self.components;
        let n = self.lattice.len();
        let cos: Vec<f64> = (0..n)
            .map(|j| {
                let phase: f64 =
                    self.lattice.mode(j).iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                libm::cos(phase)
            })
            .collect();
        let mut out = vec![0.0; m * m * m * m];
        for a in 0..m {
            for a2 in 0..m {
                for b in 0..m {
                    for b2 in 0..m {
                        out[((a * m + a2) * m + b) * m + b2] =
                            (0..n).map(|j| self.entry(a, a2, b, b2, j) * cos[j]).sum();
                    }
                }
            }
        }
        out
    }
}

/// Per-step increments `ΔB^{α,β}_k` on the noise lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseIncrement {
    lattice: Arc<Lattice>,
    components: usize,
    dt: f64,
    /// Index `(α m + β) n + j`.
    values: Vec<Complex64>,
    /// Pairs `α m + β` with any positive coefficient, and their active modes.
    active: Vec<(usize, Vec<usize>)>,
}

impl NoiseIncrement {
    pub fn zeros(coeffs: &NoiseCoefficients, dt: f64) -> Self {
        let m = coeffs.components;
        let n = coeffs.lattice.len();
        let mut active = Vec::new();
        for p in 0..m * m {
            let (a, b) = (p / m, p % m);
            let modes: Vec<usize> =
                (0..n).filter(|&j| coeffs.entry(a, a, b, b, j) > 0.0).collect();
            if !modes.is_empty() {
                active.push((p, modes));
            }
        }
        NoiseIncrement {
            lattice: coeffs.lattice.clone(),
            components: m,
            dt,
            values: vec![Complex64::new(0.0, 0.0); m * m * n],
            active,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn get(&self, alpha: usize, beta: usize, j: usize) -> Complex64 {
        self.values[(alpha * self.components + beta) * self.lattice.len() + j]
    }

    /// Sets `ΔB_k` and its conjugate partner at `-k`.
    pub fn set_pair(&mut self, alpha: usize, beta: usize, j: usize, value: Complex64) {
        let n = self.lattice.len();
        let base = (alpha * self.components + beta) * n;
        let jn = self.lattice.neg(j);
        if j == jn {
            self.values[base + j] = Complex64::new(value.re, 0.0);
        } else {
            self.values[base + j] = value;
            self.values[base + jn] = value.conj();
        }
    }

    /// Active `(pair, modes)` lists, pair index `α m + β`.
    pub fn active(&self) -> &[(usize, Vec<usize>)] {
        &self.active
    }

    /// Component-pair slice `ΔB^{α,β}_·` by pair index.
    #[inline]
    pub fn pair(&self, p: usize) -> &[Complex64] {
        let n = self.lattice.len();
        &self.values[p * n..(p + 1) * n]
    }

    /// `self += other` entrywise; used to coarsen a Brownian path.
    pub fn accumulate(&mut self, other: &NoiseIncrement) -> Result<()> {
        if self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch("increments on different noise lattices"));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        self.dt += other.dt;
        Ok(())
    }

    pub fn clear(&mut self, dt: f64) {
        for v in &mut self.values {
            *v = Complex64::new(0.0, 0.0);
        }
        self.dt = dt;
    }
}

/// Reusable sampler for diagonal noise with precomputed standard deviations.
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    dt: f64,
    /// `(slot, partner slot, std of each real part, is the k = 0 mode)`.
    draws: Vec<(usize, usize, f64, bool)>,
}

impl IncrementSampler {
    pub fn new(coeffs: &NoiseCoefficients, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositiveTimeStep { dt });
        }
        if !coeffs.is_diagonal() {
            return Err(Error::Unsupported("sampling of non-diagonal noise tensors"));
        }
        let m = coeffs.components;
        let lat = &coeffs.lattice;
        let n = lat.len();
        let mut draws = Vec::new();
        for p in 0..m * m {
            let (a, b) = (p / m, p % m);
            for j in lat.center()..n {
                let g = coeffs.entry(a, a, b, b, j);
                if g > 0.0 {
                    let zero = j == lat.center();
                    let var = if zero { g * dt } else { 0.5 * g * dt };
                    draws.push((p * n + j, p * n + lat.neg(j), math::sqrt(var), zero));
                }
            }
        }
        Ok(IncrementSampler { dt, draws })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Overwrites the active entries of `inc` with fresh draws, in the fixed
    /// lexicographic `(α, β, k)` order over the representative half.
    pub fn sample_into<R: Rng + ?Sized>(&self, inc: &mut NoiseIncrement, rng: &mut R) {
        inc.dt = self.dt;
        for &(slot, partner, sd, zero) in &self.draws {
            let re: f64 = StandardNormal.sample(rng);
            if zero {
                inc.values[slot] = Complex64::new(sd * re, 0.0);
            } else {
                let im: f64 = StandardNormal.sample(rng);
                let v = Complex64::new(sd * re, sd * im);
                inc.values[slot] = v;
                inc.values[partner] = v.conj();
            }
        }
    }
}

/// One-shot draw of a full increment.
pub fn sample_increments<R: Rng + ?Sized>(
    coeffs: &NoiseCoefficients,
    dt: f64,
    rng: &mut R,
) -> Result<NoiseIncrement> {
    let sampler = IncrementSampler::new(coeffs, dt)?;
    let mut inc = NoiseIncrement::zeros(coeffs, dt);
    sampler.sample_into(&mut inc, rng);
    Ok(inc)
}

/// `Λ(0)` and its two traces.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTensors {
    components: usize,
    /// `Λ^{α,α'}_{β,β'}(0)` at `((α m + α') m + β) m + β'`.
    pub lambda0: Vec<f64>,
    /// `Tr(Λ)^α_β = Σ_γ Λ^{γ,α}_{β,γ}(0)` at `α m + β`.
    pub trace: Vec<f64>,
    /// `Tr^u(Λ)^α_β = Σ_γ Λ^{γ,γ}_{α,β}(0)` at `α m + β`.
    pub trace_u: Vec<f64>,
    /// `Σ_k Γ̄_k` with `Γ̄_k` the largest absolute entry at `k`.
    pub sup_bound: f64,
}

impl CorrelationTensors {
    pub fn new(coeffs: &NoiseCoefficients) -> Self {
        let m = coeffs.components;
        let n = coeffs.lattice.len();
        let idx4 = |a: usize, a2: usize, b: usize, b2: usize| ((a * m + a2) * m + b) * m + b2;
        let mut lambda0 = vec![0.0; m * m * m * m];
        for a in 0..m {
            for a2 in 0..m {
                for b in 0..m {
                    for b2 in 0..m {
                        lambda0[idx4(a, a2, b, b2)] =
                            (0..n).map(|j| coeffs.entry(a, a2, b, b2, j)).sum();
                    }
                }
            }
        }
        let mut trace = vec![0.0; m * m];
        let mut trace_u = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                trace[a * m + b] = (0..m).map(|g| lambda0[idx4(g, a, b, g)]).sum();
                trace_u[a * m + b] = (0..m).map(|g| lambda0[idx4(g, g, a, b)]).sum();
            }
        }
        let raw = coeffs.raw();
        let sup_bound = (0..n)
            .map(|j| (0..raw.len() / n).map(|p| raw[p * n + j].abs()).fold(0.0, f64::max))
            .sum();
        CorrelationTensors { components: m, lambda0, trace, trace_u, sup_bound }
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn lambda0(&self, alpha: usize, alpha2: usize, beta: usize, beta2: usize) -> f64 {
        let m = self.components;
        self.lambda0[((alpha * m + alpha2) * m + beta) * m + beta2]
    }

    pub fn trace(&self, alpha: usize, beta: usize) -> f64 {
        self.trace[alpha * self.components + beta]
    }

    pub fn trace_u(&self, alpha: usize, beta: usize) -> f64 {
        self.trace_u[alpha * self.components + beta]
    }
}

/// Outcome of `check_decay`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    pub pass: bool,
    pub max_ratio: f64,
    pub worst_mode: Vec<i32>,
    /// `(α, α', β, β')` of the worst coefficient.
    pub worst_entry: [usize; 4],
}

/// Checks `|Γ_k| ≤ C (1+|k|)^{-2γ₀}` on every stored mode.
pub fn check_decay(coeffs: &NoiseCoefficients, gamma0: f64, bound: f64) -> DecayReport {
    let m = coeffs.components;
    let lat = &coeffs.lattice;
    let mut best = (0.0f64, lat.center(), [0usize; 4]);
    for j in 0..lat.len() {
        let envelope = bound * math::pow(1.0 + lat.norm(j), -2.0 * gamma0);
        for a in 0..m {
            for a2 in 0..m {
                for b in 0..m {
                    for b2 in 0..m {
                        let g = coeffs.entry(a, a2, b, b2, j).abs();
                        if g == 0.0 {
                            continue;
                        }
                        let ratio = g / envelope;
                        if ratio > best.0 {
                            best = (ratio, j, [a, a2, b, b2]);
                        }
                    }
                }
            }
        }
    }
    DecayReport {
        pass: best.0 <= 1.0,
        max_ratio: best.0,
        worst_mode: lat.mode(best.1).to_vec(),
        worst_entry: best.2,
    }
}

/// Result of the large-scale non-degeneracy check at one level `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportCheck {
    pub level: u32,
    pub pass: bool,
    /// First `j` with `|j| ≤ M + b` not reachable from `B(M)` by a shift in `A`.
    pub witness: Option<Vec<i32>>,
}

/// For each `M ∈ [K₀, M_max]` checks that every `|j| ≤ M + b` has some
/// `l ∈ A` with `|j - l| ≤ M`.
pub fn check_support_condition(
    support: &[Vec<i32>],
    dim: usize,
    b: f64,
    k0: u32,
    m_max: u32,
) -> Result<Vec<SupportCheck>> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if support.iter().any(|l| l.len() != dim) {
        return Err(Error::ShapeMismatch("support mode has the wrong dimension"));
    }
    let mut out = Vec::new();
    for level in k0..=m_max {
        let outer = level as f64 + b;
        let r = outer as i32;
        let m2 = (level as i64) * (level as i64);
        let mut j = vec![-r; dim];
        let mut witness = None;
        'scan: loop {
            let n2: i64 = j.iter().map(|&c| (c as i64) * (c as i64)).sum();
            if (n2 as f64) <= outer * outer {
                let covered = support.iter().any(|l| {
                    let d2: i64 =
                        j.iter().zip(l).map(|(&x, &y)| ((x - y) as i64) * ((x - y) as i64)).sum();
                    d2 <= m2
                });
                if !covered {
                    witness = Some(j.clone());
                    break 'scan;
                }
            }
            let mut pos = dim;
            loop {
                if pos == 0 {
                    break 'scan;
                }
                pos -= 1;
                if j[pos] < r {
                    j[pos] += 1;
                    break;
                }
                j[pos] = -r;
            }
        }
        out.push(SupportCheck { level, pass: witness.is_none(), witness });
    }
    Ok(out)
}

/// Candidate step `ℓ` towards the origin for a mode `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    pub ell: Vec<i32>,
    /// `|k + ℓ|`
    pub shifted_norm: f64,
    /// `|k| - β/√d + ε`
    pub bound: f64,
    pub satisfied: bool,
}

/// `ℓ = -β sign(k_{i₀}) e_{i₀}` with `i₀` the first coordinate of largest
/// magnitude; `None` for `k = 0`.
pub fn descent_direction(k: &[i32], beta: u32, eps: f64) -> Option<Descent> {
    let (i0, &top) = k
        .iter()
        .enumerate()
        .fold((0, &0i32), |best, (i, c)| if c.abs() > best.1.abs() { (i, c) } else { best });
    if top == 0 {
        return None;
    }
    let mut ell = vec![0i32; k.len()];
    ell[i0] = -(beta as i32) * top.signum();
    let norm = |v: &mut dyn Iterator<Item = i64>| math::sqrt(v.map(|c| (c * c) as f64).sum());
    let k_norm = norm(&mut k.iter().map(|&c| c as i64));
    let shifted_norm = norm(&mut k.iter().zip(&ell).map(|(&a, &b)| (a + b) as i64));
    let bound = k_norm - beta as f64 / math::sqrt(k.len() as f64) + eps;
    Some(Descent { ell, shifted_norm, bound, satisfied: shifted_norm <= bound })
}

/// Radius beyond which `descent_direction` always satisfies its bound:
/// `|k+ℓ|² = |k|² - (2β|k_{i₀}| - β²)` and `√(x² - y) ≤ x - y/(2x)`.
pub fn descent_radius(beta: u32, eps: f64) -> f64 {
    let b = beta as f64;
    b * b / (2.0 * eps)
}
