//! Self-checks: physical-grid oracles, sampler statistics, strong
//! convergence and randomized inequality suites.
//!
//! Every check reports instance and violation counts so that `selftest` and
//! the acceptance tests print the same lines.

use std::f64::consts::TAU;
use std::sync::Arc;

use projflow_core::bands::{shifted_weight, sobolev_norm_sq, sobolev_weight};
use projflow_core::integrator::apply_noise;
use projflow_core::lyapunov::{log_g, LyapParams, SandwichConstants};
use projflow_core::noise::{descent_direction, descent_radius, IncrementSampler, NoiseIncrement};
use projflow_core::projective::quartic_form;
use projflow_core::{
    Band, BandSpec, Complex64, Lattice, Model, ModelParams, NoiseSpec, Shells, SimState, SpectralField, Stepper,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: u64,
    pub violations: u64,
    /// Worst observed statistic, in the units named by `detail`.
    pub worst: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, instances: u64, violations: u64, worst: f64, detail: String) -> Self {
        CheckResult { name: name.to_string(), instances, violations, worst, detail }
    }

    pub fn pass(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}/{} passed; {}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.instances - self.violations,
            self.instances,
            self.detail
        )
    }
}

/// Random Hermitian unit field with log-uniform amplitudes over `span`
/// decades and about 40% of modes set to zero.
pub fn random_unit_field<R: Rng>(lat: &Arc<Lattice>, m: usize, span: f64, rng: &mut R) -> SpectralField {
    loop {
        let mut f = SpectralField::zeros(lat.clone(), m);
        for alpha in 0..m {
            for i in lat.center()..lat.len() {
                if rng.random_bool(0.4) {
                    continue;
                }
                let mag = 10f64.powf(-span * rng.random::<f64>());
                let phase = TAU * rng.random::<f64>();
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

fn model(dim: usize, nu: Vec<f64>, a: f64, radius: u32, dt: f64, noise: NoiseSpec) -> Model {
    Model::new(ModelParams::new(dim, nu, a, radius, dt), &noise).expect("fixed check model")
}

/// Values of a one-dimensional field component on `n` equispaced points.
fn to_grid_1d(lat: &Lattice, coeffs: &[Complex64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let x = TAU * j as f64 / n as f64;
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let kx = lat.mode(i)[0] as f64 * x;
                    c.re * kx.cos() - c.im * kx.sin()
                })
                .sum()
        })
        .collect()
}

/// Quartic form against `(2π)^{-2} ∫∫ π(x)² Λ(x-y) π(y)² dx dy` on a 128×128
/// grid, which is exact for these trigonometric polynomials.
pub fn quartic_grid_oracle(n_fields: usize, seed: u64) -> CheckResult {
    const N: usize = 128;
    let md = model(1, vec![1.0], 1.0, 6, 1e-3, NoiseSpec::parametric(1, 1.0, 1.0, 6));
    let lat = md.lattice().clone();
    let nlat = md.noise().lattice().clone();
    let gamma: Vec<f64> = (0..nlat.len()).map(|j| md.noise().diagonal(0, 0, j).unwrap_or(0.0)).collect();
    // Λ(x) only depends on x - y through the grid offset.
    let lambda: Vec<f64> = (0..N)
        .map(|d| {
            let x = TAU * d as f64 / N as f64;
            (0..nlat.len()).map(|j| gamma[j] * (nlat.mode(j)[0] as f64 * x).cos()).sum()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for _ in 0..n_fields {
        let pi = random_unit_field(&lat, 1, 3.0, &mut rng);
        let sq: Vec<f64> = to_grid_1d(&lat, pi.component(0), N).iter().map(|v| v * v).collect();
        let mut acc = 0.0;
        for (i, si) in sq.iter().enumerate() {
            let inner: f64 = sq.iter().enumerate().map(|(j, sj)| lambda[(i + N - j) % N] * sj).sum();
            acc += si * inner;
        }
        let oracle = acc / (N * N) as f64;
        let value = quartic_form(&pi, md.noise()).expect("matching shapes");
        let rel = (value - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if !(rel <= 1e-6) {
            bad += 1;
        }
    }
    CheckResult::new("quartic form vs grid integral", n_fields as u64, bad, worst, format!("max relative error {worst:.3e} (tolerance 1e-6)"))
}

/// `apply_noise` against the product of physical-grid values on 64 points,
/// projected back onto the field lattice. Degrees stay below the aliasing limit.
pub fn apply_noise_grid_oracle(n_cases: usize, seed: u64) -> CheckResult {
    const N: usize = 64;
    let md = model(1, vec![1.0, 0.5], 1.0, 16, 1e-2, NoiseSpec::parametric(2, 1.0, 1.0, 8));
    let lat = md.lattice().clone();
    let nlat = md.noise().lattice().clone();
    let sampler = IncrementSampler::new(md.noise(), 0.01).expect("diagonal noise");
    let mut inc = NoiseIncrement::zeros(md.noise(), 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut bad = 0;
    for _ in 0..n_cases {
        let phi = random_unit_field(&lat, 2, 2.0, &mut rng);
        sampler.sample_into(&mut inc, &mut rng);
        let psi = apply_noise(&phi, &inc).expect("matching shapes");
        let phi_x: Vec<Vec<f64>> = (0..2).map(|b| to_grid_1d(&lat, phi.component(b), N)).collect();
        for alpha in 0..2 {
            let mut prod = vec![0.0; N];
            for (beta, phi_b) in phi_x.iter().enumerate() {
                let db: Vec<Complex64> = (0..nlat.len()).map(|j| inc.get(alpha, beta, j)).collect();
                let w = to_grid_1d(&nlat, &db, N);
                for x in 0..N {
                    prod[x] += phi_b[x] * w[x];
                }
            }
            for i in 0..lat.len() {
                let k = lat.mode(i)[0] as f64;
                let mut c = Complex64::new(0.0, 0.0);
                for (x, p) in prod.iter().enumerate() {
                    let th = -k * TAU * x as f64 / N as f64;
                    c += Complex64::new(p * th.cos(), p * th.sin());
                }
                c /= N as f64;
                let err = (c - psi.get(alpha, i)).norm();
                worst = worst.max(err);
                if !(err <= 1e-10) {
                    bad += 1;
                }
            }
        }
    }
    CheckResult::new("apply_noise vs grid product", n_cases as u64, bad, worst, format!("max abs error {worst:.3e} (tolerance 1e-10)"))
}

struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn new() -> Self {
        Moments { n: 0.0, sum: 0.0, sum_sq: 0.0 }
    }
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }
    /// `(mean - target) / stderr`, with the empirical standard error.
    fn z(&self, target: f64) -> f64 {
        let mean = self.sum / self.n;
        let var = (self.sum_sq / self.n - mean * mean) * self.n / (self.n - 1.0);
        let se = (var / self.n).sqrt();
        if se == 0.0 {
            if mean == target { 0.0 } else { f64::INFINITY }
        } else {
            (mean - target) / se
        }
    }
}

/// Empirical second moments of `ΔB` against `Γ·dt`, the real/imaginary split,
/// and vanishing cross-covariances between neighbouring triples, each within
/// 5 standard errors. Conjugate pairing must hold exactly.
pub fn increment_covariance(draws: usize, seed: u64) -> CheckResult {
    let dt = 0.01;
    let md = model(1, vec![1.0, 1.0], 1.0, 3, dt, NoiseSpec::parametric(2, 0.8, 1.0, 3));
    let coeffs = md.noise();
    let nlat = coeffs.lattice().clone();
    let sampler = IncrementSampler::new(coeffs, dt).expect("diagonal noise");
    let mut inc = NoiseIncrement::zeros(coeffs, dt);
    // Triples (α, β, j) on the half lattice, k = 0 first.
    let mut triples = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for j in nlat.center()..nlat.len() {
                triples.push((a, b, j, coeffs.diagonal(a, b, j).unwrap_or(0.0)));
            }
        }
    }
    let t = triples.len();
    let mut abs2: Vec<Moments> = (0..t).map(|_| Moments::new()).collect();
    let mut re2: Vec<Moments> = (0..t).map(|_| Moments::new()).collect();
    let mut reim: Vec<Moments> = (0..t).map(|_| Moments::new()).collect();
    let mut cross: Vec<Moments> = (0..t).map(|_| Moments::new()).collect();
    let mut conj_bad = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..draws {
        sampler.sample_into(&mut inc, &mut rng);
        let vals: Vec<Complex64> = triples.iter().map(|&(a, b, j, _)| inc.get(a, b, j)).collect();
        for (idx, &(a, b, j, _)) in triples.iter().enumerate() {
            let v = vals[idx];
            if inc.get(a, b, nlat.neg(j)) != v.conj() {
                conj_bad += 1;
            }
            abs2[idx].push(v.norm_sqr());
            re2[idx].push(v.re * v.re);
            reim[idx].push(v.re * v.im);
            let w = vals[(idx + 1) % t];
            cross[idx].push(v.re * w.re);
        }
    }
    let mut worst = 0.0f64;
    let mut bad = conj_bad;
    let mut instances = 0u64;
    for (idx, &(_, _, j, g)) in triples.iter().enumerate() {
        let zero_mode = j == nlat.center();
        let target = g * dt;
        let mut zs = vec![abs2[idx].z(target), cross[idx].z(0.0)];
        if !zero_mode {
            zs.push(re2[idx].z(target / 2.0));
            zs.push(reim[idx].z(0.0));
        }
        for z in zs {
            instances += 1;
            worst = worst.max(z.abs());
            if !(z.abs() <= 5.0) {
                bad += 1;
            }
        }
    }
    CheckResult::new(
        "noise increment covariance",
        instances,
        bad,
        worst,
        format!("{draws} draws, max |z| {worst:.2} (tolerance 5), conjugation defects {conj_bad}"),
    )
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Strong error `E‖u^h_T - u^ref_T‖` of the unnormalized solution for four
/// dyadic step sizes against a reference at `dt₀/16` on the same Brownian
/// paths, and the log-log slope of error against step size.
pub fn strong_convergence(paths: usize, seed: u64) -> (CheckResult, ConvergenceReport) {
    const LEVELS: usize = 4;
    let t_end = 1.0;
    let dt0 = 1.0 / 8.0;
    let fine_dt = dt0 / (1 << LEVELS) as f64;
    let fine_steps = (t_end / fine_dt).round() as usize;
    let md = model(1, vec![1.0], 1.0, 8, fine_dt, NoiseSpec::parametric(1, 1.0, 1.0, 4));
    let sampler = IncrementSampler::new(md.noise(), fine_dt).expect("diagonal noise");
    let u0 = {
        let mut u = md.basis(0, &[1]).expect("mode on lattice");
        u.add_scaled(0.5, &md.basis(0, &[3]).expect("mode on lattice")).expect("same shape");
        u.scaled(1.0 / u.norm())
    };
    let unnormalized = |s: &SimState| s.pi.scaled(s.logr.exp());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err_sum = [0.0f64; LEVELS];
    let mut fine = NoiseIncrement::zeros(md.noise(), fine_dt);
    for _ in 0..paths {
        let incs: Vec<NoiseIncrement> = (0..fine_steps)
            .map(|_| {
                sampler.sample_into(&mut fine, &mut rng);
                fine.clone()
            })
            .collect();
        let mut finals = Vec::with_capacity(LEVELS + 1);
        for level in 0..=LEVELS {
            let group = 1usize << (LEVELS - level);
            let mut state = SimState::new(&u0).expect("unit field");
            let mut stepper = Stepper::new(&md).expect("model");
            for chunk in incs.chunks(group) {
                let mut coarse = chunk[0].clone();
                for extra in &chunk[1..] {
                    coarse.accumulate(extra).expect("same lattice");
                }
                stepper.step_with(&mut state, &coarse).expect("finite step");
            }
            finals.push(unnormalized(&state));
        }
        let reference = &finals[LEVELS];
        for level in 0..LEVELS {
            let mut diff = finals[level].clone();
            diff.add_scaled(-1.0, reference).expect("same shape");
            err_sum[level] += diff.norm();
        }
    }
    let dts: Vec<f64> = (0..LEVELS).map(|l| dt0 / (1 << l) as f64).collect();
    let errors: Vec<f64> = err_sum.iter().map(|e| e / paths as f64).collect();
    let slope = fit_slope(&dts.iter().map(|d| d.ln()).collect::<Vec<_>>(), &errors.iter().map(|e| e.ln()).collect::<Vec<_>>());
    let ok = slope >= 0.45;
    let check = CheckResult::new(
        "strong self-convergence slope",
        1,
        u64::from(!ok),
        slope,
        format!("slope {slope:.3} over dt {dts:?} (threshold 0.45)"),
    );
    (check, ConvergenceReport { dts, errors, slope })
}

/// Noise-free two-mode decay: from `(e₁ + e₃)/√2` the exponent over
/// `[10, 50]` is `-1` and `π_50` is aligned with `e₁`.
pub fn deterministic_decay() -> CheckResult {
    let dt = 1e-3;
    let md = model(1, vec![1.0], 1.0, 8, dt, NoiseSpec::zero(1, 8));
    let e1 = md.basis(0, &[1]).expect("mode on lattice");
    let mut u0 = e1.clone();
    u0.add_scaled(1.0, &md.basis(0, &[3]).expect("mode on lattice")).expect("same shape");
    let u0 = u0.scaled(1.0 / u0.norm());
    let mut state = SimState::new(&u0).expect("unit field");
    let mut stepper = Stepper::new(&md).expect("model");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let burn = (10.0 / dt).round() as u64;
    let total = (50.0 / dt).round() as u64;
    let mut logr_burn = 0.0;
    let mut t_burn = 0.0;
    for step in 1..=total {
        stepper.step(&mut state, &mut rng).expect("finite step");
        if step == burn {
            logr_burn = state.logr;
            t_burn = state.t;
        }
    }
    let lambda = (state.logr - logr_burn) / (state.t - t_burn);
    let align = state.pi.inner(&e1).expect("same shape").abs();
    let lambda_err = (lambda + 1.0).abs();
    let align_err = 1.0 - align;
    let bad = u64::from(!(lambda_err <= 1e-6)) + u64::from(!(align_err <= 1e-6));
    CheckResult::new(
        "deterministic two-mode decay",
        2,
        bad,
        lambda_err.max(align_err),
        format!("lambda {lambda:.9} (target -1), 1 - |<pi_T, e1>| = {align_err:.3e} (tolerance 1e-6)"),
    )
}

/// Random geometry: dimension, truncation radius, viscosities and exponent.
fn random_shells<R: Rng>(rng: &mut R) -> (Shells, Vec<f64>, f64) {
    let d = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=2usize);
    let radius = if d == 1 { rng.random_range(3..=14u32) } else { rng.random_range(2..=6u32) };
    let nu: Vec<f64> = (0..m).map(|_| rng.random_range(0.25..4.0)).collect();
    let a = rng.random_range(1.0..2.0);
    let lat = Arc::new(Lattice::new(d, radius).expect("valid radius"));
    (Shells::new(lat, &nu, a).expect("valid geometry"), nu, a)
}

fn nu_min(nu: &[f64]) -> f64 {
    nu.iter().copied().fold(f64::INFINITY, f64::min)
}

fn nu_max(nu: &[f64]) -> f64 {
    nu.iter().copied().fold(0.0, f64::max)
}

const REL: f64 = 1.0 + 1e-12;

/// Shift of the shifted seminorm between two levels with the constant
/// `2^{2γ}(ν_min^{-γ/a}+1)(ΔL)₋ + 2^{2γ-1}‖φ‖²_{γ,L⁻}` for `ΔL < 0`.
pub fn regularity_jump_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (s, nu, a) = random_shells(&mut rng);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let gamma = rng.random_range(0.5..2.0);
        let lm = rng.random_range(0..=10i64);
        let lp = rng.random_range(0..=10i64);
        let before = s.shifted_seminorm_sq(&phi, gamma, lm).expect("valid level");
        let after = s.shifted_seminorm_sq(&phi, gamma, lp).expect("valid level");
        let bound = if lp >= lm {
            before
        } else {
            let c = 2f64.powf(2.0 * gamma);
            c * (nu_min(&nu).powf(-gamma / a) + 1.0) * (lm - lp) as f64 + 0.5 * c * before
        };
        worst = worst.max(after / bound);
        if after > bound * REL {
            bad += 1;
        }
    }
    CheckResult::new("regularity jump bound (stated constant)", n as u64, bad, worst, format!("worst ratio lhs/rhs {worst:.3}"))
}

/// Same shift with the constant carrying `(ΔL)₋^{2γ}`.
pub fn regularity_jump_power_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (s, nu, a) = random_shells(&mut rng);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let gamma = rng.random_range(0.5..2.0);
        let lm = rng.random_range(0..=10i64);
        let lp = rng.random_range(0..=10i64);
        let before = s.shifted_seminorm_sq(&phi, gamma, lm).expect("valid level");
        let after = s.shifted_seminorm_sq(&phi, gamma, lp).expect("valid level");
        let bound = if lp >= lm {
            before
        } else {
            let c = 2f64.powf(2.0 * gamma);
            c * (nu_min(&nu).powf(-gamma / a) + 1.0) * ((lm - lp) as f64).powf(2.0 * gamma) + 0.5 * c * before
        };
        worst = worst.max(after / bound);
        if after > bound * REL {
            bad += 1;
        }
    }
    CheckResult::new("regularity jump bound (power constant)", n as u64, bad, worst, format!("worst ratio lhs/rhs {worst:.3}"))
}

/// `(M(Π^>_L φ) - L)^{1/2} ≤ 2 ν_max^{1/(4a)} ‖φ‖_{1/2,L}`.
pub fn median_jump_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut done) = (0, 0);
    let mut worst = 0.0f64;
    while done < n {
        let (s, nu, a) = random_shells(&mut rng);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let level = rng.random_range(0..=5i64);
        let high = s.project(&phi, BandSpec::new(level, Band::High)).expect("valid level");
        if !(high.norm() > 0.0) {
            continue;
        }
        done += 1;
        let m = s.energy_median(&high).expect("nonzero field") as f64;
        let lhs = (m - level as f64).max(0.0).sqrt();
        let rhs = 2.0 * nu_max(&nu).powf(1.0 / (4.0 * a)) * s.shifted_seminorm(&phi, 0.5, level).expect("valid level");
        worst = worst.max(lhs / rhs);
        if lhs > rhs * REL {
            bad += 1;
        }
    }
    CheckResult::new("median from regularity (stated)", n as u64, bad, worst, format!("worst ratio lhs/rhs {worst:.3e}"))
}

/// With `ψ = Π^>_L φ / ‖Π^>_L φ‖`: `M(ψ) - L ≤ 2 max(1, ν_max^{1/(2a)}) ‖ψ‖²_{1/2,L}`.
pub fn median_jump_normalized_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut done) = (0, 0);
    let mut worst = 0.0f64;
    while done < n {
        let (s, nu, a) = random_shells(&mut rng);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let level = rng.random_range(0..=5i64);
        let high = s.project(&phi, BandSpec::new(level, Band::High)).expect("valid level");
        if !(high.norm() > 0.0) {
            continue;
        }
        done += 1;
        let psi = high.scaled(1.0 / high.norm());
        let m = s.energy_median(&psi).expect("nonzero field") as f64;
        let c = 2.0 * nu_max(&nu).powf(1.0 / (2.0 * a)).max(1.0);
        let rhs = c * s.shifted_seminorm_sq(&psi, 0.5, level).expect("valid level");
        worst = worst.max((m - level as f64) / rhs);
        if m - level as f64 > rhs * REL {
            bad += 1;
        }
    }
    CheckResult::new("median from regularity (normalized)", n as u64, bad, worst, format!("worst ratio lhs/rhs {worst:.3}"))
}

/// `ρ^L_k ≤ c ρ^L_{k+l} ρ_l` with `c = 1`, over random `k, l ∈ Z^d`,
/// thresholds and `γ`.
pub fn weight_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let d = rng.random_range(1..=3usize);
        let k: Vec<i64> = (0..d).map(|_| rng.random_range(-30..=30)).collect();
        let l: Vec<i64> = (0..d).map(|_| rng.random_range(-30..=30)).collect();
        let norm = |v: &mut dyn Iterator<Item = i64>| v.map(|c| (c * c) as f64).sum::<f64>().sqrt();
        let kn = norm(&mut k.iter().copied());
        let ln = norm(&mut l.iter().copied());
        let kln = norm(&mut k.iter().zip(&l).map(|(a, b)| a + b));
        let nu = rng.random_range(0.25..4.0);
        let a = rng.random_range(1.0..2.0);
        let threshold = rng.random_range(0..=40u32) as f64 * f64::powf(nu, -1.0 / (2.0 * a));
        let gamma = rng.random_range(0.01..3.0);
        let lhs = shifted_weight(kn, threshold, gamma);
        let rhs = shifted_weight(kln, threshold, gamma) * sobolev_weight(ln, gamma);
        worst = worst.max(lhs / rhs);
        if lhs > rhs * REL {
            bad += 1;
        }
    }
    CheckResult::new("shifted weight submultiplicativity (c = 1)", n as u64, bad, worst, format!("worst ratio lhs/rhs {worst:.3}"))
}

/// Descent step for `|k| ≥ β²/(2ε)`: `|ℓ| ≤ β` and `|k+ℓ| ≤ |k| - β/√d + ε`.
pub fn geometry_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut done) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    while done < n {
        let d = rng.random_range(1..=3usize);
        let beta = rng.random_range(1..=6u32);
        let eps = rng.random_range(0.05..2.0);
        let r0 = descent_radius(beta, eps);
        let span = (r0.ceil() as i32) + 60;
        let k: Vec<i32> = (0..d).map(|_| rng.random_range(-span..=span)).collect();
        let kn = k.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        if kn < r0 || kn == 0.0 {
            continue;
        }
        done += 1;
        let dsc = descent_direction(&k, beta, eps).expect("nonzero mode");
        let ell = dsc.ell.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        worst = worst.max(dsc.shifted_norm - dsc.bound);
        if !(ell <= beta as f64 && dsc.satisfied) {
            bad += 1;
        }
    }
    CheckResult::new("descent step beyond radius", n as u64, bad, worst, format!("worst excess {worst:.3e}"))
}

/// The half-regularity identity, the `H^{1/2}` bound through `M + k₀` and the
/// two-sided bound on `log G`.
pub fn sandwich_suite(n: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (s, nu, a) = random_shells(&mut rng);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let p = LyapParams { kappa0: rng.random_range(0.2..4.0), k0: rng.random_range(1..=3), kappa: 0.5 };
        let level = rng.random_range(0..=8i64);
        let mut ok = true;

        // ‖φ‖²_{1/2,L} = ‖Π φ‖²_{H^{1/2}} - Σ_α L_α ‖Π φ^α‖² over |k| > L_α.
        let above = s.project(&phi, BandSpec::new(level, Band::Geq)).expect("valid level");
        let mut rhs = sobolev_norm_sq(&above, 0.5);
        for alpha in 0..nu.len() {
            let mass: f64 = above.component(alpha).iter().map(|c| c.norm_sqr()).sum();
            rhs -= s.threshold(alpha, level) * mass;
        }
        let lhs = s.shifted_seminorm_sq(&phi, 0.5, level).expect("valid level");
        let gap = (lhs - rhs).abs() / lhs.abs().max(1.0);
        ok &= gap <= 1e-12;
        worst = worst.max(gap);

        let h = sobolev_norm_sq(&phi, 0.5);
        let m = s.energy_median(&phi).expect("unit field") as f64;
        let semi = s.shifted_seminorm_sq(&phi, 0.5, m as i64 + p.k0 as i64).expect("valid level");
        let bound = 2.0 * nu_min(&nu).powf(-1.0 / (2.0 * a)) * (m + p.k0 as f64) + 1.0 + semi;
        ok &= h <= bound * REL;

        let c = SandwichConstants::new(&p, nu_min(&nu), nu_max(&nu), a);
        let g = log_g(&s, &phi, &p).expect("unit field");
        ok &= c.c1 < c.c2 && c.c1 * h <= g * REL && g <= c.c2 * h * REL;
        if !ok {
            bad += 1;
        }
    }
    CheckResult::new("half-regularity identity and sandwich", n as u64, bad, worst, format!("max identity defect {worst:.3e}"))
}

/// The five randomized inequality suites gated by the acceptance criterion.
pub fn inequality_suites(n: usize, seed: u64) -> Vec<CheckResult> {
    vec![
        regularity_jump_suite(n, seed),
        median_jump_suite(n, seed.wrapping_add(1)),
        weight_suite(n, seed.wrapping_add(2)),
        geometry_suite(n, seed.wrapping_add(3)),
        sandwich_suite(n, seed.wrapping_add(4)),
    ]
}

/// Variants with corrected constants; reported next to the gated suites.
pub fn corrected_suites(n: usize, seed: u64) -> Vec<CheckResult> {
    vec![regularity_jump_power_suite(n, seed), median_jump_normalized_suite(n, seed.wrapping_add(1))]
}

/// Everything `selftest` runs, in print order.
pub fn selftest(seed: u64) -> Vec<CheckResult> {
    let mut out = vec![
        deterministic_decay(),
        quartic_grid_oracle(100, seed),
        apply_noise_grid_oracle(20, seed.wrapping_add(1)),
        increment_covariance(100_000, seed.wrapping_add(2)),
        strong_convergence(200, seed.wrapping_add(3)).0,
    ];
    out.extend(inequality_suites(10_000, seed.wrapping_add(10)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| (3.0 * x.powf(0.5)).ln()).collect();
        assert!((fit_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_sampling_of_single_mode() {
        let lat = Lattice::new(1, 2).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); lat.len()];
        c[lat.index_of(&[1]).unwrap()] = Complex64::new(0.5, 0.0);
        c[lat.index_of(&[-1]).unwrap()] = Complex64::new(0.5, 0.0);
        let g = to_grid_1d(&lat, &c, 4);
        // cos(x) at 0, π/2, π, 3π/2.
        for (v, w) in g.iter().zip([1.0, 0.0, -1.0, 0.0]) {
            assert!((v - w).abs() < 1e-15);
        }
    }
}
