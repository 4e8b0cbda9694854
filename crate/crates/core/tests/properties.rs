mod common;

use common::{model, random_unit_field, shells};
use projflow_core::bands::{shifted_weight, sobolev_norm_sq, sobolev_weight};
use projflow_core::lyapunov::{log_f, log_g, LyapParams, SandwichConstants};
use projflow_core::median::marker;
use projflow_core::noise::{check_support_condition, descent_direction, descent_radius};
use projflow_core::projective::{fk_integrand, quartic_form};
use projflow_core::{Band, BandSpec, NoiseSpec, SimState, Stepper};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn geometry() -> impl Strategy<Value = (usize, u32, Vec<f64>, f64)> {
    (1usize..=2, 1usize..=2, 0.0f64..1.0).prop_flat_map(|(d, m, a_frac)| {
        let radius = if d == 1 { 3u32..=14 } else { 2u32..=6 };
        (Just(d), radius, prop::collection::vec(0.25f64..4.0, m), Just(1.0 + a_frac))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bands_partition_the_field((d, k, nu, a) in geometry(), level in 0i64..8, seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let low = s.project(&phi, BandSpec::new(level, Band::Low)).unwrap();
        let cen = s.project(&phi, BandSpec::new(level, Band::Central)).unwrap();
        let high = s.project(&phi, BandSpec::new(level, Band::High)).unwrap();
        for ((x, y), (z, w)) in low.coeffs().iter().zip(cen.coeffs()).zip(high.coeffs().iter().zip(phi.coeffs())) {
            // Disjoint supports make the sum exact.
            prop_assert_eq!(*x + *y + *z, *w);
        }
        let total = low.norm_sq() + cen.norm_sq() + high.norm_sq();
        prop_assert!((total - phi.norm_sq()).abs() <= 1e-12 * phi.norm_sq());
        let p = s.profile(&phi).unwrap();
        prop_assert!((p.low(level) - low.norm_sq()).abs() <= 1e-13);
        prop_assert!((p.high(level) - high.norm_sq()).abs() <= 1e-13);
        // Idempotence.
        prop_assert_eq!(s.project(&low, BandSpec::new(level, Band::Low)).unwrap(), low);
    }

    #[test]
    fn bands_nest((d, k, nu, a) in geometry(), level in 1i64..8, seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        prop_assert_eq!(
            s.project(&phi, BandSpec::new(level, Band::Leq)).unwrap(),
            s.project(&phi, BandSpec::new(level + 1, Band::Low)).unwrap()
        );
        prop_assert_eq!(
            s.project(&phi, BandSpec::new(level, Band::Geq)).unwrap(),
            s.project(&phi, BandSpec::new(level - 1, Band::High)).unwrap()
        );
    }

    #[test]
    fn half_seminorm_identity((d, k, nu, a) in geometry(), level in 0i64..8, seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 3.0, &mut rng);
        let geq = s.project(&phi, BandSpec::new(level, Band::Geq)).unwrap();
        let mut rhs = sobolev_norm_sq(&geq, 0.5);
        for alpha in 0..nu.len() {
            let part: f64 = geq.component(alpha).iter().map(|c| c.norm_sqr()).sum();
            rhs -= s.threshold(alpha, level) * part;
        }
        let lhs = s.shifted_seminorm_sq(&phi, 0.5, level).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn observables_are_antipodally_invariant((d, k, nu, a) in geometry(), seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let neg = phi.scaled(-1.0);
        let p = LyapParams::default();
        prop_assert_eq!(s.energy_median(&phi).unwrap(), s.energy_median(&neg).unwrap());
        prop_assert_eq!(log_g(&s, &phi, &p).unwrap(), log_g(&s, &neg, &p).unwrap());
        for level in 1..5 {
            prop_assert_eq!(marker(&s, level, &phi).unwrap(), marker(&s, level, &neg).unwrap());
        }
        prop_assert!(log_g(&s, &phi, &p).unwrap() >= p.kappa0);
    }

    #[test]
    fn fk_integrand_is_antipodally_invariant(seed: u64, c in 0.1f64..2.0, g0 in 0.6f64..3.0) {
        let md = model(1, vec![1.0], 1.0, 6, 1e-3, NoiseSpec::parametric(1, c, g0, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(md.lattice(), 1, 3.0, &mut rng);
        let a = fk_integrand(&phi, &md, 0.0).unwrap();
        let b = fk_integrand(&phi.scaled(-1.0), &md, 0.0).unwrap();
        prop_assert_eq!(a.integrand, b.integrand);
        prop_assert!(a.dissipation <= 0.0);
    }

    #[test]
    fn quartic_form_is_bounded_by_sup_norm(seed: u64, m in 1usize..=2, c in 0.1f64..2.0, g0 in 0.6f64..3.0, kn in 1u32..=6) {
        let md = model(1, vec![1.0; m], 1.0, 6, 1e-3, NoiseSpec::parametric(m, c, g0, kn));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(md.lattice(), m, 3.0, &mut rng);
        let q = quartic_form(&phi, md.noise()).unwrap();
        prop_assert!(q >= -1e-15, "{q}");
        prop_assert!(q <= md.tensors().sup_bound * (1.0 + 1e-12), "{q} > {}", md.tensors().sup_bound);
    }

    #[test]
    fn skeleton_functional_below_full_functional((d, k, nu, a) in geometry(), kappa in 0.0f64..=0.5, seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let p = LyapParams::default();
        let m = s.energy_median(&phi).unwrap();
        prop_assert!(log_f(&s, kappa, m, &phi, &p).unwrap() <= log_g(&s, &phi, &p).unwrap() + 1e-12);
    }

    #[test]
    fn full_functional_sandwich((d, k, nu, a) in geometry(), kappa0 in 0.2f64..4.0, k0 in 1u32..4, seed: u64) {
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let p = LyapParams { kappa0, k0, kappa: 0.5 };
        let nu_min = nu.iter().copied().fold(f64::INFINITY, f64::min);
        let nu_max = nu.iter().copied().fold(0.0, f64::max);
        let c = SandwichConstants::new(&p, nu_min, nu_max, a);
        let h = sobolev_norm_sq(&phi, 0.5);
        let g = log_g(&s, &phi, &p).unwrap();
        prop_assert!(c.c1 < c.c2);
        prop_assert!(c.c1 * h <= g * (1.0 + 1e-12), "lower: {} > {g}", c.c1 * h);
        prop_assert!(g <= c.c2 * h * (1.0 + 1e-12), "upper: {g} > {}", c.c2 * h);
    }

    #[test]
    fn regularity_jump_bound_with_power_constant(
        (d, k, nu, a) in geometry(), gamma in 0.5f64..2.0, lm in 0i64..10, dl in -8i64..=8, seed: u64
    ) {
        // For ΔL < 0 the constant term carries |ΔL|^{2γ}; for ΔL ≥ 0 the norm cannot grow.
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let lp = (lm + dl).max(0);
        let dl = lp - lm;
        let before = s.shifted_seminorm_sq(&phi, gamma, lm).unwrap();
        let after = s.shifted_seminorm_sq(&phi, gamma, lp).unwrap();
        if dl >= 0 {
            prop_assert!(after <= before * (1.0 + 1e-12));
        } else {
            let nu_min = nu.iter().copied().fold(f64::INFINITY, f64::min);
            let c = 2f64.powf(2.0 * gamma);
            let bound = c * (nu_min.powf(-gamma / a) + 1.0) * ((-dl) as f64).powf(2.0 * gamma) + 0.5 * c * before;
            prop_assert!(after <= bound * (1.0 + 1e-12), "{after} > {bound}");
        }
    }

    #[test]
    fn median_above_level_from_normalized_regularity((d, k, nu, a) in geometry(), level in 0i64..6, seed: u64) {
        // Normalizing Π^>_L φ makes more than half its mass sit at level ≥ M, which gives
        // M - L ≤ 2 max(1, ν_max^{1/(2a)}) ‖ψ‖²_{1/2,L}.
        let s = shells(d, k, &nu, a);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_unit_field(s.lattice(), nu.len(), 6.0, &mut rng);
        let high = s.project(&phi, BandSpec::new(level, Band::High)).unwrap();
        prop_assume!(high.norm() > 0.0);
        let psi = high.scaled(1.0 / high.norm());
        let m = s.energy_median(&psi).unwrap() as f64;
        let nu_max = nu.iter().copied().fold(0.0, f64::max);
        let c = 2.0 * nu_max.powf(1.0 / (2.0 * a)).max(1.0);
        let semi = s.shifted_seminorm_sq(&psi, 0.5, level).unwrap();
        prop_assert!(m - level as f64 <= c * semi * (1.0 + 1e-12), "{m} {level} {semi}");
    }

    #[test]
    fn support_condition_is_monotone(extra in prop::collection::vec(-6i32..=6, 0..4), base in prop::collection::vec(-6i32..=6, 1..4), b in 1.0f64..4.0) {
        let a: Vec<Vec<i32>> = base.iter().map(|&l| vec![l]).collect();
        let mut bigger = a.clone();
        bigger.extend(extra.iter().map(|&l| vec![l]));
        let small = check_support_condition(&a, 1, b, 1, 12).unwrap();
        let large = check_support_condition(&bigger, 1, b, 1, 12).unwrap();
        for (s, l) in small.iter().zip(&large) {
            prop_assert!(!s.pass || l.pass, "level {}", s.level);
        }
    }

    #[test]
    fn descent_bound_beyond_radius(k in prop::collection::vec(-60i32..=60, 1..=3), beta in 1u32..6, eps in 0.05f64..2.0) {
        let norm = k.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        prop_assume!(norm >= descent_radius(beta, eps));
        let dsc = descent_direction(&k, beta, eps).unwrap();
        let ell_norm = dsc.ell.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        prop_assert!(ell_norm <= beta as f64);
        prop_assert!(dsc.satisfied, "{k:?}");
    }

    #[test]
    fn steps_preserve_unit_norm_and_symmetry(seed: u64, m in 1usize..=2, c in 0.1f64..3.0) {
        let md = model(1, vec![0.5; m], 1.0, 6, 1e-2, NoiseSpec::parametric(m, c, 1.0, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0 = random_unit_field(md.lattice(), m, 2.0, &mut rng);
        let mut st = SimState::new(&u0).unwrap();
        let mut stepper = Stepper::new(&md).unwrap();
        let center = md.lattice().center();
        for _ in 0..50 {
            stepper.step(&mut st, &mut rng).unwrap();
            prop_assert!((st.pi.norm() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(st.pi.hermitian_defect(), 0.0);
            for alpha in 0..m {
                prop_assert_eq!(st.pi.get(alpha, center).im, 0.0);
            }
            prop_assert!(st.logr.is_finite());
        }
    }
}

#[test]
fn shifted_weight_is_submultiplicative() {
    // ρ^L_k ≤ ρ^L_{k+l} ρ_l with constant 1 ≤ 2^{2γ}, over a full 2D scan.
    let lat = projflow_core::Lattice::new(2, 7).unwrap();
    let thresholds: Vec<f64> = (0..=24).map(|i| 0.37 * i as f64).collect();
    for gamma in [0.0, 0.25, 0.5, 1.0, 1.7, 3.0] {
        let c = 2f64.powf(2.0 * gamma);
        for i in 0..lat.len() {
            let k = lat.mode(i);
            for j in 0..lat.len() {
                let l = lat.mode(j);
                let kl = [(k[0] + l[0]) as f64, (k[1] + l[1]) as f64];
                let kl_norm = (kl[0] * kl[0] + kl[1] * kl[1]).sqrt();
                for &thr in &thresholds {
                    let lhs = shifted_weight(lat.norm(i), thr, gamma);
                    let rhs = shifted_weight(kl_norm, thr, gamma) * sobolev_weight(lat.norm(j), gamma);
                    assert!(lhs <= rhs * (1.0 + 1e-12), "k={k:?} l={l:?} L={thr} γ={gamma}");
                    assert!(lhs <= c * rhs * (1.0 + 1e-12));
                }
            }
        }
    }
}

#[test]
fn trajectories_are_reproducible() {
    let md = model(1, vec![1.0], 1.0, 8, 1e-3, NoiseSpec::parametric(1, 1.0, 1.5, 4));
    let u0 = md.basis(0, &[3]).unwrap();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = SimState::new(&u0).unwrap();
        let mut stepper = Stepper::new(&md).unwrap();
        for _ in 0..500 {
            stepper.step(&mut st, &mut rng).unwrap();
        }
        st
    };
    assert_eq!(run(11), run(11));
    assert_ne!(run(11).pi, run(12).pi);
}
