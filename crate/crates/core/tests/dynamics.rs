mod common;

use common::model;
use projflow_core::integrator::{apply_noise, linear_decay};
use projflow_core::lyapunov::{
    estimate_lambda_direct, estimate_lambda_fk, first_dilution, instability_initial_data, log_g, LyapParams,
};
use projflow_core::median::{detect_stop, dissipation_diagnostic, stopping_time_stats, Event, SkeletonParams, StopKind};
use projflow_core::noise::sample_increments;
use projflow_core::{simulate, Error, Model, NoiseSpec, RunRecord, RunSpec, SimState, SpectralField, Stepper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn noise_free(k: u32, dt: f64) -> Model {
    model(1, vec![1.0], 1.0, k, dt, NoiseSpec::zero(1, k))
}

fn combo(md: &Model, parts: &[(i32, f64)]) -> SpectralField {
    let mut u = md.zero_field();
    for &(k, c) in parts {
        u.add_scaled(c, &md.basis(0, &[k]).unwrap()).unwrap();
    }
    u
}

fn trajectory(md: &Model, u0: &SpectralField, steps: usize, seed: u64) -> Vec<(f64, SpectralField)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SimState::new(u0).unwrap();
    let mut stepper = Stepper::new(md).unwrap();
    let mut out = vec![(0.0, st.pi.clone())];
    for _ in 0..steps {
        stepper.step(&mut st, &mut rng).unwrap();
        out.push((st.t, st.pi.clone()));
    }
    out
}

#[test]
fn log_radius_tracks_unnormalized_integration() {
    let md = model(1, vec![0.7], 1.0, 8, 1e-3, NoiseSpec::parametric(1, 1.5, 1.0, 4));
    let u0 = combo(&md, &[(0, 0.3), (2, 1.0), (5, -0.4)]);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut st = SimState::new(&u0).unwrap();
    let mut stepper = Stepper::new(&md).unwrap();
    let mut u = u0.clone();
    for _ in 0..2000 {
        let inc = sample_increments(md.noise(), 1e-3, &mut rng).unwrap();
        stepper.step_with(&mut st, &inc).unwrap();
        let mut next = u.clone();
        next.add_scaled(1.0, &apply_noise(&u, &inc).unwrap()).unwrap();
        u = linear_decay(&next, 1e-3, &md).unwrap();
        let ratio = u.norm() / u0.norm();
        assert!((st.logr.exp() - ratio).abs() <= 1e-8 * ratio, "t={} {} vs {}", st.t, st.logr.exp(), ratio);
    }
}

#[test]
fn single_step_log_radius_variance_is_bounded() {
    for (spec, start) in [(NoiseSpec::constant_mode(1, 0.8), 0), (NoiseSpec::parametric(1, 1.0, 1.0, 4), 3)] {
        let md = model(1, vec![1.0], 1.0, 8, 1e-3, spec);
        let bound = md.tensors().sup_bound * 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = SimState::new(&md.basis(0, &[start]).unwrap()).unwrap();
        let mut stepper = Stepper::new(&md).unwrap();
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let before = st.logr;
            stepper.step(&mut st, &mut rng).unwrap();
            let d = st.logr - before;
            s1 += d;
            s2 += d * d;
        }
        let var = s2 / n as f64 - (s1 / n as f64).powi(2);
        // Sampling error of a variance over 1e5 draws is about 0.5%.
        assert!(var <= bound * 1.05, "{var} > {bound}");
    }
}

#[test]
fn two_mode_decay_selects_slowest_mode() {
    let md = noise_free(8, 1e-3);
    let u0 = combo(&md, &[(1, 1.0), (3, 1.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let rec = simulate(&md, &u0, &RunSpec::new(50_000, 1000), &mut rng).unwrap();
    let est = estimate_lambda_direct(&[rec.clone()], 10.0, 50.0).unwrap();
    assert!((est.lambda + 1.0).abs() < 1e-6, "{}", est.lambda);
    let e1 = md.basis(0, &[1]).unwrap();
    assert!((rec.final_state.pi.inner(&e1).unwrap().abs() - 1.0).abs() < 1e-6);
}

#[test]
fn simulate_is_deterministic() {
    let md = model(1, vec![1.0], 1.0, 12, 1e-3, NoiseSpec::parametric(1, 1.0, 2.5, 4));
    let u0 = md.basis(0, &[6]).unwrap();
    let mut spec = RunSpec::new(3000, 50);
    spec.fk = true;
    spec.skeleton = Some(SkeletonParams::default());
    spec.lyap = Some(LyapParams::default());
    let run = |seed| simulate(&md, &u0, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(run(9), run(9));
}

#[test]
fn skeleton_invariants_hold_on_noisy_paths() {
    let md = model(1, vec![1.0], 1.0, 24, 1e-3, NoiseSpec::parametric(1, 1.0, 2.5, 4));
    let u0 = md.basis(0, &[12]).unwrap();
    let mut spec = RunSpec::new(20_000, 1000);
    spec.skeleton = Some(SkeletonParams::default());
    let mut all = Vec::new();
    for seed in 0..4 {
        let rec = simulate(&md, &u0, &spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let v = rec.violations.unwrap();
        assert_eq!(v.total(), 0, "{v:?}");
        assert!(rec.skeleton_aborted_at.is_none());
        for j in &rec.jumps {
            assert!(j.m_next + 1 >= j.m_start);
            assert!(j.m_next >= j.median_at_jump);
            assert!(j.t_next - j.t_start <= 3.0 + 1e-3 + 1e-9);
            if j.event == Event::A {
                assert_eq!(j.m_next + 1, j.m_start);
            }
        }
        all.extend(rec.jumps);
    }
    assert!(all.len() > 10);
    let summary = stopping_time_stats(&all).unwrap();
    assert!(summary.max_gap <= 3.0 + 1e-3);
    assert!(summary.index_distribution(5.0).iter().sum::<f64>() > 0.99);
}

#[test]
fn tau_fires_at_deterministic_decay_time() {
    let md = noise_free(10, 1e-3);
    let u0 = combo(&md, &[(1, 1.0), (8, 1.0)]);
    let path = trajectory(&md, &u0, 1500, 0);
    let out = detect_stop(
        md.shells(),
        StopKind::TauLess { level: 3, threshold: 0.5 },
        0.0,
        path.iter().map(|(t, u)| (*t, u)),
    )
    .unwrap();
    // w(t) = exp(-(ζ_8 - ζ_1) t).
    let expected = (1..).map(|n| n as f64 * 1e-3).find(|t| (-63.0 * t).exp() <= 0.5).unwrap();
    assert!(out.fired);
    assert!((out.time - expected).abs() < 1.5e-3, "{} vs {expected}", out.time);
}

#[test]
fn drift_diagnostic_matches_deterministic_and_constant_mode_dynamics() {
    let u0_parts = [(1, 1.0), (5, 0.5)];
    let free = noise_free(8, 1e-3);
    let path = trajectory(&free, &combo(&free, &u0_parts), 400, 0);
    let r = dissipation_diagnostic(&free, path.iter().map(|(t, u)| (*t, u)), 2, 2.0, 0.05).unwrap();
    let exact = ((-2.0f64 * 24.0 * 1e-3).exp() - 1.0) / 1e-3;
    assert!(r.intercept.abs() < 1e-9, "{}", r.intercept);
    assert!((r.slope - exact).abs() < 1e-6 * exact.abs());
    assert!(r.dissipation_dominates && r.within_envelope);

    // Noise at k = 0 rescales the whole field and leaves w untouched.
    let gbm = model(1, vec![1.0], 1.0, 8, 1e-3, NoiseSpec::constant_mode(1, 0.8));
    let path = trajectory(&gbm, &combo(&gbm, &u0_parts), 400, 3);
    let g = dissipation_diagnostic(&gbm, path.iter().map(|(t, u)| (*t, u)), 2, 2.0, 0.05).unwrap();
    assert!((g.slope - exact).abs() < 1e-6 * exact.abs());
    assert!(g.qv_rate < 1e-20);
    assert!(g.qv_rate * 1e-3 <= g.r_hat * 1e-3 * 1.05);

    let short = &path[..30];
    assert_eq!(
        dissipation_diagnostic(&gbm, short.iter().map(|(t, u)| (*t, u)), 2, 2.0, 0.05),
        Err(Error::SegmentTooShort { len: 29, min: 50 })
    );
}

fn fk_spec(steps: u64, stride: u64) -> RunSpec {
    let mut s = RunSpec::new(steps, stride);
    s.fk = true;
    s
}

#[test]
fn estimators_on_closed_form_runs() {
    let md = noise_free(6, 1e-3);
    let u0 = md.basis(0, &[3]).unwrap();
    let recs: Vec<RunRecord> = (0..3)
        .map(|s| simulate(&md, &u0, &fk_spec(5000, 100), &mut ChaCha8Rng::seed_from_u64(s)).unwrap())
        .collect();
    let d = estimate_lambda_direct(&recs, 1.0, 5.0).unwrap();
    assert!((d.lambda + 9.0).abs() < 1e-8 && d.stderr == 0.0);
    let f = estimate_lambda_fk(&recs, 1.0, 5.0, 10).unwrap();
    assert!((f.lambda + 9.0).abs() < 1e-8 && f.stderr < 1e-10);

    let gbm = model(1, vec![1.0], 1.0, 1, 1e-3, NoiseSpec::constant_mode(1, 0.8));
    let e0 = gbm.basis(0, &[0]).unwrap();
    let twin: Vec<RunRecord> =
        (0..2).map(|_| simulate(&gbm, &e0, &fk_spec(4000, 100), &mut ChaCha8Rng::seed_from_u64(4)).unwrap()).collect();
    assert!(twin[0].samples.iter().all(|s| (s.fk_integrand.unwrap() + 0.4).abs() < 1e-15));
    assert_eq!(estimate_lambda_direct(&twin, 0.0, 4.0).unwrap().stderr, 0.0);
    assert!((estimate_lambda_fk(&twin, 0.0, 4.0, 5).unwrap().lambda + 0.4).abs() < 1e-12);

    assert_eq!(
        estimate_lambda_direct(&twin, 2.0, 2.0),
        Err(Error::HorizonBeforeBurnIn { burn_in: 2.0, horizon: 2.0 })
    );
    assert!(matches!(estimate_lambda_direct(&twin, 0.0, 9.0), Err(Error::HorizonBeyondRecord { .. })));
}

#[test]
fn noise_free_dilution_follows_closed_form() {
    let md = noise_free(10, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    // Zero low band: the strict inequality can never hold.
    let u0 = instability_initial_data(&md, 6, 0.0).unwrap();
    assert_eq!(first_dilution(&md, 6, &u0, 3000, &mut rng).unwrap(), None);

    let eps = 0.01;
    let u0 = instability_initial_data(&md, 6, eps).unwrap();
    let hit = first_dilution(&md, 6, &u0, 3000, &mut rng).unwrap().unwrap();
    // Shells |k| = 6 and 5 each start with mass (1-ε)/2 and decay at rates 2·36 and 2·25.
    let diluted = |t: f64| {
        let central = 0.5 * (1.0 - eps) * ((-72.0 * t).exp() + (-50.0 * t).exp());
        central.sqrt() < 0.25 * eps.sqrt()
    };
    let expected = (0..).map(|n| n as f64 * 1e-3).find(|&t| diluted(t)).unwrap();
    assert!((hit - expected).abs() < 1e-9, "{hit} vs {expected}");
}

#[test]
fn noise_free_functional_trends() {
    let md = noise_free(16, 1e-3);
    let p = LyapParams::default();
    let e0 = md.basis(0, &[0]).unwrap();
    let path = trajectory(&md, &e0, 500, 0);
    assert_eq!(log_g(md.shells(), &path.last().unwrap().1, &p).unwrap(), 1.0);

    let u0 = combo(&md, &[(10, 1.0), (0, 0.05)]);
    let path = trajectory(&md, &u0, 2000, 0);
    let g0 = log_g(md.shells(), &path[0].1, &p).unwrap();
    let g1 = log_g(md.shells(), &path.last().unwrap().1, &p).unwrap();
    assert!(g1 < g0, "{g1} vs {g0}");
    assert_eq!(g1, 1.0);
}
