use clockstat::ldp;
use clockstat::linalg::{self, ComplexMatrix, C64};
use clockstat::lindblad::{self, build_two_level_model, LindbladModel, TwoLevelParams};
use clockstat::qjmc::{self, InitialState, Simulator, Trajectory};
use clockstat::wtd::{self, WtdProfile};
use proptest::prelude::*;

fn tla(omega: f64, gamma: f64) -> LindbladModel {
    build_two_level_model(&TwoLevelParams::ideal(omega, gamma).unwrap()).unwrap()
}

fn complex_matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        ComplexMatrix::new(
            n,
            n,
            v.into_iter().map(|(re, im)| C64::new(re, im)).collect(),
        )
        .unwrap()
    })
}

fn density_matrix() -> impl Strategy<Value = ComplexMatrix> {
    complex_matrix(2).prop_map(|a| {
        let p = &a * &a.adjoint();
        let tr = p.trace().re;
        p.scale_real(1.0 / tr)
    })
}

/// Largest real root of 2λ³ + 3γλ² + (γ² + 8Ω²)λ + 4γΩ²(1 − e^{−s}),
/// by Newton from an upper bound on the roots.
fn cubic_oracle(omega: f64, gamma: f64, s: f64) -> f64 {
    let (a, b, c, d) = (
        2.0,
        3.0 * gamma,
        gamma * gamma + 8.0 * omega * omega,
        4.0 * gamma * omega * omega * (1.0 - (-s).exp()),
    );
    let mut x = 1.0 + (b.abs() + c.abs() + d.abs()) / a;
    for _ in 0..200 {
        let f = ((a * x + b) * x + c) * x + d;
        let df = (3.0 * a * x + 2.0 * b) * x + c;
        let step = f / df;
        x -= step;
        if step.abs() < 1e-16 * x.abs().max(1e-300) {
            break;
        }
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_spectrum_is_real(a in complex_matrix(4)) {
        let h = &a + &a.adjoint();
        for z in linalg::eigenvalues(&h).unwrap() {
            prop_assert!(z.im.abs() < 1e-10 * h.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn eigenvalues_sum_to_trace(a in complex_matrix(5)) {
        let sum: C64 = linalg::eigenvalues(&a).unwrap().iter().sum();
        prop_assert!((sum - a.trace()).norm() < 1e-10 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn leading_pair_is_in_spectrum(a in complex_matrix(4)) {
        let vals = linalg::eigenvalues(&a).unwrap();
        if let Ok(p) = linalg::max_real_eigenpair(&a) {
            let best = vals.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((p.value.re - best).abs() < 1e-9 * a.frobenius_norm().max(1.0));
            prop_assert!(linalg::residual(&a, p.value, &p.right) < 1e-9 * a.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn expm_halving_matches_full_step(a in complex_matrix(3), t in 0.1f64..3.0) {
        let m = a.scale_real(t);
        let full = linalg::expm(&m).unwrap();
        let half = linalg::expm(&m.scale_real(0.5)).unwrap();
        let sq = &half * &half;
        prop_assert!((&full - &sq).frobenius_norm() < 1e-11 * full.frobenius_norm().max(1.0));
    }

    #[test]
    fn liouvillian_preserves_trace_and_hermiticity(
        rho in density_matrix(), omega in 0.0f64..6.0, gamma in 0.1f64..20.0, eta in 0.05f64..1.0,
    ) {
        let m = build_two_level_model(&TwoLevelParams::new(omega, gamma, eta).unwrap()).unwrap();
        let l = lindblad::liouvillian(&m);
        let d = lindblad::devectorize(&l.mul_vec(&lindblad::vectorize(&rho)), 2);
        let scale = l.frobenius_norm();
        prop_assert!(d.trace().norm() < 1e-12 * scale);
        prop_assert!((&d - &d.adjoint()).frobenius_norm() < 1e-12 * scale);
    }

    #[test]
    fn theta_matches_cubic_root(omega in 0.3f64..6.0, gamma in 0.5f64..20.0, s in -0.5f64..0.5) {
        let spectral = ldp::theta(&tla(omega, gamma), s).unwrap();
        let oracle = cubic_oracle(omega, gamma, s);
        prop_assert!((spectral - oracle).abs() <= 1e-9 * oracle.abs().max(1e-3), "{spectral} vs {oracle}");
    }

    #[test]
    fn closed_form_matches_spectral(omega in 0.3f64..6.0, gamma in 0.5f64..20.0, s in -0.3f64..0.3) {
        prop_assume!(s.abs() > 1e-3);
        let spectral = ldp::theta(&tla(omega, gamma), s).unwrap();
        let closed = ldp::theta_closed_form_tla(omega, gamma, s).unwrap();
        prop_assert!((spectral - closed).abs() <= 1e-8 * spectral.abs());
    }

    #[test]
    fn theta_is_convex_and_vanishes_at_zero(omega in 0.3f64..6.0, gamma in 0.5f64..20.0, s in 0.01f64..0.5) {
        let m = tla(omega, gamma);
        let (a, z, b) = (ldp::theta(&m, -s).unwrap(), ldp::theta(&m, 0.0).unwrap(), ldp::theta(&m, s).unwrap());
        prop_assert!(z.abs() < 1e-9);
        prop_assert!(a + b - 2.0 * z >= -1e-12);
        // θ decreasing: more tilt, fewer clicks
        prop_assert!(a > z && z > b);
    }

    #[test]
    fn wtd_is_nonnegative(omega in 0.01f64..10.0, gamma in 0.01f64..40.0, t in 0.0f64..200.0) {
        let w = wtd::wtd_pdf(omega, gamma, t).unwrap();
        prop_assert!(w >= 0.0 && w.is_finite());
    }

    #[test]
    fn wtd_branches_are_continuous(omega in 0.2f64..6.0, t in 0.0f64..20.0, eps in 1e-9f64..1e-6) {
        let g0 = 4.0 * omega;
        let above = wtd::wtd_pdf(omega, g0 * (1.0 + eps), t).unwrap();
        let below = wtd::wtd_pdf(omega, g0 * (1.0 - eps), t).unwrap();
        // compare K² so the γ prefactor and envelope drop out
        let k2 = |g: f64, w: f64| w / (g * omega * omega * (-g * t / 2.0).exp());
        let (ka, kb) = (k2(g0 * (1.0 + eps), above), k2(g0 * (1.0 - eps), below));
        if t > 0.0 {
            prop_assert!((ka - kb).abs() <= 1e-9 * ka.abs().max(kb.abs()) + 20.0 * eps * g0 * g0 * t.powi(4));
        }
    }

    #[test]
    fn post_jump_state_is_ground(omega in 0.5f64..6.0, gamma in 0.5f64..20.0, seed in any::<u64>()) {
        let sim = Simulator::new(&tla(omega, gamma)).unwrap();
        let mut jumps = 0usize;
        let mut worst: f64 = 0.0;
        sim.run_observed(20.0, seed, 0, &InitialState::default(), &mut |_, psi| {
            jumps += 1;
            worst = worst.max(psi[1].norm()).max((psi[0].norm() - 1.0).abs());
        }).unwrap();
        prop_assert!(worst < 1e-12, "{jumps} jumps, deviation {worst}");
    }

    #[test]
    fn clock_readout_is_monotone(times in prop::collection::vec(0.0f64..100.0, 0..50), rate in 0.1f64..10.0) {
        let mut click_times = times;
        click_times.sort_by(f64::total_cmp);
        click_times.dedup();
        let tr = Trajectory { click_times, t_max: 100.0, seed: 0, index: 0, model_id: None };
        let grid: Vec<f64> = (0..=100).map(f64::from).collect();
        let series = qjmc::clock_readout(&tr, rate, &grid).unwrap();
        prop_assert!(series.tau.windows(2).all(|w| w[1] >= w[0]));
        for (t, tau) in grid.iter().zip(&series.tau) {
            prop_assert_eq!(*tau, tr.count_until(*t) as f64 / rate);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn wtd_renewal_identities(omega in 0.5f64..6.0, gamma in 1.0f64..20.0) {
        let p = WtdProfile::build(omega, gamma).unwrap();
        let c = ldp::counting_cumulants(&tla(omega, gamma)).unwrap();
        prop_assert!((p.normalization - 1.0).abs() <= 1e-6);
        prop_assert!((p.mean * c.rate - 1.0).abs() <= 1e-6);
        let fano_renewal = p.variance / (p.mean * p.mean);
        prop_assert!((c.fano - fano_renewal).abs() <= 1e-4, "{} vs {}", c.fano, fano_renewal);
    }
}
