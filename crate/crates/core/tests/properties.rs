mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use modalreg::exosystem::{ExoSpace, ExoState};
use modalreg::regulator::{
    check_assumption2, disturbance_transfer, forcing_column, residual_first_equation, residual_second_equation, transfer_function,
};
use modalreg::scenarios::{build_random_scenario, build_scenario, CustomSpectrum, RandomBounds, ScenarioKind};
use modalreg::simulator::{error_formula_check, simulate_closed_loop};
use modalreg::spectral::{
    classify_decay, decay_envelope, fit_decay_rate, log_grid, resolvent_apply, semigroup_apply, DecayClass, DiagonalGenerator, ModeRange,
};
use modalreg::sylvester::{check_b_regularity, conformity_diagnostic, lemma_identity_check, quadrature_pi_column, ColumnOperator, ConformityVerdict, QuadratureSpec};
use modalreg::{ScenarioConfig, SpectralVector};
use num_complex::Complex64;
use proptest::prelude::*;

use common::solve;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
}

fn stable_spectrum(max_modes: i64) -> impl Strategy<Value = DiagonalGenerator> {
    (1..=max_modes).prop_flat_map(|n| {
        let len = (2 * n + 1) as usize;
        prop::collection::vec((0.01..3.0f64, -20.0..20.0f64), len).prop_map(move |mus| {
            DiagonalGenerator::new(ModeRange::symmetric(n).unwrap(), mus.into_iter().map(|(a, w)| c(-a, w)).collect()).unwrap()
        })
    })
}

fn vector_for(gen: &DiagonalGenerator, raw: &[Complex64]) -> SpectralVector {
    SpectralVector::from_fn(gen.modes().clone(), |n| raw[gen.modes().position(n).unwrap() % raw.len()])
}

fn states(s: &modalreg::Scenario, raw: &[Complex64]) -> ExoState {
    ExoState::from_fn(Arc::clone(&s.space), |k| raw[(k + 50) as usize % raw.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_law(gen in stable_spectrum(8), raw in prop::collection::vec(complex(), 1..8), s in 0.0..20.0f64, t in 0.0..20.0f64) {
        let v = vector_for(&gen, &raw);
        let once = semigroup_apply(&gen, s + t, &v).unwrap();
        let twice = semigroup_apply(&gen, s, &semigroup_apply(&gen, t, &v).unwrap()).unwrap();
        prop_assert!(once.distance(&twice).unwrap() <= 1e-13 * (1.0 + v.norm()));
    }

    #[test]
    fn resolvent_identity(gen in stable_spectrum(8), raw in prop::collection::vec(complex(), 1..8), lre in 0.0..2.0f64, lim in -30.0..30.0f64) {
        let v = vector_for(&gen, &raw);
        let lambda = c(lre, lim);
        let r = resolvent_apply(&gen, lambda, &v).unwrap();
        for ((mu, x), y) in gen.eigenvalues().iter().zip(r.vector.coeffs()).zip(v.coeffs()) {
            prop_assert!(((lambda - mu) * x - y).norm() <= 1e-13 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn envelope_without_weight_is_non_increasing(gen in stable_spectrum(10)) {
        let grid = log_grid(1e-2, 1e3, 128).unwrap();
        let env = decay_envelope(&gen, 0.0, &grid).unwrap();
        let a = -gen.spectral_abscissa();
        prop_assert!(env.values.windows(2).all(|w| w[1] <= w[0]));
        for (t, v) in grid.iter().zip(&env.values) {
            prop_assert!(*v <= (-a * t).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exact_power_law_fit(exponent in 0.1..4.0f64, prefactor in 1e-3..1e3f64) {
        let grid = log_grid(1.0, 1e3, 64).unwrap();
        let env: Vec<f64> = grid.iter().map(|t| prefactor * t.powf(-exponent)).collect();
        let fit = fit_decay_rate(&env, &grid, (1.0, 1e3)).unwrap();
        prop_assert!((fit.exponent - exponent).abs() <= 1e-9);
    }

    #[test]
    fn exponentially_stable_envelope_is_superpolynomial(a in 0.05..1.0f64, n in 2i64..30) {
        let gen = DiagonalGenerator::from_fn(ModeRange::symmetric(n).unwrap(), |k| c(-a - 0.01 * k.abs() as f64, k as f64)).unwrap();
        let grid = log_grid(1e-1, 1e3, 256).unwrap();
        let env = decay_envelope(&gen, 0.0, &grid).unwrap();
        let class = classify_decay(&env.values, &grid, (1.0, 1e3)).unwrap();
        prop_assert!(matches!(class, DecayClass::Superpolynomial { .. }), "{:?}", class);
    }

    #[test]
    fn synthesized_signals_are_periodic(period in 0.5..10.0f64, raw in prop::collection::vec(complex(), 11), t in -50.0..50.0f64) {
        let space = Arc::new(ExoSpace::with_power_weights(period, ModeRange::symmetric(5).unwrap(), 2.0).unwrap());
        let w = ExoState::new(space, raw).unwrap();
        prop_assert!((w.synthesize_signal(t + period) - w.synthesize_signal(t)).norm() <= 1e-12 * w.l1_norm().max(1e-300) * (1.0 + t.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn regulator_equations_hold(seed in any::<u64>()) {
        let s = build_random_scenario(seed, &RandomBounds::default()).unwrap();
        let (gain, pi) = solve(&s);
        prop_assert!(residual_first_equation(&pi, &s.gen, &s.coupling, &gain, &s.space).unwrap() <= 1e-10);
        prop_assert!(residual_second_equation(&pi, &s.coupling, &s.space).unwrap() <= 1e-10);
        for (k, ell) in gain.iter() {
            let h = transfer_function(&s.gen, &s.coupling, c(0.0, s.space.omega(k))).unwrap().value;
            let hd = disturbance_transfer(&s.gen, &s.coupling, &s.space, k).unwrap();
            prop_assert!((h * ell + hd - 1.0).norm() <= 1e-12);
            let col = resolvent_apply(&s.gen, c(0.0, s.space.omega(k)), &forcing_column(&s.coupling, &gain, k).unwrap()).unwrap().vector;
            prop_assert_eq!(pi.column(k).unwrap(), col);
        }
    }

    #[test]
    fn integral_identity_on_random_scenarios(seed in any::<u64>(), raw in prop::collection::vec(complex(), 1..9), t in 0.0..200.0f64) {
        let s = build_random_scenario(seed, &RandomBounds::default()).unwrap();
        let (gain, pi) = solve(&s);
        let delta = ColumnOperator::forcing(&s.coupling, &gain).unwrap();
        let w = states(&s, &raw);
        prop_assert!(lemma_identity_check(&s.gen, &delta, &pi, &w, &[0.0, t]).unwrap() <= 1e-8);
    }

    #[test]
    fn error_formula_and_asymptotic_periodicity(seed in any::<u64>(), zraw in prop::collection::vec(complex(), 1..9), wraw in prop::collection::vec(complex(), 1..9)) {
        let s = build_random_scenario(seed, &RandomBounds::default()).unwrap();
        let (gain, pi) = solve(&s);
        let w0 = states(&s, &wraw);
        let z0 = vector_for(&s.gen, &zraw);
        let grid = log_grid(1e-2, 1e2, 64).unwrap();
        let res = simulate_closed_loop(&s.gen, &s.coupling, &gain, &z0, &w0, &grid).unwrap();
        prop_assert!(error_formula_check(&res, &pi, &s.gen, &s.coupling).unwrap() <= 1e-9);
        let offset = z0.distance(&pi.apply(&w0).unwrap()).unwrap();
        let env = decay_envelope(&s.gen, 0.0, &grid).unwrap();
        let scale = z0.norm() + pi.apply(&w0).unwrap().norm();
        for (dev, bound) in res.state_dev.iter().zip(&env.values) {
            prop_assert!(*dev <= bound * offset + 1e-12 * (1.0 + scale));
        }
    }

    #[test]
    fn on_manifold_error_is_bounded_by_the_output_defect(seed in any::<u64>(), wraw in prop::collection::vec(complex(), 1..9)) {
        let s = build_random_scenario(seed, &RandomBounds::default()).unwrap();
        let (gain, pi) = solve(&s);
        let w0 = states(&s, &wraw);
        let z0 = pi.apply(&w0).unwrap();
        let grid = log_grid(1e-2, 1e3, 64).unwrap();
        let res = simulate_closed_loop(&s.gen, &s.coupling, &gain, &z0, &w0, &grid).unwrap();
        let defect = residual_second_equation(&pi, &s.coupling, &s.space).unwrap();
        let sup = res.sup_error_on(0.0, f64::INFINITY);
        // rounding in z(t) enters at the level of unit roundoff times the state size
        prop_assert!(sup <= 10.0 * defect * w0.l1_norm() + 1e-13 * (1.0 + z0.norm()) * w0.l1_norm().max(1.0), "{} {}", sup, defect);
    }

    #[test]
    fn superposition(seed in any::<u64>(), a in prop::collection::vec(complex(), 1..9), b in prop::collection::vec(complex(), 1..9), wraw in prop::collection::vec(complex(), 1..9)) {
        let s = build_random_scenario(seed, &RandomBounds::default()).unwrap();
        let (gain, _) = solve(&s);
        let w0 = states(&s, &wraw);
        let zero_w = ExoState::zeros(Arc::clone(&s.space));
        let za = vector_for(&s.gen, &a);
        let zb = vector_for(&s.gen, &b);
        let sum = SpectralVector::new(s.gen.modes().clone(), za.coeffs().iter().zip(zb.coeffs()).map(|(x, y)| x + y).collect()).unwrap();
        let grid = log_grid(1e-2, 1e2, 32).unwrap();
        let both = simulate_closed_loop(&s.gen, &s.coupling, &gain, &sum, &w0, &grid).unwrap();
        let first = simulate_closed_loop(&s.gen, &s.coupling, &gain, &za, &w0, &grid).unwrap();
        let free = simulate_closed_loop(&s.gen, &s.coupling, &gain, &zb, &zero_w, &grid).unwrap();
        for i in 0..grid.len() {
            let lhs = &both.z[i];
            let scale = 1.0 + lhs.norm();
            for ((x, y), z) in lhs.coeffs().iter().zip(first.z[i].coeffs()).zip(free.z[i].coeffs()) {
                prop_assert!((x - y - z).norm() <= 1e-13 * scale);
            }
            prop_assert!((both.e[i] - first.e[i] - free.y[i]).norm() <= 1e-13 * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regular_input_makes_rank_one_forcing_conform(
        power in 0.5..2.0f64,
        step in 0.5..3.0f64,
        q in 1.0..5.0f64,
        gamma in 1.0..3.0f64,
        eps in 0.1..0.5f64,
    ) {
        let cfg = ScenarioConfig {
            kind: ScenarioKind::Custom,
            n_plant: 60,
            n_exo: 40,
            gamma,
            custom: CustomSpectrum { floor: 0.0, scale: 1.0, power, step, coupling_power: q },
            ..ScenarioConfig::diagonal()
        };
        let s = build_scenario(&cfg).unwrap();
        let alpha = s.nominal_alpha.unwrap();
        let (gain, _) = solve(&s);
        let regular = check_b_regularity(&s.gen, s.coupling.b(), &[alpha + eps]).unwrap()[0].passes();
        let a2 = check_assumption2(&gain, &s.space).unwrap().passes();
        prop_assume!(regular && a2);
        let b = s.coupling.b();
        let delta = ColumnOperator::from_fn(Arc::clone(&s.space), s.gen.modes().clone(), |n, k| b.get(n).unwrap() * gain.gain(k).unwrap());
        let rep = conformity_diagnostic(&s.gen, &delta, &s.space, alpha, eps, &QuadratureSpec::default()).unwrap();
        prop_assert_eq!(rep.verdict, ConformityVerdict::ConformTrend);
    }

    #[test]
    fn exponentially_stable_tails_decay_geometrically(a in 0.05..1.0f64, n in 1i64..20, raw in prop::collection::vec(complex(), 1..8), omega in -10.0..10.0f64) {
        let gen = DiagonalGenerator::from_fn(ModeRange::symmetric(n).unwrap(), |k| c(-a - 0.02 * k.abs() as f64, PI * k as f64)).unwrap();
        let d = vector_for(&gen, &raw);
        prop_assume!(!d.is_zero());
        let (_, rep) = quadrature_pi_column(&gen, &d, omega, &QuadratureSpec::default()).unwrap();
        prop_assert!(rep.tails_strictly_decreasing());
        for w in rep.tail_norms.windows(2) {
            let (t0, v0) = w[0];
            let (t1, v1) = w[1];
            // each increment carries the factor e^{-a T}
            prop_assert!(v1 <= v0 * (-a * (t1 - t0)).exp() * 4.0 || v1 == 0.0, "{:?}", rep.tail_norms);
        }
    }
}
