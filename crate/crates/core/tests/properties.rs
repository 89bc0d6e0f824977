use gexp::coupling::simulate_couplings;
use gexp::gheat::{solve, DtPolicy, Grid1D, PdeKind};
use gexp::harnack::{harnack_exponent, holder_harnack_exponent, shift_harnack_exponent};
use gexp::simulate::simulate_ensemble;
use gexp::{make_scenario_lattice, Drift, GsdeSpec, McConfig, SdeKind, TestFunction, VolatilityBand};
use proptest::prelude::*;

fn band() -> impl Strategy<Value = VolatilityBand> {
    (0.2f64..1.5, 0.0f64..1.0).prop_map(|(lo, w)| VolatilityBand::new(lo, lo + w).unwrap())
}

fn payoff() -> impl Strategy<Value = TestFunction> {
    let n = TestFunction::catalog().len();
    (0..n).prop_map(|i| TestFunction::catalog().swap_remove(i))
}

fn drift() -> impl Strategy<Value = (Drift, f64)> {
    prop_oneof![
        Just((Drift::ou(), 1.0)),
        (0.2f64..2.0).prop_map(|k| (Drift::tanh(k), k)),
        (-1.0f64..1.0).prop_map(|c| (Drift::constant(c), 0.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn scenarios_respect_the_band(b in band(), t in 0.1f64..3.0, pieces in 1usize..4, levels in 1usize..4) {
        for s in make_scenario_lattice(&b, t, pieces, levels).unwrap() {
            let q = s.qv_grid(64);
            prop_assert_eq!(q[0], 0.0);
            let h = t / 64.0;
            for w in q.windows(2) {
                let dq = w[1] - w[0];
                prop_assert!(dq >= b.var_lo() * h * (1.0 - 1e-9) && dq <= b.var_hi() * h * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn stated_and_holder_exponents_differ_by_p_minus_one(
        p in 1.01f64..8.0, k in 0.01f64..3.0, b in band(), t in 0.05f64..5.0, d in 0.0f64..3.0,
    ) {
        let stated = harnack_exponent(p, k, &b, t, d).unwrap();
        let holder = holder_harnack_exponent(p, k, &b, t, d).unwrap();
        prop_assert!(stated >= 0.0);
        prop_assert!((holder - (p - 1.0) * stated).abs() <= 1e-12 * holder.abs().max(1.0));
        let farther = harnack_exponent(p, k, &b, t, d + 0.5).unwrap();
        prop_assert!(farther > stated);
    }

    #[test]
    fn shift_exponent_is_quadratic_in_the_shift(p in 1.01f64..8.0, k in 0.0f64..3.0, lo in 0.2f64..2.0, t in 0.05f64..5.0, v in -2.0f64..2.0) {
        let e1 = shift_harnack_exponent(p, k, lo, t, v).unwrap();
        let e2 = shift_harnack_exponent(p, k, lo, t, 2.0 * v).unwrap();
        prop_assert!((e2 - 4.0 * e1).abs() <= 1e-12 * e2.abs().max(1.0));
    }

    #[test]
    fn monte_carlo_estimator_is_sublinear(
        (d, k) in drift(), b in band(), f in payoff(), g in payoff(), lambda in 0.0f64..5.0, c in -3.0f64..3.0, seed in any::<u64>(),
    ) {
        let spec = GsdeSpec::new(d, k, SdeKind::QvDriven).unwrap();
        let scenarios = make_scenario_lattice(&b, 1.0, 2, 2).unwrap();
        let ens = simulate_ensemble(&spec, 0.1, &scenarios, &McConfig::new(64, 8, seed).unwrap()).unwrap();
        let e = |h: &TestFunction| ens.estimate(h).value;
        let tol = |v: f64| 1e-12 * v.abs().max(1.0);
        prop_assert!((e(&TestFunction::constant(c)) - c).abs() <= tol(c));
        let (ef, eg) = (e(&f), e(&g));
        prop_assert!((e(&f.scaled(lambda)) - lambda * ef).abs() <= tol(lambda * ef));
        prop_assert!(e(&f.plus(&g)) <= ef + eg + tol(ef + eg));
        prop_assert!(ef <= e(&f.plus(&g)));
    }

    #[test]
    fn coupling_lands_y_on_x(x in -1.0f64..1.0, gap in -1.0f64..1.0, b in band(), k in 0.3f64..2.0, seed in any::<u64>()) {
        let spec = GsdeSpec::new(Drift::tanh(k), k, SdeKind::QvDriven).unwrap();
        let scenario = make_scenario_lattice(&b, 1.0, 2, 2).unwrap().swap_remove(1);
        let mc = McConfig::new(16, 256, seed).unwrap();
        let runs = simulate_couplings(&spec, &b, x, &[x + gap], 1.0, &[scenario], &mc).unwrap();
        for path in &runs[0].paths {
            prop_assert!(path.tau_step.is_some());
            prop_assert_eq!(path.x_t, path.y_t);
            prop_assert!(path.log_m.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pde_preserves_order(b in band(), f in payoff(), shift in 0.0f64..1.0, t in 0.1f64..1.0, time_driven in any::<bool>()) {
        let grid = Grid1D::new(-8.0, 8.0, 161, DtPolicy::AutoCfl(0.9)).unwrap();
        let spec = GsdeSpec::new(Drift::tanh(1.0), 1.0, if time_driven { SdeKind::TimeDriven } else { SdeKind::QvDriven }).unwrap();
        let kind = PdeKind::from_spec(&spec);
        let lo = solve(&kind, &f, &b, t, &grid).unwrap();
        let hi = solve(&kind, &f.plus(&TestFunction::constant(shift)), &b, t, &grid).unwrap();
        for (u, v) in lo.values.iter().zip(&hi.values) {
            prop_assert!(u <= v);
            prop_assert!((v - u - shift).abs() <= 1e-9);
        }
        let heat = solve(&PdeKind::GHeat, &f, &b, t, &grid).unwrap();
        let (m, big) = (f.bound(), heat.values.iter().fold(f64::NEG_INFINITY, |a, &u| a.max(u)));
        prop_assert!(big <= m + 1e-12);
    }
}
