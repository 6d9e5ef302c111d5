use proptest::prelude::*;
use vbgk::kinetic_core::{equilibrium_init, flux_a1, flux_a2, hydrodynamics, maxwellians, moments, KineticVector};
use vbgk::reference_harness::TaylorGreen;
use vbgk::scalar::ratio;
use vbgk::{Error, Exact, GridSpec, ModelParams, VectorField};

fn params(eps: f64, a: f64, lambda: f64) -> ModelParams {
    ModelParams::from_a(eps, a, lambda, 0.01, 1.0).unwrap()
}

#[test]
fn rest_state_has_no_flux() {
    assert_eq!(flux_a1(&[1.3, 0.0, 0.0], &1.3).unwrap(), [0.0; 3]);
    assert_eq!(flux_a2(&[1.3, 0.0, 0.0], &1.3).unwrap(), [0.0; 3]);
}

#[test]
fn flux_examples() {
    let a: [f64; 3] = flux_a1(&[1.0, 0.1, 0.2], &1.0).unwrap();
    for (x, y) in a.iter().zip([0.1, 0.01, 0.02]) {
        assert!((x - y).abs() < 1e-16);
    }
    assert_eq!(flux_a1(&[1.5, 0.0, 0.0], &1.0).unwrap(), [0.0, 0.5, 0.0]);
    assert_eq!(flux_a2(&[1.5, 0.0, 0.0], &1.0).unwrap(), [0.0, 0.0, 0.5]);
}

#[test]
fn rest_maxwellians() {
    let p = params(0.1, 0.1, 2.0).cast::<f64>();
    let m = maxwellians(&[1.0, 0.0, 0.0], &p).unwrap();
    for l in 0..4 {
        assert!((m[l][0] - 0.1).abs() < 1e-16 && m[l][1] == 0.0 && m[l][2] == 0.0);
    }
    assert!((m[4][0] - 0.6).abs() < 1e-15);
}

#[test]
fn maxwellian_example() {
    let p = params(0.1, 0.1, 2.0).cast::<f64>();
    let m = maxwellians(&[1.0, 0.1, 0.2], &p).unwrap();
    for (x, y) in m[0].iter().zip([0.125, 0.0125, 0.025]) {
        assert!((x - y).abs() < 1e-15, "{:?}", m[0]);
    }
}

#[test]
fn moment_examples() {
    let zero: KineticVector<f64> = [[0.0; 3]; 5];
    assert_eq!(moments(&zero), [0.0; 3]);
    let mut one = zero;
    one[0] = [1.0, 0.0, 0.0];
    assert_eq!(moments(&one), [1.0, 0.0, 0.0]);
}

#[test]
fn hydrodynamics_examples() {
    for eps in [0.5, 0.1, 0.01] {
        let p = params(eps, 0.1, 30.0).cast::<f64>();
        let h = hydrodynamics(&[1.0, eps * 0.3, 0.0], &p).unwrap();
        assert!((h.u[0] - 0.3).abs() < 1e-15 && h.u[1] == 0.0 && h.p_est == 0.0);
        let h = hydrodynamics(&[1.0 + eps * eps, 0.0, 0.0], &p).unwrap();
        assert!((h.p_est - 1.0).abs() < 1e-12);
    }
}

#[test]
fn density_collapse_is_reported() {
    let p = params(0.1, 0.1, 30.0).cast::<f64>();
    for w in [[0.4, 0.0, 0.0], [0.5, 0.0, 0.0]] {
        assert!(matches!(hydrodynamics(&w, &p), Err(Error::DensityCollapse { .. })));
        assert!(matches!(maxwellians(&w, &p), Err(Error::DensityCollapse { .. })));
    }
    let g = GridSpec::square(4).unwrap();
    let mut u = VectorField::<f64>::zeros(g);
    u.x[5] = 1.0;
    let bad = ModelParams::from_a(0.1, 0.1, 30.0, 0.01, 1.0).unwrap();
    assert!(equilibrium_init(&u, &bad.cast::<f64>(), g).is_ok());
    let mut f = equilibrium_init(&u, &bad.cast::<f64>(), g).unwrap();
    f.plane_mut(4, 0)[6] = -1.0;
    match f.moment_field().hydro(&bad.cast::<f64>()) {
        Err(Error::DensityCollapse { cell, .. }) => assert_eq!(cell, Some((2, 1))),
        other => panic!("expected collapse, got {other:?}"),
    }
}

#[test]
fn taylor_green_round_trip() {
    let g = GridSpec::square(32).unwrap();
    for eps in [0.2, 0.05] {
        let p = params(eps, 0.1, 30.0);
        let (u0, _) = TaylorGreen { nu: p.nu() }.sample(0.0, g);
        let f = equilibrium_init(&u0, &p.cast::<f64>(), g).unwrap();
        let h = f.moment_field().hydro(&p.cast::<f64>()).unwrap();
        for k in 0..g.cells() {
            for (got, want) in [(h.u.x[k], u0.x[k]), (h.u.y[k], u0.y[k])] {
                assert!((got - want).abs() <= 1e-13 * want.abs().max(1.0), "{got} vs {want}");
            }
            assert!((h.rho[k] - 1.0).abs() < 1e-14);
        }
    }
}

#[test]
fn grid_rules() {
    assert!(GridSpec::new(0, 4).is_err());
    let g = GridSpec::new(8, 4).unwrap();
    assert_eq!(g.cells(), 32);
    assert_eq!(g.index(3, 2), 19);
    let (x, y) = g.center(0, 0);
    assert!((x - std::f64::consts::PI / 8.0).abs() < 1e-15);
    assert!((y - std::f64::consts::PI / 4.0).abs() < 1e-15);
    assert!((g.area() - 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
}

fn moment_vec() -> impl Strategy<Value = [f64; 3]> {
    (0.6f64..3.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(r, a, b)| [r, a, b])
}

fn kinetic_params() -> impl Strategy<Value = ModelParams> {
    (1e-3f64..1.0, 1e-3f64..0.249, 1.0f64..100.0).prop_map(|(e, a, l)| params(e, a, l))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn moments_of_maxwellians_recover_w(w in moment_vec(), p in kinetic_params()) {
        let m = maxwellians(&w, &p.cast::<f64>()).unwrap();
        let back = moments(&m);
        let scale = 1.0 + (w[1].abs() + w[2].abs()).powi(2) / p.lambda();
        for c in 0..3 {
            prop_assert!((back[c] - w[c]).abs() <= 1e-14 * scale.max(w[0]), "{:?} vs {:?}", back, w);
        }
    }

    #[test]
    fn flux_consistency(w in moment_vec(), p in kinetic_params()) {
        let c = p.cast::<f64>();
        let m = maxwellians(&w, &c).unwrap();
        let a1 = flux_a1(&w, &1.0).unwrap();
        let a2 = flux_a2(&w, &1.0).unwrap();
        for k in 0..3 {
            let tol = 1e-14 * (p.lambda() * (m[0][k].abs() + m[2][k].abs())).max(1.0);
            prop_assert!((p.lambda() * (m[0][k] - m[2][k]) - a1[k]).abs() <= tol);
            let tol = 1e-14 * (p.lambda() * (m[1][k].abs() + m[3][k].abs())).max(1.0);
            prop_assert!((p.lambda() * (m[1][k] - m[3][k]) - a2[k]).abs() <= tol);
        }
        prop_assert_eq!(a1[0], w[1]);
        prop_assert_eq!(a2[0], w[2]);
    }

    #[test]
    fn pressure_enters_only_the_diagonal(w in moment_vec(), rho_bar in 0.5f64..1.5) {
        prop_assume!(w[0] > rho_bar / 2.0);
        let with = flux_a1(&w, &rho_bar).unwrap();
        let without = flux_a1(&w, &w[0]).unwrap();
        prop_assert_eq!(with[0], without[0]);
        prop_assert_eq!(with[2], without[2]);
        prop_assert!((with[1] - without[1] - (w[0] - rho_bar)).abs() < 1e-14);
        let with = flux_a2(&w, &rho_bar).unwrap();
        let without = flux_a2(&w, &w[0]).unwrap();
        prop_assert_eq!(with[0], without[0]);
        prop_assert_eq!(with[1], without[1]);
        prop_assert!((with[2] - without[2] - (w[0] - rho_bar)).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exact_maxwellians_are_consistent(
        r in 60i64..300, q1 in -100i64..100, q2 in -100i64..100,
        a in 1i64..24, lambda in 1i64..100, eps in 1i64..100,
    ) {
        let w: [Exact; 3] = [ratio(r, 100), ratio(q1, 100), ratio(q2, 100)];
        let p = params(eps as f64 / 100.0, a as f64 / 100.0, lambda as f64);
        let mut c = p.cast::<Exact>();
        c.a = ratio(a, 100);
        c.lambda = ratio(lambda, 1);
        let m = maxwellians(&w, &c).unwrap();
        prop_assert_eq!(moments(&m), w.clone());
        let a1 = flux_a1(&w, &ratio(1, 1)).unwrap();
        let a2 = flux_a2(&w, &ratio(1, 1)).unwrap();
        for k in 0..3 {
            prop_assert_eq!(c.lambda.clone() * (m[0][k].clone() - m[2][k].clone()), a1[k].clone());
            prop_assert_eq!(c.lambda.clone() * (m[1][k].clone() - m[3][k].clone()), a2[k].clone());
        }
    }
}
