use std::f64::consts::PI;
use vbgk::diagnostics::{divergence_norm, norm_sq, ProbeSchedule};
use vbgk::reference_harness::{
    convergence_study, ns_reference_residual, taylor_green, StudyConfig, TaylorGreen, TABLE_COLUMNS,
};
use vbgk::solver::PlanOptions;
use vbgk::{Error, GridSpec, ModelParams};

fn slope(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).ln() / 2f64.ln()
}

#[test]
fn point_values() {
    let tg = TaylorGreen { nu: 0.01 };
    let (ux, uy) = tg.velocity(0.0, PI / 2.0, 0.0);
    assert!((ux - 1.0).abs() < 1e-15 && uy.abs() < 1e-15);
    let (ux, _) = tg.velocity(10.0, PI / 2.0, 0.0);
    assert!((ux - (-0.2f64).exp()).abs() < 1e-15);
    assert!((tg.pressure(0.0, 0.0, 0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn kinetic_energy_decays_at_four_nu() {
    let g = GridSpec::square(32).unwrap();
    let nu = 0.05;
    let energy = |t: f64| {
        let (u, _) = taylor_green(t, g, nu).unwrap();
        norm_sq(&g, &u.x) + norm_sq(&g, &u.y)
    };
    let e0 = energy(0.0);
    assert!((e0 - 2.0 * PI * PI).abs() < 1e-10);
    for t in [0.5, 2.0, 7.0] {
        assert!((energy(t) / e0 - (-4.0 * nu * t).exp()).abs() < 1e-13);
    }
}

#[test]
fn sampled_field_is_discretely_divergence_free() {
    for n in [16, 64, 128] {
        let (u, _) = taylor_green(0.5, GridSpec::square(n).unwrap(), 0.01).unwrap();
        assert!(divergence_norm(&u) <= 1e-12);
    }
}

#[test]
fn reference_residual_is_second_order() {
    let r: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| ns_reference_residual(GridSpec::square(n).unwrap(), 0.01, 0.5).unwrap())
        .collect();
    for pair in r.windows(2) {
        let s = slope(pair[0], pair[1]);
        assert!((s - 2.0).abs() <= 0.3, "slope {s} from {r:?}");
    }
}

#[test]
fn inviscid_reference_residual_cancels() {
    // Centred differences of the convective and pressure terms carry the same
    // sin(2 dx)/dx factor, so only the viscous term leaves a truncation error.
    for n in [32, 64, 128] {
        let r = ns_reference_residual(GridSpec::square(n).unwrap(), 0.0, 0.5).unwrap();
        assert!(r <= 1e-13, "{n}: {r:e}");
    }
}

#[test]
fn reference_residual_decays_with_the_solution() {
    let g = GridSpec::square(32).unwrap();
    let nu = 0.01;
    let r0 = ns_reference_residual(g, nu, 0.0).unwrap();
    for t in [0.5, 5.0, 50.0] {
        let r = ns_reference_residual(g, nu, t).unwrap();
        assert!(r <= r0 * (-2.0 * nu * t).exp() * (1.0 + 1e-12), "t = {t}: {r} vs {r0}");
    }
}

#[test]
fn bad_arguments_are_rejected() {
    let g = GridSpec::square(8).unwrap();
    assert!(matches!(taylor_green(-1.0, g, 0.01), Err(Error::Domain(_))));
    assert!(matches!(taylor_green(1.0, g, -0.01), Err(Error::Domain(_))));
}

fn study(eps_list: Vec<f64>, a: f64) -> StudyConfig {
    StudyConfig {
        base: ModelParams::from_a(eps_list.first().copied().unwrap_or(0.1), a, 30.0, 0.01, 1.0).unwrap(),
        grid: GridSpec::square(16).unwrap(),
        t_final: 0.02,
        eps_list,
        plan: PlanOptions::default(),
        schedule: ProbeSchedule::default(),
    }
}

#[test]
fn single_epsilon_gives_one_row() {
    let table = convergence_study(&study(vec![0.1], 0.1)).unwrap();
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];
    assert!(row.ok());
    assert_eq!(row.epsilon, 0.1);
    let u_norm = (2.0 * PI * PI).sqrt();
    assert!(row.velocity_error.is_finite() && row.velocity_error < 0.05 * u_norm, "{}", row.velocity_error);
    assert_eq!(row.series.records.len(), row.n_steps + 1);
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TABLE_COLUMNS.join(","));
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",ok"));
}

#[test]
fn rows_are_sorted_and_deduplicated() {
    let table = convergence_study(&study(vec![0.05, 0.2, 0.1, 0.2], 0.1)).unwrap();
    let eps: Vec<f64> = table.rows.iter().map(|r| r.epsilon).collect();
    assert_eq!(eps, [0.2, 0.1, 0.05]);
    assert_eq!(table.checks().len(), 2);
    assert!(table.summary().contains("velocity_error strictly decreasing"));
}

#[test]
fn invalid_studies_are_rejected() {
    assert!(matches!(convergence_study(&study(Vec::new(), 0.1)), Err(Error::Domain(_))));
    assert!(matches!(convergence_study(&study(vec![0.1], 0.3)), Err(Error::Domain(_))));
}
