use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vbgk::diagnostics::{velocity_error, ProbeSchedule};
use vbgk::kinetic_core::{equilibrium_init, maxwellians, moments};
use vbgk::reference_harness::TaylorGreen;
use vbgk::solver::{
    plan_steps, plan_steps_with, relaxation_step, run, step, transport_step, PlanOptions, Relaxation, Splitting,
    TimeStepPlan,
};
use vbgk::{Error, Field32, Field64, GridSpec, KineticField, ModelParams, VectorField};

fn params(eps: f64) -> ModelParams {
    ModelParams::from_a(eps, 0.1, 30.0, 0.01, 1.0).unwrap()
}

fn taylor_green(eps: f64, n: usize) -> (ModelParams, Field64) {
    let p = params(eps);
    let g = GridSpec::square(n).unwrap();
    let (u0, _) = TaylorGreen { nu: p.nu() }.sample(0.0, g);
    (p, equilibrium_init(&u0, &p.cast::<f64>(), g).unwrap())
}

fn rest(p: &ModelParams, n: usize) -> Field64 {
    let g = GridSpec::square(n).unwrap();
    equilibrium_init(&VectorField::zeros(g), &p.cast::<f64>(), g).unwrap()
}

/// Rest equilibrium with a random non-equilibrium part that keeps `w` fixed.
fn perturbed(p: &ModelParams, n: usize, seed: u64) -> Field64 {
    let mut f = rest(p, n);
    let mut rng = StdRng::seed_from_u64(seed);
    for k in 0..f.grid.cells() {
        let mut cell = f.cell(k);
        for l in 0..4 {
            for c in 0..3 {
                let d = rng.gen_range(-0.02..0.02);
                cell[l][c] += d;
                cell[4][c] -= d;
            }
        }
        f.set_cell(k, &cell);
    }
    f
}

fn totals(f: &Field64) -> [f64; 3] {
    let w = f.moment_field().w;
    std::array::from_fn(|c| w[c].iter().sum())
}

#[test]
fn plan_examples() {
    let g = GridSpec::square(64).unwrap();
    let p = ModelParams::from_a(0.1, 0.1, 20.0, 0.01, 1.0).unwrap();
    let plan = plan_steps(1.0, &g, &p).unwrap();
    assert!((plan.dt - 0.1 * g.dx() / 20.0).abs() < 1e-18);
    assert!((plan.dt - 4.909e-4).abs() < 1e-7);
    assert_eq!(plan.n_steps, 2037);
    assert!((plan.t_final - 1.0).abs() < plan.dt);

    let half = plan_steps(1.0, &g, &p.with_epsilon(0.05).unwrap()).unwrap();
    assert!((half.dt - plan.dt / 2.0).abs() < 1e-18);
    assert_eq!(half.n_steps, 2 * plan.n_steps);

    assert_eq!(plan_steps(0.1 * plan.dt, &g, &p).unwrap().n_steps, 1);
    assert!(matches!(plan_steps(0.0, &g, &p), Err(Error::Domain(_))));
    let opts = PlanOptions { shift_cells: 3, ..PlanOptions::default() };
    assert!((plan_steps_with(1.0, &g, &p, &opts).unwrap().dt - 3.0 * plan.dt).abs() < 1e-18);
}

#[test]
fn marked_cells_move_one_cell_and_wrap() {
    let p = params(0.1);
    let n = 8;
    let g = GridSpec::square(n).unwrap();
    let mut f = Field64::zeros(g);
    for l in 0..5 {
        f.plane_mut(l, 0)[g.index(n - 1, n - 1)] = 1.0 + l as f64;
        f.plane_mut(l, 0)[g.index(0, 0)] = -1.0 - l as f64;
    }
    let dt = p.epsilon() * g.dx() / p.lambda();
    transport_step(&mut f, dt, &p).unwrap();
    let at = |f: &Field64, l: usize, i: usize, j: usize| f.plane(l, 0)[g.index(i, j)];
    assert_eq!(at(&f, 0, 0, n - 1), 1.0);
    assert_eq!(at(&f, 0, 1, 0), -1.0);
    assert_eq!(at(&f, 1, n - 1, 0), 2.0);
    assert_eq!(at(&f, 1, 0, 1), -2.0);
    assert_eq!(at(&f, 2, n - 2, n - 1), 3.0);
    assert_eq!(at(&f, 2, n - 1, 0), -3.0);
    assert_eq!(at(&f, 3, n - 1, n - 2), 4.0);
    assert_eq!(at(&f, 3, 0, n - 1), -4.0);
    assert_eq!(at(&f, 4, n - 1, n - 1), 5.0);
    assert_eq!(at(&f, 4, 0, 0), -5.0);
    assert_eq!(f.data.iter().filter(|v| **v != 0.0).count(), 10);
}

#[test]
fn full_period_restores_the_field() {
    let p = params(0.1);
    let f0 = perturbed(&p, 16, 3);
    let mut f = f0.clone();
    let dt = p.epsilon() * f.grid.dx() / p.lambda();
    for _ in 0..16 {
        transport_step(&mut f, dt, &p).unwrap();
        assert_eq!(f.plane(4, 0), f0.plane(4, 0));
        assert_eq!(f.plane(4, 2), f0.plane(4, 2));
    }
    assert_eq!(f.data, f0.data);
}

#[test]
fn transport_permutes_each_plane() {
    let p = params(0.1);
    let f0 = perturbed(&p, 8, 5);
    let mut f = f0.clone();
    let dt = 3.0 * p.epsilon() * f.grid.dx() / p.lambda();
    transport_step(&mut f, dt, &p).unwrap();
    for plane in 0..15 {
        let sorted = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            s
        };
        let (l, c) = (plane / 3, plane % 3);
        assert_eq!(sorted(f.plane(l, c)), sorted(f0.plane(l, c)));
    }
}

#[test]
fn misaligned_transport_is_rejected() {
    let p = params(0.1);
    let mut f = rest(&p, 8);
    let dt = 0.5 * p.epsilon() * f.grid.dx() / p.lambda();
    assert!(matches!(transport_step(&mut f, dt, &p), Err(Error::Alignment(_))));
    let mut g = Field64::zeros(GridSpec::new(8, 4).unwrap());
    assert!(matches!(transport_step(&mut g, 0.0, &p), Err(Error::Alignment(_))));
    assert!(matches!(plan_steps(1.0, &GridSpec::new(8, 4).unwrap(), &p), Err(Error::Alignment(_))));
}

#[test]
fn zero_dt_is_the_identity() {
    let p = params(0.1);
    let f0 = perturbed(&p, 8, 9);
    let mut f = f0.clone();
    transport_step(&mut f, 0.0, &p).unwrap();
    assert_eq!(f.data, f0.data);
    relaxation_step(&mut f, 0.0, &p).unwrap();
    for (x, y) in f.data.iter().zip(&f0.data) {
        assert!((x - y).abs() <= 1e-15, "{x} vs {y}");
    }
}

#[test]
fn relaxation_halves_the_gap_at_ln2() {
    let p = params(0.1);
    let mut f = rest(&p, 4);
    let k = 5;
    let mut cell = f.cell(k);
    cell[0][0] += 0.2;
    cell[4][0] -= 0.2;
    f.set_cell(k, &cell);
    relaxation_step(&mut f, 2f64.ln() * p.relaxation_time(), &p).unwrap();
    let cell = f.cell(k);
    let m = maxwellians(&moments(&cell), &p.cast::<f64>()).unwrap();
    let gap: Vec<f64> = (0..3).map(|c| cell[0][c] - m[0][c]).collect();
    assert!((gap[0] - 0.1).abs() < 1e-14, "{gap:?}");
    assert!(gap[1].abs() < 1e-15 && gap[2].abs() < 1e-15);
}

#[test]
fn relaxation_contracts_every_cell_by_the_exponential() {
    let p = params(0.1);
    let f0 = perturbed(&p, 8, 13);
    let dt = 0.3 * p.relaxation_time();
    let mut f = f0.clone();
    relaxation_step(&mut f, dt, &p).unwrap();
    let c = p.cast::<f64>();
    for k in 0..f.grid.cells() {
        let gap = |cell: [[f64; 3]; 5]| {
            let m = maxwellians(&moments(&cell), &c).unwrap();
            (0..5).flat_map(|l| (0..3).map(move |i| (l, i))).map(|(l, i)| (cell[l][i] - m[l][i]).powi(2)).sum::<f64>().sqrt()
        };
        let ratio = gap(f.cell(k)) / gap(f0.cell(k));
        assert!((ratio - (-0.3f64).exp()).abs() < 1e-12, "cell {k}: {ratio}");
    }
}

#[test]
fn steps_conserve_totals() {
    let p = params(0.1);
    let mut f = perturbed(&p, 16, 17);
    let t0 = totals(&f);
    for relaxation in [Relaxation::Exact, Relaxation::Trapezoidal] {
        for splitting in [Splitting::Strang, Splitting::Lie] {
            let opts = PlanOptions { relaxation, splitting, ..PlanOptions::default() };
            let plan = plan_steps_with(1.0, &f.grid, &p, &opts).unwrap();
            for k in 0..20 {
                step(&mut f, &plan, &p, k).unwrap();
            }
            let t = totals(&f);
            for c in 0..3 {
                assert!((t[c] - t0[c]).abs() <= 1e-13 * t0[0], "{relaxation} {splitting}: {t:?} vs {t0:?}");
            }
        }
    }
}

#[test]
fn rest_equilibrium_is_a_fixed_point() {
    let p = params(0.1);
    let f0 = rest(&p, 8);
    for relaxation in [Relaxation::Exact, Relaxation::Trapezoidal] {
        let opts = PlanOptions { relaxation, ..PlanOptions::default() };
        let plan = plan_steps_with(1.0, &f0.grid, &p, &opts).unwrap();
        let mut f = f0.clone();
        for k in 0..100 {
            step(&mut f, &plan, &p, k).unwrap();
        }
        let err = f.data.iter().zip(&f0.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-14, "{relaxation}: {err:e}");
    }
}

#[test]
fn uniform_flow_equilibrium_is_a_fixed_point() {
    let p = params(0.1);
    let g = GridSpec::square(8).unwrap();
    let u = VectorField::from_fn(g, |_, _| (0.3, -0.2));
    let f0 = equilibrium_init(&u, &p.cast::<f64>(), g).unwrap();
    let plan = plan_steps(1.0, &g, &p).unwrap();
    let mut f = f0.clone();
    for k in 0..100 {
        step(&mut f, &plan, &p, k).unwrap();
    }
    let err = f.data.iter().zip(&f0.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-14, "{err:e}");
}

fn mirror(f: &Field64) -> Field64 {
    let g = f.grid;
    let mut out = Field64::zeros(g);
    let swap_l = [1, 0, 3, 2, 4];
    let swap_c = [0, 2, 1];
    for l in 0..5 {
        for c in 0..3 {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    out.plane_mut(swap_l[l], swap_c[c])[g.index(j, i)] = f.plane(l, c)[g.index(i, j)];
                }
            }
        }
    }
    out
}

#[test]
fn mirror_symmetry_is_bitwise() {
    let p = params(0.1);
    let g = GridSpec::square(16).unwrap();
    let h = |x: f64, y: f64| 0.5 * x.sin() * (2.0 * y).cos() + 0.2 * y.cos();
    let u = VectorField::from_fn(g, |x, y| (h(x, y), h(y, x)));
    let f0 = equilibrium_init(&u, &p.cast::<f64>(), g).unwrap();
    assert_eq!(mirror(&f0).data, f0.data);
    for relaxation in [Relaxation::Exact, Relaxation::Trapezoidal] {
        let opts = PlanOptions { relaxation, ..PlanOptions::default() };
        let plan = plan_steps_with(1.0, &g, &p, &opts).unwrap();
        let mut f = f0.clone();
        for k in 0..40 {
            step(&mut f, &plan, &p, k).unwrap();
        }
        assert_eq!(mirror(&f).data, f.data, "{relaxation}");
    }
}

#[test]
fn lie_and_strang_agree_to_first_order() {
    let (p, f0) = taylor_green(0.1, 64);
    let schedule = ProbeSchedule { interval: 1000, energy_order: 0, residuals: false };
    let mut finals = Vec::new();
    let mut dt = 0.0;
    for splitting in [Splitting::Strang, Splitting::Lie] {
        let opts = PlanOptions { splitting, ..PlanOptions::default() };
        let plan = plan_steps_with(0.1, &f0.grid, &p, &opts).unwrap();
        dt = plan.dt;
        let out = run(f0.clone(), &plan, &p, schedule).unwrap();
        finals.push(out.field.moment_field().hydro(&p.cast::<f64>()).unwrap().u);
    }
    let diff = velocity_error(&finals[0], &finals[1]) / f0.grid.area().sqrt();
    assert!(diff < 10.0 * dt, "{diff:e} vs dt {dt:e}");
}

#[test]
fn probing_every_step_records_every_state() {
    let (p, f0) = taylor_green(0.1, 8);
    let dt = p.epsilon() * f0.grid.dx() / p.lambda();
    let plan = plan_steps(10.0 * dt, &f0.grid, &p).unwrap();
    assert_eq!(plan.n_steps, 10);
    let out = run(f0, &plan, &p, ProbeSchedule::default()).unwrap();
    assert_eq!(out.series.records.len(), 11);
    assert_eq!(out.series.records[0].t, 0.0);
    assert_eq!(out.series.records[10].step, 10);
    // Residuals need both neighbours and a completed startup step.
    let with: Vec<usize> = out.series.records.iter().filter(|r| r.residual.is_some()).map(|r| r.step).collect();
    assert_eq!(with, (2..10).collect::<Vec<_>>());
}

#[test]
fn probe_interval_keeps_the_final_step() {
    let (p, f0) = taylor_green(0.1, 8);
    let dt = p.epsilon() * f0.grid.dx() / p.lambda();
    let plan = plan_steps(10.0 * dt, &f0.grid, &p).unwrap();
    let out = run(f0, &plan, &p, ProbeSchedule { interval: 4, ..ProbeSchedule::default() }).unwrap();
    let steps: Vec<usize> = out.series.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, [0, 4, 8, 10]);
}

#[test]
fn zero_step_plan_returns_the_initial_field() {
    let (p, f0) = taylor_green(0.1, 8);
    let mut plan = plan_steps(1.0, &f0.grid, &p).unwrap();
    plan.n_steps = 0;
    plan.t_final = 0.0;
    let out = run(f0.clone(), &plan, &p, ProbeSchedule::default()).unwrap();
    assert_eq!(out.field.data, f0.data);
    assert_eq!(out.series.records.len(), 1);
}

#[test]
fn runs_are_deterministic() {
    let (p, f0) = taylor_green(0.1, 16);
    let plan = plan_steps(0.05, &f0.grid, &p).unwrap();
    let go = || {
        let out = run(f0.clone(), &plan, &p, ProbeSchedule::default()).unwrap();
        let mut csv = Vec::new();
        out.series.write_csv(&mut csv).unwrap();
        (out.field.data, csv)
    };
    let (a, ca) = go();
    let (b, cb) = go();
    assert_eq!(a, b);
    assert_eq!(ca, cb);
}

#[test]
fn collapse_aborts_with_the_last_good_state() {
    let p = params(0.1);
    let mut f0 = rest(&p, 8);
    // A density deficit carried by f1 reaches its neighbour after one shift.
    let (k, next) = (f0.grid.index(3, 3), f0.grid.index(4, 3));
    f0.plane_mut(0, 0)[k] -= 0.7;
    f0.plane_mut(4, 0)[k] += 0.7;
    f0.plane_mut(4, 0)[next] -= 0.7;
    f0.plane_mut(0, 0)[next] += 0.7;
    let plan: TimeStepPlan = plan_steps(1.0, &f0.grid, &p).unwrap();
    let failure = run(f0.clone(), &plan, &p, ProbeSchedule::default()).unwrap_err();
    assert!(matches!(failure.error, Error::DensityCollapse { cell: Some(_), .. }), "{}", failure);
    assert_eq!(failure.step, 0);
    assert_eq!(failure.last_good.data, f0.data);
    assert_eq!(failure.series.records.len(), 1);
}

#[test]
fn single_precision_fields_run() {
    let p = params(0.1);
    let g = GridSpec::square(8).unwrap();
    let f0: Field32 = equilibrium_init(&VectorField::zeros(g), &p.cast::<f32>(), g).unwrap();
    let plan = plan_steps(1.0, &g, &p).unwrap();
    let mut f: KineticField<f32> = f0.clone();
    for k in 0..20 {
        step(&mut f, &plan, &p, k).unwrap();
    }
    let err = f.data.iter().zip(&f0.data).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(err <= 1e-6, "{err:e}");
}
