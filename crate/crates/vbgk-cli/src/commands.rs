//! The four subcommands. Each returns `Ok(true)` when every check it runs
//! passes, `Ok(false)` when a check fails, and `Err` on usage or I/O errors.

use crate::config::RunConfig;
use crate::output::{write_snapshot, OutputDir};
use anyhow::{anyhow, Context, Result};
use std::fmt::Write as _;
use vbgk::diagnostics::gronwall_monitor;
use vbgk::kinetic_core::equilibrium_init;
use vbgk::model_params::{find_stability_constants, select_constants, validate, verify_constants};
use vbgk::reference_harness::{convergence_study, StudyConfig, TaylorGreen};
use vbgk::solver::{plan_steps_with, run_with};
use vbgk::structural_matrices::{certify_definiteness, certify_symmetrizer};
use vbgk::{CertificationReport, Exact, ModelParams, StructuralMatrices};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn manifest(cfg: &RunConfig, command: &str, derived: &[(&str, String)]) -> String {
    let mut s = format!("# vbgk {VERSION} {command} manifest; the key = value lines reproduce the command\n");
    s.push_str(&cfg.to_text());
    for (k, v) in derived {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// Float and exact identities plus definiteness under the selected constants.
pub fn certification(params: &ModelParams) -> Result<CertificationReport> {
    let m = StructuralMatrices::<f64>::build(params)?;
    let mut report = certify_symmetrizer(&m);
    let exact = StructuralMatrices::<Exact>::build(params)?;
    let mut exact_report = certify_symmetrizer(&exact);
    for c in &mut exact_report.checks {
        c.name = format!("exact_{}", c.name);
    }
    report.merge(exact_report);
    let search = find_stability_constants(params.a(), params.lambda())?;
    let worst = search.lambda_checks.iter().map(|c| c.bound / c.value - 1.0).fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(vbgk::structural_matrices::CertCheck {
        name: "lambda_bounds".into(),
        residual: worst,
        threshold: 0.0,
        pass: search.feasible(),
    });
    report.merge(certify_definiteness(&m, &search.constants));
    Ok(report)
}

fn certification_summary(params: &ModelParams) -> String {
    match certification(params) {
        Ok(r) => {
            let failed = r.checks.iter().filter(|c| !c.pass).count();
            if failed == 0 {
                format!("pass ({} checks)", r.checks.len())
            } else {
                format!("FAIL ({failed} of {} checks)", r.checks.len())
            }
        }
        Err(e) => format!("not available: {e}"),
    }
}

pub fn cmd_run(cfg: &RunConfig) -> Result<bool> {
    let params = cfg.params()?;
    let grid = cfg.grid.ok_or_else(|| anyhow!("grid is required"))?;
    let t = cfg.t_final.ok_or_else(|| anyhow!("T is required"))?;
    let strict = validate(&params, true);
    if !validate(&params, false).passed() {
        return Err(anyhow!("parameters fail the structural condition:\n{strict}"));
    }
    let plan = plan_steps_with(t, &grid, &params, &cfg.plan)?;
    let out = OutputDir::claim(&cfg.out)?;

    let (u0, _) = TaylorGreen { nu: params.nu() }.sample(0.0, grid);
    let init = equilibrium_init(&u0, &params.cast::<f64>(), grid)?;
    let every = cfg.snapshot_interval;
    let mut io_error = None;
    let result = run_with(init, &plan, &params, cfg.schedule, |step, t, field| {
        if every > 0 && step % every == 0 && step < plan.n_steps {
            if let Err(e) = write_snapshot(&out, &format!("snapshots/step_{step:08}"), field, &params, step, t) {
                let msg = e.to_string();
                io_error = Some(e);
                return Err(vbgk::Error::Resource(msg));
            }
        }
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }

    let mut derived = vec![
        ("version", VERSION.to_string()),
        ("a", format!("{:e}", params.a())),
        ("tau", format!("{:e}", params.tau())),
        ("dt", format!("{:e}", plan.dt)),
        ("n_steps", plan.n_steps.to_string()),
        ("t_final", format!("{:e}", plan.t_final)),
        ("dx", format!("{:e}", grid.dx())),
        ("initial", "taylor_green".to_string()),
        ("strict_validation", if strict.passed() { "pass".into() } else { "FAIL".into() }),
        ("certification", certification_summary(&params)),
    ];
    let (series, ok) = match result {
        Ok(outcome) => {
            write_snapshot(&out, "final", &outcome.field, &params, plan.n_steps, plan.t_final)?;
            derived.push(("status", "completed".into()));
            (outcome.series, true)
        }
        Err(fail) => {
            write_snapshot(&out, "abort_last_good", &fail.last_good, &params, fail.step, fail.t)?;
            eprintln!("{fail}");
            derived.push(("status", format!("aborted: {fail}")));
            (fail.series, false)
        }
    };
    series.write_csv(out.create("diagnostics.csv")?)?;
    let mut summary = String::new();
    match gronwall_monitor(&series) {
        Ok(g) => {
            let _ = writeln!(summary, "gronwall_c = {:e}\ngronwall_degenerate = {}\nlhs_final = {:e}\nintegral_energy = {:e}\nintegral_dissipation = {:e}\nmin_energy_component = {:e}\nmin_dissipation = {:e}", g.c, g.degenerate, g.lhs_final, g.integral_e, g.integral_d, g.min_component, g.min_dissipation);
        }
        Err(e) => {
            let _ = writeln!(summary, "# gronwall monitor unavailable: {e}");
        }
    }
    if let Some(rms) = series.residual_rms() {
        let _ = writeln!(summary, "mass_residual_rms = {:e}\nmomentum_residual_rms = {:e}", rms.mass, rms.momentum);
    }
    out.write_text("summary.txt", &summary)?;
    out.write_text("manifest.txt", &manifest(cfg, "run", &derived))?;
    print!("{summary}");
    Ok(ok)
}

fn eps_label(e: f64) -> String {
    format!("{e}").replace('.', "p")
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<bool> {
    let first = *cfg.eps_list.first().ok_or_else(|| anyhow!("eps_list is empty"))?;
    let study = StudyConfig {
        base: cfg.params_at(first)?,
        grid: cfg.grid.ok_or_else(|| anyhow!("grid is required"))?,
        t_final: cfg.t_final.ok_or_else(|| anyhow!("T is required"))?,
        eps_list: cfg.eps_list.clone(),
        plan: cfg.plan,
        schedule: cfg.schedule,
    };
    let out = OutputDir::claim(&cfg.out)?;
    let table = convergence_study(&study)?;
    table.write_csv(out.create("convergence.csv")?)?;
    for r in &table.rows {
        r.series.write_csv(out.create(&format!("series_eps_{}.csv", eps_label(r.epsilon)))?)?;
    }
    let summary = table.summary();
    out.write_text("convergence_summary.txt", &summary)?;
    let ok = table.passed() && table.rows.iter().all(|r| r.ok());
    let derived = vec![
        ("version", VERSION.to_string()),
        ("a", format!("{:e}", study.base.a())),
        ("tau", format!("{:e}", study.base.tau())),
        ("initial", "taylor_green".to_string()),
        ("status", if ok { "pass".into() } else { "FAIL".into() }),
    ];
    out.write_text("manifest.txt", &manifest(cfg, "convergence", &derived))?;
    print!("{summary}");
    Ok(ok)
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<bool> {
    let params = cfg.params()?;
    let out = OutputDir::claim(&cfg.out)?;
    let (text, kv, ok) = match certification(&params) {
        Ok(r) => {
            let mut text = r.to_string();
            if let Ok(search) = find_stability_constants(params.a(), params.lambda()) {
                text.push_str("\nstability constants\n");
                text.push_str(&search.to_string());
            }
            (text, r.to_kv(), r.passed())
        }
        Err(e) => (format!("certification failed: {e}\noverall: FAIL\n"), format!("build = inf 0 false\n# {e}\n"), false),
    };
    out.write_text("certification.txt", &text)?;
    out.write_text("certification.kv", &kv)?;
    let derived = vec![
        ("version", VERSION.to_string()),
        ("a", format!("{:e}", params.a())),
        ("status", if ok { "pass".into() } else { "FAIL".into() }),
    ];
    out.write_text("manifest.txt", &manifest(cfg, "certify", &derived))?;
    print!("{text}");
    Ok(ok)
}

/// Prints the constant tuple for `(a, lambda)` and re-verifies it.
pub fn cmd_constants(a: f64, lambda: f64, tau: Option<f64>) -> Result<bool> {
    if let Some(t) = tau {
        println!("tau = {t:e}");
    }
    println!("a = {a}\nlambda = {lambda}");
    let search = match find_stability_constants(a, lambda) {
        Ok(s) => s,
        Err(e) => {
            println!("infeasible: {e}");
            return Ok(false);
        }
    };
    print!("{search}");
    let c = select_constants(a).context("selecting constants")?;
    let checks = verify_constants(a, lambda, &c);
    for ch in &checks {
        println!("{ch}");
    }
    let ok = search.feasible() && checks.iter().all(|c| c.pass);
    println!(
        "delta = {}\nmu = {}\nomega = {}\neta = {}\nzeta = {}\nbeta = {}\n{}",
        c.delta,
        c.mu,
        c.omega,
        c.eta,
        c.zeta,
        c.beta,
        if ok { "feasible" } else { "INFEASIBLE" }
    );
    Ok(ok)
}
