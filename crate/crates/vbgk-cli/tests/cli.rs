use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use vbgk_cli::config::parse_config;
use vbgk_cli::output::{read_snapshot, LOCK_NAME, SNAPSHOT_PLANES};

const BASE: &str = "epsilon = 0.1\nnu = 0.01\nlambda = 30\na = 0.1\n";

fn vbgk(args: &[&str], dir: &Path, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vbgk"));
    cmd.args(args).current_dir(dir);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("VBGK_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn certify_passes_for_selected_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let o = vbgk(&["certify", "--config", &cfg, "--out", "cert"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let kv = fs::read_to_string(tmp.path().join("cert/certification.kv")).unwrap();
    for line in kv.lines().filter(|l| !l.starts_with('#')) {
        let (name, rest) = line.split_once(" = ").unwrap();
        let fields: Vec<&str> = rest.split_whitespace().collect();
        assert_eq!(fields.len(), 3, "{line}");
        assert_eq!(fields[2], "true", "{name}");
    }
    assert!(!tmp.path().join("cert").join(LOCK_NAME).exists());
}

#[test]
fn certify_fails_below_the_lambda_bound() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("lambda = 30", "lambda = 6"));
    let o = vbgk(&["certify", "--config", &cfg, "--out", "cert"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let kv = fs::read_to_string(tmp.path().join("cert/certification.kv")).unwrap();
    assert!(kv.lines().any(|l| l.ends_with(" false")));
}

#[test]
fn constants_report_infeasible_a() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vbgk(&["constants", "--a", "0.3", "--lambda", "30"], tmp.path(), &[]);
    assert_ne!(o.status.code(), Some(0));
    let o = vbgk(&["constants", "--a", "0.1", "--lambda", "30"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("feasible"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}grid = 8\nT = 0.01\nprobe_interval = 0\n"));
    let o = vbgk(&["run", "--config", &cfg, "--out", "out"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("probe_interval"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(LOCK_NAME), "pid = 1\n").unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let o = vbgk(&["certify", "--config", &cfg, "--out", "out"], tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("locked"), "{}", stderr(&o));
    assert!(!out.join("certification.kv").exists());
}

#[test]
fn run_writes_series_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}grid = 8x8\nT = 0.01\nsnapshot_interval = 2\n"));
    let o = vbgk(&["run", "--config", &cfg, "--out", "out", "--workers", "2"], tmp.path(), &[("VBGK_EPSILON", "0.2")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("out");

    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let back = parse_config(&manifest).unwrap();
    assert_eq!(back.epsilon, Some(0.2));
    assert_eq!(back.workers, Some(2));
    assert!(manifest.contains("# status = completed"));
    let n_steps: usize = manifest
        .lines()
        .find_map(|l| l.strip_prefix("# n_steps = "))
        .unwrap()
        .parse()
        .unwrap();

    let bytes = fs::metadata(out.join("final.f64")).unwrap().len();
    assert_eq!(bytes as usize, SNAPSHOT_PLANES * 64 * 8);
    let hdr = fs::read_to_string(out.join("final.hdr")).unwrap();
    assert!(hdr.contains("nx = 8") && hdr.contains("planes = 19"));
    assert!(hdr.contains(&format!("step = {n_steps}")));
    let planes = read_snapshot(&out.join("final.f64"), 8, 8).unwrap();
    assert!(planes[15].iter().all(|r| (r - 1.0).abs() < 0.1));
    let snaps = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert_eq!(snaps, 2 * n_steps.div_ceil(2));

    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), n_steps + 2);
    assert!(csv.lines().next().unwrap().starts_with("step,t,"));
    assert!(!out.join(LOCK_NAME).exists());
}

#[test]
fn convergence_writes_table_and_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE}grid = 8\nT = 0.01\neps_list = 0.2, 0.1\n"));
    let o = vbgk(&["convergence", "--config", &cfg, "--out", "conv"], tmp.path(), &[]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{}", stderr(&o));
    let out = tmp.path().join("conv");
    let table = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(out.join("series_eps_0p2.csv").exists() && out.join("series_eps_0p1.csv").exists());
    assert!(fs::read_to_string(out.join("convergence_summary.txt")).unwrap().contains("velocity_error"));
}
