//! `key = value` run configuration with `#` comments and environment overrides.
//!
//! Keys:
//!
//! | key | type | default |
//! |---|---|---|
//! | `epsilon` | positive float | required by run, certify |
//! | `nu` | positive float | required unless `a` is given to `constants` |
//! | `lambda` | positive float | required |
//! | `tau` or `a` | positive float | exactly one required |
//! | `rho_bar` | positive float | 1 |
//! | `grid` | `N` or `NXxNY` | required by run, convergence |
//! | `T` | positive float | required by run, convergence |
//! | `splitting` | `strang` or `lie` | strang |
//! | `relaxation` | `trapezoidal` or `exact` | trapezoidal |
//! | `startup_steps` | integer | 1 |
//! | `shift_cells` | integer >= 1 | 1 |
//! | `probe_interval` | integer >= 1 | 1 |
//! | `snapshot_interval` | integer, 0 = final only | 0 |
//! | `energy_order` | 0, 1 or 2 | 0 |
//! | `residuals` | bool | true |
//! | `eps_list` | comma separated floats | required by convergence |
//! | `max_steps` | integer | 1000000 |
//! | `out` | path | `vbgk-out` |
//! | `workers` | integer >= 1 | rayon default |
//!
//! Any key can be overridden by the environment variable `VBGK_<KEY>` with the
//! key upper-cased, for example `VBGK_EPSILON=0.05` or `VBGK_T=1`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use vbgk::diagnostics::ProbeSchedule;
use vbgk::solver::{PlanOptions, Relaxation, Splitting};
use vbgk::{GridSpec, ModelParams};

pub const ENV_PREFIX: &str = "VBGK_";

pub const KEYS: [&str; 20] = [
    "epsilon",
    "nu",
    "lambda",
    "tau",
    "a",
    "rho_bar",
    "grid",
    "T",
    "splitting",
    "relaxation",
    "startup_steps",
    "shift_cells",
    "probe_interval",
    "snapshot_interval",
    "energy_order",
    "residuals",
    "eps_list",
    "max_steps",
    "out",
    "workers",
];

/// Where a value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Line(usize),
    Env(String),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Line(n) => write!(f, "line {n}"),
            Self::Env(v) => write!(f, "environment {v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: Option<Source>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "{s}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// All problems found in one pass.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Which command the configuration is for; decides the required keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Run,
    Convergence,
    Certify,
    Constants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawEntry {
    pub value: String,
    pub source: Source,
}

/// Parsed `key = value` pairs before type conversion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, RawEntry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        let mut entries = BTreeMap::new();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                errors.push(ConfigError { source: Some(Source::Line(n)), message: format!("expected 'key = value', got '{body}'") });
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                errors.push(ConfigError { source: Some(Source::Line(n)), message: format!("unknown key '{k}'") });
                continue;
            }
            if let Some(prev) = entries.get(k) {
                let prev: &RawEntry = prev;
                errors.push(ConfigError { source: Some(Source::Line(n)), message: format!("duplicate key '{k}', first set on {}", prev.source) });
                continue;
            }
            entries.insert(k.to_string(), RawEntry { value: v.to_string(), source: Source::Line(n) });
        }
        if errors.is_empty() {
            Ok(Self { entries })
        } else {
            Err(ConfigErrors(errors))
        }
    }

    /// Applies `VBGK_<KEY>` overrides from `vars`.
    pub fn overlay_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            if let Some(key) = KEYS.iter().find(|k| k.eq_ignore_ascii_case(rest)) {
                self.entries.insert(key.to_string(), RawEntry { value, source: Source::Env(name.clone()) });
            }
        }
    }

    pub fn set(&mut self, key: &str, value: String, source: Source) {
        self.entries.insert(key.to_string(), RawEntry { value, source });
    }
}

/// How the model is parameterized: `tau` directly, or `a` with `tau` derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dissipation {
    Tau(f64),
    A(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epsilon: Option<f64>,
    pub nu: Option<f64>,
    pub lambda: f64,
    pub dissipation: Dissipation,
    pub rho_bar: f64,
    pub grid: Option<GridSpec>,
    pub t_final: Option<f64>,
    pub plan: PlanOptions,
    pub schedule: ProbeSchedule,
    pub snapshot_interval: usize,
    pub eps_list: Vec<f64>,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// `a`, from the config directly or from `nu / (2 lambda^2 tau)`.
    pub fn a(&self) -> Option<f64> {
        match self.dissipation {
            Dissipation::A(a) => Some(a),
            Dissipation::Tau(tau) => self.nu.map(|nu| nu / (2.0 * self.lambda * self.lambda * tau)),
        }
    }

    pub fn params_at(&self, epsilon: f64) -> vbgk::Result<ModelParams> {
        let nu = self.nu.ok_or_else(|| vbgk::Error::Domain("nu is required".into()))?;
        match self.dissipation {
            Dissipation::Tau(tau) => ModelParams::new(epsilon, tau, self.lambda, nu, self.rho_bar),
            Dissipation::A(a) => ModelParams::from_a(epsilon, a, self.lambda, nu, self.rho_bar),
        }
    }

    pub fn params(&self) -> vbgk::Result<ModelParams> {
        let eps = self.epsilon.ok_or_else(|| vbgk::Error::Domain("epsilon is required".into()))?;
        self.params_at(eps)
    }

    /// The configuration in the file syntax, so a manifest can be fed back in.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        if let Some(e) = self.epsilon {
            put("epsilon", e.to_string());
        }
        if let Some(nu) = self.nu {
            put("nu", nu.to_string());
        }
        put("lambda", self.lambda.to_string());
        match self.dissipation {
            Dissipation::Tau(t) => put("tau", t.to_string()),
            Dissipation::A(a) => put("a", a.to_string()),
        }
        put("rho_bar", self.rho_bar.to_string());
        if let Some(g) = self.grid {
            put("grid", format!("{}x{}", g.nx, g.ny));
        }
        if let Some(t) = self.t_final {
            put("T", t.to_string());
        }
        put("splitting", self.plan.splitting.to_string());
        put("relaxation", self.plan.relaxation.to_string());
        put("startup_steps", self.plan.startup_steps.to_string());
        put("shift_cells", self.plan.shift_cells.to_string());
        put("max_steps", self.plan.max_steps.to_string());
        put("probe_interval", self.schedule.interval.to_string());
        put("energy_order", self.schedule.energy_order.to_string());
        put("residuals", self.schedule.residuals.to_string());
        put("snapshot_interval", self.snapshot_interval.to_string());
        if !self.eps_list.is_empty() {
            put("eps_list", self.eps_list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "));
        }
        put("out", self.out.display().to_string());
        if let Some(w) = self.workers {
            put("workers", w.to_string());
        }
        s
    }
}

struct Reader<'a> {
    raw: &'a RawConfig,
    errors: Vec<ConfigError>,
}

impl Reader<'_> {
    fn fail(&mut self, key: &str, message: String) {
        let source = self.raw.entries.get(key).map(|e| e.source.clone());
        self.errors.push(ConfigError { source, message });
    }

    fn get<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let entry = self.raw.entries.get(key)?;
        match parse(&entry.value) {
            Some(v) => Some(v),
            None => {
                let msg = format!("'{key}' expects {what}, got '{}'", entry.value);
                self.fail(key, msg);
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<f64> {
        let v = self.get(key, "a number", |s| s.parse::<f64>().ok())?;
        if v.is_finite() && v > 0.0 {
            Some(v)
        } else {
            self.fail(key, format!("'{key}' must be positive, got {v}"));
            None
        }
    }

    fn count(&mut self, key: &str, min: usize) -> Option<usize> {
        let v = self.get(key, "a non-negative integer", |s| s.parse::<usize>().ok())?;
        if v >= min {
            Some(v)
        } else {
            self.fail(key, format!("'{key}' must be at least {min}, got {v}"));
            None
        }
    }

    fn require<T>(&mut self, key: &str, v: Option<T>, needed: bool) -> Option<T> {
        if v.is_none() && needed && !self.raw.entries.contains_key(key) {
            self.errors.push(ConfigError { source: None, message: format!("missing required key '{key}'") });
        }
        v
    }
}

fn parse_grid(s: &str) -> Option<(usize, usize)> {
    let lower = s.to_ascii_lowercase();
    match lower.split_once('x') {
        Some((a, b)) => Some((a.trim().parse().ok()?, b.trim().parse().ok()?)),
        None => {
            let n = lower.trim().parse().ok()?;
            Some((n, n))
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Converts and validates the raw entries for `purpose`.
pub fn resolve(raw: &RawConfig, purpose: Purpose) -> Result<RunConfig, ConfigErrors> {
    let mut r = Reader { raw, errors: Vec::new() };
    let needs_eps = matches!(purpose, Purpose::Run | Purpose::Certify);
    let needs_run = matches!(purpose, Purpose::Run | Purpose::Convergence);

    let epsilon = r.positive("epsilon");
    let epsilon = r.require("epsilon", epsilon, needs_eps);
    let lambda = r.positive("lambda");
    let lambda = r.require("lambda", lambda, true);
    let rho_bar = r.positive("rho_bar").unwrap_or(1.0);

    let tau = r.positive("tau");
    let a = r.positive("a");
    let dissipation = match (raw.entries.get("tau"), raw.entries.get("a")) {
        (Some(t), Some(x)) => {
            r.errors.push(ConfigError {
                source: Some(t.source.clone()),
                message: format!("'tau' ({}) and 'a' ({}) are mutually exclusive, give one", t.source, x.source),
            });
            None
        }
        (None, None) => {
            r.errors.push(ConfigError { source: None, message: "missing required key: one of 'tau' or 'a'".into() });
            None
        }
        (Some(_), None) => tau.map(Dissipation::Tau),
        (None, Some(_)) => a.map(Dissipation::A),
    };
    let nu_needed = !(purpose == Purpose::Constants && matches!(dissipation, Some(Dissipation::A(_))));
    let nu = r.positive("nu");
    let nu = r.require("nu", nu, nu_needed);

    let grid = r.get("grid", "N or NXxNY", parse_grid);
    let grid = match grid {
        Some((nx, ny)) => match GridSpec::new(nx, ny) {
            Ok(g) => Some(g),
            Err(e) => {
                r.fail("grid", e.to_string());
                None
            }
        },
        None => r.require("grid", None, needs_run),
    };
    let t_final = r.positive("T");
    let t_final = r.require("T", t_final, needs_run);

    let splitting = r.get("splitting", "strang or lie", |s| s.parse::<Splitting>().ok()).unwrap_or_default();
    let relaxation = r.get("relaxation", "trapezoidal or exact", |s| s.parse::<Relaxation>().ok()).unwrap_or_default();
    let defaults = PlanOptions::default();
    let plan = PlanOptions {
        shift_cells: r.count("shift_cells", 1).unwrap_or(defaults.shift_cells),
        splitting,
        relaxation,
        startup_steps: r.count("startup_steps", 0).unwrap_or(defaults.startup_steps),
        max_steps: r.count("max_steps", 1).unwrap_or(defaults.max_steps),
    };
    let energy_order = r.count("energy_order", 0).unwrap_or(0);
    if energy_order > 2 {
        r.fail("energy_order", format!("'energy_order' must be 0, 1 or 2, got {energy_order}"));
    }
    let schedule = ProbeSchedule {
        interval: r.count("probe_interval", 1).unwrap_or(1),
        energy_order,
        residuals: r.get("residuals", "true or false", parse_bool).unwrap_or(true),
    };
    let snapshot_interval = r.count("snapshot_interval", 0).unwrap_or(0);
    let eps_list: Vec<f64> = r
        .get("eps_list", "comma separated positive numbers", |s| {
            s.split(',').map(|x| x.trim().parse::<f64>().ok().filter(|v| v.is_finite() && *v > 0.0)).collect()
        })
        .unwrap_or_default();
    if purpose == Purpose::Convergence && eps_list.is_empty() && !raw.entries.contains_key("eps_list") {
        r.errors.push(ConfigError { source: None, message: "missing required key 'eps_list'".into() });
    }
    let out = raw.entries.get("out").map(|e| PathBuf::from(&e.value)).unwrap_or_else(|| PathBuf::from("vbgk-out"));
    let workers = r.count("workers", 1);

    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    Ok(RunConfig {
        epsilon,
        nu,
        lambda: lambda.expect("checked above"),
        dissipation: dissipation.expect("checked above"),
        rho_bar,
        grid,
        t_final,
        plan,
        schedule,
        snapshot_interval,
        eps_list,
        out,
        workers,
    })
}

/// Parses a run configuration from text alone.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_for(text, Purpose::Run)
}

pub fn parse_config_for(text: &str, purpose: Purpose) -> Result<RunConfig, ConfigErrors> {
    resolve(&RawConfig::parse(text)?, purpose)
}
