//! Model parameters, the structural inequalities they must satisfy, and a
//! deterministic search for the auxiliary stability constants.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::fmt;

/// Physical and numerical constants of the relaxation model.
///
/// The dissipation parameter `a = nu / (2 lambda^2 tau)` is never stored; it is
/// recomputed on every call so it cannot drift from the base fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    epsilon: f64,
    tau: f64,
    lambda: f64,
    nu: f64,
    rho_bar: f64,
}

fn positive(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

pub fn derive_a(nu: f64, lambda: f64, tau: f64) -> Result<f64> {
    positive("nu", nu)?;
    positive("lambda", lambda)?;
    positive("tau", tau)?;
    Ok(nu / (2.0 * lambda * lambda * tau))
}

impl ModelParams {
    pub fn new(epsilon: f64, tau: f64, lambda: f64, nu: f64, rho_bar: f64) -> Result<Self> {
        Ok(Self {
            epsilon: positive("epsilon", epsilon)?,
            tau: positive("tau", tau)?,
            lambda: positive("lambda", lambda)?,
            nu: positive("nu", nu)?,
            rho_bar: positive("rho_bar", rho_bar)?,
        })
    }

    /// Parameterization by `a` instead of `tau`; `tau = nu / (2 lambda^2 a)`.
    pub fn from_a(epsilon: f64, a: f64, lambda: f64, nu: f64, rho_bar: f64) -> Result<Self> {
        positive("a", a)?;
        positive("lambda", lambda)?;
        positive("nu", nu)?;
        Self::new(epsilon, nu / (2.0 * lambda * lambda * a), lambda, nu, rho_bar)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.tau, self.lambda, self.nu, self.rho_bar)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn rho_bar(&self) -> f64 {
        self.rho_bar
    }

    pub fn a(&self) -> f64 {
        self.nu / (2.0 * self.lambda * self.lambda * self.tau)
    }

    /// Relaxation time of the scaled model, `tau * epsilon^2`.
    pub fn relaxation_time(&self) -> f64 {
        self.tau * self.epsilon * self.epsilon
    }

    /// Kinetic speed of the scaled model, `lambda / epsilon`.
    pub fn speed(&self) -> f64 {
        self.lambda / self.epsilon
    }

    pub fn satisfies_structural_condition(&self) -> bool {
        let a = self.a();
        a > 0.0 && a < 0.25
    }

    /// The constants converted to a scalar type.
    pub fn cast<T: Scalar>(&self) -> ModelConsts<T> {
        ModelConsts {
            epsilon: T::lit(self.epsilon),
            lambda: T::lit(self.lambda),
            a: T::lit(self.a()),
            nu: T::lit(self.nu),
            rho_bar: T::lit(self.rho_bar),
            tau: T::lit(self.tau),
        }
    }
}

/// [`ModelParams`] in a working scalar type, with `a` precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConsts<T> {
    pub epsilon: T,
    pub lambda: T,
    pub a: T,
    pub nu: T,
    pub rho_bar: T,
    pub tau: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Greater,
    Less,
}

/// One strict inequality `value > bound` or `value < bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    pub fn greater(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::Greater,
            bound,
            pass: value > bound,
        }
    }

    pub fn less(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::Less,
            bound,
            pass: value < bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.relation {
            Relation::Greater => ">",
            Relation::Less => "<",
        };
        let tag = if self.pass { "pass" } else { "FAIL" };
        write!(f, "{}: {:.6e} {} {:.6e} [{}]", self.name, self.value, op, self.bound, tag)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Checks the structural condition `0 < a < 1/4` and, when `strict`, every
/// lower bound on `lambda` using the constants from [`find_stability_constants`].
pub fn validate(params: &ModelParams, strict: bool) -> ValidationReport {
    let a = params.a();
    let mut checks = vec![Check::greater("a > 0", a, 0.0), Check::less("a < 1/4", a, 0.25)];
    if strict && a > 0.0 && a < 0.25 {
        let lambda = params.lambda();
        checks.push(Check::greater(
            "lambda > sqrt((4 + 1/tau + 1/(a(1-4a))) / (4a))",
            lambda,
            ((4.0 + 1.0 / params.tau() + 1.0 / (a * (1.0 - 4.0 * a))) / (4.0 * a)).sqrt(),
        ));
        match select_constants(a) {
            Ok(consts) => checks.extend(lambda_bounds(a, lambda, &consts)),
            Err(e) => checks.push(Check::greater(format!("stability constants ({e})"), 0.0, 0.0)),
        }
    }
    ValidationReport { checks }
}

/// Lower bounds on `lambda` implied by a set of constants, in the order
/// positivity of the symmetrizer, negativity of the source, energy estimate.
pub fn lambda_bounds(a: f64, lambda: f64, c: &StabilityConstants) -> Vec<Check> {
    let gamma = c.gamma_sigma(a);
    vec![
        Check::greater("lambda > sqrt(delta/a)", lambda, (c.delta / a).sqrt()),
        Check::greater(
            "lambda > sqrt((4a(1-4a)+1) / (4a^2(1-4a)))",
            lambda,
            ((4.0 * a * (1.0 - 4.0 * a) + 1.0) / (4.0 * a * a * (1.0 - 4.0 * a))).sqrt(),
        ),
        Check::greater(
            "lambda > sqrt((2+omega)/(2a))",
            lambda,
            ((2.0 + c.omega) / (2.0 * a)).sqrt(),
        ),
        Check::greater(
            "lambda > sqrt(delta/a + eta Gamma (1+2a)/(2a))",
            lambda,
            (c.delta / a + c.eta * gamma * (1.0 + 2.0 * a) / (2.0 * a)).sqrt(),
        ),
    ]
}

/// Auxiliary constants of the energy method. Only their existence matters for
/// the analysis; a concrete tuple makes the monitors reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub delta: f64,
    pub mu: f64,
    pub omega: f64,
    pub eta: f64,
    pub zeta: f64,
    pub beta: f64,
}

impl StabilityConstants {
    pub fn gamma_sigma(&self, a: f64) -> f64 {
        1.0 - 4.0 * a * self.mu - 2.0 / self.delta
    }

    pub fn delta_sigma(&self, a: f64, lambda: f64) -> f64 {
        2.0 * (lambda * lambda * a - self.delta)
    }

    pub fn theta_sigma(&self, a: f64) -> f64 {
        2.0 * a * (1.0 - 1.0 / self.mu) - 1.0 / self.delta
    }

    pub fn delta_lsigma(&self, a: f64, lambda: f64) -> f64 {
        2.0 * (lambda * lambda * a - 1.0) - self.omega
    }

    pub fn theta_lsigma(&self, a: f64) -> f64 {
        2.0 * a * (1.0 - 4.0 * a) - 1.0 / self.omega
    }
}

/// An open interval and the point chosen inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub name: &'static str,
    pub lower: f64,
    pub upper: Option<f64>,
    pub chosen: f64,
}

impl Interval {
    fn pick(name: &'static str, lower: f64, upper: Option<f64>) -> Result<Self> {
        let chosen = match upper {
            Some(u) if u <= lower => {
                return Err(Error::Domain(format!("empty interval for {name}: ({lower}, {u})")))
            }
            Some(u) => 0.5 * (lower + u),
            None => 1.1 * lower,
        };
        Ok(Self { name, lower, upper, chosen })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.upper {
            Some(u) => write!(f, "{} in ({:.6}, {:.6}) -> {:.6}", self.name, self.lower, u, self.chosen),
            None => write!(f, "{} in ({:.6}, inf) -> {:.6}", self.name, self.lower, self.chosen),
        }
    }
}

pub fn delta_lower_bound(a: f64, mu: f64) -> f64 {
    f64::max(2.0 / (1.0 - 4.0 * a * mu), 1.0 / (2.0 * a * (1.0 - 1.0 / mu)))
}

pub fn omega_lower_bound(a: f64) -> f64 {
    1.0 / (2.0 * a * (1.0 - 4.0 * a))
}

fn check_a(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 && a < 0.25 {
        Ok(())
    } else {
        Err(Error::Domain(format!("structural condition 0 < a < 1/4 violated: a = {a}")))
    }
}

/// Picks every constant inside its feasible interval. None of the intervals
/// involve `lambda`, so the result depends on `a` alone.
pub fn select_intervals(a: f64) -> Result<Vec<Interval>> {
    check_a(a)?;
    let mu = Interval::pick("mu", 1.0, Some(1.0 / (4.0 * a)))?;
    let delta = Interval::pick("delta", delta_lower_bound(a, mu.chosen), None)?;
    let omega = Interval::pick("omega", omega_lower_bound(a), None)?;

    let gamma = 1.0 - 4.0 * a * mu.chosen - 2.0 / delta.chosen;
    let theta = 2.0 * a * (1.0 - 1.0 / mu.chosen) - 1.0 / delta.chosen;
    let k = 8.0 * a * a * gamma;
    let beta_upper = (k > theta).then(|| k / (k - theta));
    let beta = Interval::pick("beta", 1.0, beta_upper)?;

    let zeta_upper = theta / (2.0 * a * gamma * (1.0 - 1.0 / beta.chosen));
    let zeta = Interval::pick("zeta", 4.0 * a, Some(zeta_upper))?;
    let eta_lower = f64::max(2.0 * zeta.chosen / (zeta.chosen - 4.0 * a), 1.0 / a);
    let eta = Interval::pick("eta", eta_lower, None)?;
    Ok(vec![mu, delta, omega, beta, zeta, eta])
}

pub fn select_constants(a: f64) -> Result<StabilityConstants> {
    let iv = select_intervals(a)?;
    Ok(StabilityConstants {
        mu: iv[0].chosen,
        delta: iv[1].chosen,
        omega: iv[2].chosen,
        beta: iv[3].chosen,
        zeta: iv[4].chosen,
        eta: iv[5].chosen,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSearch {
    pub constants: StabilityConstants,
    pub intervals: Vec<Interval>,
    pub lambda_checks: Vec<Check>,
}

impl ConstantSearch {
    pub fn feasible(&self) -> bool {
        self.lambda_checks.iter().all(|c| c.pass)
    }

    pub fn first_violation(&self) -> Option<&Check> {
        self.lambda_checks.iter().find(|c| !c.pass)
    }
}

impl fmt::Display for ConstantSearch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for iv in &self.intervals {
            writeln!(f, "{iv}")?;
        }
        for c in &self.lambda_checks {
            writeln!(f, "{c}")?;
        }
        match self.first_violation() {
            None => writeln!(f, "feasible"),
            Some(c) => writeln!(f, "infeasible: {}", c.name),
        }
    }
}

/// Selects the constants and checks the `lambda` bounds they impose.
pub fn find_stability_constants(a: f64, lambda: f64) -> Result<ConstantSearch> {
    positive("lambda", lambda)?;
    let intervals = select_intervals(a)?;
    let constants = select_constants(a)?;
    let lambda_checks = lambda_bounds(a, lambda, &constants);
    Ok(ConstantSearch { constants, intervals, lambda_checks })
}

/// Substitutes a tuple back into every inequality that defines it.
pub fn verify_constants(a: f64, lambda: f64, c: &StabilityConstants) -> Vec<Check> {
    let gamma = c.gamma_sigma(a);
    let theta = c.theta_sigma(a);
    let bracket = 4.0 * a * a - 2.0 * a * c.zeta - 4.0 * a / c.eta;
    vec![
        Check::greater("mu > 1", c.mu, 1.0),
        Check::less("mu < 1/(4a)", c.mu, 1.0 / (4.0 * a)),
        Check::greater("delta > 2/(1-4a mu)", c.delta, 2.0 / (1.0 - 4.0 * a * c.mu)),
        Check::greater("delta > 1/(2a(1-1/mu))", c.delta, 1.0 / (2.0 * a * (1.0 - 1.0 / c.mu))),
        Check::greater("lambda > sqrt(delta/a)", lambda, (c.delta / a).sqrt()),
        Check::greater("omega > 1/(2a(1-4a))", c.omega, omega_lower_bound(a)),
        Check::greater("lambda > sqrt((2+omega)/(2a))", lambda, ((2.0 + c.omega) / (2.0 * a)).sqrt()),
        Check::greater("zeta > 4a", c.zeta, 4.0 * a),
        Check::greater("eta > 2 zeta/(zeta-4a)", c.eta, 2.0 * c.zeta / (c.zeta - 4.0 * a)),
        Check::greater("eta > 1/a", c.eta, 1.0 / a),
        Check::less(
            "zeta < Theta/(2a Gamma (1-1/beta))",
            c.zeta,
            theta / (2.0 * a * gamma * (1.0 - 1.0 / c.beta)),
        ),
        Check::greater("beta > 1", c.beta, 1.0),
        Check::less("8a^2 Gamma (1-1/beta) < Theta", 8.0 * a * a * gamma * (1.0 - 1.0 / c.beta), theta),
        Check::greater("1 - 2/eta - 4a/zeta > 0", 1.0 - 2.0 / c.eta - 4.0 * a / c.zeta, 0.0),
        Check::greater(
            "Delta - eta Gamma (1+2a) > 0",
            c.delta_sigma(a, lambda) - c.eta * gamma * (1.0 + 2.0 * a),
            0.0,
        ),
        Check::greater(
            "Theta + (1-1/beta) Gamma [4a^2 - 2a zeta - 4a/eta] > 0",
            theta + (1.0 - 1.0 / c.beta) * gamma * bracket,
            0.0,
        ),
        Check::greater(
            "Theta + (1-beta) Gamma [4a^2 - 2a zeta - 4a/eta] > 0",
            theta + (1.0 - c.beta) * gamma * bracket,
            0.0,
        ),
    ]
}

/// Time horizon on which the a priori bound `M` is kept.
///
/// `c`, `c1`, `c2` are the unnamed constants of the Gronwall argument; they are
/// not computable from the model and are taken as given. The value is a
/// diagnostic formula, not a certified bound.
pub fn existence_time_bound(m0: f64, m: f64, c: f64, c1: f64, c2: f64, epsilon0: f64) -> Result<f64> {
    positive("M0", m0)?;
    positive("M", m)?;
    positive("c", c)?;
    if !(c1 >= 0.0 && c2 >= 0.0 && epsilon0 >= 0.0) {
        return Err(Error::Domain("c1, c2 and epsilon0 must be non-negative".into()));
    }
    let rate = c * m * (c1 + c2 * m * epsilon0);
    if !(rate > 0.0) {
        return Err(Error::Domain("growth rate c M (c1 + c2 M eps0) must be positive".into()));
    }
    let arg = m * m / (c * m0 * m0);
    if arg < 1.0 {
        return Err(Error::NonPositiveLog(arg));
    }
    Ok(arg.ln() / rate)
}
