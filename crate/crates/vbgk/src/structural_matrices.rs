//! The 15x15 structural matrices of the relaxation system in the variables
//! `W = (w, eps^2 m, eps^2 xi, eps^2 k, eps^2 h)`, and their certification.
//!
//! Every matrix is assembled from closed-form 3x3 blocks. With an exact scalar
//! the identities hold with zero residual; in floating point the residuals are
//! measured componentwise, relative to the magnitude of the terms that cancel.

use crate::error::{Error, Result};
use crate::model_params::{ModelParams, StabilityConstants};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use std::fmt;

pub const N: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &rhs[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].clone())
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        Self { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn abs(&self) -> Self {
        self.map(|x| x.magnitude())
    }

    pub fn neg(&self) -> Self {
        self.map(|x| -x.clone())
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)].clone() - rhs[(i, j)].clone())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)].clone() + rhs[(i, j)].clone())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| {
            let a = x.magnitude();
            if a > m {
                a
            } else {
                m
            }
        })
    }

    /// `D A D` for a diagonal `D` given by its entries.
    pub fn congruence(&self, d: &[T]) -> Self {
        Self::from_fn(self.n, |i, j| d[i].clone() * self[(i, j)].clone() * d[j].clone())
    }

    /// The trailing `n - start` square block.
    pub fn trailing(&self, start: usize) -> Self {
        Self::from_fn(self.n - start, |i, j| self[(i + start, j + start)].clone())
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |i, j| half.clone() * (self[(i, j)].clone() + self[(j, i)].clone()))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)].as_f64())
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(T::zero(), |s, j| {
                    let a = &self[(i, j)];
                    if a.is_zero() {
                        s
                    } else {
                        s + a.clone() * v[j].clone()
                    }
                })
            })
            .collect()
    }

    fn set_block(&mut self, bi: usize, bj: usize, b: [[T; 3]; 3]) {
        for (r, row) in b.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                self[(3 * bi + r, 3 * bj + c)] = v;
            }
        }
    }

    pub fn block(&self, bi: usize, bj: usize) -> [[T; 3]; 3] {
        std::array::from_fn(|r| std::array::from_fn(|c| self[(3 * bi + r, 3 * bj + c)].clone()))
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Row-compressed copy of a matrix, used in per-cell loops.
#[derive(Debug, Clone)]
pub struct SparseRows<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> SparseRows<T> {
    pub fn new(m: &DenseMatrix<T>) -> Self {
        let rows = (0..m.dim())
            .map(|i| (0..m.dim()).filter(|&j| !m[(i, j)].is_zero()).map(|j| (j, m[(i, j)].clone())).collect())
            .collect();
        Self { rows }
    }

    pub fn apply(&self, v: &[T; N]) -> [T; N] {
        std::array::from_fn(|i| self.rows[i].iter().fold(T::zero(), |s, (j, a)| s + a.clone() * v[*j].clone()))
    }
}

fn diag3<T: Scalar>(x: T, y: T, z: T) -> [[T; 3]; 3] {
    [[x, T::zero(), T::zero()], [T::zero(), y, T::zero()], [T::zero(), T::zero(), z]]
}

fn id3<T: Scalar>(s: T) -> [[T; 3]; 3] {
    diag3(s.clone(), s.clone(), s)
}

pub fn sigma1<T: Scalar>(s: T) -> [[T; 3]; 3] {
    let z = || T::zero();
    [[z(), s.clone(), z()], [s, z(), z()], [z(), z(), z()]]
}

pub fn sigma2<T: Scalar>(s: T) -> [[T; 3]; 3] {
    let z = || T::zero();
    [[z(), z(), s.clone()], [z(), z(), z()], [s, z(), z()]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralMatrices<T> {
    pub params: ModelParams,
    pub c: DenseMatrix<T>,
    pub c_inv: DenseMatrix<T>,
    pub lambda1: DenseMatrix<T>,
    pub lambda2: DenseMatrix<T>,
    pub b1: DenseMatrix<T>,
    pub b2: DenseMatrix<T>,
    /// `C Lambda_i C^-1`, kept for the cross-check against the closed forms.
    pub b1_product: DenseMatrix<T>,
    pub b2_product: DenseMatrix<T>,
    /// Linear part of the relaxation source, normalized so the source reads `-L W / tau`.
    pub l: DenseMatrix<T>,
    pub sigma: DenseMatrix<T>,
    pub sigma_inv: DenseMatrix<T>,
}

impl<T: Scalar> StructuralMatrices<T> {
    pub fn build(params: &ModelParams) -> Result<Self> {
        if !params.satisfies_structural_condition() {
            return Err(Error::Domain(format!("structural condition 0 < a < 1/4 violated: a = {}", params.a())));
        }
        let g64 = 4.0 * params.lambda().powi(2) * params.a().powi(2) - 1.0;
        if g64.abs() <= 1e-8 {
            return Err(Error::Domain(format!("4 lambda^2 a^2 - 1 = {g64:e} is too close to zero")));
        }
        let lit = |x: f64| T::lit(x);
        let e = lit(params.epsilon());
        let lam = lit(params.lambda());
        let a = lit(params.a());
        let one = T::one();
        let two = lit(2.0);
        let four = lit(4.0);
        let e2 = e.clone() * e.clone();
        let e3 = e2.clone() * e.clone();
        let e4 = e2.clone() * e2.clone();
        let el = e.clone() * lam.clone();
        let lam2 = lam.clone() * lam.clone();

        let mut c = DenseMatrix::zeros(N);
        for b in 0..5 {
            c.set_block(0, b, id3(one.clone()));
        }
        c.set_block(1, 0, id3(el.clone()));
        c.set_block(1, 2, id3(-el.clone()));
        c.set_block(2, 1, id3(el.clone()));
        c.set_block(2, 3, id3(-el.clone()));
        c.set_block(3, 0, id3(e2.clone()));
        c.set_block(3, 2, id3(e2.clone()));
        c.set_block(4, 1, id3(e2.clone()));
        c.set_block(4, 3, id3(e2.clone()));

        let mut c_inv = DenseMatrix::zeros(N);
        let h_el = one.clone() / (two.clone() * el.clone());
        let h_e2 = one.clone() / (two.clone() * e2.clone());
        c_inv.set_block(0, 1, id3(h_el.clone()));
        c_inv.set_block(0, 3, id3(h_e2.clone()));
        c_inv.set_block(1, 2, id3(h_el.clone()));
        c_inv.set_block(1, 4, id3(h_e2.clone()));
        c_inv.set_block(2, 1, id3(-h_el.clone()));
        c_inv.set_block(2, 3, id3(h_e2.clone()));
        c_inv.set_block(3, 2, id3(-h_el));
        c_inv.set_block(3, 4, id3(h_e2));
        c_inv.set_block(4, 0, id3(one.clone()));
        c_inv.set_block(4, 3, id3(-(one.clone() / e2.clone())));
        c_inv.set_block(4, 4, id3(-(one.clone() / e2.clone())));

        let speed = lam.clone() / e.clone();
        let mut lambda1 = DenseMatrix::zeros(N);
        lambda1.set_block(0, 0, id3(speed.clone()));
        lambda1.set_block(2, 2, id3(-speed.clone()));
        let mut lambda2 = DenseMatrix::zeros(N);
        lambda2.set_block(1, 1, id3(speed.clone()));
        lambda2.set_block(3, 3, id3(-speed));

        let inv_e2 = one.clone() / e2.clone();
        let mut b1 = DenseMatrix::zeros(N);
        b1.set_block(0, 1, id3(inv_e2.clone()));
        b1.set_block(1, 3, id3(lam2.clone() / e2.clone()));
        b1.set_block(3, 1, id3(one.clone()));
        let mut b2 = DenseMatrix::zeros(N);
        b2.set_block(0, 2, id3(inv_e2.clone()));
        b2.set_block(2, 4, id3(lam2.clone() / e2.clone()));
        b2.set_block(4, 2, id3(one.clone()));
        let b1_product = c.mul(&lambda1).mul(&c_inv);
        let b2_product = c.mul(&lambda2).mul(&c_inv);

        let mut neg_l = DenseMatrix::zeros(N);
        let inv_e = one.clone() / e.clone();
        neg_l.set_block(1, 0, sigma1(inv_e.clone()));
        neg_l.set_block(2, 0, sigma2(inv_e));
        neg_l.set_block(3, 0, id3(two.clone() * a.clone()));
        neg_l.set_block(4, 0, id3(two.clone() * a.clone()));
        for b in 1..5 {
            neg_l.set_block(b, b, id3(-inv_e2.clone()));
        }
        let l = neg_l.neg();

        let two_a = two.clone() * a.clone();
        let mut sigma = DenseMatrix::zeros(N);
        sigma.set_block(0, 0, id3(one.clone()));
        sigma.set_block(0, 1, sigma1(e.clone()));
        sigma.set_block(0, 2, sigma2(e.clone()));
        sigma.set_block(0, 3, id3(two_a.clone() * e2.clone()));
        sigma.set_block(0, 4, id3(two_a.clone() * e2.clone()));
        sigma.set_block(1, 0, sigma1(e.clone()));
        sigma.set_block(1, 1, id3(two_a.clone() * lam2.clone() * e2.clone()));
        sigma.set_block(1, 3, sigma1(e3.clone()));
        sigma.set_block(2, 0, sigma2(e.clone()));
        sigma.set_block(2, 2, id3(two_a.clone() * lam2.clone() * e2.clone()));
        sigma.set_block(2, 4, sigma2(e3.clone()));
        sigma.set_block(3, 0, id3(two_a.clone() * e2.clone()));
        sigma.set_block(3, 1, sigma1(e3.clone()));
        sigma.set_block(3, 3, id3(two_a.clone() * e4.clone()));
        sigma.set_block(4, 0, id3(two_a.clone() * e2.clone()));
        sigma.set_block(4, 2, sigma2(e3.clone()));
        sigma.set_block(4, 4, id3(two_a.clone() * e4.clone()));

        let one_m4a = one.clone() - four.clone() * a.clone();
        let g = four.clone() * lam2.clone() * a.clone() * a.clone() - one.clone();
        let hm = two_a.clone() / (e2.clone() * g.clone());
        let hz = one.clone() / (two_a.clone() * lam2.clone() * e2.clone());
        let hh = (four.clone() * lam2.clone() * a.clone() * a.clone() - two_a.clone() * lam2.clone() + one.clone())
            / (e4.clone() * (-one_m4a.clone()) * g.clone());
        let h3 = (two_a.clone() - one.clone()) / (two_a.clone() * e4.clone() * (-one_m4a.clone()));
        let off = -(one.clone() / (e2.clone() * one_m4a.clone()));
        let s3 = -(one.clone() / (e3.clone() * g));
        let mut sigma_inv = DenseMatrix::zeros(N);
        sigma_inv.set_block(0, 0, id3(one.clone() / one_m4a.clone()));
        sigma_inv.set_block(0, 3, id3(off.clone()));
        sigma_inv.set_block(0, 4, id3(off.clone()));
        sigma_inv.set_block(3, 0, id3(off.clone()));
        sigma_inv.set_block(4, 0, id3(off));
        sigma_inv.set_block(1, 1, diag3(hm.clone(), hm.clone(), hz.clone()));
        sigma_inv.set_block(2, 2, diag3(hm.clone(), hz, hm));
        sigma_inv.set_block(1, 3, sigma1(s3.clone()));
        sigma_inv.set_block(3, 1, sigma1(s3.clone()));
        sigma_inv.set_block(2, 4, sigma2(s3.clone()));
        sigma_inv.set_block(4, 2, sigma2(s3));
        sigma_inv.set_block(3, 3, diag3(hh.clone(), hh.clone(), h3.clone()));
        sigma_inv.set_block(4, 4, diag3(hh.clone(), h3, hh));
        let kk = one.clone() / (e4 * one_m4a);
        sigma_inv.set_block(3, 4, id3(kk.clone()));
        sigma_inv.set_block(4, 3, id3(kk));

        Ok(Self {
            params: *params,
            c,
            c_inv,
            lambda1,
            lambda2,
            b1,
            b2,
            b1_product,
            b2_product,
            l,
            sigma,
            sigma_inv,
        })
    }

    pub fn neg_l_sigma(&self) -> DenseMatrix<T> {
        self.l.neg().mul(&self.sigma)
    }

    /// The dissipative 12x12 block of `-L Sigma` (everything but the first block row and column).
    pub fn l_tilde(&self) -> DenseMatrix<T> {
        self.neg_l_sigma().trailing(3)
    }

    /// `-L Sigma` as displayed in closed form, for comparison with the product.
    pub fn neg_l_sigma_closed(&self) -> DenseMatrix<T> {
        let p = &self.params;
        let e = T::lit(p.epsilon());
        let lam2 = T::lit(p.lambda() * p.lambda());
        let a = T::lit(p.a());
        let two_a = T::lit(2.0) * a.clone();
        let one = T::one();
        let s1s1 = diag3(one.clone(), one.clone(), T::zero());
        let s2s2 = diag3(one.clone(), T::zero(), one.clone());
        let mut s1s2 = id3(T::zero());
        s1s2[1][2] = one.clone();
        let mut s2s1 = id3(T::zero());
        s2s1[2][1] = one.clone();
        let d = -(two_a.clone() * lam2);
        let plus = |m: [[T; 3]; 3], s: T| -> [[T; 3]; 3] {
            std::array::from_fn(|r| std::array::from_fn(|c| m[r][c].clone() + if r == c { s.clone() } else { T::zero() }))
        };
        let c1 = (two_a.clone() - one.clone()) * e.clone();
        let c2 = two_a.clone() * e.clone();
        let kk = two_a.clone() * (two_a.clone() - one.clone()) * e.clone() * e.clone();
        let kh = two_a.clone() * two_a * e.clone() * e;
        let mut m = DenseMatrix::zeros(N);
        m.set_block(1, 1, plus(s1s1, d.clone()));
        m.set_block(1, 2, s1s2);
        m.set_block(1, 3, sigma1(c1.clone()));
        m.set_block(1, 4, sigma1(c2.clone()));
        m.set_block(2, 1, s2s1);
        m.set_block(2, 2, plus(s2s2, d));
        m.set_block(2, 3, sigma2(c2.clone()));
        m.set_block(2, 4, sigma2(c1.clone()));
        m.set_block(3, 1, sigma1(c1.clone()));
        m.set_block(3, 2, sigma2(c2.clone()));
        m.set_block(3, 3, id3(kk.clone()));
        m.set_block(3, 4, id3(kh.clone()));
        m.set_block(4, 1, sigma1(c2));
        m.set_block(4, 2, sigma2(c1));
        m.set_block(4, 3, id3(kh));
        m.set_block(4, 4, id3(kk));
        m
    }

    /// Gram matrix of the energy `(Sigma W~, W~)` in the coordinates
    /// `(w~, m~, xi~, k~, h~)`, where `W~ = (w~, eps^2 m~, ...)`.
    pub fn energy_gram(&self) -> DenseMatrix<T> {
        let e2 = T::lit(self.params.epsilon().powi(2));
        let d: Vec<T> = (0..N).map(|i| if i < 3 { T::one() } else { e2.clone() }).collect();
        self.sigma.congruence(&d)
    }

    /// `D Sigma D` with `D = diag(1, 1/eps, 1/eps, 1/eps^2, 1/eps^2)`; the result
    /// has no `eps` dependence and the same inertia as `Sigma`.
    pub fn sigma_equilibrated(&self) -> DenseMatrix<T> {
        let e = T::lit(self.params.epsilon());
        let d: Vec<T> = (0..N)
            .map(|i| match i / 3 {
                0 => T::one(),
                1 | 2 => T::one() / e.clone(),
                _ => T::one() / (e.clone() * e.clone()),
            })
            .collect();
        self.sigma.symmetrized().congruence(&d)
    }

    /// Symmetrized `L~` scaled by `diag(1, 1, 1/eps, 1/eps)`; `eps`-free, same inertia.
    pub fn l_tilde_equilibrated(&self) -> DenseMatrix<T> {
        let e = T::lit(self.params.epsilon());
        let d: Vec<T> = (0..12).map(|i| if i < 6 { T::one() } else { T::one() / e.clone() }).collect();
        self.l_tilde().symmetrized().congruence(&d)
    }

    pub fn to_tilde(&self, w: &[T; N]) -> [T; N] {
        SparseRows::new(&self.sigma_inv).apply(w)
    }

    pub fn from_tilde(&self, wt: &[T; N]) -> [T; N] {
        SparseRows::new(&self.sigma).apply(wt)
    }
}

/// `max_ij |(A B - target)_ij| / (|A| |B|)_ij`, zero where both sides vanish.
pub fn product_residual<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>, target: &DenseMatrix<T>) -> f64 {
    relative_residual(&a.mul(b).sub(target), &a.abs().mul(&b.abs()))
}

/// Componentwise ratio `|diff_ij| / scale_ij`, maximized; a nonzero entry over a
/// zero scale counts as infinite.
pub fn relative_residual<T: Scalar>(diff: &DenseMatrix<T>, scale: &DenseMatrix<T>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..diff.dim() {
        for j in 0..diff.dim() {
            let d = diff[(i, j)].magnitude();
            if d.is_zero() {
                continue;
            }
            let s = scale[(i, j)].as_f64();
            let r = if s > 0.0 { (d / scale[(i, j)].clone()).as_f64() } else { f64::INFINITY };
            worst = worst.max(r);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertCheck {
    pub name: String,
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CertCheck {
    pub fn new(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        Self { name: name.into(), residual, threshold, pass: residual <= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CertificationReport {
    pub checks: Vec<CertCheck>,
    /// Informational values such as raw eigenvalue extremes.
    pub extremes: Vec<(String, f64)>,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn merge(&mut self, other: CertificationReport) {
        self.checks.extend(other.checks);
        self.extremes.extend(other.extremes);
    }

    pub fn get(&self, name: &str) -> Option<&CertCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check: `name = residual threshold pass`.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{} = {:e} {:e} {}\n", c.name, c.residual, c.threshold, c.pass));
        }
        s
    }
}

impl fmt::Display for CertificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = if c.pass { "pass" } else { "FAIL" };
            writeln!(f, "{:<width$}  residual {:>13.6e}  threshold {:>13.6e}  {}", c.name, c.residual, c.threshold, tag)?;
        }
        for (k, v) in &self.extremes {
            writeln!(f, "{k:<width$}  {v:.6e}")?;
        }
        writeln!(f, "overall: {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

pub const IDENTITY_TOL: f64 = 1e-10;
pub const DEFINITENESS_MARGIN: f64 = 1e-12;

/// Closed-form identities and the conservative block structure of `-L Sigma`.
pub fn certify_symmetrizer<T: Scalar>(m: &StructuralMatrices<T>) -> CertificationReport {
    let exact_or = |tol: f64| if T::EXACT { 0.0 } else { tol };
    let id = DenseMatrix::identity(N);
    let mut checks = vec![
        CertCheck::new("c_times_c_inv", product_residual(&m.c, &m.c_inv, &id), exact_or(IDENTITY_TOL)),
        CertCheck::new("c_inv_times_c", product_residual(&m.c_inv, &m.c, &id), exact_or(IDENTITY_TOL)),
        CertCheck::new("sigma_times_sigma_inv", product_residual(&m.sigma, &m.sigma_inv, &id), exact_or(IDENTITY_TOL)),
        CertCheck::new("sigma_inv_times_sigma", product_residual(&m.sigma_inv, &m.sigma, &id), exact_or(IDENTITY_TOL)),
    ];
    for (name, b, lam, prod) in [
        ("b1_closed_vs_product", &m.b1, &m.lambda1, &m.b1_product),
        ("b2_closed_vs_product", &m.b2, &m.lambda2, &m.b2_product),
    ] {
        let scale = m.c.abs().mul(&lam.abs()).mul(&m.c_inv.abs());
        checks.push(CertCheck::new(name, relative_residual(&b.sub(prod), &scale), exact_or(IDENTITY_TOL)));
    }
    for (name, b) in [("b1_sigma_symmetric", &m.b1), ("b2_sigma_symmetric", &m.b2)] {
        let bs = b.mul(&m.sigma);
        let sbt = m.sigma.mul(&b.transpose());
        let scale = b.abs().mul(&m.sigma.abs()).add(&m.sigma.abs().mul(&b.transpose().abs()));
        checks.push(CertCheck::new(name, relative_residual(&bs.sub(&sbt), &scale), exact_or(IDENTITY_TOL)));
    }
    checks.push(CertCheck::new("sigma_symmetric", m.sigma.sub(&m.sigma.transpose()).max_abs().as_f64(), 0.0));
    let l_row = (0..3).flat_map(|i| (0..N).map(move |j| (i, j))).fold(0.0f64, |s, ij| s.max(m.l[ij].magnitude().as_f64()));
    checks.push(CertCheck::new("l_first_block_row_zero", l_row, 0.0));

    let nls = m.neg_l_sigma();
    let scale = m.l.abs().mul(&m.sigma.abs());
    let mut zero_block = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            if i < 3 || j < 3 {
                let d = nls[(i, j)].magnitude();
                if d.is_zero() {
                    continue;
                }
                let s = scale[(i, j)].as_f64();
                let r = if T::EXACT { d.as_f64() } else if s > 0.0 { d.as_f64() / s } else { f64::INFINITY };
                zero_block = zero_block.max(r);
            }
        }
    }
    checks.push(CertCheck::new("neg_l_sigma_first_block_zero", zero_block, exact_or(1e-14)));
    checks.push(CertCheck::new(
        "neg_l_sigma_closed_form",
        relative_residual(&nls.sub(&m.neg_l_sigma_closed()), &scale),
        exact_or(IDENTITY_TOL),
    ));
    let sym = nls.sub(&nls.transpose());
    checks.push(CertCheck::new(
        "neg_l_sigma_symmetric",
        relative_residual(&sym, &scale.add(&scale.transpose())),
        exact_or(IDENTITY_TOL),
    ));
    CertificationReport { checks, extremes: Vec::new() }
}

/// Sorted eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub struct Brackets {
    pub positive: Vec<(&'static str, f64, f64)>,
    pub negative: Vec<(&'static str, f64, f64)>,
}

/// The coefficients multiplying each squared component in the lower bound of
/// `(Sigma W~, W~)` and the upper bound of `(-L Sigma W~, W~)`. Each entry is
/// `(label, value, magnitude of its terms)`.
pub fn brackets(a: f64, lambda: f64, c: &StabilityConstants) -> Brackets {
    let l2a = 2.0 * lambda * lambda * a;
    let (d, mu, w) = (c.delta, c.mu, c.omega);
    let k = 2.0 * a * (4.0 * a - 1.0);
    Brackets {
        positive: vec![
            ("w1: 1 - 2/delta - 4a mu", 1.0 - 2.0 / d - 4.0 * a * mu, 1.0 + 2.0 / d + 4.0 * a * mu),
            ("w2,w3: 1 - 1/delta - 4a mu", 1.0 - 1.0 / d - 4.0 * a * mu, 1.0 + 1.0 / d + 4.0 * a * mu),
            ("m1,m2,xi1,xi3: 2 lambda^2 a - 2 delta", l2a - 2.0 * d, l2a + 2.0 * d),
            ("m3,xi2: 2 lambda^2 a", l2a, l2a),
            ("k1,k2,h1,h3: 2a - 2a/mu - 1/delta", 2.0 * a - 2.0 * a / mu - 1.0 / d, 2.0 * a + 2.0 * a / mu + 1.0 / d),
            ("k3,h2: 2a - 2a/mu", 2.0 * a - 2.0 * a / mu, 2.0 * a + 2.0 * a / mu),
        ],
        negative: vec![
            ("m1,xi1: -2 lambda^2 a + 1 + omega", -l2a + 1.0 + w, l2a + 1.0 + w),
            ("m2,xi3: -2 lambda^2 a + 2 + omega", -l2a + 2.0 + w, l2a + 2.0 + w),
            ("m3,xi2: -2 lambda^2 a", -l2a, l2a),
            ("k1,h1: 2a(4a-1) + 1/omega", k + 1.0 / w, k.abs() + 1.0 / w),
            ("k2,h3: 2a(4a-1) + (1-2a)/omega", k + (1.0 - 2.0 * a) / w, k.abs() + (1.0 - 2.0 * a) / w),
            ("k3,h2: 2a(4a-1) + 2a/omega", k + 2.0 * a / w, k.abs() + 2.0 * a / w),
        ],
    }
}

/// Positivity of `Sigma`, negativity of `L~`, and the sign of every bracket
/// coefficient under the supplied constants.
///
/// Spectra are taken on the equilibrated congruences, whose entries do not
/// depend on `eps`; by Sylvester's law of inertia the signs carry over to the
/// raw matrices, whose smallest eigenvalues fall below double precision
/// resolution once `eps` is small.
pub fn certify_definiteness<T: Scalar>(m: &StructuralMatrices<T>, consts: &StabilityConstants) -> CertificationReport {
    let mut report = CertificationReport::default();
    let s = symmetric_eigenvalues(&m.sigma_equilibrated().to_f64());
    let s_norm = s.iter().fold(0.0f64, |x, y| x.max(y.abs()));
    report.checks.push(CertCheck::new("sigma_min_eigenvalue", -s[0] / s_norm, -DEFINITENESS_MARGIN));
    let lt = symmetric_eigenvalues(&m.l_tilde_equilibrated().to_f64());
    let l_norm = lt.iter().fold(0.0f64, |x, y| x.max(y.abs()));
    report.checks.push(CertCheck::new("l_tilde_max_eigenvalue", lt[lt.len() - 1] / l_norm, -DEFINITENESS_MARGIN));

    let raw = symmetric_eigenvalues(&m.sigma.symmetrized().to_f64());
    report.extremes.push(("sigma_equilibrated_min".into(), s[0]));
    report.extremes.push(("sigma_equilibrated_max".into(), s[s.len() - 1]));
    report.extremes.push(("sigma_raw_min".into(), raw[0]));
    report.extremes.push(("sigma_raw_max".into(), raw[raw.len() - 1]));
    report.extremes.push(("l_tilde_equilibrated_max".into(), lt[lt.len() - 1]));
    report.extremes.push(("l_tilde_equilibrated_min".into(), lt[0]));

    let p = &m.params;
    let b = brackets(p.a(), p.lambda(), consts);
    for (i, (label, v, mag)) in b.positive.into_iter().enumerate() {
        report.extremes.push((format!("positive bracket {label}"), v));
        report.checks.push(CertCheck::new(format!("sigma_bracket_{}", i + 1), -v / mag, -DEFINITENESS_MARGIN));
    }
    for (i, (label, v, mag)) in b.negative.into_iter().enumerate() {
        report.extremes.push((format!("negative bracket {label}"), v));
        report.checks.push(CertCheck::new(format!("source_bracket_{}", i + 1), v / mag, -DEFINITENESS_MARGIN));
    }
    report
}
