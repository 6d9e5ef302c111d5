//! Analysis-side quantities: auxiliary and translated variables, weighted
//! energies, residuals of the limit equations, and the run monitor that
//! collects them into a [`DiagnosticSeries`].
//!
//! Evaluation happens in `f64` whatever the field scalar. All norms are
//! discrete `L2` norms weighted by the cell area.

use crate::error::{Error, Result};
use crate::kinetic_core::{flux_a1, flux_a2, moments, GridSpec, HydroField, KineticField, VectorField};
use crate::model_params::{ModelConsts, ModelParams};
use crate::scalar::{Real, Scalar};
use crate::structural_matrices::{SparseRows, StructuralMatrices, N};
use std::io::Write;

/// Second-order centered difference operators with periodic wrap.
pub mod stencil {
    use crate::kinetic_core::GridSpec;

    fn shifted(g: &GridSpec, v: &[f64], f: impl Fn(usize, usize, &dyn Fn(isize, isize) -> f64) -> f64) -> Vec<f64> {
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let mut out = Vec::with_capacity(v.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let at = |di: isize, dj: isize| {
                    let ii = (i as isize + di).rem_euclid(nx) as usize;
                    let jj = (j as isize + dj).rem_euclid(ny) as usize;
                    v[jj * g.nx + ii]
                };
                out.push(f(i, j, &at));
            }
        }
        out
    }

    pub fn dx(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h = 2.0 * g.dx();
        shifted(g, v, |_, _, at| (at(1, 0) - at(-1, 0)) / h)
    }

    pub fn dy(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h = 2.0 * g.dy();
        shifted(g, v, |_, _, at| (at(0, 1) - at(0, -1)) / h)
    }

    pub fn dxx(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h2 = g.dx() * g.dx();
        shifted(g, v, |_, _, at| (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)) / h2)
    }

    pub fn dyy(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h2 = g.dy() * g.dy();
        shifted(g, v, |_, _, at| (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)) / h2)
    }

    pub fn dxy(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h = 4.0 * g.dx() * g.dy();
        shifted(g, v, |_, _, at| (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / h)
    }

    pub fn laplacian(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        dxx(g, v).iter().zip(dyy(g, v)).map(|(a, b)| a + b).collect()
    }

    /// Fourth-order centred first derivative along `x`.
    pub fn dx4(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h = 12.0 * g.dx();
        shifted(g, v, |_, _, at| (-at(2, 0) + 8.0 * at(1, 0) - 8.0 * at(-1, 0) + at(-2, 0)) / h)
    }

    pub fn dy4(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let h = 12.0 * g.dy();
        shifted(g, v, |_, _, at| (-at(0, 2) + 8.0 * at(0, 1) - 8.0 * at(0, -1) + at(0, -2)) / h)
    }

    /// Fourth-order centred Laplacian.
    pub fn laplacian4(g: &GridSpec, v: &[f64]) -> Vec<f64> {
        let (hx, hy) = (12.0 * g.dx() * g.dx(), 12.0 * g.dy() * g.dy());
        shifted(g, v, |_, _, at| {
            (-at(2, 0) + 16.0 * at(1, 0) - 30.0 * at(0, 0) + 16.0 * at(-1, 0) - at(-2, 0)) / hx
                + (-at(0, 2) + 16.0 * at(0, 1) - 30.0 * at(0, 0) + 16.0 * at(0, -1) - at(0, -2)) / hy
        })
    }
}

pub fn norm_sq(g: &GridSpec, v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() * g.cell_area()
}

pub fn norm(g: &GridSpec, v: &[f64]) -> f64 {
    norm_sq(g, v).sqrt()
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

pub const W: usize = 0;
pub const M: usize = 1;
pub const XI: usize = 2;
pub const K: usize = 3;
pub const H: usize = 4;

/// Planes of `(w, m, xi, k, h)`; plane `3 g + c` is component `c` of group `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVariables<T> {
    pub grid: GridSpec,
    pub data: Vec<T>,
}

/// Same layout as [`AuxVariables`] with `w`, `k`, `h` shifted by the rest state.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedState<T> {
    pub grid: GridSpec,
    pub data: Vec<T>,
}

fn plane_of<T>(data: &[T], n: usize, g: usize, c: usize) -> &[T] {
    &data[(3 * g + c) * n..(3 * g + c + 1) * n]
}

impl<T: Real> AuxVariables<T> {
    pub fn plane(&self, g: usize, c: usize) -> &[T] {
        plane_of(&self.data, self.grid.cells(), g, c)
    }
}

impl<T: Real> TranslatedState<T> {
    pub fn plane(&self, g: usize, c: usize) -> &[T] {
        plane_of(&self.data, self.grid.cells(), g, c)
    }

    /// `W = (w*, eps^2 m, eps^2 xi, eps^2 k*, eps^2 h*)` at cell `k`.
    pub fn assemble_w(&self, cell: usize, eps2: T) -> [T; N] {
        let n = self.grid.cells();
        std::array::from_fn(|p| {
            let v = self.data[p * n + cell];
            if p < 3 {
                v
            } else {
                eps2 * v
            }
        })
    }
}

pub fn aux_variables<T: Real>(field: &KineticField<T>, p: &ModelConsts<T>) -> AuxVariables<T> {
    let n = field.grid.cells();
    let speed = p.lambda / p.epsilon;
    let mut data = vec![T::zero(); 15 * n];
    for k in 0..n {
        let f = field.cell(k);
        let w = moments(&f);
        for c in 0..3 {
            data[(3 * W + c) * n + k] = w[c];
            data[(3 * M + c) * n + k] = speed * (f[0][c] - f[2][c]);
            data[(3 * XI + c) * n + k] = speed * (f[1][c] - f[3][c]);
            data[(3 * K + c) * n + k] = f[0][c] + f[2][c];
            data[(3 * H + c) * n + k] = f[1][c] + f[3][c];
        }
    }
    AuxVariables { grid: field.grid, data }
}

/// Inverse of [`aux_variables`]: `f1 = (k + eps m/lambda)/2`, `f5 = w - k - h`.
pub fn kinetic_from_aux<T: Real>(aux: &AuxVariables<T>, p: &ModelConsts<T>) -> KineticField<T> {
    let n = aux.grid.cells();
    let half = T::lit(0.5);
    let inv_speed = p.epsilon / p.lambda;
    let mut field = KineticField::zeros(aux.grid);
    for k in 0..n {
        let at = |g: usize, c: usize| aux.data[(3 * g + c) * n + k];
        let f = std::array::from_fn(|l| {
            std::array::from_fn(|c| match l {
                0 => half * (at(K, c) + inv_speed * at(M, c)),
                1 => half * (at(H, c) + inv_speed * at(XI, c)),
                2 => half * (at(K, c) - inv_speed * at(M, c)),
                3 => half * (at(H, c) - inv_speed * at(XI, c)),
                _ => at(W, c) - at(K, c) - at(H, c),
            })
        });
        field.set_cell(k, &f);
    }
    field
}

fn shift_rest<T: Real>(data: &mut [T], n: usize, p: &ModelConsts<T>, sign: T) {
    let two_a_rho = T::lit(2.0) * p.a * p.rho_bar;
    for (g, d) in [(W, p.rho_bar), (K, two_a_rho), (H, two_a_rho)] {
        for v in &mut data[3 * g * n..(3 * g + 1) * n] {
            *v = *v + sign * d;
        }
    }
}

pub fn translate<T: Real>(aux: &AuxVariables<T>, p: &ModelConsts<T>) -> TranslatedState<T> {
    let mut data = aux.data.clone();
    shift_rest(&mut data, aux.grid.cells(), p, -T::one());
    TranslatedState { grid: aux.grid, data }
}

pub fn untranslate<T: Real>(s: &TranslatedState<T>, p: &ModelConsts<T>) -> AuxVariables<T> {
    let mut data = s.data.clone();
    shift_rest(&mut data, s.grid.cells(), p, T::one());
    AuxVariables { grid: s.grid, data }
}

/// Weighted energies at one discrete derivative order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub e_w: f64,
    pub e_mxi: f64,
    pub e_kh: f64,
    pub d_mxi: f64,
    pub d_kh: f64,
}

impl EnergyBreakdown {
    pub fn energy(&self) -> f64 {
        self.e_w + self.e_mxi + self.e_kh
    }

    pub fn dissipation(&self) -> f64 {
        self.d_mxi + self.d_kh
    }

    pub fn min_component(&self) -> f64 {
        [self.e_w, self.e_mxi, self.e_kh, self.d_mxi, self.d_kh].into_iter().fold(f64::INFINITY, f64::min)
    }
}

fn tilde_planes<T: Real>(state: &TranslatedState<T>, m: &StructuralMatrices<T>) -> Vec<Vec<f64>> {
    let n = state.grid.cells();
    let sinv = SparseRows::new(&m.sigma_inv);
    let e2 = T::lit(m.params.epsilon().powi(2));
    let mut planes = vec![vec![0.0; n]; N];
    for k in 0..n {
        let wt = sinv.apply(&state.assemble_w(k, e2));
        for (p, v) in wt.iter().enumerate() {
            planes[p][k] = v.as_f64();
        }
    }
    planes
}

type StencilOp = fn(&GridSpec, &[f64]) -> Vec<f64>;

/// `E_w = |w~|^2`, `E_mxi = eps^6 (|m~|^2 + |xi~|^2)`, `E_kh = eps^8 (|k~|^2 + |h~|^2)`,
/// `D_mxi = eps^4 (...)`, `D_kh = eps^6 (...)`, with `W~ = Sigma^-1 W` and
/// `W~ = (w~, eps^2 m~, eps^2 xi~, eps^2 k~, eps^2 h~)`.
///
/// Order `s` replaces every squared norm by the sum over the `s`-th order
/// difference quotients (`dx, dy` for 1; `dxx, dxy, dyy` for 2).
pub fn tilde_energy<T: Real>(state: &TranslatedState<T>, m: &StructuralMatrices<T>, s: usize) -> Result<EnergyBreakdown> {
    let g = state.grid;
    let ops: Vec<StencilOp> = match s {
        0 => vec![|_, v| v.to_vec()],
        1 => vec![stencil::dx, stencil::dy],
        2 => vec![stencil::dxx, stencil::dxy, stencil::dyy],
        _ => return Err(Error::Domain(format!("derivative order must be 0, 1 or 2, got {s}"))),
    };
    let planes = tilde_planes(state, m);
    let group = |grp: usize| -> f64 {
        (0..3).map(|c| ops.iter().map(|op| norm_sq(&g, &op(&g, &planes[3 * grp + c]))).sum::<f64>()).sum()
    };
    let e = m.params.epsilon();
    let e4 = e.powi(4);
    let mt = (group(M) + group(XI)) / e4;
    let kt = (group(K) + group(H)) / e4;
    Ok(EnergyBreakdown {
        e_w: group(W),
        e_mxi: e.powi(6) * mt,
        e_kh: e.powi(8) * kt,
        d_mxi: e4 * mt,
        d_kh: e.powi(6) * kt,
    })
}

/// `(Sigma W~, W~)` evaluated as `sum W . W~` and directly as `sum W~^T Sigma W~`.
pub fn quadratic_form<T: Real>(state: &TranslatedState<T>, m: &StructuralMatrices<T>) -> (f64, f64) {
    let n = state.grid.cells();
    let sinv = SparseRows::new(&m.sigma_inv);
    let sig = SparseRows::new(&m.sigma);
    let e2 = T::lit(m.params.epsilon().powi(2));
    let (mut via, mut direct) = (0.0, 0.0);
    for k in 0..n {
        let w = state.assemble_w(k, e2);
        let wt = sinv.apply(&w);
        let swt = sig.apply(&wt);
        for p in 0..N {
            via += w[p].as_f64() * wt[p].as_f64();
            direct += wt[p].as_f64() * swt[p].as_f64();
        }
    }
    let area = state.grid.cell_area();
    (via * area, direct * area)
}

/// Residual norms of the limit equations at one interior time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    /// `|d_t (rho - rho_bar) + div(rho u) - nu lap(rho - rho_bar)|`.
    pub mass: f64,
    /// `|d_t (rho u) + div(rho u (x) u) + grad(rho - rho_bar)/eps^2 - nu lap(rho u)|`.
    pub momentum: f64,
    pub dt_rho_over_eps: f64,
    pub dt_momentum: f64,
}

struct HydroPlanes {
    rho_dev: Vec<f64>,
    qx: Vec<f64>,
    qy: Vec<f64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
}

impl HydroPlanes {
    fn new<T: Real>(h: &HydroField<T>, rho_bar: f64) -> Self {
        let rho = to_f64(&h.rho);
        let ux = to_f64(&h.u.x);
        let uy = to_f64(&h.u.y);
        Self {
            rho_dev: rho.iter().map(|r| r - rho_bar).collect(),
            qx: rho.iter().zip(&ux).map(|(r, u)| r * u).collect(),
            qy: rho.iter().zip(&uy).map(|(r, u)| r * u).collect(),
            ux,
            uy,
        }
    }
}

/// Residuals at the middle of three consecutive snapshots `dt` apart; time
/// derivatives by centered differences, space derivatives by the fourth-order
/// centred stencils. The second-order ones carry a truncation floor of order
/// `dx^2` on 64^2 grids that hides the model residual.
pub fn ns_residual<T: Real>(
    prev: &HydroField<T>,
    cur: &HydroField<T>,
    next: &HydroField<T>,
    dt: f64,
    params: &ModelParams,
) -> ResidualNorms {
    let g = cur.grid;
    let rb = params.rho_bar();
    let (a, b, c) = (HydroPlanes::new(prev, rb), HydroPlanes::new(cur, rb), HydroPlanes::new(next, rb));
    let ddt = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| (q - p) / (2.0 * dt)).collect() };
    let nu = params.nu();
    let inv_e2 = 1.0 / params.epsilon().powi(2);

    let drho = ddt(&a.rho_dev, &c.rho_dev);
    let dqx = ddt(&a.qx, &c.qx);
    let dqy = ddt(&a.qy, &c.qy);
    let mul = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p * q).collect() };
    let qxux = mul(&b.qx, &b.ux);
    let qxuy = mul(&b.qx, &b.uy);
    let qyuy = mul(&b.qy, &b.uy);

    let div_q = sum2(&stencil::dx4(&g, &b.qx), &stencil::dy4(&g, &b.qy));
    let lap_rho = stencil::laplacian4(&g, &b.rho_dev);
    let mass: Vec<f64> = (0..g.cells()).map(|k| drho[k] + div_q[k] - nu * lap_rho[k]).collect();

    let gx = stencil::dx4(&g, &b.rho_dev);
    let gy = stencil::dy4(&g, &b.rho_dev);
    let fx = sum2(&stencil::dx4(&g, &qxux), &stencil::dy4(&g, &qxuy));
    let fy = sum2(&stencil::dx4(&g, &qxuy), &stencil::dy4(&g, &qyuy));
    let lqx = stencil::laplacian4(&g, &b.qx);
    let lqy = stencil::laplacian4(&g, &b.qy);
    let rx: Vec<f64> = (0..g.cells()).map(|k| dqx[k] + fx[k] + gx[k] * inv_e2 - nu * lqx[k]).collect();
    let ry: Vec<f64> = (0..g.cells()).map(|k| dqy[k] + fy[k] + gy[k] * inv_e2 - nu * lqy[k]).collect();

    ResidualNorms {
        mass: norm(&g, &mass),
        momentum: (norm_sq(&g, &rx) + norm_sq(&g, &ry)).sqrt(),
        dt_rho_over_eps: norm(&g, &drho) / params.epsilon(),
        dt_momentum: (norm_sq(&g, &dqx) + norm_sq(&g, &dqy)).sqrt(),
    }
}

fn sum2(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// `|m - A1(w)/eps + nu dx w*| + |xi - A2(w)/eps + nu dy w*|`.
pub fn chapman_enskog_residual<T: Real>(aux: &AuxVariables<T>, params: &ModelParams) -> Result<f64> {
    let g = aux.grid;
    let n = g.cells();
    let e = params.epsilon();
    let nu = params.nu();
    let rb = params.rho_bar();
    let w: [Vec<f64>; 3] = std::array::from_fn(|c| to_f64(aux.plane(W, c)));
    let mut rx = vec![vec![0.0; n]; 3];
    let mut ry = vec![vec![0.0; n]; 3];
    for k in 0..n {
        let wk = [w[0][k], w[1][k], w[2][k]];
        let a1 = flux_a1(&wk, &rb).map_err(|err| crate::kinetic_core::with_cell(err, k % g.nx, k / g.nx))?;
        let a2 = flux_a2(&wk, &rb).map_err(|err| crate::kinetic_core::with_cell(err, k % g.nx, k / g.nx))?;
        for c in 0..3 {
            rx[c][k] = aux.plane(M, c)[k].as_f64() - a1[c] / e;
            ry[c][k] = aux.plane(XI, c)[k].as_f64() - a2[c] / e;
        }
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for c in 0..3 {
        let gx = stencil::dx(&g, &w[c]);
        let gy = stencil::dy(&g, &w[c]);
        let vx: Vec<f64> = rx[c].iter().zip(&gx).map(|(r, d)| r + nu * d).collect();
        let vy: Vec<f64> = ry[c].iter().zip(&gy).map(|(r, d)| r + nu * d).collect();
        sx += norm_sq(&g, &vx);
        sy += norm_sq(&g, &vy);
    }
    Ok(sx.sqrt() + sy.sqrt())
}

pub fn divergence_norm<T: Real>(u: &VectorField<T>) -> f64 {
    let g = u.grid;
    norm(&g, &sum2(&stencil::dx(&g, &to_f64(&u.x)), &stencil::dy(&g, &to_f64(&u.y))))
}

/// `|(p - mean p) - (q - mean q)| / |q - mean q|`; the absolute difference
/// when the reference is constant.
pub fn pressure_error<T: Real>(g: &GridSpec, p_est: &[T], p_ref: &[T]) -> f64 {
    let centered = |v: &[T]| -> Vec<f64> {
        let v = to_f64(v);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - mean).collect()
    };
    let p = centered(p_est);
    let q = centered(p_ref);
    let diff: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a - b).collect();
    let scale = norm(g, &q);
    if scale > 0.0 {
        norm(g, &diff) / scale
    } else {
        norm(g, &diff)
    }
}

pub fn velocity_error<T: Real>(u: &VectorField<T>, reference: &VectorField<T>) -> f64 {
    let g = u.grid;
    let dx: Vec<f64> = u.x.iter().zip(&reference.x).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
    let dy: Vec<f64> = u.y.iter().zip(&reference.y).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
    (norm_sq(&g, &dx) + norm_sq(&g, &dy)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 2],
    pub rho_min: f64,
    pub rho_max: f64,
    pub energy: EnergyBreakdown,
    pub divergence: f64,
    pub ce_residual: f64,
    pub residual: Option<ResidualNorms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSeries {
    pub epsilon: f64,
    pub energy_order: usize,
    /// `|u0|^2` of the initial velocity, the data term of the energy inequality.
    pub u0_norm_sq: f64,
    pub records: Vec<DiagnosticRecord>,
}

pub const SERIES_COLUMNS: [&str; 18] = [
    "step",
    "t",
    "mass",
    "momentum_x",
    "momentum_y",
    "rho_min",
    "rho_max",
    "e_w",
    "e_mxi",
    "e_kh",
    "d_mxi",
    "d_kh",
    "divergence",
    "ce_residual",
    "mass_residual",
    "momentum_residual",
    "dt_rho_over_eps",
    "dt_momentum",
];

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

impl DiagnosticSeries {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SERIES_COLUMNS)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string()];
            row.extend(
                [
                    r.t,
                    r.mass,
                    r.momentum[0],
                    r.momentum[1],
                    r.rho_min,
                    r.rho_max,
                    r.energy.e_w,
                    r.energy.e_mxi,
                    r.energy.e_kh,
                    r.energy.d_mxi,
                    r.energy.d_kh,
                    r.divergence,
                    r.ce_residual,
                ]
                .map(fmt_f64),
            );
            match r.residual {
                Some(res) => row.extend([res.mass, res.momentum, res.dt_rho_over_eps, res.dt_momentum].map(fmt_f64)),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            w.write_record(&row)?;
        }
        w.flush()
    }

    /// Root mean square over the records that carry residuals.
    pub fn residual_rms(&self) -> Option<ResidualNorms> {
        let rs: Vec<ResidualNorms> = self.records.iter().filter_map(|r| r.residual).collect();
        if rs.is_empty() {
            return None;
        }
        let rms = |f: fn(&ResidualNorms) -> f64| (rs.iter().map(|r| f(r).powi(2)).sum::<f64>() / rs.len() as f64).sqrt();
        Some(ResidualNorms {
            mass: rms(|r| r.mass),
            momentum: rms(|r| r.momentum),
            dt_rho_over_eps: rms(|r| r.dt_rho_over_eps),
            dt_momentum: rms(|r| r.dt_momentum),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    /// Smallest `c` with `E(t) + int_0^t D <= c (eps^2 |u0|^2 + int_0^t E)` at every sample.
    pub c: f64,
    pub degenerate: bool,
    /// `E(T) + int_0^T D`.
    pub lhs_final: f64,
    pub integral_e: f64,
    pub integral_d: f64,
    pub min_component: f64,
    pub min_dissipation: f64,
}

/// Fits the constant of the zero order energy inequality along a run, using
/// the trapezoid rule on the recorded times.
pub fn gronwall_monitor(series: &DiagnosticSeries) -> Result<GronwallReport> {
    let r = &series.records;
    if r.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples, got {}", r.len())));
    }
    let data = series.epsilon.powi(2) * series.u0_norm_sq;
    let (mut ie, mut id) = (0.0, 0.0);
    let mut c = 0.0f64;
    let mut constrained = false;
    let mut lhs = 0.0;
    for k in 0..r.len() {
        if k > 0 {
            let h = r[k].t - r[k - 1].t;
            ie += 0.5 * h * (r[k].energy.energy() + r[k - 1].energy.energy());
            id += 0.5 * h * (r[k].energy.dissipation() + r[k - 1].energy.dissipation());
        }
        lhs = r[k].energy.energy() + id;
        let rhs = data + ie;
        if rhs > 0.0 {
            c = c.max(lhs / rhs);
            constrained = constrained || lhs > 0.0;
        } else if lhs > 0.0 {
            c = f64::INFINITY;
            constrained = true;
        }
    }
    Ok(GronwallReport {
        c,
        degenerate: !constrained,
        lhs_final: lhs,
        integral_e: ie,
        integral_d: id,
        min_component: r.iter().map(|x| x.energy.min_component()).fold(f64::INFINITY, f64::min),
        min_dissipation: r.iter().map(|x| x.energy.dissipation()).fold(f64::INFINITY, f64::min),
    })
}

/// When and what the monitor records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSchedule {
    /// Record every `interval` steps; the final step is always recorded.
    pub interval: usize,
    pub energy_order: usize,
    pub residuals: bool,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self { interval: 1, energy_order: 0, residuals: true }
    }
}

/// Collects a [`DiagnosticSeries`] while a run advances.
///
/// Residuals need the neighbours of a probe step, so they are attached one
/// step late. They are skipped for centres whose stencil reaches back before
/// `first_valid_step`.
pub struct Monitor<T> {
    params: ModelParams,
    consts: ModelConsts<T>,
    matrices: StructuralMatrices<T>,
    schedule: ProbeSchedule,
    dt: f64,
    n_steps: usize,
    first_valid_step: usize,
    history: Vec<(usize, HydroField<T>)>,
    series: DiagnosticSeries,
}

impl<T: Real> Monitor<T> {
    pub fn new(params: &ModelParams, schedule: ProbeSchedule, dt: f64, n_steps: usize, first_valid_step: usize) -> Result<Self> {
        if schedule.interval == 0 {
            return Err(Error::Domain("probe interval must be at least 1".into()));
        }
        if schedule.energy_order > 2 {
            return Err(Error::Domain("energy derivative order must be 0, 1 or 2".into()));
        }
        Ok(Self {
            params: *params,
            consts: params.cast(),
            matrices: StructuralMatrices::build(params)?,
            schedule,
            dt,
            n_steps,
            first_valid_step,
            history: Vec::with_capacity(3),
            series: DiagnosticSeries {
                epsilon: params.epsilon(),
                energy_order: schedule.energy_order,
                u0_norm_sq: 0.0,
                records: Vec::new(),
            },
        })
    }

    fn is_probe(&self, step: usize) -> bool {
        step.is_multiple_of(self.schedule.interval) || step == self.n_steps
    }

    pub fn observe(&mut self, step: usize, t: f64, field: &KineticField<T>) -> Result<()> {
        let hydro = field.moment_field().hydro(&self.consts)?;
        let g = field.grid;
        if step == 0 {
            self.series.u0_norm_sq = norm_sq(&g, &to_f64(&hydro.u.x)) + norm_sq(&g, &to_f64(&hydro.u.y));
        }
        if self.is_probe(step) {
            let record = self.record(step, t, field, &hydro)?;
            self.series.records.push(record);
        }
        if self.schedule.residuals {
            self.history.push((step, hydro));
            if self.history.len() > 3 {
                self.history.remove(0);
            }
            if self.history.len() == 3 {
                let centre = self.history[1].0;
                if self.is_probe(centre) && centre > self.first_valid_step {
                    let res = ns_residual(&self.history[0].1, &self.history[1].1, &self.history[2].1, self.dt, &self.params);
                    if let Some(r) = self.series.records.iter_mut().rev().find(|r| r.step == centre) {
                        r.residual = Some(res);
                    }
                }
            }
        }
        Ok(())
    }

    fn record(&self, step: usize, t: f64, field: &KineticField<T>, hydro: &HydroField<T>) -> Result<DiagnosticRecord> {
        let g = field.grid;
        let area = g.cell_area();
        let aux = aux_variables(field, &self.consts);
        let state = translate(&aux, &self.consts);
        let sum = |v: &[T]| v.iter().map(|x| x.as_f64()).sum::<f64>() * area;
        let rho = to_f64(&hydro.rho);
        Ok(DiagnosticRecord {
            step,
            t,
            mass: sum(aux.plane(W, 0)),
            momentum: [sum(aux.plane(W, 1)), sum(aux.plane(W, 2))],
            rho_min: rho.iter().copied().fold(f64::INFINITY, f64::min),
            rho_max: rho.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            energy: tilde_energy(&state, &self.matrices, self.schedule.energy_order)?,
            divergence: divergence_norm(&hydro.u),
            ce_residual: chapman_enskog_residual(&aux, &self.params)?,
            residual: None,
        })
    }

    pub fn series(&self) -> &DiagnosticSeries {
        &self.series
    }

    pub fn finish(self) -> DiagnosticSeries {
        self.series
    }
}
