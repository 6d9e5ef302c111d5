//! Pointwise kinetic algebra and the grid containers built on it.
//!
//! A moment vector is `w = (rho, q1, q2)` with scaled momentum `q = eps rho u`.
//! A kinetic vector holds the five 3-component distributions `f1..f5`; `f1`
//! and `f3` move along `+x` and `-x`, `f2` and `f4` along `+y` and `-y`, `f5`
//! is at rest.

use crate::error::{Error, Result};
use crate::model_params::ModelConsts;
use crate::scalar::{Real, Scalar};
use rayon::prelude::*;
use std::f64::consts::PI;

pub type Vec3<T> = [T; 3];
pub type KineticVector<T> = [Vec3<T>; 5];

fn collapse<T: Scalar>(rho: &T, rho_bar: &T) -> Result<()> {
    let threshold = rho_bar.clone() / T::lit(2.0);
    if *rho > threshold {
        Ok(())
    } else {
        Err(Error::DensityCollapse { cell: None, rho: rho.as_f64(), threshold: threshold.as_f64() })
    }
}

/// `A1(w) = (q1, q1^2/rho + rho - rho_bar, q1 q2/rho)`.
pub fn flux_a1<T: Scalar>(w: &Vec3<T>, rho_bar: &T) -> Result<Vec3<T>> {
    collapse(&w[0], rho_bar)?;
    let [rho, q1, q2] = w.clone();
    Ok([
        q1.clone(),
        q1.clone() * q1.clone() / rho.clone() + (rho.clone() - rho_bar.clone()),
        q1 * q2 / rho,
    ])
}

/// `A2(w) = (q2, q1 q2/rho, q2^2/rho + rho - rho_bar)`.
pub fn flux_a2<T: Scalar>(w: &Vec3<T>, rho_bar: &T) -> Result<Vec3<T>> {
    collapse(&w[0], rho_bar)?;
    let [rho, q1, q2] = w.clone();
    Ok([
        q2.clone(),
        q1 * q2.clone() / rho.clone(),
        q2.clone() * q2 / rho.clone() + (rho - rho_bar.clone()),
    ])
}

pub fn maxwellians<T: Scalar>(w: &Vec3<T>, p: &ModelConsts<T>) -> Result<KineticVector<T>> {
    let a1 = flux_a1(w, &p.rho_bar)?;
    let a2 = flux_a2(w, &p.rho_bar)?;
    let two_lambda = p.lambda.clone() + p.lambda.clone();
    let rest = T::one() - T::lit(4.0) * p.a.clone();
    let aw = |c: usize| p.a.clone() * w[c].clone();
    let m = |sign: bool, flux: &Vec3<T>| -> Vec3<T> {
        std::array::from_fn(|c| {
            let d = flux[c].clone() / two_lambda.clone();
            if sign {
                aw(c) + d
            } else {
                aw(c) - d
            }
        })
    };
    Ok([m(true, &a1), m(true, &a2), m(false, &a1), m(false, &a2), std::array::from_fn(|c| rest.clone() * w[c].clone())])
}

/// Componentwise `((f1 + f3) + (f2 + f4)) + f5`. The grouping is invariant
/// under the `x <-> y` relabeling, which keeps mirrored runs bitwise mirrored.
pub fn moments<T: Scalar>(f: &KineticVector<T>) -> Vec3<T> {
    std::array::from_fn(|c| {
        (f[0][c].clone() + f[2][c].clone()) + (f[1][c].clone() + f[3][c].clone()) + f[4][c].clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hydro<T> {
    pub rho: T,
    pub u: [T; 2],
    pub p_est: T,
}

/// Density, velocity `q/(eps rho)` and the pressure estimate `(rho - rho_bar)/eps^2`.
pub fn hydrodynamics<T: Scalar>(w: &Vec3<T>, p: &ModelConsts<T>) -> Result<Hydro<T>> {
    collapse(&w[0], &p.rho_bar)?;
    let er = p.epsilon.clone() * w[0].clone();
    Ok(Hydro {
        rho: w[0].clone(),
        u: [w[1].clone() / er.clone(), w[2].clone() / er],
        p_est: (w[0].clone() - p.rho_bar.clone()) / (p.epsilon.clone() * p.epsilon.clone()),
    })
}

/// Uniform periodic grid on `[0, 2 pi)^2`. Cell `(i, j)` is centred at
/// `((i + 1/2) dx, (j + 1/2) dy)`; planes are stored row-major with `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 4 || ny < 4 || !nx.is_multiple_of(2) || !ny.is_multiple_of(2) {
            return Err(Error::Domain(format!("grid must be even and at least 4 per side, got {nx}x{ny}")));
        }
        Ok(Self { nx, ny })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn area(&self) -> f64 {
        4.0 * PI * PI
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.dx(), (j as f64 + 0.5) * self.dy())
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }
}

/// Two planes of a vector quantity on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    pub grid: GridSpec,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Vec::with_capacity(grid.cells());
        let mut y = Vec::with_capacity(grid.cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (px, py) = grid.center(i, j);
                let (ux, uy) = f(px, py);
                x.push(T::lit(ux));
                y.push(T::lit(uy));
            }
        }
        Self { grid, x, y }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, x: vec![T::zero(); grid.cells()], y: vec![T::zero(); grid.cells()] }
    }
}

pub const PLANES: usize = 15;

/// Fifteen contiguous planes: plane `3 l + c` holds component `c` of `f_{l+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticField<T> {
    pub grid: GridSpec,
    pub data: Vec<T>,
}

impl<T: Real> KineticField<T> {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, data: vec![T::zero(); PLANES * grid.cells()] }
    }

    pub fn plane(&self, l: usize, c: usize) -> &[T] {
        let n = self.grid.cells();
        &self.data[(3 * l + c) * n..(3 * l + c + 1) * n]
    }

    pub fn plane_mut(&mut self, l: usize, c: usize) -> &mut [T] {
        let n = self.grid.cells();
        &mut self.data[(3 * l + c) * n..(3 * l + c + 1) * n]
    }

    pub fn cell(&self, k: usize) -> KineticVector<T> {
        let n = self.grid.cells();
        std::array::from_fn(|l| std::array::from_fn(|c| self.data[(3 * l + c) * n + k]))
    }

    pub fn set_cell(&mut self, k: usize, f: &KineticVector<T>) {
        let n = self.grid.cells();
        for (l, fl) in f.iter().enumerate() {
            for (c, v) in fl.iter().enumerate() {
                self.data[(3 * l + c) * n + k] = *v;
            }
        }
    }

    /// Mutable row slices of all fifteen planes, grouped by grid row, so rows
    /// can be processed independently.
    pub fn rows_mut(&mut self) -> Vec<Vec<&mut [T]>> {
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        let mut rows: Vec<Vec<&mut [T]>> = (0..ny).map(|_| Vec::with_capacity(PLANES)).collect();
        for plane in self.data.chunks_mut(self.grid.cells()) {
            for (j, row) in plane.chunks_mut(nx).enumerate() {
                rows[j].push(row);
            }
        }
        rows
    }

    /// Applies `f` to every cell, in parallel over rows.
    pub fn try_map_cells<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&KineticVector<T>) -> Result<KineticVector<T>> + Sync,
    {
        let mut rows = self.rows_mut();
        rows.par_iter_mut().enumerate().try_for_each(|(j, row)| {
            for i in 0..row[0].len() {
                let cell: KineticVector<T> = std::array::from_fn(|l| std::array::from_fn(|c| row[3 * l + c][i]));
                let out = f(&cell).map_err(|e| with_cell(e, i, j))?;
                for l in 0..5 {
                    for c in 0..3 {
                        row[3 * l + c][i] = out[l][c];
                    }
                }
            }
            Ok(())
        })
    }

    pub fn moment_field(&self) -> MomentField<T> {
        let n = self.grid.cells();
        let mut w: [Vec<T>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
        for k in 0..n {
            let m = moments(&self.cell(k));
            for c in 0..3 {
                w[c].push(m[c]);
            }
        }
        MomentField { grid: self.grid, w }
    }
}

pub(crate) fn with_cell(e: Error, i: usize, j: usize) -> Error {
    match e {
        Error::DensityCollapse { rho, threshold, .. } => Error::DensityCollapse { cell: Some((i, j)), rho, threshold },
        other => other,
    }
}

/// Untranslated moments `w = (rho, q1, q2)` per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField<T> {
    pub grid: GridSpec,
    pub w: [Vec<T>; 3],
}

/// Density, velocity and pressure estimate planes.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroField<T> {
    pub grid: GridSpec,
    pub rho: Vec<T>,
    pub u: VectorField<T>,
    pub p_est: Vec<T>,
}

impl<T: Real> MomentField<T> {
    pub fn hydro(&self, p: &ModelConsts<T>) -> Result<HydroField<T>> {
        let n = self.grid.cells();
        let mut rho = Vec::with_capacity(n);
        let mut u = VectorField::zeros(self.grid);
        let mut p_est = Vec::with_capacity(n);
        for k in 0..n {
            let h = hydrodynamics(&[self.w[0][k], self.w[1][k], self.w[2][k]], p)
                .map_err(|e| with_cell(e, k % self.grid.nx, k / self.grid.nx))?;
            rho.push(h.rho);
            u.x[k] = h.u[0];
            u.y[k] = h.u[1];
            p_est.push(h.p_est);
        }
        Ok(HydroField { grid: self.grid, rho, u, p_est })
    }
}

/// Equilibrium data `f_l = M_l(rho_bar, eps rho_bar u0)`.
pub fn equilibrium_init<T: Real>(u0: &VectorField<T>, p: &ModelConsts<T>, grid: GridSpec) -> Result<KineticField<T>> {
    if u0.grid != grid {
        return Err(Error::Domain("velocity field and grid disagree".into()));
    }
    let mut field = KineticField::zeros(grid);
    let er = p.epsilon * p.rho_bar;
    for k in 0..grid.cells() {
        let w = [p.rho_bar, er * u0.x[k], er * u0.y[k]];
        let m = maxwellians(&w, p).map_err(|e| with_cell(e, k % grid.nx, k / grid.nx))?;
        field.set_cell(k, &m);
    }
    Ok(field)
}
