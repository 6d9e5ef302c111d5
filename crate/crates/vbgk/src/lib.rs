//! Five-velocity vector BGK relaxation of the two-dimensional incompressible
//! Navier-Stokes equations on the periodic torus `[0, 2 pi)^2`.
//!
//! The kinetic unknowns `f_1..f_5` each carry a full moment vector
//! `w = (rho, eps rho u1, eps rho u2)` and move with speeds `+-lambda/eps` along
//! the axes (`f_5` is at rest). They relax toward explicit Maxwellians on the
//! time scale `tau eps^2`. As `eps -> 0` the moments approach a solution of
//! incompressible Navier-Stokes with viscosity `nu = 2 lambda^2 tau a`.
//!
//! The pointwise algebra and the structural matrices are generic over
//! [`Scalar`], so the matrix identities can be certified in exact rational
//! arithmetic as well as in `f64`. Fields and time stepping are generic over
//! [`Real`] (`f32`, `f64`).

pub mod diagnostics;
pub mod error;
pub mod kinetic_core;
pub mod model_params;
pub mod reference_harness;
pub mod scalar;
pub mod solver;
pub mod structural_matrices;

pub use error::{Error, Result};
pub use kinetic_core::{GridSpec, KineticField, VectorField};
pub use model_params::{ModelParams, StabilityConstants};
pub use scalar::{Real, Scalar};
pub use structural_matrices::{CertificationReport, StructuralMatrices};

pub type Exact = num_rational::BigRational;

pub type Field64 = KineticField<f64>;
pub type Field32 = KineticField<f32>;
pub type Matrices64 = StructuralMatrices<f64>;
pub type MatricesExact = StructuralMatrices<Exact>;
