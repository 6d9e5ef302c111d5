//! Scalar abstractions shared by the pointwise algebra and the structural matrices.
//!
//! [`Scalar`] only needs field operations, so it is implemented for `f32`, `f64`
//! and exact [`BigRational`]. [`Real`] adds the transcendental operations the
//! time stepper and the norms need.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact, so identities can be checked against zero.
    const EXACT: bool;

    /// Converts a finite `f64`. Exact for rationals (every finite double is dyadic).
    fn lit(x: f64) -> Self;

    fn as_f64(&self) -> f64;

    fn magnitude(&self) -> Self;
}

macro_rules! impl_float_scalar {
    ($f:ty) => {
        impl Scalar for $f {
            const EXACT: bool = false;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn as_f64(&self) -> f64 {
                *self as f64
            }

            #[inline]
            fn magnitude(&self) -> Self {
                self.abs()
            }
        }
    };
}

impl_float_scalar!(f32);
impl_float_scalar!(f64);

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn lit(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| panic!("non-finite literal {x}"))
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn magnitude(&self) -> Self {
        self.abs()
    }
}

/// Floating types usable for fields and time stepping.
pub trait Real: Scalar + num_traits::Float + std::fmt::Display {}

impl Real for f32 {}
impl Real for f64 {}

/// Exact rational from an integer ratio; handy for building test data.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
