//! Scalar and ring abstractions.
//!
//! Everything numeric in the crate is generic over [`Scalar`] (implemented for
//! `f32` and `f64`). The constitutive law is additionally written against
//! [`Ring`], so the same code evaluates to a number, to a truncated line
//! expansion ([`crate::linepoly::LinePoly`]) or to an exact multivariate
//! polynomial ([`crate::material::SparsePolynomial`]).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, AddAssign, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive, Zero};

/// Floating point type usable throughout the solver.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + Ring<Self>
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    /// Conversion from a count.
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Commutative ring with scalar coefficients.
pub trait Ring<S: Zero>:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn constant(c: S) -> Self;

    fn zero_value() -> Self {
        Self::constant(S::zero())
    }

    fn scale(&self, c: S) -> Self;
}

macro_rules! impl_ring_for_float {
    ($($t:ty),*) => {$(
        impl Ring<$t> for $t {
            #[inline]
            fn constant(c: $t) -> Self {
                c
            }
            #[inline]
            fn scale(&self, c: $t) -> Self {
                *self * c
            }
        }
    )*};
}

impl_ring_for_float!(f32, f64);

/// `x * x` without consuming the argument.
#[inline]
pub fn sq<S: Zero, R: Ring<S>>(x: &R) -> R {
    x.clone() * x.clone()
}
