//! Energy-stable time integration for finite-strain gradient elasticity with a
//! three-well free energy, discretized by tensor-product quadratic B-splines.
//!
//! Everything is generic over the floating point type; the aliases at the
//! bottom fix it to `f64`.

pub mod assembly;
pub mod dynamics;
pub mod homogenize;
pub mod integrators;
pub mod io;
pub mod linear;
pub mod linepoly;
pub mod material;
pub mod quadrature;
pub mod scalar;
pub mod spline;

pub use scalar::{Ring, Scalar};

pub type Real = f64;
pub type Space = spline::SplineSpace<f64>;
pub type Field = spline::FieldCoeffs<f64>;
pub type Params = material::MaterialParams<f64>;
pub type Energy = material::ThreeWell<f64>;
pub type Scheme = integrators::SchemeConfig<f64>;
pub type Newton = assembly::NewtonConfig<f64>;
pub type Run = dynamics::RunConfig<f64>;
pub type Loading = homogenize::MacroLoading<f64>;
