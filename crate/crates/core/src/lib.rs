//! Numerics for the limiting eigenvalue distribution of bi-unitarily
//! invariant random matrices.

pub mod error;
pub mod freeprob;
pub mod fz;
pub mod measures;
pub mod quad;
pub mod ringlaw;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision measure.
pub type Measure = measures::Measure1D<f64>;
/// Single-precision measure.
pub type Measure32 = measures::Measure1D<f32>;
/// Double-precision complex scalar.
pub type C64 = num_complex::Complex<f64>;
/// Double-precision ring law.
pub type RingLaw = ringlaw::RingLaw<f64>;
/// Double-precision log-gas potential.
pub type Potential = fz::Potential<f64>;
/// Double-precision equilibrium measure.
pub type Equilibrium = fz::Equilibrium<f64>;
