//! Scalar abstraction shared by the simulator and the operator builders.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumAssign};

/// Real floating-point type the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. The optimizers and evaluators run on
/// `f64`; the linear-algebra layer accepts either.
pub trait Real:
    Float + FloatConst + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this type.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Tolerance used when checking structural properties (Hermiticity,
    /// unitarity). Tight for `f64`, scaled by machine epsilon otherwise.
    fn structural_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Complex amplitude over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> C<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

/// `e^{i x}`.
#[inline]
pub(crate) fn cis<T: Real>(x: T) -> C<T> {
    Complex::new(x.cos(), x.sin())
}
