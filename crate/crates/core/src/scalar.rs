//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All matrices are complex with a real scalar `T`; `f64` is the working
//! precision and the tolerances quoted throughout the tests assume it.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + FloatConst + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub(crate) fn cone<T: Real>() -> C<T> {
    Complex::new(T::one(), T::zero())
}

/// `-i`, the factor in front of every Hamiltonian generator.
#[inline]
#[allow(dead_code)]
pub(crate) fn minus_i<T: Real>() -> C<T> {
    Complex::new(T::zero(), -T::one())
}

/// Angular frequency in rad/s for a frequency given in Hz.
#[inline]
pub fn angular<T: Real>(hz: T) -> T {
    T::TAU() * hz
}

/// Frequency in Hz for an angular frequency in rad/s.
#[inline]
pub fn hertz<T: Real>(rad_per_s: T) -> T {
    rad_per_s / T::TAU()
}

/// `|z|` without requiring `num_traits::Float` on `T`.
#[inline]
pub fn modulus<T: Real>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}

/// Largest element-wise `|a - b|` of two equally shaped complex arrays.
pub fn max_abs_diff<T: Real, R: nalgebra::Dim, K: nalgebra::Dim, S1, S2>(
    a: &nalgebra::Matrix<C<T>, R, K, S1>,
    b: &nalgebra::Matrix<C<T>, R, K, S2>,
) -> f64
where
    S1: nalgebra::RawStorage<C<T>, R, K>,
    S2: nalgebra::RawStorage<C<T>, R, K>,
{
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max(modulus(*x - *y).to_f64_lossy()))
}
