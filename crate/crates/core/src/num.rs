//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;
use num_complex::Complex;
use num_traits as nt;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

/// Real floating point type the engine can run on (`f32` or `f64`).
pub trait Float:
    Copy
    + Default
    + na::RealField
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`; lossy for `f32`.
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Machine epsilon of the type, used to scale numerical tolerances.
    fn eps() -> Self;

    fn inf() -> Self;

    /// Smallest positive normal value.
    fn tiny() -> Self;

    /// Standard normal draw. Sampled in `f64` so both precisions consume
    /// the same random stream.
    fn sample_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        Self::of(<StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
    }

    /// Uniform draw on `[0, 1)`.
    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let x = Self::of(<StandardUniform as Distribution<f64>>::sample(&StandardUniform, rng));
        if x < Self::one() { x } else { Self::zero() }
    }
}

macro_rules! impl_float {
    ($f:ty) => {
        impl Float for $f {
            #[inline]
            fn of(x: f64) -> Self {
                x as $f
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn eps() -> Self {
                <$f>::EPSILON
            }

            fn inf() -> Self {
                <$f>::INFINITY
            }

            fn tiny() -> Self {
                <$f>::MIN_POSITIVE
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);

pub type C<T> = Complex<T>;
pub type CMat<T> = na::DMatrix<Complex<T>>;
pub type CVec<T> = na::DVector<Complex<T>>;
pub type RMat<T> = na::DMatrix<T>;

#[inline]
pub fn cplx<T: Float>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// `exp(j·theta)`.
#[inline]
pub fn cis<T: Float>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Standard circularly-symmetric complex Gaussian, `E|x|^2 = 1`.
pub fn sample_cn<T: Float, R: rand::Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let s = T::of(0.5).sqrt();
    Complex::new(T::sample_normal(rng) * s, T::sample_normal(rng) * s)
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase<T: Float>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut r = theta % two_pi;
    if r < T::zero() {
        r += two_pi;
    }
    // `-tiny % 2π + 2π` can round up to exactly 2π
    if r >= two_pi {
        r = T::zero();
    }
    r
}

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc<T: Float>(x: T) -> T {
    if x.abs() < T::of(1e-12) {
        return T::one();
    }
    let px = T::PI() * x;
    px.sin() / px
}
