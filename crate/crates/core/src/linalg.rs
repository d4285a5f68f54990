//! Small dense helpers on top of nalgebra for Hermitian matrices.

use nalgebra as na;
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::num::{CMat, Float, RMat};

/// Eigenvalues below `-PSD_TOL` (relative to the spectral radius) are
/// treated as a genuine indefiniteness rather than rounding noise.
pub const PSD_TOL: f64 = 1e-10;

/// `(A + Aᴴ) / 2`.
pub fn hermitian_part<T: Float>(a: &CMat<T>) -> CMat<T> {
    let half = T::of(0.5);
    (a + a.adjoint()).map(|z| z * half)
}

pub fn trace<T: Float>(a: &CMat<T>) -> Complex<T> {
    a.diagonal().iter().fold(Complex::zero(), |s, &z| s + z)
}

/// `tr(A·B)` without forming the product.
pub fn trace_prod<T: Float>(a: &CMat<T>, b: &CMat<T>) -> Complex<T> {
    let n = a.nrows();
    let mut s = Complex::zero();
    for i in 0..n {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// `xᴴ A x`, real part (A Hermitian).
pub fn quad_form<T: Float>(a: &CMat<T>, x: &na::DVector<Complex<T>>) -> T {
    let ax = a * x;
    x.dotc(&ax).re
}

/// Outcome of a clipped Hermitian square root.
pub struct PsdSqrt<T: Float> {
    pub sqrt: CMat<T>,
    /// Largest magnitude of a negative eigenvalue that was clipped to zero.
    pub clipped: T,
}

/// Principal square root of a Hermitian PSD matrix via eigendecomposition,
/// clipping eigenvalues in `[-tol·ρ, 0)` to zero.
pub fn psd_sqrt<T: Float>(a: &CMat<T>, context: &'static str) -> Result<PsdSqrt<T>> {
    let h = hermitian_part(a);
    let eig = na::SymmetricEigen::new(h);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = T::of(PSD_TOL).max(T::eps() * T::of(64.0)) * scale;
    let mut clipped = T::zero();
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &v in eig.eigenvalues.iter() {
        if v < -tol {
            return Err(Error::NotPsd {
                context,
                min_eig: v.as_f64(),
                tol: tol.as_f64(),
            });
        }
        if v < T::zero() {
            clipped = clipped.max(-v);
            vals.push(T::zero());
        } else {
            vals.push(v.sqrt());
        }
    }
    if clipped > T::zero() {
        log::debug!("{context}: clipped negative eigenvalue {:e}", clipped.as_f64());
    }
    let q = &eig.eigenvectors;
    let n = q.nrows();
    let mut scaled = q.clone();
    for (j, &s) in vals.iter().enumerate() {
        let s = Complex::new(s, T::zero());
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(PsdSqrt {
        sqrt: &scaled * q.adjoint(),
        clipped,
    })
}

/// Real symmetric variant used for shadowing correlation.
pub fn psd_sqrt_real<T: Float>(a: &RMat<T>, context: &'static str) -> Result<RMat<T>> {
    let sym = (a + a.transpose()).map(|v| v * T::of(0.5));
    let eig = na::SymmetricEigen::new(sym);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = T::of(PSD_TOL).max(T::eps() * T::of(64.0)) * scale;
    let mut vals = Vec::with_capacity(eig.eigenvalues.len());
    for &v in eig.eigenvalues.iter() {
        if v < -tol {
            return Err(Error::NotPsd {
                context,
                min_eig: v.as_f64(),
                tol: tol.as_f64(),
            });
        }
        vals.push(v.max(T::zero()).sqrt());
    }
    let q = &eig.eigenvectors;
    let d = RMat::from_diagonal(&na::DVector::from_vec(vals));
    Ok(q * d * q.transpose())
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue<T: Float>(a: &CMat<T>) -> T {
    let eig = na::SymmetricEigen::new(hermitian_part(a));
    eig.eigenvalues
        .iter()
        .fold(T::inf(), |m, &v| m.min(v))
}

/// Inverse of a Hermitian positive-definite matrix through Cholesky.
pub fn hpd_inverse<T: Float>(a: &CMat<T>, context: &'static str) -> Result<CMat<T>> {
    let h = hermitian_part(a);
    let chol = na::Cholesky::new(h).ok_or(Error::Singular(context))?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Solves `A x = b` for Hermitian `A`. Falls back to the pseudo-inverse
/// when `A` is not positive definite or is numerically singular.
pub fn hermitian_solve<T: Float>(
    a: &CMat<T>,
    b: &na::DVector<Complex<T>>,
    context: &'static str,
) -> na::DVector<Complex<T>> {
    let h = hermitian_part(a);
    if let Some(chol) = na::Cholesky::new(h.clone()) {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((T::inf(), T::zero()), |(lo, hi), z| {
            (lo.min(z.re), hi.max(z.re))
        });
        let cond = (hi / lo).powi(2);
        if cond > T::of(1e12) {
            log::debug!("{context}: condition number {:e}", cond.as_f64());
        }
        if cond.is_finite() {
            return chol.solve(b);
        }
    }
    log::warn!("{context}: matrix not positive definite, using pseudo-inverse");
    let eig = na::SymmetricEigen::new(h);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |m, &v| m.max(v.abs()));
    let cut = scale * T::eps() * T::of(a.nrows() as f64);
    let q = &eig.eigenvectors;
    let mut qb = q.adjoint() * b;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        qb[i] = if v.abs() > cut {
            qb[i] / Complex::new(v, T::zero())
        } else {
            Complex::zero()
        };
    }
    q * qb
}
