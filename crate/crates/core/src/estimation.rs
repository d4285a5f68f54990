//! Phase-aware MMSE channel estimation.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_part, hpd_inverse};
use crate::num::{sample_cn, CMat, CVec, Float};

/// Second-order statistics of the estimate of one (AP, UE) channel.
#[derive(Clone, Debug)]
pub struct EstimationStats<T: Float> {
    /// `Σ_{j∈P_k} p̂_j τ_p R_j + σ² I`.
    pub psi: CMat<T>,
    pub psi_inv: CMat<T>,
    /// `R_k Ψ⁻¹ R_k`.
    pub omega: CMat<T>,
    /// Error covariance `R_k − p̂_k τ_p Ω`.
    pub c: CMat<T>,
    /// `√p̂_k R_k Ψ⁻¹`, the filter applied to the de-spread pilot.
    pub filter: CMat<T>,
}

/// `Ψ` for one AP and one pilot: `co_pilot` lists `(p̂_j, R_j)` for every
/// UE on the pilot.
pub fn pilot_covariance<T: Float>(
    co_pilot: &[(T, &CMat<T>)],
    tau_p: usize,
    sigma2: T,
) -> Result<CMat<T>> {
    let u = co_pilot
        .first()
        .map(|(_, r)| r.nrows())
        .ok_or_else(|| Error::Pilots("empty co-pilot set".into()))?;
    let tau = T::of(tau_p as f64);
    let mut psi = CMat::identity(u, u) * Complex::new(sigma2, T::zero());
    for &(p, r) in co_pilot {
        if r.nrows() != u || r.ncols() != u {
            return Err(Error::Shape(format!("R is {}x{}, expected {u}x{u}", r.nrows(), r.ncols())));
        }
        psi += r * Complex::new(p * tau, T::zero());
    }
    Ok(hermitian_part(&psi))
}

/// Estimation statistics of UE `k` given the inverse of its pilot's `Ψ`.
pub fn stats_from_psi<T: Float>(
    r_k: &CMat<T>,
    psi: CMat<T>,
    psi_inv: CMat<T>,
    p_hat_k: T,
    tau_p: usize,
) -> EstimationStats<T> {
    let r_psi = r_k * &psi_inv;
    let omega = hermitian_part(&(&r_psi * r_k));
    let c = hermitian_part(&(r_k - &omega * Complex::new(p_hat_k * T::of(tau_p as f64), T::zero())));
    let filter = r_psi * Complex::new(p_hat_k.sqrt(), T::zero());
    EstimationStats {
        psi,
        psi_inv,
        omega,
        c,
        filter,
    }
}

/// MMSE statistics of UE `k` whose co-pilot set (including itself) is
/// `co_pilot`, given as `(p̂_j, R_j)` pairs.
pub fn estimation_stats<T: Float>(
    r_k: &CMat<T>,
    p_hat_k: T,
    co_pilot: &[(T, &CMat<T>)],
    tau_p: usize,
    sigma2: T,
) -> Result<EstimationStats<T>> {
    let psi = pilot_covariance(co_pilot, tau_p, sigma2)?;
    let psi_inv = hpd_inverse(&psi, "pilot covariance Ψ")?;
    Ok(stats_from_psi(r_k, psi, psi_inv, p_hat_k, tau_p))
}

/// De-spread pilot observation of one AP for one pilot: the received
/// signal `y` and its LoS-predicted mean `ȳ`.
#[derive(Clone, Debug)]
pub struct PilotObservation<T: Float> {
    pub y: CVec<T>,
    pub y_bar: CVec<T>,
}

/// Builds `y = Σ_j √p̂_j τ_p h_j + n` with `n ~ CN(0, τ_p σ² I)`.
/// `users` holds `(p̂_j, h_j, h̄_j e^{jφ_j})` for every UE on the pilot.
pub fn observe_pilot<T: Float, R: rand::Rng + ?Sized>(
    users: &[(T, &CVec<T>, &CVec<T>)],
    tau_p: usize,
    sigma2: T,
    rng: &mut R,
) -> PilotObservation<T> {
    let u = users[0].1.len();
    let tau = T::of(tau_p as f64);
    let noise_sd = Complex::new((tau * sigma2).sqrt(), T::zero());
    let mut y = CVec::from_fn(u, |_, _| sample_cn::<T, R>(rng) * noise_sd);
    let mut y_bar = CVec::zeros(u);
    for &(p, h, los) in users {
        let g = Complex::new(p.sqrt() * tau, T::zero());
        y += h * g;
        y_bar += los * g;
    }
    PilotObservation { y, y_bar }
}

/// `ĥ = h̄ e^{jφ} + √p̂_k R Ψ⁻¹ (y − ȳ)`; returns `(ĥ, h − ĥ)`.
pub fn sample_estimate<T: Float>(
    stats: &EstimationStats<T>,
    los_k: &CVec<T>,
    h_k: &CVec<T>,
    obs: &PilotObservation<T>,
) -> (CVec<T>, CVec<T>) {
    let h_hat = los_k + &stats.filter * (&obs.y - &obs.y_bar);
    let err = h_k - &h_hat;
    (h_hat, err)
}
