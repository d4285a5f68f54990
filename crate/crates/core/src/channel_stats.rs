//! Statistical channel objects per (AP, UE) and channel sampling.

use nalgebra as na;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt;
use crate::num::{cis, sample_cn, sinc, CMat, CVec, Float, RMat};
use crate::scenario::{torus_offset, Drop, SystemConfig};
use crate::sim_physics::{cascade_with_feed, DiffractionSet, SimGeometry};

/// Isotropic-scattering correlation of the output layer,
/// `R[n, n'] = sinc(2 d(n, n') / λ)`.
#[derive(Clone, Debug)]
pub struct SpatialCorrelation<T: Float> {
    pub r: RMat<T>,
    /// Hermitian square root after eigenvalue clipping.
    pub sqrt: CMat<T>,
    /// Largest negative eigenvalue magnitude that was clipped.
    pub clipped: T,
}

impl<T: Float> SpatialCorrelation<T> {
    pub fn complex(&self) -> CMat<T> {
        self.r.map(|v| Complex::new(v, T::zero()))
    }
}

pub fn sinc_correlation<T: Float>(geom: &SimGeometry<T>, wavelength: T) -> Result<SpatialCorrelation<T>> {
    let n = geom.atoms_per_layer();
    let two = T::of(2.0);
    let r = RMat::from_fn(n, n, |i, j| {
        let [xi, yi] = geom.grid[i];
        let [xj, yj] = geom.grid[j];
        let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
        sinc(two * d / wavelength)
    });
    let c = r.map(|v| Complex::new(v, T::zero()));
    let s = psd_sqrt(&c, "sinc correlation")?;
    Ok(SpatialCorrelation {
        r,
        sqrt: s.sqrt,
        clipped: s.clipped,
    })
}

/// Statistics of the channel from UE `k` to the output layer of SIM `l`.
#[derive(Clone, Debug)]
pub struct SimUeChannelStats<T: Float> {
    /// LoS component, already scaled by `√β_LoS`.
    pub h_bar_sim: CVec<T>,
    /// NLoS covariance is `beta_nlos · R`.
    pub beta_nlos: T,
}

impl<T: Float> SimUeChannelStats<T> {
    pub fn r_sim(&self, corr: &SpatialCorrelation<T>) -> CMat<T> {
        corr.r.map(|v| Complex::new(v * self.beta_nlos, T::zero()))
    }
}

/// Unit vector from the SIM centre towards the UE (z points up).
pub fn direction_to_ue<T: Float>(cfg: &SystemConfig, ap: [T; 2], ue: [T; 2]) -> [T; 3] {
    let [dx, dy] = torus_offset(ap, ue, T::of(cfg.area_side));
    let dz = T::of(cfg.h_ue - cfg.h_ap);
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    [dx / d, dy / d, dz / d]
}

/// Planar-wavefront LoS response of the output layer towards direction
/// `dir`: entry `n` is `√β_LoS · exp(j2π Δ_n / λ)` with `Δ_n` the path
/// length of atom `n` minus that of the grid centre.
pub fn los_vector<T: Float>(
    geom: &SimGeometry<T>,
    dir: [T; 3],
    beta_los: T,
    wavelength: T,
) -> CVec<T> {
    let amp = beta_los.sqrt();
    let k = T::TAU() / wavelength;
    CVec::from_iterator(
        geom.atoms_per_layer(),
        geom.grid.iter().map(|&[x, y]| {
            let delta = -(dir[0] * x + dir[1] * y);
            cis(k * delta) * amp
        }),
    )
}

pub fn sim_ue_stats<T: Float>(
    cfg: &SystemConfig,
    geom: &SimGeometry<T>,
    drop: &Drop<T>,
    l: usize,
    k: usize,
) -> SimUeChannelStats<T> {
    let dir = direction_to_ue(cfg, drop.ap_pos[l], drop.ue_pos[k]);
    SimUeChannelStats {
        h_bar_sim: los_vector(geom, dir, drop.beta_los[(l, k)], T::of(cfg.wavelength)),
        beta_nlos: drop.beta_nlos[(l, k)],
    }
}

/// Channel statistics seen by the AP antennas after the SIM.
#[derive(Clone, Debug)]
pub struct EffectiveChannelStats<T: Float> {
    /// `W1ᴴ Gᴴ h̄_SIM` (U).
    pub h_bar: CVec<T>,
    /// `W1ᴴ Gᴴ R_SIM G W1` (U×U).
    pub r: CMat<T>,
}

/// General sandwich form for an arbitrary cascade `g`.
pub fn effective_stats<T: Float>(
    ds: &DiffractionSet<T>,
    g: &CMat<T>,
    sim_ue: &SimUeChannelStats<T>,
    r_sim: &CMat<T>,
) -> Result<EffectiveChannelStats<T>> {
    let n = ds.atoms();
    if g.nrows() != n || g.ncols() != n || r_sim.nrows() != n || sim_ue.h_bar_sim.len() != n {
        return Err(Error::Shape(format!(
            "effective_stats: G {}x{}, R {}x{}, h {} against N = {n}",
            g.nrows(),
            g.ncols(),
            r_sim.nrows(),
            r_sim.ncols(),
            sim_ue.h_bar_sim.len()
        )));
    }
    let b = g * &ds.w1;
    let bh = b.adjoint();
    Ok(EffectiveChannelStats {
        h_bar: &bh * &sim_ue.h_bar_sim,
        r: &bh * r_sim * &b,
    })
}

/// Everything about one SIM's current configuration that every UE shares.
#[derive(Clone, Debug)]
pub struct ApProjection<T: Float> {
    /// `G W1` (N×U).
    pub feed: CMat<T>,
    /// `(G W1)ᴴ R (G W1)` (U×U).
    pub r_proj: CMat<T>,
    /// `(G W1)ᴴ R^{1/2}` (U×N), for sampling.
    pub sqrt_proj: CMat<T>,
}

impl<T: Float> ApProjection<T> {
    pub fn new(ds: &DiffractionSet<T>, corr: &SpatialCorrelation<T>, phi: &[T]) -> Result<Self> {
        let feed = cascade_with_feed(ds, phi)?;
        Ok(Self::from_feed(feed, corr))
    }

    pub fn from_feed(feed: CMat<T>, corr: &SpatialCorrelation<T>) -> Self {
        let fh = feed.adjoint();
        let rc = corr.complex();
        let r_proj = crate::linalg::hermitian_part(&(&fh * rc * &feed));
        let sqrt_proj = &fh * &corr.sqrt;
        Self {
            feed,
            r_proj,
            sqrt_proj,
        }
    }

    pub fn effective(&self, sim_ue: &SimUeChannelStats<T>) -> EffectiveChannelStats<T> {
        let b = Complex::new(sim_ue.beta_nlos, T::zero());
        EffectiveChannelStats {
            h_bar: self.feed.adjoint() * &sim_ue.h_bar_sim,
            r: self.r_proj.map(|z| z * b),
        }
    }
}

/// One draw of the SIM-level channel `h̄ e^{jφ} + (β_NLoS R)^{1/2} z`.
pub fn sample_channel<T: Float, R: rand::Rng + ?Sized>(
    stats: &SimUeChannelStats<T>,
    corr: &SpatialCorrelation<T>,
    rng: &mut R,
) -> CVec<T> {
    let phase = cis((T::sample_unit(rng) - T::of(0.5)) * T::TAU());
    let n = stats.h_bar_sim.len();
    let z = CVec::from_fn(n, |_, _| sample_cn(rng));
    let s = Complex::new(stats.beta_nlos.sqrt(), T::zero());
    &stats.h_bar_sim * phase + (&corr.sqrt * z) * s
}

/// Common phase applied to a LoS vector; used to check that a per-SIM
/// common phase is invisible to second-order statistics.
pub fn rotate<T: Float>(v: &CVec<T>, theta: T) -> CVec<T> {
    v * cis(theta)
}

pub fn hermitian_psd_ok<T: Float>(a: &CMat<T>, tol: T) -> bool {
    let eig = na::SymmetricEigen::new(crate::linalg::hermitian_part(a));
    let scale = eig.eigenvalues.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    eig.eigenvalues.iter().all(|&v| v >= -tol * scale.max(T::tiny()))
}
