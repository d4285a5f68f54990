//! Network drops: AP/UE placement on a wrap-around square, large-scale
//! fading, Rician factors and the global system constants.

use nalgebra as na;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::psd_sqrt_real;
use crate::num::{Float, RMat};

/// Noise power of -94 dBm in watts.
pub const DEFAULT_SIGMA2: f64 = 3.981_071_705_534_972e-13;

/// Carrier wavelength at 2 GHz.
pub const DEFAULT_WAVELENGTH: f64 = 0.15;

/// Every system constant of one experiment point. Lengths are meters,
/// powers are watts. Fields left out of a config file take the defaults
/// listed on [`SystemConfig::default`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of access points.
    pub l: usize,
    /// Number of single-antenna UEs.
    pub k: usize,
    /// Antennas per AP.
    pub u: usize,
    /// Metasurface layers per SIM.
    pub m: usize,
    /// Meta-atoms per layer.
    pub n: usize,
    pub tau_c: usize,
    pub tau_p: usize,
    pub sigma2: f64,
    pub p_max: f64,
    /// Per-UE pilot power; `None` means `p_max` for every UE.
    pub p_hat: Option<Vec<f64>>,
    pub area_side: f64,
    pub h_ap: f64,
    pub h_ue: f64,
    pub wavelength: f64,
    /// Meta-atom spacing; `None` means `wavelength / 2`.
    pub d_meta: Option<f64>,
    /// Meta-atom side length, which sets the aperture area in the
    /// diffraction coefficient; `None` means equal to the spacing.
    pub atom_size: Option<f64>,
    /// SIM thickness; `None` means `5 * wavelength`.
    pub t_sim: Option<f64>,
    /// AP antenna spacing; `None` means `wavelength / 2`.
    pub antenna_spacing: Option<f64>,
    pub delta_f: f64,
    /// Shadowing standard deviation in dB.
    pub delta_sf: f64,
    /// Shadowing decorrelation distance.
    pub d_dc: f64,
    /// Permit `n` that is not a perfect square; the layer grid then uses
    /// the most nearly square factorization `nx * ny = n`.
    pub rect_grid: bool,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            l: 10,
            k: 5,
            u: 2,
            m: 5,
            n: 64,
            tau_c: 200,
            tau_p: 4,
            sigma2: DEFAULT_SIGMA2,
            p_max: 0.2,
            p_hat: None,
            area_side: 500.0,
            h_ap: 15.0,
            h_ue: 1.65,
            wavelength: DEFAULT_WAVELENGTH,
            d_meta: None,
            atom_size: None,
            t_sim: None,
            antenna_spacing: None,
            delta_f: 0.5,
            delta_sf: 8.0,
            d_dc: 100.0,
            rect_grid: false,
        }
    }
}

impl SystemConfig {
    pub fn d_meta(&self) -> f64 {
        self.d_meta.unwrap_or(self.wavelength / 2.0)
    }

    pub fn atom_size(&self) -> f64 {
        self.atom_size.unwrap_or_else(|| self.d_meta())
    }

    pub fn t_sim(&self) -> f64 {
        self.t_sim.unwrap_or(5.0 * self.wavelength)
    }

    pub fn antenna_spacing(&self) -> f64 {
        self.antenna_spacing.unwrap_or(self.wavelength / 2.0)
    }

    /// Spacing between adjacent metasurface layers.
    pub fn d_layer(&self) -> f64 {
        self.t_sim() / self.m as f64
    }

    /// Pilot power of UE `k`.
    pub fn p_hat_of(&self, k: usize) -> f64 {
        match &self.p_hat {
            Some(v) => v[k],
            None => self.p_max,
        }
    }

    /// Layer grid dimensions `(nx, ny)`.
    pub fn grid(&self) -> Result<(usize, usize)> {
        let root = (self.n as f64).sqrt().round() as usize;
        if root * root == self.n {
            return Ok((root, root));
        }
        if !self.rect_grid {
            return Err(Error::Config(format!(
                "n = {} is not a perfect square (set rect_grid to allow nx != ny)",
                self.n
            )));
        }
        let mut nx = (self.n as f64).sqrt().floor() as usize;
        while self.n % nx != 0 {
            nx -= 1;
        }
        Ok((self.n / nx, nx))
    }

    /// Uplink data symbols per coherence block.
    pub fn tau_u(&self) -> usize {
        self.tau_c - self.tau_p
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("l", self.l),
            ("k", self.k),
            ("u", self.u),
            ("m", self.m),
            ("n", self.n),
            ("tau_p", self.tau_p),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.tau_p > self.tau_c {
            return bad(format!("tau_p = {} exceeds tau_c = {}", self.tau_p, self.tau_c));
        }
        self.grid()?;
        if !(self.wavelength > 0.0) {
            return bad("wavelength must be positive".into());
        }
        if !(self.sigma2 >= 0.0) || !(self.p_max >= 0.0) {
            return bad("powers must be nonnegative".into());
        }
        if let Some(p) = &self.p_hat {
            if p.len() != self.k {
                return bad(format!("p_hat has {} entries, expected k = {}", p.len(), self.k));
            }
            if p.iter().any(|&x| !(x >= 0.0)) {
                return bad("pilot powers must be nonnegative".into());
            }
        }
        if !(self.area_side > 0.0) || !(self.d_meta() > 0.0) || !(self.atom_size() > 0.0) || !(self.t_sim() > 0.0) {
            return bad("lengths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.delta_f) {
            return bad("delta_f must lie in [0, 1]".into());
        }
        if !(self.d_dc > 0.0) || !(self.delta_sf >= 0.0) {
            return bad("shadowing parameters out of range".into());
        }
        Ok(())
    }
}

/// One network realization. Immutable once built; pilots and powers are
/// replaced wholesale through [`Drop::with_pilots`] and [`Drop::with_powers`].
#[derive(Clone, Debug)]
pub struct Drop<T: Float> {
    pub ap_pos: Vec<[T; 2]>,
    pub ue_pos: Vec<[T; 2]>,
    /// L×K AP-UE distance on the torus including the height difference.
    pub dist: RMat<T>,
    /// L×K pathloss, linear.
    pub beta: RMat<T>,
    /// L×K Rician factor, linear.
    pub kappa: RMat<T>,
    pub beta_los: RMat<T>,
    pub beta_nlos: RMat<T>,
    /// L×K shadow fading in dB.
    pub shadow_db: RMat<T>,
    /// Pilot index of each UE, `None` until allocated.
    pub pilot_of: Vec<Option<usize>>,
    /// Data powers.
    pub p: Vec<T>,
    /// Pilot powers.
    pub p_hat: Vec<T>,
}

impl<T: Float> Drop<T> {
    pub fn num_aps(&self) -> usize {
        self.ap_pos.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_pos.len()
    }

    pub fn with_pilots(mut self, pilot_of: &[usize]) -> Self {
        self.pilot_of = pilot_of.iter().map(|&t| Some(t)).collect();
        self
    }

    pub fn with_powers(mut self, p: Vec<T>) -> Self {
        self.p = p;
        self
    }

    /// Pilot indices, failing if any UE is still unassigned.
    pub fn pilots(&self) -> Result<Vec<usize>> {
        self.pilot_of
            .iter()
            .enumerate()
            .map(|(k, t)| t.ok_or_else(|| Error::Pilots(format!("UE {k} has no pilot"))))
            .collect()
    }

    /// UEs sharing UE `k`'s pilot, `k` included, in ascending order.
    pub fn co_pilot_set(&self, k: usize) -> Result<Vec<usize>> {
        let pilots = self.pilots()?;
        Ok(co_pilot_set(&pilots, k))
    }
}

pub fn co_pilot_set(pilot_of: &[usize], k: usize) -> Vec<usize> {
    (0..pilot_of.len())
        .filter(|&j| pilot_of[j] == pilot_of[k])
        .collect()
}

/// Minimum planar distance between two points over the nine periodic
/// copies of the square.
pub fn torus_distance<T: Float>(a: [T; 2], b: [T; 2], side: T) -> T {
    let mut best = T::inf();
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = a[0] - b[0] + T::of(sx) * side;
            let dy = a[1] - b[1] + T::of(sy) * side;
            best = best.min((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Planar displacement `b - a` to the nearest periodic copy of `b`.
pub fn torus_offset<T: Float>(a: [T; 2], b: [T; 2], side: T) -> [T; 2] {
    let mut best = [T::zero(); 2];
    let mut best_d = T::inf();
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = b[0] - a[0] + T::of(sx) * side;
            let dy = b[1] - a[1] + T::of(sy) * side;
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = [dx, dy];
            }
        }
    }
    best
}

/// COST-321 Walfish-Ikegami pathloss in dB at distance `d` (m) with
/// shadowing `f_db`.
pub fn pathloss_db<T: Float>(d: T, f_db: T) -> T {
    T::of(-30.18) - T::of(26.0) * d.log10() + f_db
}

/// Rician factor as a function of distance (m).
pub fn rician_kappa<T: Float>(d: T) -> T {
    T::of(10.0).powf(T::of(1.3) - T::of(0.003) * d)
}

/// Splits `beta` into its LoS and NLoS parts for Rician factor `kappa`.
pub fn rician_split<T: Float>(beta: T, kappa: T) -> (T, T) {
    let denom = kappa + T::one();
    let nlos = beta / denom;
    (beta - nlos, nlos)
}

/// Correlation matrix `2^(-d/d_dc)` over a point set with torus distances.
fn decorrelation_matrix<T: Float>(pos: &[[T; 2]], side: T, d_dc: T) -> RMat<T> {
    let n = pos.len();
    RMat::from_fn(n, n, |i, j| {
        let d = torus_distance(pos[i], pos[j], side);
        T::of(2.0).powf(-d / d_dc)
    })
}

/// Correlated shadow fading `F` (L×K, dB).
pub fn correlated_shadowing<T: Float, R: rand::Rng + ?Sized>(
    cfg: &SystemConfig,
    ap_pos: &[[T; 2]],
    ue_pos: &[[T; 2]],
    rng: &mut R,
) -> Result<RMat<T>> {
    let side = T::of(cfg.area_side);
    let d_dc = T::of(cfg.d_dc);
    let sf = T::of(cfg.delta_sf);
    let ca = psd_sqrt_real(&decorrelation_matrix(ap_pos, side, d_dc), "AP shadowing")?;
    let cb = psd_sqrt_real(&decorrelation_matrix(ue_pos, side, d_dc), "UE shadowing")?;
    let za = na::DVector::from_fn(ap_pos.len(), |_, _| T::sample_normal(rng));
    let zb = na::DVector::from_fn(ue_pos.len(), |_, _| T::sample_normal(rng));
    let a = (ca * za) * sf;
    let b = (cb * zb) * sf;
    let wa = T::of(cfg.delta_f).sqrt();
    let wb = T::of(1.0 - cfg.delta_f).sqrt();
    Ok(RMat::from_fn(ap_pos.len(), ue_pos.len(), |l, k| {
        wa * a[l] + wb * b[k]
    }))
}

/// Builds a drop from explicit positions and shadowing.
pub fn drop_from_positions<T: Float>(
    cfg: &SystemConfig,
    ap_pos: Vec<[T; 2]>,
    ue_pos: Vec<[T; 2]>,
    shadow_db: RMat<T>,
) -> Drop<T> {
    let side = T::of(cfg.area_side);
    let dh = T::of(cfg.h_ap - cfg.h_ue);
    let (l, k) = (ap_pos.len(), ue_pos.len());
    let dist = RMat::from_fn(l, k, |i, j| {
        let d = torus_distance(ap_pos[i], ue_pos[j], side);
        (d * d + dh * dh).sqrt()
    });
    let beta = RMat::from_fn(l, k, |i, j| {
        T::of(10.0).powf(pathloss_db(dist[(i, j)], shadow_db[(i, j)]) / T::of(10.0))
    });
    let kappa = dist.map(rician_kappa);
    let mut beta_los = RMat::zeros(l, k);
    let mut beta_nlos = RMat::zeros(l, k);
    for i in 0..l {
        for j in 0..k {
            let (a, b) = rician_split(beta[(i, j)], kappa[(i, j)]);
            beta_los[(i, j)] = a;
            beta_nlos[(i, j)] = b;
        }
    }
    Drop {
        ap_pos,
        ue_pos,
        dist,
        beta,
        kappa,
        beta_los,
        beta_nlos,
        shadow_db,
        pilot_of: vec![None; k],
        p: vec![T::of(cfg.p_max); k],
        p_hat: (0..k).map(|j| T::of(cfg.p_hat_of(j))).collect(),
    }
}

/// Draws one drop; a pure function of `(cfg, seed)`.
pub fn generate_drop<T: Float>(cfg: &SystemConfig, seed: u64) -> Result<Drop<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = T::of(cfg.area_side);
    let point = |rng: &mut ChaCha8Rng| [T::sample_unit(rng) * side, T::sample_unit(rng) * side];
    let ap_pos: Vec<_> = (0..cfg.l).map(|_| point(&mut rng)).collect();
    let ue_pos: Vec<_> = (0..cfg.k).map(|_| point(&mut rng)).collect();
    let shadow = correlated_shadowing(cfg, &ap_pos, &ue_pos, &mut rng)?;
    Ok(drop_from_positions(cfg, ap_pos, ue_pos, shadow))
}
