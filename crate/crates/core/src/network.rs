//! Per-drop system state: SIM configuration, effective channel statistics
//! and MMSE statistics for every (AP, UE) pair. Phase changes on one SIM
//! refresh only that AP's entries.

use std::sync::Arc;

use crate::channel_stats::{
    sim_ue_stats, sinc_correlation, ApProjection, EffectiveChannelStats, SimUeChannelStats,
    SpatialCorrelation,
};
use crate::error::{Error, Result};
use crate::estimation::{pilot_covariance, stats_from_psi, EstimationStats};
use crate::linalg::hpd_inverse;
use crate::num::{CMat, Float};
use crate::scenario::{co_pilot_set, Drop, SystemConfig};
use crate::sim_physics::{build_diffraction_set, DiffractionSet, PhaseTensor, SimGeometry};

/// Geometry-only SIM model shared by every AP (and every drop with the
/// same configuration).
#[derive(Clone, Debug)]
pub struct SimModel<T: Float> {
    pub geom: SimGeometry<T>,
    pub diffraction: DiffractionSet<T>,
    pub corr: SpatialCorrelation<T>,
    pub wavelength: T,
}

impl<T: Float> SimModel<T> {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let geom = SimGeometry::from_config(cfg)?;
        let wavelength = T::of(cfg.wavelength);
        let diffraction = build_diffraction_set(&geom, wavelength)?;
        let corr = sinc_correlation(&geom, wavelength)?;
        Ok(Self {
            geom,
            diffraction,
            corr,
            wavelength,
        })
    }

    pub fn layers(&self) -> usize {
        self.geom.layers
    }

    pub fn atoms(&self) -> usize {
        self.geom.atoms_per_layer()
    }
}

#[derive(Clone, Debug)]
pub struct Network<T: Float> {
    pub tau_c: usize,
    pub tau_p: usize,
    pub sigma2: T,
    pub pilot_of: Vec<usize>,
    pub p_hat: Vec<T>,
    /// Data powers.
    pub p: Vec<T>,
    pub sim: Arc<SimModel<T>>,
    /// `[l][k]`
    pub sim_ue: Vec<Vec<SimUeChannelStats<T>>>,
    pub phases: PhaseTensor<T>,
    pub proj: Vec<ApProjection<T>>,
    /// `[l][k]`
    pub eff: Vec<Vec<EffectiveChannelStats<T>>>,
    /// `[l][k]`
    pub est: Vec<Vec<EstimationStats<T>>>,
}

impl<T: Float> Network<T> {
    /// Assembles the state of `drop` (which must have pilots assigned)
    /// under the given phase configuration.
    pub fn new(
        cfg: &SystemConfig,
        drop: &Drop<T>,
        sim: Arc<SimModel<T>>,
        phases: PhaseTensor<T>,
    ) -> Result<Self> {
        let pilot_of = drop.pilots()?;
        if pilot_of.iter().any(|&t| t >= cfg.tau_p) {
            return Err(Error::Pilots(format!("pilot index out of range 0..{}", cfg.tau_p)));
        }
        let (l_count, k_count) = (drop.num_aps(), drop.num_ues());
        if phases.aps != l_count || phases.layers != sim.layers() || phases.atoms != sim.atoms() {
            return Err(Error::Shape(format!(
                "phase tensor {}x{}x{} does not match {}x{}x{}",
                phases.aps,
                phases.layers,
                phases.atoms,
                l_count,
                sim.layers(),
                sim.atoms()
            )));
        }
        let sim_ue = (0..l_count)
            .map(|l| {
                (0..k_count)
                    .map(|k| sim_ue_stats(cfg, &sim.geom, drop, l, k))
                    .collect()
            })
            .collect();
        let mut net = Self {
            tau_c: cfg.tau_c,
            tau_p: cfg.tau_p,
            sigma2: T::of(cfg.sigma2),
            pilot_of,
            p_hat: drop.p_hat.clone(),
            p: drop.p.clone(),
            sim,
            sim_ue,
            phases,
            proj: Vec::with_capacity(l_count),
            eff: Vec::with_capacity(l_count),
            est: Vec::with_capacity(l_count),
        };
        for l in 0..l_count {
            let (proj, eff, est) = net.compute_ap(l)?;
            net.proj.push(proj);
            net.eff.push(eff);
            net.est.push(est);
        }
        Ok(net)
    }

    pub fn num_aps(&self) -> usize {
        self.sim_ue.len()
    }

    pub fn num_ues(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn co_pilot_set(&self, k: usize) -> Vec<usize> {
        co_pilot_set(&self.pilot_of, k)
    }

    #[allow(clippy::type_complexity)]
    fn compute_ap(
        &self,
        l: usize,
    ) -> Result<(
        ApProjection<T>,
        Vec<EffectiveChannelStats<T>>,
        Vec<EstimationStats<T>>,
    )> {
        let proj = ApProjection::new(&self.sim.diffraction, &self.sim.corr, self.phases.ap(l))?;
        let eff: Vec<_> = self.sim_ue[l].iter().map(|s| proj.effective(s)).collect();
        let est = self.estimation_for(&eff)?;
        Ok((proj, eff, est))
    }

    /// MMSE statistics of one AP given its effective statistics. `Ψ` is
    /// formed and inverted once per pilot.
    fn estimation_for(&self, eff: &[EffectiveChannelStats<T>]) -> Result<Vec<EstimationStats<T>>> {
        let mut psi_cache: Vec<Option<(CMat<T>, CMat<T>)>> = vec![None; self.tau_p];
        let mut out = Vec::with_capacity(eff.len());
        for k in 0..eff.len() {
            let t = self.pilot_of[k];
            if psi_cache[t].is_none() {
                let members: Vec<_> = self
                    .co_pilot_set(k)
                    .into_iter()
                    .map(|j| (self.p_hat[j], &eff[j].r))
                    .collect();
                let psi = pilot_covariance(&members, self.tau_p, self.sigma2)?;
                let inv = hpd_inverse(&psi, "pilot covariance Ψ")?;
                psi_cache[t] = Some((psi, inv));
            }
            let (psi, inv) = psi_cache[t].clone().expect("filled above");
            out.push(stats_from_psi(&eff[k].r, psi, inv, self.p_hat[k], self.tau_p));
        }
        Ok(out)
    }

    /// Replaces the phases of SIM `l` and refreshes that AP's statistics.
    pub fn set_ap_phases(&mut self, l: usize, phi: &[T]) -> Result<()> {
        let len = self.phases.layers * self.phases.atoms;
        if phi.len() != len {
            return Err(Error::Shape(format!("expected {len} phases, got {}", phi.len())));
        }
        let start = l * len;
        for (dst, &src) in self.phases.phi[start..start + len].iter_mut().zip(phi) {
            *dst = crate::num::wrap_phase(src);
        }
        let (proj, eff, est) = self.compute_ap(l)?;
        self.proj[l] = proj;
        self.eff[l] = eff;
        self.est[l] = est;
        Ok(())
    }

    pub fn set_phases(&mut self, phases: PhaseTensor<T>) -> Result<()> {
        for l in 0..self.num_aps() {
            let len = phases.layers * phases.atoms;
            self.set_ap_phases(l, &phases.phi[l * len..(l + 1) * len])?;
        }
        Ok(())
    }

    /// Re-assigns pilots; only the estimation statistics change.
    pub fn set_pilots(&mut self, pilot_of: Vec<usize>) -> Result<()> {
        if pilot_of.len() != self.num_ues() || pilot_of.iter().any(|&t| t >= self.tau_p) {
            return Err(Error::Pilots("invalid pilot vector".into()));
        }
        self.pilot_of = pilot_of;
        for l in 0..self.num_aps() {
            self.est[l] = self.estimation_for(&self.eff[l])?;
        }
        Ok(())
    }

    pub fn set_powers(&mut self, p: Vec<T>) {
        self.p = p;
    }
}
