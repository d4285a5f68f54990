//! Pilot allocation, layer-wise SIM phase search and max-min power control.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{quad_form, trace, trace_prod};
use crate::network::Network;
use crate::num::{CVec, Float, RMat};
use crate::scenario::co_pilot_set;
use crate::se_engine::{
    ap_terms, assemble_terms, denominator_parts, evaluate_terms, weights, ApUeTerms,
    ClosedFormTerms, Decoder, PowerContext,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UiMetric {
    /// `Σ_l β_lk β_lj`.
    #[default]
    BetaProduct,
    /// `Σ_l tr(R_lk R_lj) / (tr R_lk tr R_lj)^{1/2}` on the effective statistics.
    TraceOverlap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PilotAssignment {
    pub pilot_of: Vec<usize>,
}

impl PilotAssignment {
    pub fn co_pilot_set(&self, k: usize) -> Vec<usize> {
        co_pilot_set(&self.pilot_of, k)
    }

    /// Largest number of UEs on any one pilot.
    pub fn max_reuse(&self, tau_p: usize) -> usize {
        let mut count = vec![0; tau_p];
        for &t in &self.pilot_of {
            count[t] += 1;
        }
        count.into_iter().max().unwrap_or(0)
    }
}

/// Pairwise interference weights `w[k][j]` under `metric`.
pub fn pair_interference<T: Float>(net: Option<&Network<T>>, beta: &RMat<T>, metric: UiMetric) -> Vec<Vec<f64>> {
    let (l_count, k_count) = beta.shape();
    let mut w = vec![vec![0.0; k_count]; k_count];
    for k in 0..k_count {
        for j in 0..k_count {
            w[k][j] = match (metric, net) {
                (UiMetric::TraceOverlap, Some(net)) => (0..l_count)
                    .map(|l| {
                        let (rk, rj) = (&net.eff[l][k].r, &net.eff[l][j].r);
                        let num = trace_prod(rk, rj).re.as_f64();
                        let den = (trace(rk).re * trace(rj).re).as_f64().sqrt();
                        if den > 0.0 { num / den } else { 0.0 }
                    })
                    .sum(),
                _ => (0..l_count).map(|l| (beta[(l, k)] * beta[(l, j)]).as_f64()).sum(),
            };
        }
    }
    w
}

/// `UI(k, t)`: interference `k` would see from UEs already on pilot `t`.
pub fn pilot_interference(w: &[Vec<f64>], pilot_of: &[Option<usize>], k: usize, t: usize) -> f64 {
    pilot_of
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != k && *p == Some(t))
        .map(|(j, _)| w[k][j])
        .sum()
}

/// Greedy allocation. The first `τ_p` UEs take pilots `0..τ_p`; each later
/// UE, in index order, takes the least-interfered pilot that still has room
/// under the `⌈K/τ_p⌉` reuse cap (ties go to the lowest index).
pub fn allocate_pilots_with(w: &[Vec<f64>], tau_p: usize) -> Result<PilotAssignment> {
    let k_count = w.len();
    if tau_p == 0 {
        return Err(Error::Pilots("τ_p must be positive".into()));
    }
    let cap = k_count.div_ceil(tau_p);
    let mut load = vec![0usize; tau_p];
    let mut pilot_of: Vec<Option<usize>> = vec![None; k_count];
    for k in 0..k_count {
        let t = if k < tau_p {
            k
        } else {
            (0..tau_p)
                .filter(|&t| load[t] < cap)
                .map(|t| (t, pilot_interference(w, &pilot_of, k, t)))
                .fold(None, |acc: Option<(usize, f64)>, (t, ui)| match acc {
                    Some((_, b)) if b <= ui => acc,
                    _ => Some((t, ui)),
                })
                .map(|(t, _)| t)
                .expect("cap leaves room for every UE")
        };
        pilot_of[k] = Some(t);
        load[t] += 1;
    }
    Ok(PilotAssignment {
        pilot_of: pilot_of.into_iter().map(|p| p.expect("assigned")).collect(),
    })
}

pub fn allocate_pilots<T: Float>(beta: &RMat<T>, tau_p: usize) -> Result<PilotAssignment> {
    allocate_pilots_with(&pair_interference::<T>(None, beta, UiMetric::BetaProduct), tau_p)
}

/// `max_k Σ_{j∈P_k\k} w[k][j]`.
pub fn max_ue_interference(w: &[Vec<f64>], pilot_of: &[usize]) -> f64 {
    (0..pilot_of.len())
        .map(|k| {
            (0..pilot_of.len())
                .filter(|&j| j != k && pilot_of[j] == pilot_of[k])
                .map(|j| w[k][j])
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamformingConfig {
    pub step_size: f64,
    #[serde(rename = "j")]
    pub j_max: usize,
    pub xi: f64,
    pub n_selection: usize,
    /// Alternate `+step, −step, +2step, …` instead of `+step, +2step, …`.
    pub symmetric_probe: bool,
    /// Full passes over every SIM.
    pub sweeps: usize,
    pub decoder: Decoder,
    pub seed: u64,
}

impl Default for BeamformingConfig {
    fn default() -> Self {
        Self {
            step_size: std::f64::consts::FRAC_PI_8,
            j_max: 16,
            xi: 1e-3,
            n_selection: 4,
            symmetric_probe: false,
            sweeps: 1,
            decoder: Decoder::Lsfd,
            seed: 0,
        }
    }
}

impl BeamformingConfig {
    pub fn validate(&self) -> Result<()> {
        let tau = std::f64::consts::TAU;
        if !(self.step_size > 0.0 && self.step_size < tau) {
            return Err(Error::Config(format!("step_size {} not in (0, 2π)", self.step_size)));
        }
        if self.j_max == 0 || self.n_selection == 0 {
            return Err(Error::Config("J and N_selection must be at least 1".into()));
        }
        if self.xi.is_nan() || self.xi < 0.0 {
            return Err(Error::Config(format!("xi {} must be non-negative", self.xi)));
        }
        Ok(())
    }

    fn offset(&self, j: usize) -> f64 {
        if self.symmetric_probe {
            let mag = (j / 2 + 1) as f64 * self.step_size;
            if j % 2 == 0 { mag } else { -mag }
        } else {
            (j + 1) as f64 * self.step_size
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub accepted: bool,
}

pub fn write_trace<W: Write>(trace: &[TracePoint], mut w: W) -> Result<()> {
    writeln!(w, "iteration,objective,accepted")?;
    for t in trace {
        writeln!(w, "{},{:e},{}", t.iteration, t.objective, u8::from(t.accepted))?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BeamformingResult {
    pub initial: f64,
    pub objective: f64,
    pub trace: Vec<TracePoint>,
    pub evaluations: usize,
}

/// Sum SE from cached per-AP terms.
fn sum_se_of<T: Float>(net: &Network<T>, per_ap: &[Vec<ApUeTerms<T>>], decoder: Decoder) -> Result<f64> {
    let terms: Vec<_> = (0..net.num_ues())
        .map(|k| assemble_terms(per_ap, &net.pilot_of, k))
        .collect();
    let ues = evaluate_terms(&terms, &PowerContext::of(net), decoder, net.tau_c)?;
    Ok(ues.iter().map(|u| u.se.as_f64()).sum())
}

/// Layer-wise phase search maximising the sum SE. Each SIM's `M·N` atoms
/// are visited in a seeded random order, `N_selection` at a time; every
/// block tries up to `J` offsets and keeps the first that beats the best
/// objective by more than `ξ`.
pub fn optimize_beamforming<T: Float>(net: &mut Network<T>, cfg: &BeamformingConfig) -> Result<BeamformingResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_ap_len = net.phases.layers * net.phases.atoms;
    let mut per_ap: Vec<_> = (0..net.num_aps()).map(|l| ap_terms(net, l)).collect();
    let initial = sum_se_of(net, &per_ap, cfg.decoder)?;
    let mut best = initial;
    let mut trace = vec![TracePoint {
        iteration: 0,
        objective: best,
        accepted: false,
    }];
    let mut evaluations = 1;
    for _ in 0..cfg.sweeps {
        for l in 0..net.num_aps() {
            let mut order: Vec<usize> = (0..per_ap_len).collect();
            order.shuffle(&mut rng);
            for block in order.chunks(cfg.n_selection) {
                let base: Vec<T> = net.phases.ap(l).to_vec();
                let saved = (net.proj[l].clone(), net.eff[l].clone(), net.est[l].clone());
                let mut accepted = false;
                for j in 0..cfg.j_max {
                    let off = T::of(cfg.offset(j));
                    let mut phi = base.clone();
                    for &i in block {
                        phi[i] += off;
                    }
                    net.set_ap_phases(l, &phi)?;
                    let old = std::mem::replace(&mut per_ap[l], ap_terms(net, l));
                    let value = sum_se_of(net, &per_ap, cfg.decoder)?;
                    evaluations += 1;
                    if value > best + cfg.xi {
                        best = value;
                        accepted = true;
                    } else {
                        per_ap[l] = old;
                    }
                    trace.push(TracePoint {
                        iteration: trace.len(),
                        objective: best,
                        accepted,
                    });
                    if accepted {
                        break;
                    }
                }
                if !accepted {
                    let start = l * per_ap_len;
                    net.phases.phi[start..start + per_ap_len].copy_from_slice(&base);
                    (net.proj[l], net.eff[l], net.est[l]) = saved;
                }
            }
        }
    }
    Ok(BeamformingResult {
        initial,
        objective: best,
        trace,
        evaluations,
    })
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerControlConfig {
    pub eps: f64,
    /// Upper bracket; defaults to twice the best full-power SINR.
    pub t_max: Option<f64>,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            t_max: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowerSolution {
    pub p: Vec<f64>,
    pub t_star: f64,
    pub t_max: f64,
    pub iterations: usize,
}

/// For fixed weights, UE `k`'s constraint `p_k S_k ≥ t (Σ_j p_j c_kj + n_k)`.
struct LinearSinr {
    signal: Vec<f64>,
    coupling: Vec<Vec<f64>>,
    noise: Vec<f64>,
}

impl LinearSinr {
    fn new<T: Float>(terms: &[ClosedFormTerms<T>], a: &[CVec<T>], p_hat: &[T], tau_p: usize, sigma2: T) -> Self {
        let k_count = terms.len();
        let mut signal = vec![0.0; k_count];
        let mut coupling = vec![vec![0.0; k_count]; k_count];
        let mut noise = vec![0.0; k_count];
        for (k, t) in terms.iter().enumerate() {
            let parts = denominator_parts(t, p_hat, tau_p);
            let ak = &a[k];
            let az = ak
                .iter()
                .zip(&t.z)
                .fold(num_complex::Complex::<T>::new(T::zero(), T::zero()), |s, (w, &z)| s + w.conj() * z);
            signal[k] = az.norm_sqr().as_f64();
            for (j, x) in parts.noncoherent.iter().enumerate() {
                coupling[k][j] += quad_form(x, ak).as_f64();
            }
            for (j, x) in &parts.coherent {
                coupling[k][*j] += quad_form(x, ak).as_f64();
            }
            coupling[k][k] -= quad_form(&parts.self_mean, ak).as_f64();
            noise[k] = (sigma2 * quad_form(&parts.noise, ak)).as_f64();
        }
        Self { signal, coupling, noise }
    }

    fn sinr(&self, p: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|k| p[k] * self.signal[k] / self.interference(p, k))
            .collect()
    }

    fn interference(&self, p: &[f64], k: usize) -> f64 {
        self.coupling[k].iter().zip(p).map(|(c, q)| c * q).sum::<f64>() + self.noise[k]
    }

    /// Smallest powers meeting target `t`, if they fit under `p_max`: the
    /// solution of `(I − t S⁻¹ C) p = t S⁻¹ n`, which is non-negative
    /// exactly when the target is reachable with unbounded power.
    fn feasible(&self, t: f64, p_max: f64) -> Option<Vec<f64>> {
        let k_count = self.signal.len();
        let m = nalgebra::DMatrix::from_fn(k_count, k_count, |k, j| {
            let id = if k == j { 1.0 } else { 0.0 };
            id - t * self.coupling[k][j] / self.signal[k]
        });
        let b = nalgebra::DVector::from_fn(k_count, |k, _| t * self.noise[k] / self.signal[k]);
        let p = m.lu().solve(&b)?;
        let slack = 1e-9 * p_max;
        if p.iter().any(|&v| !v.is_finite() || v < -slack || v > p_max + slack) {
            return None;
        }
        let p: Vec<f64> = p.iter().map(|&v| v.clamp(0.0, p_max)).collect();
        let ok = (0..k_count).all(|k| p[k] * self.signal[k] >= t * self.interference(&p, k) * (1.0 - 1e-9));
        ok.then_some(p)
    }
}

/// Bisection on the common SINR target with the weights held fixed. The
/// minimal powers found for the final target are scaled up together until
/// one reaches `p_max`, which can only raise every SINR.
pub fn maxmin_power<T: Float>(
    terms: &[ClosedFormTerms<T>],
    a: &[CVec<T>],
    p_hat: &[T],
    tau_p: usize,
    sigma2: T,
    p_max: f64,
    cfg: &PowerControlConfig,
) -> Result<PowerSolution> {
    if !(cfg.eps > 0.0) {
        return Err(Error::Config("ε must be positive".into()));
    }
    let sys = LinearSinr::new(terms, a, p_hat, tau_p, sigma2);
    if sys.signal.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::PowerControl("a UE has no useful signal under its weights".into()));
    }
    let full = vec![p_max; terms.len()];
    let t_max = cfg
        .t_max
        .unwrap_or_else(|| 2.0 * sys.sinr(&full).into_iter().fold(0.0, f64::max));
    let (mut lo, mut hi) = (0.0, t_max);
    let mut best = sys
        .feasible(0.0, p_max)
        .ok_or_else(|| Error::PowerControl("t = 0 infeasible".into()))?;
    let mut iterations = 0;
    while hi - lo >= cfg.eps {
        let t = 0.5 * (lo + hi);
        iterations += 1;
        match sys.feasible(t, p_max) {
            Some(p) => {
                lo = t;
                best = p;
            }
            None => hi = t,
        }
    }
    if lo > 0.0 && sys.feasible(lo, p_max).is_none() {
        return Err(Error::PowerControl(format!("bracket inconsistent at t = {lo:e}")));
    }
    let top = best.iter().copied().fold(0.0, f64::max);
    if top > 0.0 {
        let scale = p_max / top;
        best.iter_mut().for_each(|p| *p = (*p * scale).min(p_max));
    }
    Ok(PowerSolution {
        p: best,
        t_star: lo,
        t_max,
        iterations,
    })
}

/// Runs max-min power control on `net` with LSFD weights taken at full
/// power, then installs the resulting powers.
pub fn maxmin_power_network<T: Float>(net: &mut Network<T>, p_max: f64, cfg: &PowerControlConfig) -> Result<PowerSolution> {
    net.set_powers(vec![T::of(p_max); net.num_ues()]);
    let terms = crate::se_engine::closed_form_terms(net);
    let ctx = PowerContext::of(net);
    let a: Vec<_> = terms.iter().map(|t| weights(t, &ctx, Decoder::Lsfd)).collect();
    let sol = maxmin_power(&terms, &a, &net.p_hat, net.tau_p, net.sigma2, p_max, cfg)?;
    net.set_powers(sol.p.iter().map(|&v| T::of(v)).collect());
    Ok(sol)
}

/// `⌈log2(t_max / ε)⌉`.
pub fn bisection_bound(t_max: f64, eps: f64) -> usize {
    (t_max / eps).log2().ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_assignment_when_pilots_suffice() {
        let w = vec![vec![1.0; 4]; 4];
        assert_eq!(allocate_pilots_with(&w, 4).unwrap().pilot_of, vec![0, 1, 2, 3]);
    }

    #[test]
    fn reuse_bounded() {
        let w: Vec<Vec<f64>> = (0..11).map(|k| (0..11).map(|j| ((k * 7 + j * 3) % 5) as f64).collect()).collect();
        let a = allocate_pilots_with(&w, 3).unwrap();
        assert!(a.max_reuse(3) <= 11usize.div_ceil(3));
    }

    #[test]
    fn ties_go_to_lowest_pilot() {
        let w = vec![vec![0.0; 3]; 3];
        assert_eq!(allocate_pilots_with(&w, 2).unwrap().pilot_of, vec![0, 1, 0]);
    }

    #[test]
    fn symmetric_offsets() {
        let cfg = BeamformingConfig {
            symmetric_probe: true,
            step_size: 1.0,
            ..Default::default()
        };
        let offs: Vec<f64> = (0..4).map(|j| cfg.offset(j)).collect();
        assert_eq!(offs, vec![1.0, -1.0, 2.0, -2.0]);
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(bisection_bound(1.0, 1e-3), 10);
        assert_eq!(bisection_bound(8.0, 1.0), 3);
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = BeamformingConfig::default();
        c.step_size = 7.0;
        assert!(c.validate().is_err());
        c.step_size = 0.1;
        c.n_selection = 0;
        assert!(c.validate().is_err());
    }
}
