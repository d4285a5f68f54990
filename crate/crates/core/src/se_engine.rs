//! Closed-form uplink SINR/SE under large-scale fading decoding, and a
//! Monte-Carlo use-and-then-forget estimator to check it against.

use std::io::Write;

use num_complex::Complex;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{observe_pilot, sample_estimate};
use crate::linalg::{hermitian_solve, quad_form, trace, trace_prod};
use crate::network::Network;
use crate::num::{cis, sample_cn, CMat, CVec, Float};

/// Terms contributed by one AP to the SINR of one UE.
#[derive(Clone, Debug)]
pub struct ApUeTerms<T: Float> {
    /// `p̂_k τ_p tr Ω + ‖h̄‖²`.
    pub z: T,
    /// `‖h̄‖²`.
    pub lambda: T,
    /// `ξ_{kj}` for every UE `j`.
    pub xi: Vec<T>,
    /// `tr(R_j Ψ⁻¹ R_k)` for co-pilot UEs `j ≠ k`, zero elsewhere.
    pub delta: Vec<Complex<T>>,
}

/// Per-AP terms for every UE. Depends only on the statistics of AP `l`.
pub fn ap_terms<T: Float>(net: &Network<T>, l: usize) -> Vec<ApUeTerms<T>> {
    let k_count = net.num_ues();
    let tau = T::of(net.tau_p as f64);
    let eff = &net.eff[l];
    let est = &net.est[l];
    (0..k_count)
        .map(|k| {
            let hk = &eff[k].h_bar;
            let omega = &est[k].omega;
            let pt = net.p_hat[k] * tau;
            let lambda = hk.norm_squared();
            let z = pt * trace(omega).re + lambda;
            let xi = (0..k_count)
                .map(|j| {
                    let rj = &eff[j].r;
                    let hj = &eff[j].h_bar;
                    pt * trace_prod(rj, omega).re
                        + quad_form(rj, hk)
                        + pt * quad_form(omega, hj)
                        + hk.dotc(hj).norm_sqr()
                })
                .collect();
            let delta = (0..k_count)
                .map(|j| {
                    if j != k && net.pilot_of[j] == net.pilot_of[k] {
                        trace_prod(&(&eff[j].r * &est[k].psi_inv), &eff[k].r)
                    } else {
                        Complex::zero()
                    }
                })
                .collect();
            ApUeTerms { z, lambda, xi, delta }
        })
        .collect()
}

/// Closed-form terms of one UE across all APs.
#[derive(Clone, Debug)]
pub struct ClosedFormTerms<T: Float> {
    pub k: usize,
    pub z: Vec<T>,
    /// `xi[j][l]`, the diagonal of `Ξ_{kj}`.
    pub xi: Vec<Vec<T>>,
    /// `(j, Δ_{kj})` for `j ∈ P_k \ {k}`.
    pub delta: Vec<(usize, CVec<T>)>,
    pub lambda: Vec<T>,
}

impl<T: Float> ClosedFormTerms<T> {
    /// `Γ_k = diag(z_k)`.
    pub fn gamma(&self) -> CMat<T> {
        CMat::from_diagonal(&CVec::from_iterator(
            self.z.len(),
            self.z.iter().map(|&v| Complex::new(v, T::zero())),
        ))
    }

    pub fn num_aps(&self) -> usize {
        self.z.len()
    }
}

/// Gathers UE `k`'s terms from per-AP terms (`per_ap[l][k]`).
pub fn assemble_terms<T: Float>(
    per_ap: &[Vec<ApUeTerms<T>>],
    pilot_of: &[usize],
    k: usize,
) -> ClosedFormTerms<T> {
    let k_count = pilot_of.len();
    let z = per_ap.iter().map(|a| a[k].z).collect();
    let lambda = per_ap.iter().map(|a| a[k].lambda).collect();
    let xi = (0..k_count)
        .map(|j| per_ap.iter().map(|a| a[k].xi[j]).collect())
        .collect();
    let delta = (0..k_count)
        .filter(|&j| j != k && pilot_of[j] == pilot_of[k])
        .map(|j| (j, CVec::from_iterator(per_ap.len(), per_ap.iter().map(|a| a[k].delta[j]))))
        .collect();
    ClosedFormTerms {
        k,
        z,
        xi,
        delta,
        lambda,
    }
}

pub fn all_ap_terms<T: Float>(net: &Network<T>) -> Vec<Vec<ApUeTerms<T>>> {
    (0..net.num_aps()).into_par_iter().map(|l| ap_terms(net, l)).collect()
}

pub fn closed_form_terms<T: Float>(net: &Network<T>) -> Vec<ClosedFormTerms<T>> {
    let per_ap = all_ap_terms(net);
    (0..net.num_ues())
        .map(|k| assemble_terms(&per_ap, &net.pilot_of, k))
        .collect()
}

/// Scalars the SINR depends on besides the terms.
#[derive(Clone, Debug)]
pub struct PowerContext<'a, T: Float> {
    pub p: &'a [T],
    pub p_hat: &'a [T],
    pub tau_p: usize,
    pub sigma2: T,
}

impl<'a, T: Float> PowerContext<'a, T> {
    pub fn of(net: &'a Network<T>) -> Self {
        Self {
            p: &net.p,
            p_hat: &net.p_hat,
            tau_p: net.tau_p,
            sigma2: net.sigma2,
        }
    }
}

/// The three interference/noise matrices of the SINR denominator, each
/// without its power factor where that factor is a free variable.
#[derive(Clone, Debug)]
pub struct DenominatorParts<T: Float> {
    /// `diag(ξ_{kj})` for every `j`.
    pub noncoherent: Vec<CMat<T>>,
    /// `(j, p̂_k p̂_j τ_p² Δ Δᴴ)` for co-pilot `j`.
    pub coherent: Vec<(usize, CMat<T>)>,
    /// `diag(Λ_l²)`: removes the deterministic part of UE `k`'s own term.
    pub self_mean: CMat<T>,
    /// `Γ_k`.
    pub noise: CMat<T>,
}

fn real_diag<T: Float>(v: impl ExactSizeIterator<Item = T>) -> CMat<T> {
    let n = v.len();
    CMat::from_diagonal(&CVec::from_iterator(n, v.map(|x| Complex::new(x, T::zero()))))
}

pub fn denominator_parts<T: Float>(
    terms: &ClosedFormTerms<T>,
    p_hat: &[T],
    tau_p: usize,
) -> DenominatorParts<T> {
    let k = terms.k;
    let tau2 = T::of((tau_p * tau_p) as f64);
    DenominatorParts {
        noncoherent: terms.xi.iter().map(|x| real_diag(x.iter().copied())).collect(),
        coherent: terms
            .delta
            .iter()
            .map(|(j, d)| {
                let s = p_hat[k] * p_hat[*j] * tau2;
                (*j, (d * d.adjoint()) * Complex::new(s, T::zero()))
            })
            .collect(),
        self_mean: real_diag(terms.lambda.iter().map(|&v| v * v)),
        noise: terms.gamma(),
    }
}

impl<T: Float> DenominatorParts<T> {
    /// `Σ_j p_j Ξ_kj + Σ_{j∈P_k\k} p_j p̂_k p̂_j τ² ΔΔᴴ − p_k diag(Λ²) + σ² Γ_k`.
    pub fn matrix(&self, k: usize, p: &[T], sigma2: T) -> CMat<T> {
        let c = |x: T| Complex::new(x, T::zero());
        let mut d = &self.noise * c(sigma2);
        for (j, x) in self.noncoherent.iter().enumerate() {
            d += x * c(p[j]);
        }
        for (j, x) in &self.coherent {
            d += x * c(p[*j]);
        }
        d -= &self.self_mean * c(p[k]);
        d
    }
}

pub fn denominator_matrix<T: Float>(terms: &ClosedFormTerms<T>, ctx: &PowerContext<'_, T>) -> CMat<T> {
    denominator_parts(terms, ctx.p_hat, ctx.tau_p).matrix(terms.k, ctx.p, ctx.sigma2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Lsfd,
    Egcd,
}

impl Decoder {
    pub fn tag(self) -> &'static str {
        match self {
            Decoder::Lsfd => "LSFD",
            Decoder::Egcd => "EGCD",
        }
    }
}

impl std::fmt::Display for Decoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// `a_k = D_k⁻¹ z_k`.
pub fn lsfd_weights<T: Float>(terms: &ClosedFormTerms<T>, ctx: &PowerContext<'_, T>) -> CVec<T> {
    let d = denominator_matrix(terms, ctx);
    let z = CVec::from_iterator(terms.z.len(), terms.z.iter().map(|&v| Complex::new(v, T::zero())));
    hermitian_solve(&d, &z, "LSFD denominator")
}

pub fn egcd_weights<T: Float>(terms: &ClosedFormTerms<T>) -> CVec<T> {
    CVec::from_element(terms.num_aps(), Complex::new(T::one(), T::zero()))
}

pub fn weights<T: Float>(terms: &ClosedFormTerms<T>, ctx: &PowerContext<'_, T>, decoder: Decoder) -> CVec<T> {
    match decoder {
        Decoder::Lsfd => lsfd_weights(terms, ctx),
        Decoder::Egcd => egcd_weights(terms),
    }
}

/// Numerator and denominator pieces of the SINR for given weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrBreakdown<T: Float> {
    /// `p_k |aᴴ z|²`.
    pub signal: T,
    /// `Σ_j p_j aᴴ Ξ a − p_k aᴴ diag(Λ²) a`.
    pub noncoherent: T,
    pub coherent: T,
    /// `σ² aᴴ Γ a`.
    pub noise: T,
    pub sinr: T,
}

impl<T: Float> SinrBreakdown<T> {
    pub fn denominator(&self) -> T {
        self.noncoherent + self.coherent + self.noise
    }
}

pub fn sinr_closed_form<T: Float>(
    terms: &ClosedFormTerms<T>,
    a: &CVec<T>,
    ctx: &PowerContext<'_, T>,
) -> Result<SinrBreakdown<T>> {
    let parts = denominator_parts(terms, ctx.p_hat, ctx.tau_p);
    sinr_from_parts(&parts, terms, a, ctx.p, ctx.sigma2)
}

pub fn sinr_from_parts<T: Float>(
    parts: &DenominatorParts<T>,
    terms: &ClosedFormTerms<T>,
    a: &CVec<T>,
    p: &[T],
    sigma2: T,
) -> Result<SinrBreakdown<T>> {
    let k = terms.k;
    let az = a
        .iter()
        .zip(&terms.z)
        .fold(Complex::zero(), |s: Complex<T>, (w, &z)| s + w.conj() * z);
    let signal = p[k] * az.norm_sqr();
    let mut noncoherent = -p[k] * quad_form(&parts.self_mean, a);
    for (j, x) in parts.noncoherent.iter().enumerate() {
        noncoherent += p[j] * quad_form(x, a);
    }
    let coherent = parts
        .coherent
        .iter()
        .fold(T::zero(), |s, (j, x)| s + p[*j] * quad_form(x, a));
    let noise = sigma2 * quad_form(&parts.noise, a);
    let den = noncoherent + coherent + noise;
    if !(den > T::zero()) {
        return Err(Error::NegativeDenominator {
            ue: k,
            denominator: den.as_f64(),
            terms: format!(
                "signal={:e} noncoherent={:e} coherent={:e} noise={:e}",
                signal.as_f64(),
                noncoherent.as_f64(),
                coherent.as_f64(),
                noise.as_f64()
            ),
        });
    }
    Ok(SinrBreakdown {
        signal,
        noncoherent,
        coherent,
        noise,
        sinr: signal / den,
    })
}

/// `p_k z_kᴴ D_k⁻¹ z_k`, the SINR reached by the LSFD weights.
pub fn sinr_lsfd_quadratic<T: Float>(terms: &ClosedFormTerms<T>, ctx: &PowerContext<'_, T>) -> T {
    let a = lsfd_weights(terms, ctx);
    let za = terms
        .z
        .iter()
        .zip(a.iter())
        .fold(T::zero(), |s, (&z, w)| s + z * w.re);
    ctx.p[terms.k] * za
}

/// `(τ_c − τ_p)/τ_c · log2(1 + γ)`.
pub fn se_from_sinr<T: Float>(sinr: T, tau_c: usize, tau_p: usize) -> T {
    let pre = T::of((tau_c - tau_p) as f64 / tau_c as f64);
    pre * (T::one() + sinr).log2()
}

/// Per-UE closed-form result.
#[derive(Clone, Debug)]
pub struct UeSe<T: Float> {
    pub k: usize,
    pub breakdown: SinrBreakdown<T>,
    pub se: T,
    pub weights: CVec<T>,
}

pub fn evaluate_terms<T: Float>(
    terms: &[ClosedFormTerms<T>],
    ctx: &PowerContext<'_, T>,
    decoder: Decoder,
    tau_c: usize,
) -> Result<Vec<UeSe<T>>> {
    terms
        .iter()
        .map(|t| {
            let a = weights(t, ctx, decoder);
            let breakdown = sinr_closed_form(t, &a, ctx)?;
            Ok(UeSe {
                k: t.k,
                se: se_from_sinr(breakdown.sinr, tau_c, ctx.tau_p),
                breakdown,
                weights: a,
            })
        })
        .collect()
}

pub fn evaluate<T: Float>(net: &Network<T>, decoder: Decoder) -> Result<Vec<UeSe<T>>> {
    let terms = closed_form_terms(net);
    evaluate_terms(&terms, &PowerContext::of(net), decoder, net.tau_c)
}

pub fn sum_se<T: Float>(ues: &[UeSe<T>]) -> T {
    ues.iter().fold(T::zero(), |s, u| s + u.se)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SeRow {
    pub scenario_id: String,
    pub decoder: Decoder,
    pub k: usize,
    pub sinr: f64,
    pub se: f64,
    pub signal: f64,
    pub noncoherent: f64,
    pub coherent: f64,
    pub noise: f64,
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct SeReport {
    pub rows: Vec<SeRow>,
}

impl SeReport {
    pub fn push<T: Float>(&mut self, scenario_id: &str, decoder: Decoder, ues: &[UeSe<T>]) {
        for u in ues {
            self.rows.push(SeRow {
                scenario_id: scenario_id.to_string(),
                decoder,
                k: u.k,
                sinr: u.breakdown.sinr.as_f64(),
                se: u.se.as_f64(),
                signal: u.breakdown.signal.as_f64(),
                noncoherent: u.breakdown.noncoherent.as_f64(),
                coherent: u.breakdown.coherent.as_f64(),
                noise: u.breakdown.noise.as_f64(),
            });
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "scenario_id,decoder,k,sinr,se,signal,noncoherent,coherent,noise")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.scenario_id, r.decoder, r.k, r.sinr, r.se, r.signal, r.noncoherent, r.coherent, r.noise
            )?;
        }
        Ok(())
    }
}

/// `E[(ĥ_lkᴴ h_lj)* (ĥ_l'kᴴ h_l'j)]` in closed form, case by case.
pub fn pair_expectation<T: Float>(net: &Network<T>, l: usize, lp: usize, k: usize, j: usize) -> Complex<T> {
    let tau = T::of(net.tau_p as f64);
    let co_pilot = net.pilot_of[j] == net.pilot_of[k];
    let (pk, pj) = (net.p_hat[k], net.p_hat[j]);
    let omega_tr = |l: usize| trace(&net.est[l][k].omega).re;
    let hb = |l: usize, i: usize| &net.eff[l][i].h_bar;
    let z = |l: usize| pk * tau * omega_tr(l) + hb(l, k).norm_squared();
    let delta = |l: usize| {
        trace_prod(&(&net.eff[l][j].r * &net.est[l][k].psi_inv), &net.eff[l][k].r)
    };
    let xi = |l: usize| {
        let rj = &net.eff[l][j].r;
        let om = &net.est[l][k].omega;
        pk * tau * trace_prod(rj, om).re
            + quad_form(rj, hb(l, k))
            + pk * tau * quad_form(om, hb(l, j))
            + hb(l, k).dotc(hb(l, j)).norm_sqr()
    };
    let re = |x: T| Complex::new(x, T::zero());
    let cross = (pk * pj).sqrt() * tau;
    if l != lp {
        if j == k {
            re(z(l) * z(lp))
        } else if co_pilot {
            delta(l).conj() * delta(lp) * re(cross * cross)
        } else {
            Complex::zero()
        }
    } else if j == k {
        let lam = hb(l, k).norm_squared();
        re(xi(l) + z(l) * z(l) - lam * lam)
    } else if co_pilot {
        re(xi(l) + cross * cross * delta(l).norm_sqr())
    } else {
        re(xi(l))
    }
}

/// One joint draw of true and estimated effective channels.
#[derive(Clone, Debug)]
pub struct Realization<T: Float> {
    /// `h[l][j]`.
    pub h: Vec<Vec<CVec<T>>>,
    /// `h_hat[l][k]`.
    pub h_hat: Vec<Vec<CVec<T>>>,
}

/// Draws LoS phases, SIM-level NLoS components and pilot noise, then forms
/// MMSE estimates from the de-spread pilots.
pub fn draw_realization<T: Float, R: rand::Rng + ?Sized>(net: &Network<T>, rng: &mut R) -> Realization<T> {
    let k_count = net.num_ues();
    let mut h = Vec::with_capacity(net.num_aps());
    let mut h_hat = Vec::with_capacity(net.num_aps());
    let atoms = net.sim.atoms();
    for l in 0..net.num_aps() {
        let los: Vec<CVec<T>> = (0..k_count)
            .map(|k| {
                let phase = (T::sample_unit(rng) - T::of(0.5)) * T::TAU();
                &net.eff[l][k].h_bar * cis(phase)
            })
            .collect();
        let hl: Vec<CVec<T>> = (0..k_count)
            .map(|j| {
                let z = CVec::from_fn(atoms, |_, _| sample_cn::<T, R>(rng));
                let s = Complex::new(net.sim_ue[l][j].beta_nlos.sqrt(), T::zero());
                &los[j] + (&net.proj[l].sqrt_proj * z) * s
            })
            .collect();
        let mut est = vec![CVec::zeros(0); k_count];
        for t in 0..net.tau_p {
            let members: Vec<usize> = (0..k_count).filter(|&j| net.pilot_of[j] == t).collect();
            if members.is_empty() {
                continue;
            }
            let users: Vec<_> = members
                .iter()
                .map(|&j| (net.p_hat[j], &hl[j], &los[j]))
                .collect();
            let obs = observe_pilot(&users, net.tau_p, net.sigma2, rng);
            for &k in &members {
                est[k] = sample_estimate(&net.est[l][k], &los[k], &hl[k], &obs).0;
            }
        }
        h.push(hl);
        h_hat.push(est);
    }
    Realization { h, h_hat }
}

/// Monte-Carlo use-and-then-forget SINR of one UE with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McSinr {
    pub sinr: f64,
    pub std_err: f64,
    pub trials: usize,
}

const MC_CHUNK: usize = 512;

/// Estimates every UE's SINR for fixed combining weights (`weights[k]` has
/// one entry per AP) by sampling the four expectations of the bound.
pub fn uatf_monte_carlo<T: Float>(
    net: &Network<T>,
    weights: &[CVec<T>],
    n_trials: usize,
    seed: u64,
) -> Vec<McSinr> {
    let k_count = net.num_ues();
    let chunks = n_trials.div_ceil(MC_CHUNK);
    let samples: Vec<Vec<[f64; 3]>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = MC_CHUNK.min(n_trials - c * MC_CHUNK);
            let mut out = Vec::with_capacity(n * k_count);
            for _ in 0..n {
                let r = draw_realization(net, &mut rng);
                for k in 0..k_count {
                    out.push(trial_stats(net, &r, &weights[k], k));
                }
            }
            out
        })
        .collect();
    let flat: Vec<[f64; 3]> = samples.into_iter().flatten().collect();
    (0..k_count)
        .map(|k| {
            let xs: Vec<[f64; 3]> = flat.iter().skip(k).step_by(k_count).copied().collect();
            delta_method(&xs, net.p[k].as_f64())
        })
        .collect()
}

/// `(Re X, Im X, D)` with `X = Σ a* ĥ_kᴴ h_k` and
/// `D = Σ_j p_j |Σ a* ĥ_kᴴ h_j|² + σ² Σ |a|² ‖ĥ_k‖²`.
fn trial_stats<T: Float>(net: &Network<T>, r: &Realization<T>, a: &CVec<T>, k: usize) -> [f64; 3] {
    let mut x = Complex::<f64>::zero();
    let mut d = 0.0;
    let mut noise = 0.0;
    for j in 0..net.num_ues() {
        let mut acc = Complex::<f64>::zero();
        for l in 0..net.num_aps() {
            let v = a[l].conj() * r.h_hat[l][k].dotc(&r.h[l][j]);
            acc += Complex::new(v.re.as_f64(), v.im.as_f64());
        }
        if j == k {
            x = acc;
        }
        d += net.p[j].as_f64() * acc.norm_sqr();
    }
    for l in 0..net.num_aps() {
        noise += a[l].norm_sqr().as_f64() * r.h_hat[l][k].norm_squared().as_f64();
    }
    d += net.sigma2.as_f64() * noise;
    [x.re, x.im, d]
}

/// Plug-in `p|E X|² / (E D − p|E X|²)` and its delta-method standard error.
fn delta_method(xs: &[[f64; 3]], p: f64) -> McSinr {
    let n = xs.len() as f64;
    let mut mean = [0.0; 3];
    for x in xs {
        for i in 0..3 {
            mean[i] += x[i] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for x in xs {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n - 1.0).max(1.0);
            }
        }
    }
    let s = mean[0] * mean[0] + mean[1] * mean[1];
    let den = mean[2] - p * s;
    let sinr = p * s / den;
    let ds = p * mean[2] / (den * den);
    let grad = [2.0 * mean[0] * ds, 2.0 * mean[1] * ds, -p * s / (den * den)];
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * cov[i][j] * grad[j];
        }
    }
    McSinr {
        sinr,
        std_err: (var / n).sqrt(),
        trials: xs.len(),
    }
}
