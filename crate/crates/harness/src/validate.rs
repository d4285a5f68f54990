//! Oracle checks on small instances: closed-form SINR against the
//! Monte-Carlo bound, the six pair expectations against sampling, and the
//! MMSE decomposition and estimate covariance.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use simcf_core::network::{Network, SimModel};
use simcf_core::num::CMat;
use simcf_core::scenario::generate_drop;
use simcf_core::se_engine::{
    closed_form_terms, draw_realization, lsfd_weights, pair_expectation, sinr_closed_form, uatf_monte_carlo,
    PowerContext,
};
use simcf_core::sim_physics::PhaseTensor;
use simcf_core::{Network64, SystemConfig};

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

pub fn small_config(l: usize, k: usize, n: usize, m: usize, tau_p: usize) -> SystemConfig {
    SystemConfig {
        l,
        k,
        u: 2,
        m,
        n,
        tau_p,
        ..SystemConfig::default()
    }
}

/// Random-phase network with round-robin pilots.
pub fn random_network(cfg: &SystemConfig, seed: u64) -> Result<Network64> {
    let pilots: Vec<usize> = (0..cfg.k).map(|k| k % cfg.tau_p).collect();
    let drop = generate_drop::<f64>(cfg, seed)?.with_pilots(&pilots);
    let sim = Arc::new(SimModel::new(cfg)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let phases = PhaseTensor::random(cfg.l, cfg.m, sim.atoms(), &mut rng);
    Ok(Network::new(cfg, &drop, sim, phases)?)
}

/// Closed-form LSFD SINR of every UE against the Monte-Carlo estimate at
/// `L = 4`, `K = 3`, `N = 16`, `M = 2`, `τ_p = 2`.
pub fn closed_form_vs_monte_carlo(trials: usize) -> Result<Check> {
    let start = Instant::now();
    let net = random_network(&small_config(4, 3, 16, 2, 2), 7)?;
    let ctx = PowerContext::of(&net);
    let terms = closed_form_terms(&net);
    let a: Vec<_> = terms.iter().map(|t| lsfd_weights(t, &ctx)).collect();
    let mc = uatf_monte_carlo(&net, &a, trials, 99);
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, t) in terms.iter().enumerate() {
        let cf = sinr_closed_form(t, &a[k], &ctx)?.sinr;
        let z = (cf - mc[k].sinr) / mc[k].std_err;
        passed &= z.abs() <= 3.0;
        parts.push(format!("k{k} {cf:.4} vs {:.4}±{:.4} ({z:+.2}σ)", mc[k].sinr, mc[k].std_err));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Check::new(
        "closed form vs Monte-Carlo",
        passed,
        format!("{}; {trials} trials in {secs:.1}s", parts.join(", ")),
    ))
}

/// Sample mean of `conj(X_l) X_l'` with `X_l = ĥ_lkᴴ h_lj`, and standard
/// errors of its real and imaginary parts.
fn sampled_pair(net: &Network64, l: usize, lp: usize, k: usize, j: usize, n: usize, seed: u64) -> (Complex<f64>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Complex<f64>> = (0..n)
        .map(|_| {
            let r = draw_realization(net, &mut rng);
            r.h_hat[l][k].dotc(&r.h[l][j]).conj() * r.h_hat[lp][k].dotc(&r.h[lp][j])
        })
        .collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<Complex<f64>>() / nf;
    let var_re = xs.iter().map(|x| (x.re - mean.re).powi(2)).sum::<f64>() / (nf - 1.0);
    let var_im = xs.iter().map(|x| (x.im - mean.im).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var_re / nf).sqrt(), (var_im / nf).sqrt())
}

/// The six cases of `E[conj(ĥ_lkᴴ h_lj) ĥ_l'kᴴ h_l'j]`, split by whether the
/// APs coincide and how UE `j` relates to UE `k`.
pub fn pair_expectation_audit(trials: usize) -> Result<Vec<Check>> {
    let shared = random_network(&small_config(2, 2, 9, 2, 1), 3)?;
    let separate = random_network(&small_config(2, 2, 9, 2, 2), 3)?;
    let cases: [(&Network64, usize, usize, usize, &str); 6] = [
        (&separate, 0, 1, 1, "l≠l', j outside P_k"),
        (&shared, 0, 1, 1, "l≠l', j in P_k"),
        (&shared, 0, 1, 0, "l≠l', j = k"),
        (&shared, 1, 1, 0, "l = l', j = k"),
        (&separate, 1, 1, 1, "l = l', j outside P_k"),
        (&shared, 1, 1, 1, "l = l', j in P_k"),
    ];
    Ok(cases
        .iter()
        .map(|&(net, l, lp, j, label)| {
            let want = pair_expectation(net, l, lp, 0, j);
            let (got, se_re, se_im) = sampled_pair(net, l, lp, 0, j, trials, 17 + (l * 7 + lp * 3 + j) as u64);
            let slack = 1e-9 * want.norm().max(got.norm());
            let z_re = (want.re - got.re) / (se_re + slack);
            let z_im = (want.im - got.im) / (se_im + slack);
            let passed = z_re.abs() <= 3.0 && z_im.abs() <= 3.0;
            Check::new(
                format!("pair expectation, {label}"),
                passed,
                format!("closed {want:.4e} sampled {got:.4e} ({z_re:+.2}σ, {z_im:+.2}σ)"),
            )
        })
        .collect())
}

/// `p̂_k τ_p Ω + C = R` on `instances` random networks.
pub fn estimation_identity(instances: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let net = random_network(&small_config(2, 3, 9, 2, 2), 300 + seed)?;
        for l in 0..net.num_aps() {
            for k in 0..net.num_ues() {
                let r = &net.eff[l][k].r;
                let st = &net.est[l][k];
                let back = &st.omega * Complex::new(net.p_hat[k] * net.tau_p as f64, 0.0) + &st.c;
                worst = worst.max((back - r).camax() / r.camax());
            }
        }
    }
    Ok(Check::new(
        "estimation identity",
        worst <= 1e-10,
        format!("worst relative error {worst:.2e} over {instances} networks"),
    ))
}

/// Sampled second moment of `ĥ` against `h̄h̄ᴴ + p̂τΩ`, entrywise within 3σ.
pub fn estimate_covariance(trials: usize) -> Result<Check> {
    let net = random_network(&small_config(2, 3, 16, 2, 2), 12)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<_> = (0..trials).map(|_| draw_realization(&net, &mut rng)).collect();
    let n = trials as f64;
    let tau = net.tau_p as f64;
    let mut worst: f64 = 0.0;
    for l in 0..net.num_aps() {
        for k in 0..net.num_ues() {
            let hb = &net.eff[l][k].h_bar;
            let want: CMat<f64> = hb * hb.adjoint() + &net.est[l][k].omega * Complex::new(net.p_hat[k] * tau, 0.0);
            let outers: Vec<CMat<f64>> = draws.iter().map(|r| &r.h_hat[l][k] * r.h_hat[l][k].adjoint()).collect();
            let mean = outers.iter().fold(CMat::zeros(want.nrows(), want.ncols()), |s, x| s + x) / Complex::new(n, 0.0);
            let slack = 1e-9 * want.camax();
            for i in 0..want.nrows() {
                for c in 0..want.ncols() {
                    let m = mean[(i, c)];
                    let (vr, vi) = outers.iter().fold((0.0, 0.0), |(a, b), x| {
                        let d = x[(i, c)] - m;
                        (a + d.re * d.re, b + d.im * d.im)
                    });
                    let se_re = (vr / (n - 1.0) / n).sqrt();
                    let se_im = (vi / (n - 1.0) / n).sqrt();
                    let d = m - want[(i, c)];
                    worst = worst.max(d.re.abs() / (se_re + slack)).max(d.im.abs() / (se_im + slack));
                }
            }
        }
    }
    Ok(Check::new(
        "estimate covariance",
        worst <= 3.0,
        format!("largest entry deviation {worst:.2}σ over {trials} draws"),
    ))
}

pub struct SuiteSize {
    pub sinr_trials: usize,
    pub pair_trials: usize,
    pub identity_instances: u64,
    pub covariance_trials: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        Self {
            sinr_trials: 50_000,
            pair_trials: 200_000,
            identity_instances: 100,
            covariance_trials: 40_000,
        }
    }
}

pub fn run_all(size: &SuiteSize) -> Result<Vec<Check>> {
    let mut checks = vec![closed_form_vs_monte_carlo(size.sinr_trials)?];
    checks.extend(pair_expectation_audit(size.pair_trials)?);
    checks.push(estimation_identity(size.identity_instances)?);
    checks.push(estimate_covariance(size.covariance_trials)?);
    Ok(checks)
}
