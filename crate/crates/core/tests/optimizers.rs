mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simcf_core::num::RMat;
use simcf_core::optimizers::{
    allocate_pilots, bisection_bound, maxmin_power, maxmin_power_network, max_ue_interference,
    optimize_beamforming, pair_interference, BeamformingConfig, PowerControlConfig, UiMetric,
};
use simcf_core::scenario::{drop_from_positions, generate_drop, SystemConfig};
use simcf_core::se_engine::{closed_form_terms, evaluate, lsfd_weights, Decoder, PowerContext};

fn beta_ui(beta: &RMat<f64>, k: usize, others: &[usize]) -> f64 {
    let mut s = 0.0;
    for &j in others {
        for l in 0..beta.nrows() {
            s += beta[(l, k)] * beta[(l, j)];
        }
    }
    s
}

#[test]
fn identity_when_every_ue_has_a_pilot() {
    let cfg = SystemConfig { k: 4, tau_p: 4, ..SystemConfig::default() };
    let d = generate_drop::<f64>(&cfg, 1).unwrap();
    assert_eq!(allocate_pilots(&d.beta, 4).unwrap().pilot_of, vec![0, 1, 2, 3]);
}

#[test]
fn added_ue_avoids_its_colocated_twin() {
    let tau_p = 4;
    let cfg = SystemConfig { l: 6, k: tau_p + 1, tau_p, ..SystemConfig::default() };
    for twin in 0..tau_p {
        let base = generate_drop::<f64>(&cfg, 40 + twin as u64).unwrap();
        let mut ue = base.ue_pos.clone();
        ue[tau_p] = ue[twin];
        let mut shadow = base.shadow_db.clone();
        for l in 0..cfg.l {
            shadow[(l, tau_p)] = shadow[(l, twin)];
        }
        let d = drop_from_positions(&cfg, base.ap_pos.clone(), ue, shadow);
        let got = allocate_pilots(&d.beta, tau_p).unwrap().pilot_of[tau_p];
        let ui: Vec<f64> = (0..tau_p).map(|t| beta_ui(&d.beta, tau_p, &[t])).collect();
        let want = (0..tau_p).fold(0, |b, t| if ui[t] < ui[b] { t } else { b });
        assert_eq!(got, want);
        assert_ne!(got, twin);
    }
}

#[test]
fn greedy_beats_median_random_assignment() {
    let cfg = SystemConfig { l: 10, k: 10, tau_p: 4, ..SystemConfig::default() };
    for seed in 0..10 {
        let d = generate_drop::<f64>(&cfg, seed).unwrap();
        let w = pair_interference::<f64>(None, &d.beta, UiMetric::BetaProduct);
        let greedy = max_ue_interference(&w, &allocate_pilots(&d.beta, 4).unwrap().pilot_of);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut random: Vec<f64> = (0..1000)
            .map(|_| {
                let mut p: Vec<usize> = (0..cfg.k).map(|k| k % cfg.tau_p).collect();
                p.shuffle(&mut rng);
                max_ue_interference(&w, &p)
            })
            .collect();
        random.sort_by(f64::total_cmp);
        assert!(greedy <= random[500], "seed {seed}: {greedy:e} > {:e}", random[500]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_ue_assigned_and_reuse_bounded(seed in 0u64..10_000, k in 1usize..14, tau_p in 1usize..6) {
        let cfg = SystemConfig { l: 4, k, tau_p, ..SystemConfig::default() };
        let d = generate_drop::<f64>(&cfg, seed).unwrap();
        let a = allocate_pilots(&d.beta, tau_p).unwrap();
        prop_assert_eq!(a.pilot_of.len(), k);
        prop_assert!(a.pilot_of.iter().all(|&t| t < tau_p));
        prop_assert!(a.max_reuse(tau_p) <= k.div_ceil(tau_p));
        prop_assert_eq!(&a, &allocate_pilots(&d.beta, tau_p).unwrap());
    }
}

#[test]
fn infinite_threshold_leaves_phases_alone() {
    let mut net = common::random_network(&common::small_config(3, 3, 16, 2, 2), 1);
    let before = net.phases.clone();
    let cfg = BeamformingConfig { xi: f64::INFINITY, ..Default::default() };
    let r = optimize_beamforming(&mut net, &cfg).unwrap();
    assert_eq!(net.phases, before);
    assert_eq!(r.objective, r.initial);
    let fresh = common::random_network(&common::small_config(3, 3, 16, 2, 2), 1);
    let a: f64 = evaluate(&net, Decoder::Lsfd).unwrap().iter().map(|u| u.se).sum();
    let b: f64 = evaluate(&fresh, Decoder::Lsfd).unwrap().iter().map(|u| u.se).sum();
    assert_eq!(a, b);
}

#[test]
fn beamforming_trace_is_monotone_and_consistent() {
    for seed in 0..4 {
        let mut net = common::random_network(&common::small_config(3, 4, 16, 3, 2), seed);
        let cfg = BeamformingConfig { seed, ..Default::default() };
        let r = optimize_beamforming(&mut net, &cfg).unwrap();
        assert!(r.objective >= r.initial);
        for w in r.trace.windows(2) {
            assert!(w[1].objective >= w[0].objective);
            if w[1].accepted {
                assert!(w[1].objective > w[0].objective + cfg.xi);
            } else {
                assert_eq!(w[1].objective, w[0].objective);
            }
        }
        assert!(net.phases.phi.iter().all(|&p| (0.0..std::f64::consts::TAU).contains(&p)));
        let now: f64 = evaluate(&net, Decoder::Lsfd).unwrap().iter().map(|u| u.se).sum();
        assert!((now - r.objective).abs() <= 1e-9 * now);
    }
}

#[test]
fn beamforming_is_deterministic() {
    let run = || {
        let mut net = common::random_network(&common::small_config(2, 3, 16, 2, 2), 5);
        let r = optimize_beamforming(&mut net, &BeamformingConfig { seed: 3, ..Default::default() }).unwrap();
        (net.phases, r.objective.to_bits())
    };
    assert_eq!(run(), run());
}

#[test]
fn single_ue_gets_full_power() {
    let mut net = common::random_network(&common::small_config(3, 1, 16, 2, 1), 2);
    let p_max = net.p[0];
    let full = evaluate(&net, Decoder::Lsfd).unwrap()[0].breakdown.sinr;
    let cfg = PowerControlConfig::default();
    let sol = maxmin_power_network(&mut net, p_max, &cfg).unwrap();
    assert!((sol.p[0] - p_max).abs() <= 1e-6 * p_max);
    assert!((sol.t_star - full).abs() <= cfg.eps);
}

#[test]
fn maxmin_improves_worst_ue_within_budget() {
    for seed in 0..20 {
        let mut net = common::random_network(&common::small_config(4, 4, 16, 2, 2), 100 + seed);
        let p_max = net.p[0];
        let cfg = PowerControlConfig::default();
        let full_min = evaluate(&net, Decoder::Lsfd).unwrap().iter().map(|u| u.breakdown.sinr).fold(f64::INFINITY, f64::min);
        let sol = maxmin_power_network(&mut net, p_max, &cfg).unwrap();
        assert!(sol.iterations <= bisection_bound(sol.t_max, cfg.eps));
        assert!(sol.p.iter().all(|&p| (0.0..=p_max).contains(&p)));
        let after = evaluate(&net, Decoder::Lsfd).unwrap();
        let new_min = after.iter().map(|u| u.breakdown.sinr).fold(f64::INFINITY, f64::min);
        assert!(new_min >= sol.t_star * (1.0 - 1e-9));
        assert!(new_min >= full_min - cfg.eps, "seed {seed}: {new_min} < {full_min}");
    }
}

#[test]
fn feasible_targets_are_down_closed() {
    let net = common::random_network(&common::small_config(3, 4, 16, 2, 2), 7);
    let ctx = PowerContext::of(&net);
    let terms = closed_form_terms(&net);
    let a: Vec<_> = terms.iter().map(|t| lsfd_weights(t, &ctx)).collect();
    let cfg = PowerControlConfig::default();
    let sol = maxmin_power(&terms, &a, &net.p_hat, net.tau_p, net.sigma2, 0.2, &cfg).unwrap();
    for frac in [0.9, 0.5, 0.1] {
        let capped = PowerControlConfig { t_max: Some(sol.t_star * frac), ..cfg.clone() };
        let s = maxmin_power(&terms, &a, &net.p_hat, net.tau_p, net.sigma2, 0.2, &capped).unwrap();
        assert!(s.t_star >= sol.t_star * frac - cfg.eps);
    }
}
