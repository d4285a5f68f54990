mod common;

use num_complex::Complex;
use proptest::prelude::*;
use simcf_core::estimation::estimation_stats;
use simcf_core::linalg::hermitian_solve;
use simcf_core::network::Network;
use simcf_core::num::{CMat, CVec};
use simcf_core::se_engine::{
    ap_terms, closed_form_terms, denominator_matrix, egcd_weights, evaluate, lsfd_weights, sinr_closed_form,
    sinr_lsfd_quadratic, uatf_monte_carlo, Decoder, PowerContext, SeReport,
};

fn instance(seed: u64) -> Network<f64> {
    let l = 2 + (seed % 5) as usize;
    let tau_p = 1 + (seed % 3) as usize;
    common::random_network(&common::small_config(l, 4, 16, 2, tau_p), seed)
}

#[test]
fn lsfd_never_below_egcd() {
    for seed in 0..200 {
        let net = instance(seed);
        let lsfd = evaluate(&net, Decoder::Lsfd).unwrap();
        let egcd = evaluate(&net, Decoder::Egcd).unwrap();
        for (a, b) in lsfd.iter().zip(&egcd) {
            assert!(
                a.breakdown.sinr >= b.breakdown.sinr * (1.0 - 1e-9),
                "seed {seed} ue {}: {} < {}",
                a.k,
                a.breakdown.sinr,
                b.breakdown.sinr
            );
        }
    }
}

#[test]
fn bilinear_form_equals_quadratic_form_for_lsfd_weights() {
    for seed in 0..100 {
        let net = instance(1000 + seed);
        let ctx = PowerContext::of(&net);
        for t in closed_form_terms(&net) {
            let a = lsfd_weights(&t, &ctx);
            let g14 = sinr_closed_form(&t, &a, &ctx).unwrap().sinr;
            let g22 = sinr_lsfd_quadratic(&t, &ctx);
            assert!((g14 - g22).abs() <= 1e-9 * g22, "seed {seed}: {g14} vs {g22}");
        }
    }
}

#[test]
fn single_ap_lsfd_equals_egcd() {
    for seed in 0..20 {
        let net = common::random_network(&common::small_config(1, 3, 16, 2, 2), seed);
        let lsfd = evaluate(&net, Decoder::Lsfd).unwrap();
        let egcd = evaluate(&net, Decoder::Egcd).unwrap();
        for (a, b) in lsfd.iter().zip(&egcd) {
            assert!((a.breakdown.sinr - b.breakdown.sinr).abs() <= 1e-10 * b.breakdown.sinr);
        }
    }
}

#[test]
fn zero_power_gives_zero_sinr() {
    let mut net = instance(5);
    net.p[0] = 0.0;
    let out = evaluate(&net, Decoder::Lsfd).unwrap();
    assert_eq!(out[0].breakdown.sinr, 0.0);
    assert_eq!(out[0].se, 0.0);
}

#[test]
fn gamma_is_diag_z_and_terms_nonnegative() {
    let net = instance(9);
    for t in closed_form_terms(&net) {
        let g = t.gamma();
        for l in 0..t.num_aps() {
            assert!(t.z[l] >= 0.0);
            for r in 0..t.num_aps() {
                let want = if l == r { t.z[l] } else { 0.0 };
                assert_eq!(g[(l, r)], Complex::new(want, 0.0));
            }
        }
        assert!(t.xi.iter().flatten().all(|&x| x >= 0.0));
    }
}

#[test]
fn coherent_term_vanishes_without_pilot_sharing() {
    let net = common::random_network(&common::small_config(3, 3, 16, 2, 3), 4);
    for u in evaluate(&net, Decoder::Lsfd).unwrap() {
        assert_eq!(u.breakdown.coherent, 0.0);
    }
    let shared = common::random_network(&common::small_config(3, 3, 16, 2, 1), 4);
    assert!(evaluate(&shared, Decoder::Lsfd).unwrap().iter().all(|u| u.breakdown.coherent > 0.0));
}

#[test]
fn no_los_reduces_to_trace_of_omega() {
    let mut net = instance(11);
    for l in 0..net.num_aps() {
        for k in 0..net.num_ues() {
            net.eff[l][k].h_bar.fill(Complex::new(0.0, 0.0));
        }
    }
    for l in 0..net.num_aps() {
        for (k, t) in ap_terms(&net, l).iter().enumerate() {
            assert_eq!(t.lambda, 0.0);
            let tr: f64 = net.est[l][k].omega.diagonal().iter().map(|z| z.re).sum();
            let want = net.p_hat[k] * net.tau_p as f64 * tr;
            assert!((t.z - want).abs() <= 1e-12 * want);
        }
    }
}

#[test]
fn isotropic_scalar_z() {
    let mut net = common::random_network(&common::small_config(1, 1, 16, 2, 1), 2);
    let (beta, u) = (3e-9, 2usize);
    let r = CMat::<f64>::identity(u, u) * Complex::new(beta, 0.0);
    let (p, tau, s2) = (net.p_hat[0], net.tau_p as f64, net.sigma2);
    net.eff[0][0].r = r.clone();
    net.eff[0][0].h_bar = CVec::zeros(u);
    net.est[0][0] = estimation_stats(&r, p, &[(p, &r)], net.tau_p, s2).unwrap();
    let z = ap_terms(&net, 0)[0].z;
    let want = u as f64 * p * tau * beta * beta / (p * tau * beta + s2);
    assert!((z - want).abs() <= 1e-12 * want);
}

#[test]
fn silent_interferers_leave_only_own_and_noise_terms() {
    let cfg = common::small_config(3, 3, 16, 2, 1);
    let mut net = common::random_network(&cfg, 21);
    net.p = vec![0.2, 0.0, 0.0];
    let ctx = PowerContext::of(&net);
    let terms = closed_form_terms(&net);
    let b = sinr_closed_form(&terms[0], &egcd_weights(&terms[0]), &ctx).unwrap();
    assert_eq!(b.coherent, 0.0);
    let own: f64 = terms[0].xi[0].iter().zip(&terms[0].lambda).map(|(x, l)| 0.2 * (x - l * l)).sum();
    assert!((b.noncoherent - own).abs() <= 1e-10 * own);
    let a: Vec<_> = terms.iter().map(egcd_weights).collect();
    let mc = uatf_monte_carlo(&net, &a, 20_000, 3);
    assert!((mc[0].sinr - b.sinr).abs() <= 3.0 * mc[0].std_err);
}

#[test]
fn standard_error_shrinks_with_trials() {
    let net = instance(33);
    let ctx = PowerContext::of(&net);
    let a: Vec<_> = closed_form_terms(&net).iter().map(|t| lsfd_weights(t, &ctx)).collect();
    let small = uatf_monte_carlo(&net, &a, 10_000, 1);
    let large = uatf_monte_carlo(&net, &a, 20_000, 2);
    for (s, l) in small.iter().zip(&large) {
        let ratio = l.std_err / s.std_err;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let net = instance(8);
    let a: Vec<_> = closed_form_terms(&net).iter().map(egcd_weights).collect();
    let x = uatf_monte_carlo(&net, &a, 3000, 4);
    let y = uatf_monte_carlo(&net, &a, 3000, 4);
    for (p, q) in x.iter().zip(&y) {
        assert_eq!(p.sinr.to_bits(), q.sinr.to_bits());
    }
}

#[test]
fn report_csv_has_one_row_per_ue() {
    let net = instance(2);
    let mut rep = SeReport::default();
    rep.push("s0", Decoder::Lsfd, &evaluate(&net, Decoder::Lsfd).unwrap());
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 1 + net.num_ues());
    assert!(text.lines().nth(1).unwrap().starts_with("s0,LSFD,0,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sinr_invariant_to_weight_scaling(seed in 0u64..500, c in 1e-3f64..1e3) {
        let net = instance(seed);
        let ctx = PowerContext::of(&net);
        for t in closed_form_terms(&net) {
            let a = lsfd_weights(&t, &ctx);
            let g1 = sinr_closed_form(&t, &a, &ctx).unwrap().sinr;
            let g2 = sinr_closed_form(&t, &(&a * Complex::new(c, 0.0)), &ctx).unwrap().sinr;
            prop_assert!((g1 - g2).abs() <= 1e-9 * g1);
            let d = denominator_matrix(&t, &ctx);
            let cz = CVec::from_iterator(t.num_aps(), t.z.iter().map(|&z| Complex::new(c * z, 0.0)));
            let b = hermitian_solve(&d, &cz, "test");
            prop_assert!((&b - &a * Complex::new(c, 0.0)).norm() <= 1e-8 * b.norm());
            let g3 = sinr_closed_form(&t, &b, &ctx).unwrap().sinr;
            prop_assert!((g1 - g3).abs() <= 1e-9 * g1);
        }
    }

    #[test]
    fn denominator_positive_for_any_weights(seed in 0u64..500, w in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6)) {
        let net = instance(seed);
        let ctx = PowerContext::of(&net);
        for t in closed_form_terms(&net) {
            let a = CVec::from_iterator(t.num_aps(), w.iter().cycle().take(t.num_aps()).map(|&(r, i)| Complex::new(r, i)));
            if a.norm() > 1e-6 {
                prop_assert!(sinr_closed_form(&t, &a, &ctx).unwrap().denominator() > 0.0);
            }
        }
    }
}
