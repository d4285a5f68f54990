mod common;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simcf_core::network::Network;
use simcf_core::se_engine::{
    closed_form_terms, draw_realization, egcd_weights, pair_expectation, sinr_closed_form,
    uatf_monte_carlo, PowerContext,
};

/// Sample mean of `conj(X_l) X_l'` with `X_l = ĥ_lkᴴ h_lj`, with standard
/// errors of the real and imaginary parts.
fn mc_pair(net: &Network<f64>, l: usize, lp: usize, k: usize, j: usize, n: usize, seed: u64) -> (Complex<f64>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let r = draw_realization(net, &mut rng);
        let a = r.h_hat[l][k].dotc(&r.h[l][j]);
        let b = r.h_hat[lp][k].dotc(&r.h[lp][j]);
        xs.push(a.conj() * b);
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<Complex<f64>>() / nf;
    let var_re = xs.iter().map(|x| (x.re - mean.re).powi(2)).sum::<f64>() / (nf - 1.0);
    let var_im = xs.iter().map(|x| (x.im - mean.im).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var_re / nf).sqrt(), (var_im / nf).sqrt())
}

fn check_case(net: &Network<f64>, l: usize, lp: usize, k: usize, j: usize, label: &str) {
    let want = pair_expectation(net, l, lp, k, j);
    let (got, se_re, se_im) = mc_pair(net, l, lp, k, j, 200_000, 17 + (l * 7 + lp * 3 + j) as u64);
    let scale = want.norm().max(got.norm());
    eprintln!("{label}: closed {want:.4e} mc {got:.4e} se ({se_re:.2e},{se_im:.2e})");
    let tol = |se: f64| 3.0 * se + 1e-9 * scale;
    assert!((want.re - got.re).abs() <= tol(se_re), "{label} real part");
    assert!((want.im - got.im).abs() <= tol(se_im), "{label} imaginary part");
}

#[test]
fn six_cases_match_monte_carlo() {
    let shared = common::random_network(&common::small_config(2, 2, 9, 2, 1), 3);
    let separate = common::random_network(&common::small_config(2, 2, 9, 2, 2), 3);
    check_case(&separate, 0, 1, 0, 1, "l!=l' j not co-pilot");
    check_case(&shared, 0, 1, 0, 1, "l!=l' j co-pilot");
    check_case(&shared, 0, 1, 0, 0, "l!=l' j=k");
    check_case(&shared, 1, 1, 0, 0, "l=l' j=k");
    check_case(&separate, 1, 1, 0, 1, "l=l' j not co-pilot");
    check_case(&shared, 1, 1, 0, 1, "l=l' j co-pilot");
}

/// The rank-one `Λ Λᴴ` self term keeps cross-AP products of the LoS power
/// that the per-AP variance does not contain.
#[test]
fn rank_one_self_term_disagrees_with_monte_carlo() {
    let cfg = common::small_config(4, 3, 16, 2, 2);
    let net = common::random_network(&cfg, 7);
    let ctx = PowerContext::of(&net);
    let terms = closed_form_terms(&net);
    let a: Vec<_> = terms.iter().map(egcd_weights).collect();
    let mc = uatf_monte_carlo(&net, &a, 50_000, 5);
    let mut worst: f64 = 0.0;
    for (k, t) in terms.iter().enumerate() {
        let b = sinr_closed_form(t, &a[k], &ctx).unwrap();
        let lam_sum: f64 = t.lambda.iter().sum();
        let lam_sq: f64 = t.lambda.iter().map(|v| v * v).sum();
        let den_rank_one = b.denominator() + net.p[k] * lam_sq - net.p[k] * lam_sum * lam_sum;
        let rank_one = b.signal / den_rank_one;
        eprintln!("k={k} diag {:.4} rank-one {:.4} mc {:.4}±{:.4}", b.sinr, rank_one, mc[k].sinr, mc[k].std_err);
        assert!((b.sinr - mc[k].sinr).abs() <= 3.0 * mc[k].std_err);
        let miss = if den_rank_one > 0.0 {
            (rank_one - mc[k].sinr).abs() / mc[k].std_err
        } else {
            f64::INFINITY
        };
        worst = worst.max(miss);
    }
    assert!(worst > 3.0, "rank-one form unexpectedly within 3 SE");
}
