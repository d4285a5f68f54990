//! Sample summaries: mean, standard error, linear-interpolation
//! percentiles and the empirical CDF table.

use serde::Serialize;
use simcf_core::Error;

use crate::error::Result;

pub const CDF_POINTS: usize = 100;
pub const CDF_MIN_SAMPLES: usize = 20;

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `q`-quantile of already sorted data, interpolating linearly between
/// order statistics at rank `(n − 1)·q`.
pub fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of an empty sample");
    let h = (xs.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

pub fn percentile(samples: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(samples), q)
}

/// 5th percentile.
pub fn likely95(samples: &[f64]) -> f64 {
    percentile(samples, 0.05)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    pub likely95: f64,
}

/// Summary of a sample. Sums run over the sorted sample, so the result
/// does not depend on the input order.
pub fn summarize(samples: &[f64]) -> Summary {
    let xs = sorted(samples);
    let n = xs.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std_err: f64::NAN,
            likely95: f64::NAN,
        };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let std_err = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0) / nf).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        std_err,
        likely95: quantile_sorted(&xs, 0.05),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfReport {
    /// `(se, P[SE ≤ se])` at evenly spaced points from the sample minimum
    /// to its maximum.
    pub points: Vec<(f64, f64)>,
    pub likely95: f64,
}

pub fn cdf_report(samples: &[f64]) -> Result<CdfReport> {
    if samples.len() < CDF_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            need: CDF_MIN_SAMPLES,
            got: samples.len(),
        }
        .into());
    }
    let xs = sorted(samples);
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let n = xs.len() as f64;
    let points = (0..CDF_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (CDF_POINTS - 1) as f64;
            let x = if i == CDF_POINTS - 1 { hi } else { x };
            let below = xs.partition_point(|&s| s <= x);
            (x, below as f64 / n)
        })
        .collect();
    Ok(CdfReport {
        points,
        likely95: quantile_sorted(&xs, 0.05),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_samples_step_cdf() {
        let r = cdf_report(&[2.5; 30]).unwrap();
        assert_eq!(r.likely95, 2.5);
        assert_eq!(r.points.len(), CDF_POINTS);
        assert!(r.points.iter().all(|&(x, p)| x == 2.5 && p == 1.0));
    }

    #[test]
    fn uniform_fifth_percentile() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let r = cdf_report(&xs).unwrap();
        assert!((r.likely95 - 0.05).abs() <= 0.01, "{}", r.likely95);
        assert_eq!(r.points.last().unwrap().1, 1.0);
        assert!(r.points.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn too_few_samples() {
        let err = cdf_report(&[1.0; 19]).unwrap_err();
        assert_eq!(err.kind(), "too_few_samples");
    }

    #[test]
    fn interpolation_between_order_statistics() {
        let xs = [0.0, 10.0, 20.0, 30.0, 40.0];
        assert_eq!(percentile(&xs, 0.5), 20.0);
        assert_eq!(percentile(&xs, 0.05), 2.0);
        assert_eq!(percentile(&[7.0], 0.05), 7.0);
    }
}
