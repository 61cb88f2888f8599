#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson goodness of fit of `counts` against probabilities `expected`.
/// Bins with expected count below 5 are pooled. Returns `(statistic, dof, p_value)`.
pub fn chi_square_gof(counts: &[u64], expected: &[f64]) -> (f64, f64, f64) {
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(expected) {
        let e = p * total;
        if e >= 5.0 {
            stat += (c as f64 - e).powi(2) / e;
            bins += 1;
        } else {
            pooled_obs += c as f64;
            pooled_exp += e;
        }
    }
    if pooled_exp >= 5.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    } else {
        assert!(
            pooled_obs <= 5.0 + 10.0 * pooled_exp.max(1.0),
            "mass observed where almost none expected"
        );
    }
    let dof = (bins.max(2) - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    (stat, dof, p)
}

/// Two-sample chi-square homogeneity test on equal-length histograms.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, f64, f64) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        if pooled < 10.0 {
            continue;
        }
        let (ea, eb) = (pooled * na / (na + nb), pooled * nb / (na + nb));
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        bins += 1;
    }
    let dof = (bins.max(2) - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    (stat, dof, p)
}

pub fn histogram(values: impl Iterator<Item = u64>, n: u64) -> Vec<u64> {
    let mut h = vec![0u64; n as usize + 1];
    for v in values {
        h[v as usize] += 1;
    }
    h
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Combines independent Pearson statistics `(statistic, dof)` into one test.
pub fn pooled_p_value(parts: &[(f64, f64)]) -> (f64, f64, f64) {
    let stat: f64 = parts.iter().map(|p| p.0).sum();
    let dof: f64 = parts.iter().map(|p| p.1).sum();
    (stat, dof, 1.0 - ChiSquared::new(dof).unwrap().cdf(stat))
}
