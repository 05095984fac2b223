//! Goodness-of-fit helpers and the Monte Carlo assertion guard.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{range, Result};

/// Fewest expected hits for which an MC cell may back a quantitative claim.
pub const MIN_EXPECTED_COUNT: f64 = 100.0;

/// Compares an MC proportion with its target, `k` standard errors wide.
/// Refuses (errors) when the target event is expected fewer than
/// `MIN_EXPECTED_COUNT` times, since heavy tails make such checks meaningless.
pub fn mc_agrees(estimate: f64, target: f64, m: u64, k: f64) -> Result<bool> {
    let expected = target.min(1.0 - target) * m as f64;
    if expected < MIN_EXPECTED_COUNT {
        return range(format!(
            "event expected {expected:.1} times in {m} draws; too rare to test"
        ));
    }
    let se = (target * (1.0 - target) / m as f64).sqrt();
    Ok((estimate - target).abs() <= k * se)
}

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} e^{-2k²λ²}.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov–Smirnov test; returns (D, p-value).
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    (d, ks_pvalue(d, n))
}

/// Two-sample Kolmogorov–Smirnov test; returns (D, p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, ks_pvalue(d, ne))
}

/// Pearson chi-square against expected probabilities; returns
/// (statistic, degrees of freedom, p-value). Cells with zero expected
/// probability must have zero count and are dropped.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize, f64) {
    let m: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                return (f64::INFINITY, 0, 0.0);
            }
            continue;
        }
        let e = p * m as f64;
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    let pv = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).map(|d| d.sf(stat)).unwrap_or(0.0)
    };
    (stat, dof, pv)
}
