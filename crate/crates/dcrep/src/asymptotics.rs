//! Closed-form limits: the h → 0 limits of the three-point representation
//! for Gaussians, the large-h limits for discrete stable laws, the Γ
//! functional behind the transition at α = 1/2 and the constants of the
//! two-parameter symmetric stable family.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::conditions::LargeH;
use crate::error::{invalid, range, Error, Result};
use crate::gaussian_law::CovarianceSpec;
use crate::partitions::{parse_pattern, pattern_key};
use crate::quad::integrate;
use crate::special::gamma;
use crate::stable_law::{stablegood_integral, SpectralMeasure};

/// Limits within this of zero are treated as zero.
pub const LIMIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallHStatus {
    /// Every limit is positive, so X^h is a color process for small h > 0.
    ColorForSmallH,
    /// Some limit is negative.
    NotColorForSmallH,
    /// A limit vanishes and nothing is claimed.
    Borderline,
}

fn status_of(w: &[f64]) -> SmallHStatus {
    if w.iter().any(|v| *v < -LIMIT_TOL) {
        SmallHStatus::NotColorForSmallH
    } else if w.iter().all(|v| *v > LIMIT_TOL) {
        SmallHStatus::ColorForSmallH
    } else {
        SmallHStatus::Borderline
    }
}

/// h → 0 limits of the signed representation of X^h, n = 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallHLimits3 {
    pub formula: String,
    pub q_123: f64,
    pub q_12_3: f64,
    pub q_13_2: f64,
    pub q_1_23: f64,
    pub q_1_2_3: f64,
    /// arccos(det A / ∏(1 + a_ij) − 1)/π, negated when 1 + a12 + a13 + a23 < 0.
    pub kappa: f64,
    pub status: SmallHStatus,
}

impl SmallHLimits3 {
    /// Limits in the order 123, 12|3, 13|2, 1|23, 1|2|3.
    pub fn weights(&self) -> [f64; 5] {
        [self.q_123, self.q_12_3, self.q_13_2, self.q_1_23, self.q_1_2_3]
    }
}

fn acos_clamped(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

pub fn small_h_limits_3(cov: &CovarianceSpec) -> Result<SmallHLimits3> {
    if cov.n() != 3 || !cov.is_standard() {
        return invalid("need a standard 3x3 covariance");
    }
    if !cov.is_pd() {
        return Err(Error::Singular);
    }
    let (a12, a13, a23) = (cov.a(0, 1), cov.a(0, 2), cov.a(1, 2));
    let (t12, t13, t23) = (acos_clamped(a12), acos_clamped(a13), acos_clamped(a23));
    // The arccos term is 2 − (sum of the angles of the spherical triangle
    // spanned by the three unit vectors)/π only while that triangle has area
    // at most π, i.e. while 1 + a12 + a13 + a23 ≥ 0. Past that the sign flips.
    let mut kappa = acos_clamped(cov.det() / ((1.0 + a12) * (1.0 + a13) * (1.0 + a23)) - 1.0) / PI;
    if 1.0 + a12 + a13 + a23 < 0.0 {
        kappa = -kappa;
    }
    let w = [
        2.0 - (t12 + t13 + t23) / PI - kappa,
        (t13 + t23 - t12) / PI - 1.0 + kappa,
        (t12 + t23 - t13) / PI - 1.0 + kappa,
        (t12 + t13 - t23) / PI - 1.0 + kappa,
        2.0 - 2.0 * kappa,
    ];
    Ok(SmallHLimits3 {
        formula: "small-h-arccos".into(),
        q_123: w[0],
        q_12_3: w[1],
        q_13_2: w[2],
        q_1_23: w[3],
        q_1_2_3: w[4],
        kappa,
        status: status_of(&w),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family3 {
    /// All correlations a.
    FullySymmetric,
    /// Correlations a, a², a: the stationary Gaussian Markov chain.
    Markov,
}

/// The family-specific closed forms of the small-h limits, in the order
/// 123, 12|3, 13|2, 1|23, 1|2|3.
pub fn family_small_h_limits(family: Family3, a: f64) -> Result<[f64; 5]> {
    if !(a > 0.0 && a < 1.0) {
        return range(format!("a = {a} must lie in (0,1)"));
    }
    Ok(match family {
        Family3::FullySymmetric => {
            let k = acos_clamped(a * (a * a - 6.0 * a - 3.0) / (1.0 + a).powi(3)) / PI;
            let t = a.acos() / PI;
            let pair = t - 1.0 + k;
            [2.0 - 3.0 * t - k, pair, pair, pair, 2.0 - 2.0 * k]
        }
        Family3::Markov => {
            let k = acos_clamped(-2.0 * a / (1.0 + a * a)) / PI;
            let t1 = a.acos() / PI;
            let t2 = (a * a).acos() / PI;
            [
                2.0 - 2.0 * t1 - t2 - k,
                t2 - 1.0 + k,
                2.0 * t1 - t2 - 1.0 + k,
                t2 - 1.0 + k,
                2.0 - 2.0 * k,
            ]
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPositivity {
    pub family: Family3,
    pub grid: Vec<f64>,
    /// Smallest of the five limits at each grid point.
    pub min_limit: Vec<f64>,
    pub all_positive: bool,
}

pub fn small_h_positive_families(family: Family3, grid: &[f64]) -> Result<FamilyPositivity> {
    if grid.is_empty() {
        return range("empty grid");
    }
    let min_limit = grid
        .iter()
        .map(|&a| family_small_h_limits(family, a).map(|w| w.into_iter().fold(f64::INFINITY, f64::min)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyPositivity {
        family,
        grid: grid.to_vec(),
        all_positive: min_limit.iter().all(|v| *v > 0.0),
        min_limit,
    })
}

/// lim ν_ρ(h)/ν_1(h) as h → ∞ for a stable vector with standard marginals.
///
/// Each atom x contributes ∫ I(s x̂ has sign pattern ρ above 1) α s^{−1−α} ds
/// with x̂ = (2Λ(x))^{1/α} x, which is lo^{−α} − hi^{−α} for the interval
/// (lo, hi] of admissible s.
pub fn stable_order1_limit(measure: &SpectralMeasure, rho: usize) -> Result<f64> {
    let d = measure.d();
    if rho == 0 || rho >= 1 << d {
        return invalid(format!("pattern {rho} must have a one and fit in {d} coordinates"));
    }
    if !measure.is_standardized() {
        return Err(Error::UnequalMarginals("marginals must be S_alpha(1,0,0)".into()));
    }
    let alpha = measure.alpha();
    let mut total = 0.0;
    for k in 0..measure.atoms().len() {
        let v = measure.scaled_atom(k);
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut possible = true;
        for (i, &vi) in v.iter().enumerate() {
            let one = rho >> (d - 1 - i) & 1 == 1;
            if one {
                if vi <= 0.0 {
                    possible = false;
                    break;
                }
                lo = lo.max(1.0 / vi);
            } else if vi > 0.0 {
                hi = hi.min(1.0 / vi);
            }
        }
        if possible && hi > lo {
            total += lo.powf(-alpha) - if hi.is_finite() { hi.powf(-alpha) } else { 0.0 };
        }
    }
    Ok(total)
}

pub fn stable_order1_limit_key(measure: &SpectralMeasure, key: &str) -> Result<f64> {
    let (rho, n) = parse_pattern(key)?;
    if n != measure.d() {
        return Err(Error::Size(format!("pattern {key} in dimension {}", measure.d())));
    }
    stable_order1_limit(measure, rho)
}

/// Large-h limits of the signed representation, in the order 123, 12|3,
/// 13|2, 1|23, 1|2|3, from the order-one pattern limits.
pub fn stable_q_limits(measure: &SpectralMeasure) -> Result<[f64; 5]> {
    if measure.d() != 3 {
        return Err(Error::Size("q limits need dimension 3".into()));
    }
    let l = |rho| stable_order1_limit(measure, rho);
    let (l100, l110, l101, l011, l111) = (l(0b100)?, l(0b110)?, l(0b101)?, l(0b011)?, l(0b111)?);
    Ok([l111, l110, l101, l011, l100 - l011])
}

/// αΓ(2α)Γ(1−α)/Γ(1+α); equals 1 exactly at α = 1/2.
pub fn g_ptalpha(alpha: f64) -> f64 {
    alpha * gamma(2.0 * alpha) * gamma(1.0 - alpha) / gamma(1.0 + alpha)
}

/// An order-two limit that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Order2 {
    Finite(f64),
    Infinite,
}

impl Order2 {
    pub fn as_f64(&self) -> f64 {
        match self {
            Order2::Finite(v) => *v,
            Order2::Infinite => f64::INFINITY,
        }
    }
}

fn check_a_alpha(a: f64, alpha: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return range(format!("a = {a} must lie in (0,1)"));
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return range(format!("alpha = {alpha} must lie in (0,2)"));
    }
    Ok(())
}

/// lim ν_101(h)/ν_1(h)² for the one-factor symmetric vector
/// X_i = a S_0 + (1 − a^α)^{1/α} S_i.
pub fn stable_order2_limit_101_symmetric(a: f64, alpha: f64) -> Result<Order2> {
    check_a_alpha(a, alpha)?;
    if alpha >= 1.0 {
        return Ok(Order2::Infinite);
    }
    let t = a.powf(alpha);
    Ok(Order2::Finite((1.0 - t).powi(2) + t * (1.0 - t) * g_ptalpha(alpha)))
}

/// lim ν_101(h)/ν_1(h)² for the stable Markov chain
/// X_{i+1} = a X_i + (1 − a^α)^{1/α} S_{i+1}.
pub fn stable_order2_limit_101_markov(a: f64, alpha: f64) -> Result<f64> {
    check_a_alpha(a, alpha)?;
    let f = |s: f64| (1.0 - a * a * s).powf(-alpha) * alpha * s.powf(-1.0 - alpha);
    let q = integrate(f, 1.0, 1.0 / a, 1e-12, 1e-13)?;
    if q.error > 1e-10 {
        return Err(Error::Numerical(format!("quadrature error {} too large", q.error)));
    }
    Ok((1.0 - a.powf(alpha)) * q.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransition {
    pub alpha_c: f64,
    /// g checked strictly increasing on the grid.
    pub increasing_on_grid: bool,
    pub grid_points: usize,
}

/// The root of g(α) = 1 on (0.01, 0.99), by bisection.
pub fn phase_transition_alpha() -> PhaseTransition {
    let (mut lo, mut hi) = (0.01, 0.99);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g_ptalpha(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let grid: Vec<f64> = (0..100).map(|k| 0.05 + 0.9 * (k as f64 + 0.5) / 100.0).collect();
    let increasing = grid.windows(2).all(|w| g_ptalpha(w[1]) > g_ptalpha(w[0]));
    PhaseTransition { alpha_c: 0.5 * (lo + hi), increasing_on_grid: increasing, grid_points: grid.len() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AltRegime {
    /// c₂ ≤ c₁: color for large h at every admissible α.
    I,
    /// c₂ ≥ 2: never color for large h.
    Ii,
    /// Color for large h exactly when α > c₂.
    Iii,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltExampleConstants {
    pub a: f64,
    pub b: f64,
    /// Root of 2a^c + 2b^c = 1.
    pub c1: f64,
    /// log 2/|log a − log b|; None when a = b, where it is infinite.
    pub c2: Option<f64>,
    pub regime: AltRegime,
}

impl AltExampleConstants {
    /// max(a,b)^α − 2 min(a,b)^α.
    pub fn g(&self, alpha: f64) -> f64 {
        self.a.max(self.b).powf(alpha) - 2.0 * self.a.min(self.b).powf(alpha)
    }

    /// Large-h limits in the order 123, 12|3, 13|2, 1|23, 1|2|3.
    pub fn q_limits(&self, alpha: f64) -> [f64; 5] {
        let m = 2.0 * self.a.min(self.b).powf(alpha);
        [
            1.0 - 2.0 * self.a.powf(alpha) - 2.0 * self.b.powf(alpha),
            m,
            m,
            m,
            2.0 * self.g(alpha),
        ]
    }
}

pub fn alt_example_constants(a: f64, b: f64) -> Result<AltExampleConstants> {
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
        return range(format!("(a, b) = ({a}, {b}) must lie in (0,1)²"));
    }
    if 2.0 * a * a + 2.0 * b * b >= 1.0 {
        return range("need 2a² + 2b² < 1");
    }
    let f = |c: f64| 2.0 * a.powf(c) + 2.0 * b.powf(c) - 1.0;
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    let c1 = 0.5 * (lo + hi);
    let gap = (a.ln() - b.ln()).abs();
    let c2 = (gap > 0.0).then(|| 2f64.ln() / gap);
    let regime = match c2 {
        Some(c) if c <= c1 => AltRegime::I,
        Some(c) if c < 2.0 => AltRegime::Iii,
        _ => AltRegime::Ii,
    };
    Ok(AltExampleConstants { a, b, c1, c2, regime })
}

/// The named families for which order-two information is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StableFamily {
    PtAlpha12 { a: f64 },
    Markov { a: f64 },
    Alt { a: f64, b: f64 },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableLimitReport {
    pub formula: String,
    /// lim ν_ρ/ν_1 for every nonzero pattern ρ.
    pub order1: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order2_101: Option<Order2>,
    /// Limits of the representation in the order 123, 12|3, 13|2, 1|23, 1|2|3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_limits: Option<[f64; 5]>,
    pub stablegood_integral: f64,
    pub support_in_every_orthant: bool,
    pub verdict: LargeH,
    pub reason: String,
}

fn sign_vs(value: f64, reference: f64) -> Option<bool> {
    let scale = 1.0 + reference.abs();
    if value > reference + LIMIT_TOL * scale {
        Some(true)
    } else if value < reference - LIMIT_TOL * scale {
        Some(false)
    } else {
        None
    }
}

/// Order-one limits, the family's order-two limit when one is known, and
/// the resulting large-h verdict.
pub fn stable_limit_report(measure: &SpectralMeasure, family: StableFamily) -> Result<StableLimitReport> {
    let d = measure.d();
    let alpha = measure.alpha();
    let mut order1 = BTreeMap::new();
    for rho in 1..1usize << d {
        order1.insert(pattern_key(rho, d), stable_order1_limit(measure, rho)?);
    }
    let good = stablegood_integral(measure)?;
    let stablegood = good.below_one && good.support_in_every_orthant;
    let mut order2_101 = None;
    let q_limits = if d == 3 { Some(stable_q_limits(measure)?) } else { None };
    let (verdict, reason) = match q_limits {
        Some(q) if q.iter().any(|v| *v < -LIMIT_TOL) => {
            (LargeH::NotColorForLargeH, "a limit of the representation is negative".to_string())
        }
        Some(q) if q.iter().all(|v| *v > LIMIT_TOL) => {
            (LargeH::ColorForLargeH, "all limits of the representation are positive".to_string())
        }
        Some(_) => {
            // a pair weight vanishes to first order; its sign is that of
            // lim ν_{pair}/ν_1² − lim ν_{single}/ν_1
            let decided = match family {
                StableFamily::PtAlpha12 { a } => {
                    let o2 = stable_order2_limit_101_symmetric(a, alpha)?;
                    order2_101 = Some(o2);
                    sign_vs(o2.as_f64(), order1["100"]).map(|pos| (pos, "second-order pair limit"))
                }
                StableFamily::Markov { a } => {
                    let v = stable_order2_limit_101_markov(a, alpha)?;
                    order2_101 = Some(Order2::Finite(v));
                    sign_vs(v, order1["010"]).map(|pos| (pos, "second-order pair limit"))
                }
                _ => None,
            };
            match decided {
                Some((true, why)) => (LargeH::ColorForLargeH, why.to_string()),
                Some((false, why)) => (LargeH::NotColorForLargeH, why.to_string()),
                None if stablegood => (LargeH::ColorForLargeH, "tail integral below one".to_string()),
                None => (LargeH::OutOfScope, "a limit vanishes and no second-order rule applies".to_string()),
            }
        }
        None if stablegood => (LargeH::ColorForLargeH, "tail integral below one".to_string()),
        None => (LargeH::OutOfScope, "no criterion applies".to_string()),
    };
    Ok(StableLimitReport {
        formula: "stable-atom-intervals".into(),
        order1,
        order2_101,
        q_limits,
        stablegood_integral: good.integral,
        support_in_every_orthant: good.support_in_every_orthant,
        verdict,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_law::zero_threshold_law_3;
    use crate::rng;
    use crate::special::norm_pdf;
    use crate::stable_law::StableLinearModel;
    use proptest::prelude::*;
    use rand::Rng;

    /// The limits again, from ν(0) and d/dh ν_000 at 0. The derivative is
    /// Σ_i φ(0) P(X_j ≤ 0, X_k ≤ 0 | X_i = 0), an orthant probability in the
    /// partial correlation.
    fn limits_by_derivative(a12: f64, a13: f64, a23: f64) -> [f64; 5] {
        let cov = CovarianceSpec::standard3(a12, a13, a23).unwrap();
        let nu = zero_threshold_law_3(&cov).unwrap();
        let a = [[1.0, a12, a13], [a12, 1.0, a23], [a13, a23, 1.0]];
        let mut d000 = 0.0;
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let r = (a[j][k] - a[i][j] * a[i][k]) / ((1.0 - a[i][j].powi(2)) * (1.0 - a[i][k].powi(2))).sqrt();
            d000 += norm_pdf(0.0) * (0.25 + r.asin() / (2.0 * PI));
        }
        let ratio = d000 / norm_pdf(0.0);
        [
            4.0 * nu.prob(0) + 1.0 - 2.0 * ratio,
            4.0 * nu.prob(0b001) - 2.0 + 2.0 * ratio,
            4.0 * nu.prob(0b010) - 2.0 + 2.0 * ratio,
            4.0 * nu.prob(0b100) - 2.0 + 2.0 * ratio,
            4.0 - 4.0 * ratio,
        ]
    }

    #[test]
    fn small_h_examples() {
        let l = small_h_limits_3(&CovarianceSpec::identity(3).unwrap()).unwrap();
        assert!((l.kappa - 0.5).abs() < 1e-15);
        assert!((l.q_1_2_3 - 1.0).abs() < 1e-12);
        assert_eq!(l.status, SmallHStatus::Borderline);
        // mpmath: −0.050135846043625583, −0.015741557472005499
        let l = small_h_limits_3(&CovarianceSpec::standard3(0.05, 0.6825, 0.6825).unwrap()).unwrap();
        assert!((l.q_12_3 + 0.050135846043625583).abs() < 1e-12);
        assert!((l.q_12_3 + 0.05).abs() < 2e-3);
        assert_eq!(l.status, SmallHStatus::NotColorForSmallH);
        let l = small_h_limits_3(&CovarianceSpec::standard3(0.1, 0.5, 0.5).unwrap()).unwrap();
        assert!((l.q_12_3 + 0.015741557472005499).abs() < 1e-12);
        assert!((l.q_12_3 + 0.016).abs() < 2e-3);
        assert!((l.q_1_2_3 - 0.42858500913586418).abs() < 1e-12);
    }

    #[test]
    fn small_h_two_routes_agree() {
        let mut r = rng::seeded(51);
        let (mut seen, mut big) = (0, 0);
        while seen < 1000 {
            let (x, y, z) = (r.random_range(-0.95..0.95), r.random_range(-0.95..0.95), r.random_range(-0.95..0.95));
            let Ok(c) = CovarianceSpec::standard3(x, y, z) else { continue };
            if !c.is_pd() {
                continue;
            }
            seen += 1;
            let l = small_h_limits_3(&c).unwrap();
            assert!((l.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            if c.det() > 1e-3 {
                if 1.0 + x + y + z < 0.0 {
                    big += 1;
                }
                let other = limits_by_derivative(x, y, z);
                for (p, q) in l.weights().iter().zip(other) {
                    assert!((p - q).abs() < 1e-9, "{p} vs {q} at {x},{y},{z}");
                }
            }
        }
        assert!(big > 20, "only {big} matrices with 1 + Σa < 0");
    }

    #[test]
    fn small_h_independence_limit() {
        let l = small_h_limits_3(&CovarianceSpec::standard3(1e-7, 1e-7, 1e-7).unwrap()).unwrap();
        let w = l.weights();
        assert!((w[4] - 1.0).abs() < 1e-6);
        assert!(w[..4].iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn family_formulas_match_general_formula() {
        for k in 1..50 {
            let a = k as f64 / 50.0;
            let fs = family_small_h_limits(Family3::FullySymmetric, a).unwrap();
            let g = small_h_limits_3(&CovarianceSpec::fully_symmetric(3, a).unwrap()).unwrap();
            for (p, q) in fs.iter().zip(g.weights()) {
                assert!((p - q).abs() < 1e-10);
            }
            let mk = family_small_h_limits(Family3::Markov, a).unwrap();
            let g = small_h_limits_3(&CovarianceSpec::markov(3, a).unwrap()).unwrap();
            for (p, q) in mk.iter().zip(g.weights()) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn positive_families() {
        let grid: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
        assert!(small_h_positive_families(Family3::FullySymmetric, &grid).unwrap().all_positive);
        assert!(small_h_positive_families(Family3::Markov, &grid).unwrap().all_positive);
        assert!(family_small_h_limits(Family3::FullySymmetric, 0.5).unwrap().iter().all(|v| *v > 0.0));
        assert!(family_small_h_limits(Family3::Markov, 0.6).unwrap().iter().all(|v| *v > 0.0));
        let q123 = family_small_h_limits(Family3::Markov, 1e-6).unwrap()[0];
        assert!(q123.abs() < 1e-5);
        assert!(family_small_h_limits(Family3::Markov, 1.0).is_err());
    }

    fn order1(m: &StableLinearModel, key: &str) -> f64 {
        stable_order1_limit_key(&m.spectral_measure().unwrap(), key).unwrap()
    }

    #[test]
    fn order1_examples() {
        for &(a, alpha) in &[(0.3, 0.5), (0.6, 1.2), (0.8, 1.9)] {
            let m = StableLinearModel::ptalpha12(a, alpha).unwrap();
            let t = a.powf(alpha);
            assert!((order1(&m, "111") - t).abs() < 1e-12);
            assert!((order1(&m, "100") - (1.0 - t)).abs() < 1e-12);
            let q = stable_q_limits(&m.spectral_measure().unwrap()).unwrap();
            assert!((q[0] - t).abs() < 1e-12 && (q[4] - (1.0 - t)).abs() < 1e-12);
            assert!(q[1].abs() < 1e-15 && q[2].abs() < 1e-15 && q[3].abs() < 1e-15);
        }
        let id = StableLinearModel::independent(2, 1.3).unwrap();
        assert_eq!(order1(&id, "11"), 0.0);
        assert!((order1(&id, "10") - 1.0).abs() < 1e-12);
        let bad = StableLinearModel::from_rows(1.0, &[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(stable_order1_limit(&bad.spectral_measure().unwrap(), 0b11).is_err());
    }

    #[test]
    fn markov_order1_table() {
        for &a in &[0.3, 0.5, 0.7] {
            for &alpha in &[0.5, 1.0, 1.5] {
                let m = StableLinearModel::markov_chain(3, a, alpha).unwrap();
                let t = a.powf(alpha);
                let want = [
                    ("111", t * t),
                    ("110", t * (1.0 - t)),
                    ("101", 0.0),
                    ("011", t * (1.0 - t)),
                    ("010", (1.0 - t).powi(2)),
                    ("100", 1.0 - t),
                    ("001", 1.0 - t),
                ];
                for (k, v) in want {
                    assert!((order1(&m, k) - v).abs() < 1e-12, "{k} a={a} alpha={alpha}");
                }
                let q = stable_q_limits(&m.spectral_measure().unwrap()).unwrap();
                let table = [t * t, t * (1.0 - t), 0.0, t * (1.0 - t), (1.0 - t).powi(2)];
                for (p, w) in q.iter().zip(table) {
                    assert!((p - w).abs() < 1e-12);
                }
                assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn order1_limits_split_the_first_coordinate(
            a in 0.05f64..0.95, b in 0.05f64..0.95, alpha in 0.2f64..1.9, which in 0usize..3,
        ) {
            let m = match which {
                0 => StableLinearModel::ptalpha12(a, alpha).unwrap(),
                1 => StableLinearModel::markov_chain(3, a, alpha).unwrap(),
                _ => {
                    prop_assume!(2.0 * a.powf(alpha) + 2.0 * b.powf(alpha) < 1.0);
                    StableLinearModel::alt_example(a, b, alpha).unwrap()
                }
            };
            let s = m.spectral_measure().unwrap();
            for first in 0..3 {
                let total: f64 = (1..8usize)
                    .filter(|r| r >> (2 - first) & 1 == 1)
                    .map(|r| stable_order1_limit(&s, r).unwrap())
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
            let q = stable_q_limits(&s).unwrap();
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alt_example_q_limits_from_atoms() {
        for &(a, b, alpha) in &[(0.2, 0.1, 1.5), (0.3, 0.05, 1.0), (0.25, 0.25, 1.2)] {
            let c = alt_example_constants(a, b).unwrap();
            let m = StableLinearModel::alt_example(a, b, alpha).unwrap();
            let q = stable_q_limits(&m.spectral_measure().unwrap()).unwrap();
            for (p, w) in q.iter().zip(c.q_limits(alpha)) {
                assert!((p - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gamma_functional() {
        // mpmath values of αΓ(2α)Γ(1−α)/Γ(1+α)
        let table = [
            (0.1, 0.515678077211460612),
            (0.25, 0.599070117367796104),
            (0.3, 0.646167261348396695),
            (0.4, 0.781621804615639072),
            (0.6, 1.367617082587983394),
            (0.75, 2.622057554292119810),
            (0.9, 8.291679474884905690),
        ];
        for (alpha, want) in table {
            assert!((g_ptalpha(alpha) - want).abs() < 1e-12 * want, "alpha={alpha}");
            // duplication formula: 2^{2α−1} Γ(α + 1/2) Γ(1−α)/√π
            let dup = 2f64.powf(2.0 * alpha - 1.0) * gamma(alpha + 0.5) * gamma(1.0 - alpha) / PI.sqrt();
            assert!((g_ptalpha(alpha) - dup).abs() < 1e-12 * want);
        }
        assert!((g_ptalpha(0.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn phase_transition() {
        let p = phase_transition_alpha();
        assert!((p.alpha_c - 0.5).abs() < 1e-6);
        assert!(p.increasing_on_grid);
        assert!(g_ptalpha(0.25) < 1.0 && g_ptalpha(0.75) > 1.0);
    }

    #[test]
    fn symmetric_order2() {
        assert_eq!(stable_order2_limit_101_symmetric(0.5, 1.3).unwrap(), Order2::Infinite);
        let Order2::Finite(v) = stable_order2_limit_101_symmetric(0.49, 0.5).unwrap() else { panic!() };
        assert!((v - 0.3).abs() < 1e-12);
        let Order2::Finite(v) = stable_order2_limit_101_symmetric(0.5, 0.3).unwrap() else { panic!() };
        let t = 0.5f64.powf(0.3);
        assert!(v < (1.0 - t).powi(2) + t * (1.0 - t));
        for (alpha, pos) in [(0.4, false), (0.6, true)] {
            let t = 0.5f64.powf(alpha);
            let v = stable_order2_limit_101_symmetric(0.5, alpha).unwrap().as_f64();
            assert_eq!(v - (1.0 - t).powi(2) - t * (1.0 - t) > 0.0, pos);
        }
        assert!(stable_order2_limit_101_symmetric(1.0, 0.5).is_err());
    }

    #[test]
    fn markov_order2_quadrature() {
        // mpmath quad of the same integral
        let table = [
            (0.5, 1.0, 0.387326536083513711),
            (0.3, 0.7, 0.367602347509222891),
            (0.7, 1.5, 0.656097225575594147),
            (0.2, 0.4, 0.234293104533707307),
        ];
        for (a, alpha, want) in table {
            let v = stable_order2_limit_101_markov(a, alpha).unwrap();
            assert!((v - want).abs() < 1e-10, "{a} {alpha}: {v}");
            assert!(v > (1.0 - a.powf(alpha)).powi(2));
        }
        let v = stable_order2_limit_101_markov(1e-6, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn markov_order2_monte_carlo() {
        // s1 Pareto(α) on (1, ∞), kept below 1/a; s2 Pareto(α) from
        // t0 = (1 − a)/c, weighted by t0^{−α}
        let (a, alpha) = (0.3f64, 0.7f64);
        let c = (1.0 - a.powf(alpha)).powf(1.0 / alpha);
        let t0 = (1.0 - a) / c;
        let w = t0.powf(-alpha);
        let m = 2_000_000;
        let mut r = rng::seeded(52);
        let (mut s, mut s2sum) = (0.0, 0.0);
        for _ in 0..m {
            let s1 = (1.0 - r.random::<f64>()).powf(-1.0 / alpha);
            let x = if s1 < 1.0 / a {
                let v = t0 * (1.0 - r.random::<f64>()).powf(-1.0 / alpha);
                if v > (1.0 - a * a * s1) / c { w } else { 0.0 }
            } else {
                0.0
            };
            s += x;
            s2sum += x * x;
        }
        let mean = s / m as f64;
        let se = ((s2sum / m as f64 - mean * mean) / m as f64).sqrt();
        let exact = stable_order2_limit_101_markov(a, alpha).unwrap();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} ± {se} vs {exact}");
    }

    #[test]
    fn alt_constants() {
        let c = alt_example_constants(0.25, 0.25).unwrap();
        assert!((c.c1 - 1.0).abs() < 1e-12);
        assert_eq!(c.c2, None);
        assert_eq!(c.regime, AltRegime::Ii);
        let k = 0.5;
        let c = alt_example_constants(0.5 * k, 0.25 * k).unwrap();
        assert!((c.c2.unwrap() - 1.0).abs() < 1e-12);
        assert!(alt_example_constants(0.6, 0.5).is_err());
        for i in 1..40 {
            for j in 1..40 {
                let (a, b) = (i as f64 / 56.0, j as f64 / 56.0);
                let Ok(c) = alt_example_constants(a, b) else { continue };
                assert!((2.0 * a.powf(c.c1) + 2.0 * b.powf(c.c1) - 1.0).abs() < 1e-12);
                if let Some(c2) = c.c2 {
                    if c2 > c.c1 + 1e-6 && c2 < 2.0 - 1e-6 {
                        assert_eq!(c.regime, AltRegime::Iii);
                        assert!(c.g(c2 - 1e-6) < 0.0 && c.g(c2 + 1e-6) > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn large_h_stable_verdicts() {
        for (alpha, want) in [(0.3, LargeH::NotColorForLargeH), (0.7, LargeH::ColorForLargeH), (1.5, LargeH::ColorForLargeH)] {
            let m = StableLinearModel::ptalpha12(0.5, alpha).unwrap();
            let r = stable_limit_report(&m.spectral_measure().unwrap(), StableFamily::PtAlpha12 { a: 0.5 }).unwrap();
            assert_eq!(r.verdict, want, "alpha={alpha}");
        }
        let m = StableLinearModel::markov_chain(3, 0.5, 1.0).unwrap();
        let r = stable_limit_report(&m.spectral_measure().unwrap(), StableFamily::Markov { a: 0.5 }).unwrap();
        assert_eq!(r.verdict, LargeH::ColorForLargeH);
        let m = StableLinearModel::markov_chain(3, 0.5, 1.0).unwrap();
        let r = stable_limit_report(&m.spectral_measure().unwrap(), StableFamily::Other).unwrap();
        assert_eq!(r.verdict, LargeH::OutOfScope);
        let m = StableLinearModel::alt_example(0.25, 0.25, 1.5).unwrap();
        let r = stable_limit_report(&m.spectral_measure().unwrap(), StableFamily::Alt { a: 0.25, b: 0.25 }).unwrap();
        assert_eq!(r.verdict, LargeH::NotColorForLargeH);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"111\""));
    }
}
