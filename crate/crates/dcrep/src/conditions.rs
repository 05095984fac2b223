//! Matrix-level tests: inverse Stieltjes, the Savage vector 1ᵀA⁻¹, the
//! DGFF characterization, the large-h classifier for n = 3, obstructions
//! for degenerate covariances and the (a, b) family.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, range, Error, Result};
use crate::gaussian_law::CovarianceSpec;
use crate::partitions::pattern_key;

/// Savage coordinates within this of zero count as zero.
pub const SAVAGE_TOL: f64 = 1e-10;
/// Inverse entries above this are positive; correlations above it are nonzero.
pub const ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Savage {
    Strict,
    Weak,
    Fails,
}

pub fn classify_savage(v: &[f64]) -> Savage {
    if v.iter().all(|x| *x > SAVAGE_TOL) {
        Savage::Strict
    } else if v.iter().all(|x| *x >= -SAVAGE_TOL) {
        Savage::Weak
    } else {
        Savage::Fails
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseStieltjes {
    pub holds: bool,
    /// (i, j, A⁻¹_ij) for each positive off-diagonal entry with i < j.
    pub offending: Vec<(usize, usize, f64)>,
}

pub fn is_inverse_stieltjes(cov: &CovarianceSpec) -> Result<InverseStieltjes> {
    let b = cov.inverse()?;
    let n = cov.n();
    let mut offending = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if b[(i, j)] > ENTRY_TOL {
                offending.push((i, j, b[(i, j)]));
            }
        }
    }
    Ok(InverseStieltjes { holds: offending.is_empty(), offending })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DgffCondition {
    /// Not a block matrix with strictly positive blocks.
    Blocks,
    InverseStieltjes,
    WeakSavage,
    /// Some block has no row with a positive Savage coordinate.
    BlockSavage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgffReport {
    pub holds: bool,
    pub failing: Vec<DgffCondition>,
    /// Connected components of the graph {a_ij > 0}.
    pub blocks: Vec<Vec<usize>>,
}

/// Connected components of the graph with an edge wherever a_ij > ENTRY_TOL.
pub fn positive_blocks(cov: &CovarianceSpec) -> Vec<Vec<usize>> {
    let n = cov.n();
    let mut comp = vec![usize::MAX; n];
    let mut blocks = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut stack = vec![s];
        let mut members = Vec::new();
        comp[s] = id;
        while let Some(i) = stack.pop() {
            members.push(i);
            for j in 0..n {
                if comp[j] == usize::MAX && cov.a(i, j) > ENTRY_TOL {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        blocks.push(members);
    }
    blocks
}

pub fn is_dgff(cov: &CovarianceSpec) -> DgffReport {
    let n = cov.n();
    let blocks = positive_blocks(cov);
    let mut failing = Vec::new();
    let mut label = vec![0; n];
    for (k, b) in blocks.iter().enumerate() {
        for &i in b {
            label[i] = k;
        }
    }
    let block_ok = (0..n).all(|i| {
        (0..n).all(|j| {
            let a = cov.a(i, j);
            if label[i] == label[j] {
                a > ENTRY_TOL
            } else {
                a.abs() <= ENTRY_TOL
            }
        })
    });
    if !block_ok {
        failing.push(DgffCondition::Blocks);
    }
    match (is_inverse_stieltjes(cov), cov.savage_vector()) {
        (Ok(st), Ok(sv)) => {
            if !st.holds {
                failing.push(DgffCondition::InverseStieltjes);
            }
            if classify_savage(&sv) == Savage::Fails {
                failing.push(DgffCondition::WeakSavage);
            }
            if !blocks.iter().all(|b| b.iter().any(|&i| sv[i] > SAVAGE_TOL)) {
                failing.push(DgffCondition::BlockSavage);
            }
        }
        _ => failing.extend([
            DgffCondition::InverseStieltjes,
            DgffCondition::WeakSavage,
            DgffCondition::BlockSavage,
        ]),
    }
    DgffReport { holds: failing.is_empty(), failing, blocks }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub savage_vector: Vec<f64>,
    pub savage: Savage,
    pub stieltjes_inverse: bool,
    pub dgff: DgffReport,
    /// 1ᵀA⁻¹1.
    pub quadratic: f64,
}

/// (1 + a23 − a12 − a13)(1 − a23)/det A, the first Savage coordinate for n = 3.
pub fn savage_first_3(a12: f64, a13: f64, a23: f64) -> f64 {
    let det = 1.0 - a12 * a12 - a13 * a13 - a23 * a23 + 2.0 * a12 * a13 * a23;
    (1.0 + a23 - a12 - a13) * (1.0 - a23) / det
}

pub fn savage_report(cov: &CovarianceSpec) -> Result<ConditionReport> {
    let savage_vector = cov.savage_vector()?;
    let savage = classify_savage(&savage_vector);
    if cov.n() == 3 && cov.is_standard() {
        let (a12, a13, a23) = (cov.a(0, 1), cov.a(0, 2), cov.a(1, 2));
        let closed = savage_first_3(a12, a13, a23);
        if (closed - savage_vector[0]).abs() > 1e-8 * (1.0 + closed.abs()) {
            return Err(Error::Numerical(format!(
                "Savage coordinate {} disagrees with closed form {closed}",
                savage_vector[0]
            )));
        }
        let slack = 1.0 + 2.0 * a12.min(a13).min(a23) - (a12 + a13 + a23);
        if slack.abs() > 1e-9 && (slack > 0.0) != (savage == Savage::Strict) {
            return Err(Error::Numerical("Savage class disagrees with the min-sum test".into()));
        }
    }
    Ok(ConditionReport {
        savage_vector,
        savage,
        stieltjes_inverse: is_inverse_stieltjes(cov)?.holds,
        dgff: is_dgff(cov),
        quadratic: cov.quadratic()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LargeH {
    ColorForLargeH,
    NotColorForLargeH,
    OutOfScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    /// 1ᵀA⁻¹ > 0.
    I,
    /// Smallest Savage coordinate is zero.
    Ii,
    /// Smallest Savage coordinate is negative; color iff 1ᵀA⁻¹1 < 2.
    Iii,
    ZeroCov,
    Degenerate,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::I => "i",
            CaseTag::Ii => "ii",
            CaseTag::Iii => "iii",
            CaseTag::ZeroCov => "zero-cov",
            CaseTag::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargeHVerdict {
    pub verdict: LargeH,
    pub case_tag: CaseTag,
}

/// Whether X^h is a color process for all large h, for a standard
/// three-dimensional Gaussian with correlations in [0, 1).
pub fn classify_large_h_3(cov: &CovarianceSpec) -> Result<LargeHVerdict> {
    if cov.n() != 3 || !cov.is_standard() {
        return invalid("need a standard 3x3 covariance");
    }
    let a = [cov.a(0, 1), cov.a(0, 2), cov.a(1, 2)];
    if a.iter().any(|x| *x < -ENTRY_TOL) {
        return range("correlations must be nonnegative");
    }
    if !cov.is_pd() {
        let verdict = if classify_degenerate(cov)?.iter().any(|d| d.rules_out_large_h()) {
            LargeH::NotColorForLargeH
        } else {
            LargeH::OutOfScope
        };
        return Ok(LargeHVerdict { verdict, case_tag: CaseTag::Degenerate });
    }
    let zeros = a.iter().filter(|x| x.abs() <= ENTRY_TOL).count();
    if zeros > 0 {
        // two or three zero correlations make one coordinate independent of
        // a pair, which is trivially a color process
        let verdict = if zeros == 1 { LargeH::NotColorForLargeH } else { LargeH::ColorForLargeH };
        return Ok(LargeHVerdict { verdict, case_tag: CaseTag::ZeroCov });
    }
    let sv = cov.savage_vector()?;
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let out = if min > SAVAGE_TOL {
        LargeHVerdict { verdict: LargeH::ColorForLargeH, case_tag: CaseTag::I }
    } else if min >= -SAVAGE_TOL {
        LargeHVerdict { verdict: LargeH::ColorForLargeH, case_tag: CaseTag::Ii }
    } else {
        let verdict = if cov.quadratic()? < 2.0 { LargeH::ColorForLargeH } else { LargeH::NotColorForLargeH };
        LargeHVerdict { verdict, case_tag: CaseTag::Iii }
    };
    Ok(out)
}

/// An obstruction found for a covariance of deficient rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Degenerate {
    /// A null relation Σ a_i X_i = 0 with Σ a_i ≠ 0 forces ν_ρ(h) = 0 while
    /// ν_{1−ρ}(h) > 0 for every h > 0. Patterns are over `support`.
    NotColorAnyPositiveH {
        null_vector: Vec<f64>,
        support: Vec<usize>,
        forbidden: String,
        charged: String,
    },
    /// Some pattern has zero probability for every h > 0, which rules out
    /// a representation once h is large.
    NotColorForLargeH { rank: usize },
}

impl Degenerate {
    pub fn rules_out_large_h(&self) -> bool {
        true
    }
}

/// Obstructions for rank-deficient covariances; empty at full rank.
pub fn classify_degenerate(cov: &CovarianceSpec) -> Result<Vec<Degenerate>> {
    let n = cov.n();
    if cov.rank() == n {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for v in cov.null_vectors() {
        let scale = v.amax();
        let a: Vec<f64> = v.iter().map(|x| x / scale).collect();
        let support: Vec<usize> = (0..n).filter(|&i| a[i].abs() > 1e-9).collect();
        let sum: f64 = support.iter().map(|&i| a[i]).sum();
        if sum.abs() <= 1e-9 || support.len() < 2 {
            continue;
        }
        // every proper sub-vector of the support must be fully supported
        let sub_ok = support.iter().all(|&k| {
            let rest: Vec<usize> = support.iter().copied().filter(|&i| i != k).collect();
            cov.principal(&rest).map(|c| c.is_pd()).unwrap_or(false)
        });
        if !sub_ok {
            continue;
        }
        // orient so that Σ a < 0; then the event {X_i > h iff a_i < 0} is empty
        let s = if sum < 0.0 { 1.0 } else { -1.0 };
        let rho = support
            .iter()
            .fold(0usize, |acc, &i| (acc << 1) | usize::from(s * a[i] < 0.0));
        let k = support.len();
        out.push(Degenerate::NotColorAnyPositiveH {
            null_vector: a.iter().map(|x| s * x).collect(),
            support: support.clone(),
            forbidden: pattern_key(rho, k),
            charged: pattern_key(((1 << k) - 1) ^ rho, k),
        });
        break;
    }
    let offdiag_ok = cov.is_standard()
        && (0..n).all(|i| (0..n).all(|j| i == j || (cov.a(i, j) >= -ENTRY_TOL && cov.a(i, j) < 1.0)));
    if offdiag_ok {
        out.push(Degenerate::NotColorForLargeH { rank: cov.rank() });
    }
    Ok(out)
}

/// One point of the (a, b) family, covariance [[1,a,a],[a,1,b],[a,b,1]].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbRegion {
    pub a: f64,
    pub b: f64,
    pub pd: bool,
    /// None outside the positive definite region.
    pub large_h_color: Option<bool>,
    pub large_h_case: Option<CaseTag>,
    /// Smallest Savage coordinate.
    pub savage_min: Option<f64>,
    pub dgff: bool,
    /// b = a², the Gaussian Markov chains.
    pub markov_boundary: bool,
    /// (a12, a13, a23) for the small-h formulas.
    pub small_h_inputs: (f64, f64, f64),
}

pub fn ab_region_classify(a: f64, b: f64) -> Result<AbRegion> {
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
        return range(format!("(a, b) = ({a}, {b}) must lie in (0,1)²"));
    }
    let pd = 2.0 * a * a < 1.0 + b;
    let mut out = AbRegion {
        a,
        b,
        pd,
        large_h_color: None,
        large_h_case: None,
        savage_min: None,
        dgff: false,
        markov_boundary: (b - a * a).abs() <= ENTRY_TOL,
        small_h_inputs: (a, a, b),
    };
    if !pd {
        return Ok(out);
    }
    let cov = CovarianceSpec::ab(a, b)?;
    if !cov.is_pd() {
        // within rounding of the boundary 2a² = 1 + b
        out.pd = false;
        return Ok(out);
    }
    let v = classify_large_h_3(&cov)?;
    out.large_h_color = Some(v.verdict == LargeH::ColorForLargeH);
    out.large_h_case = Some(v.case_tag);
    out.savage_min = cov.savage_vector()?.into_iter().reduce(f64::min);
    out.dgff = is_dgff(&cov).holds;
    Ok(out)
}

/// π(n−2)/(2(n−1)) − arcsin √((n−2)/(n−1)) for n−1 iid standard Gaussians
/// plus their normalized sum. A zero-threshold color representation would
/// need this to vanish; it is zero at n = 3 and positive for n ≥ 4.
pub fn symmetric_plus_mean_gap(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Size(format!("need n >= 3, got {n}")));
    }
    let x = (n - 2) as f64 / (n - 1) as f64;
    Ok(std::f64::consts::FRAC_PI_2 * x - x.sqrt().asin())
}
