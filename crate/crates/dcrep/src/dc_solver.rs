//! Deciding whether a law on {0,1}^n is a color process: the closed-form
//! signed representation for n = 3, the one-parameter family at p = 1/2,
//! LP feasibility for general n and the reduced solver for the square.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, range, Error, Result};
use crate::gaussian_law::square_threshold_law;
use crate::partitions::{
    color_map, enumerate_partitions, push_forward_signed, BinaryLaw, Partition, PartitionDistribution,
};
use crate::report::{ClassificationReport, Regime, Verdict};
use crate::simplex::{phase_one, Scalar};

/// Weights below −SIGN_TOL count as negative.
pub const SIGN_TOL: f64 = 1e-9;
/// Distance of p from 1/2 below which the closed form is refused.
pub const HALF_TOL: f64 = 1e-9;

// cell indices for n = 3
const C000: usize = 0b000;
const C001: usize = 0b001;
const C010: usize = 0b010;
const C011: usize = 0b011;
const C100: usize = 0b100;
const C101: usize = 0b101;
const C110: usize = 0b110;
const C111: usize = 0b111;

/// Keys of the five partitions of [3], in canonical order.
pub const KEYS_3: [&str; 5] = ["123", "12|3", "13|2", "1|23", "1|2|3"];

fn dist3(w: [f64; 5], signed: bool) -> Result<PartitionDistribution> {
    let entries: Result<Vec<_>> = KEYS_3
        .iter()
        .zip(w)
        .map(|(k, v)| Partition::parse_key(3, k).map(|s| (s, v)))
        .collect();
    PartitionDistribution::new(3, entries?, signed)
}

/// The unique signed representation of a three-point law with p ≠ 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignedRep3 {
    pub p: f64,
    pub q_123: f64,
    pub q_12_3: f64,
    pub q_13_2: f64,
    pub q_1_23: f64,
    pub q_1_2_3: f64,
    pub feasible: bool,
}

impl SignedRep3 {
    /// Weights in the order of `KEYS_3`.
    pub fn weights(&self) -> [f64; 5] {
        [self.q_123, self.q_12_3, self.q_13_2, self.q_1_23, self.q_1_2_3]
    }

    pub fn distribution(&self) -> Result<PartitionDistribution> {
        dist3(self.weights(), true)
    }
}

/// Solves color_map(3, p) q = ν for the unique signed q.
pub fn signed_rep_3(nu: &BinaryLaw) -> Result<SignedRep3> {
    if nu.n() != 3 {
        return Err(Error::Size(format!("need n = 3, got {}", nu.n())));
    }
    let p = nu.common_marginal(nu.marginal_tolerance())?;
    if (p - 0.5).abs() <= HALF_TOL {
        return range("p = 1/2 has no unique representation; use the symmetric family");
    }
    if p <= 0.0 || p >= 1.0 {
        return range(format!("degenerate marginal p = {p}"));
    }
    let v = |r: usize| nu.prob(r);
    let d = (1.0 - p) * p * (1.0 - 2.0 * p);
    let q_1_2_3 = (v(C100) - v(C011)) / d;
    let q_12_3 = ((1.0 - p) * v(C110) - p * v(C001)) / d;
    let q_13_2 = ((1.0 - p) * v(C101) - p * v(C010)) / d;
    let q_1_23 = ((1.0 - p) * v(C011) - p * v(C100)) / d;
    let q_123 = 1.0 - (p * v(C000) - (1.0 - p) * v(C111)) / d;
    let w = [q_123, q_12_3, q_13_2, q_1_23, q_1_2_3];
    Ok(SignedRep3 {
        p,
        q_123,
        q_12_3,
        q_13_2,
        q_1_23,
        q_1_2_3,
        feasible: w.iter().all(|x| *x >= -SIGN_TOL),
    })
}

fn symmetry_tol(nu: &BinaryLaw) -> f64 {
    match nu.stderr() {
        Some(se) => 3.0 * std::f64::consts::SQRT_2 * se.iter().cloned().fold(0.0, f64::max) + 1e-12,
        None => 1e-10,
    }
}

/// Representations of a {0,1}-symmetric three-point law, indexed by
/// t = q_{1,2,3}/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricRepFamily3 {
    pub nu_001: f64,
    pub nu_010: f64,
    pub nu_100: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SymmetricRepFamily3 {
    /// Weights in the order of `KEYS_3`.
    pub fn weights(&self, t: f64) -> [f64; 5] {
        let s = self.nu_001 + self.nu_010 + self.nu_100;
        [
            1.0 - 4.0 * s + t,
            4.0 * self.nu_001 - t,
            4.0 * self.nu_010 - t,
            4.0 * self.nu_100 - t,
            2.0 * t,
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.t_lo > self.t_hi + 1e-12
    }

    /// The canonical member, t = t_lo.
    pub fn canonical(&self) -> Option<PartitionDistribution> {
        if self.is_empty() {
            return None;
        }
        self.distribution(self.t_lo).ok()
    }

    pub fn distribution(&self, t: f64) -> Result<PartitionDistribution> {
        let w = self.weights(t);
        dist3(w, w.iter().any(|x| *x < -SIGN_TOL))
    }
}

pub fn symmetric_rep_family_3(nu: &BinaryLaw) -> Result<SymmetricRepFamily3> {
    if nu.n() != 3 {
        return Err(Error::Size(format!("need n = 3, got {}", nu.n())));
    }
    if !nu.is_flip_symmetric(symmetry_tol(nu)) {
        return invalid("law is not {0,1}-symmetric");
    }
    let nu_001 = nu.prob(C001);
    let nu_010 = nu.prob(C010);
    let nu_100 = nu.prob(C100);
    let s = nu_001 + nu_010 + nu_100;
    Ok(SymmetricRepFamily3 {
        nu_001,
        nu_010,
        nu_100,
        t_lo: (4.0 * s - 1.0).max(0.0),
        t_hi: 4.0 * nu_001.min(nu_010).min(nu_100),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Borderline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<PartitionDistribution>,
    /// max |color_map q − ν| of the best point found, or the phase-I
    /// optimum when no point is reported.
    pub margin: f64,
    /// y with yᵀ color_map ≤ 0 columnwise and yᵀν > 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<f64>>,
    /// Whether the verdict came from the ±k·stderr relaxed polytope.
    pub relaxed: bool,
    pub pivots: usize,
}

impl FeasibilityResult {
    pub fn verdict(&self) -> Verdict {
        match self.status {
            FeasibilityStatus::Feasible => Verdict::ColorRep,
            FeasibilityStatus::Infeasible => Verdict::NoColorRep,
            FeasibilityStatus::Borderline => Verdict::Undetermined,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == FeasibilityStatus::Feasible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolPolicy {
    /// Phase-I optimum at or below this is Feasible.
    pub feasible: f64,
    /// Phase-I optimum at or below this is Borderline.
    pub borderline: f64,
    /// Half-width of the MC relaxation in standard errors.
    pub se_mult: f64,
}

impl Default for TolPolicy {
    fn default() -> Self {
        TolPolicy { feasible: 1e-10, borderline: 1e-7, se_mult: 3.0 }
    }
}

/// Rows of color_map(n, p) as a dense table.
fn color_rows(n: usize, p: f64) -> Result<(Vec<Partition>, Vec<Vec<f64>>)> {
    let cm = color_map(n, p)?;
    let mut rows = vec![vec![0.0; cm.cols()]; cm.rows()];
    for j in 0..cm.cols() {
        for (i, v) in cm.column(j).into_iter().enumerate() {
            rows[i][j] = v;
        }
    }
    Ok((cm.partitions, rows))
}

/// Turns a nonnegative LP point into a normalised distribution.
fn to_distribution(n: usize, parts: &[Partition], x: &[f64]) -> Result<PartitionDistribution> {
    let total: f64 = x.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::Numerical("LP returned the zero vector".into()));
    }
    let entries = parts
        .iter()
        .zip(x)
        .filter(|(_, v)| **v > 0.0)
        .map(|(s, v)| (*s, v / total))
        .collect();
    PartitionDistribution::new(n, entries, false)
}

fn residual(q: &PartitionDistribution, p: f64, nu: &[f64]) -> Result<f64> {
    let fit = push_forward_signed(q, p)?;
    Ok(fit.iter().zip(nu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Decides whether ν = color_map(n, p) q has a solution q ≥ 0.
///
/// `p` defaults to the common marginal of ν. Exact laws are decided on the
/// equality system; for Monte Carlo laws a failure of the equality system
/// is rechecked on the polytope |color_map q − ν̂| ≤ k·stderr, and only a
/// failure there is reported as Infeasible.
pub fn lp_feasibility(nu: &BinaryLaw, p: Option<f64>, policy: TolPolicy) -> Result<FeasibilityResult> {
    let n = nu.n();
    let tol = nu.marginal_tolerance();
    let p_hat = nu.common_marginal(tol)?;
    let p = match p {
        Some(p) if (p - p_hat).abs() > tol => {
            return Err(Error::UnequalMarginals(format!("marginal {p_hat} differs from p = {p}")))
        }
        Some(p) => p,
        None => p_hat,
    };
    let (parts, rows) = color_rows(n, p)?;
    let b = nu.probs().to_vec();
    let sol = phase_one(&rows, &b);
    let opt = sol.infeasibility;
    if opt <= policy.feasible || (!nu.is_mc() && opt <= policy.borderline) {
        let q = to_distribution(n, &parts, &sol.x)?;
        let margin = residual(&q, p, &b)?;
        let status = if opt <= policy.feasible {
            FeasibilityStatus::Feasible
        } else {
            FeasibilityStatus::Borderline
        };
        return Ok(FeasibilityResult { status, q: Some(q), margin, certificate: None, relaxed: false, pivots: sol.pivots });
    }
    if !nu.is_mc() {
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Infeasible,
            q: None,
            margin: opt,
            certificate: Some(sol.y),
            relaxed: false,
            pivots: sol.pivots,
        });
    }
    relaxed_feasibility(nu, p, &parts, &rows, policy, sol.pivots)
}

fn relaxed_feasibility(
    nu: &BinaryLaw,
    p: f64,
    parts: &[Partition],
    rows: &[Vec<f64>],
    policy: TolPolicy,
    pivots0: usize,
) -> Result<FeasibilityResult> {
    let cells = rows.len();
    let cols = parts.len();
    let se = nu.stderr().expect("MC law");
    let width = cols + 2 * cells;
    let mut a = Vec::with_capacity(2 * cells + 1);
    let mut b = Vec::with_capacity(2 * cells + 1);
    for i in 0..cells {
        let half = policy.se_mult * se[i];
        // M q − u = ν̂ − k se
        let mut r = rows[i].clone();
        r.resize(width, 0.0);
        r[cols + i] = -1.0;
        a.push(r);
        b.push(nu.prob(i) - half);
        // M q + v = ν̂ + k se
        let mut r = rows[i].clone();
        r.resize(width, 0.0);
        r[cols + cells + i] = 1.0;
        a.push(r);
        b.push(nu.prob(i) + half);
    }
    let mut ones = vec![1.0; cols];
    ones.resize(width, 0.0);
    a.push(ones);
    b.push(1.0);
    let sol = phase_one(&a, &b);
    let pivots = pivots0 + sol.pivots;
    if sol.infeasibility <= policy.feasible {
        let q = to_distribution(nu.n(), parts, &sol.x[..cols])?;
        let margin = residual(&q, p, nu.probs())?;
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Borderline,
            q: Some(q),
            margin,
            certificate: None,
            relaxed: true,
            pivots,
        });
    }
    // fold the multipliers of the two inequality rows and the sum row into
    // one vector on the cells
    let y3 = sol.y[2 * cells];
    let w = (0..cells).map(|i| sol.y[2 * i] + sol.y[2 * i + 1] + y3).collect();
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Infeasible,
        q: None,
        margin: sol.infeasibility,
        certificate: Some(w),
        relaxed: true,
        pivots,
    })
}

/// Exact color column over the rationals.
pub fn color_column_exact(sigma: &Partition, p: &BigRational) -> Vec<BigRational> {
    let n = sigma.n();
    let k = sigma.num_blocks();
    let one = BigRational::one();
    let mut col = vec![BigRational::zero(); 1 << n];
    for c in 0..(1usize << k) {
        let ones = c.count_ones() as usize;
        let mut w = one.clone();
        for _ in 0..ones {
            w *= p.clone();
        }
        for _ in ones..k {
            w *= one.clone() - p.clone();
        }
        let mut rho = 0;
        for i in 0..n {
            let b = (c >> (k - 1 - sigma.label(i))) & 1;
            rho |= b << (n - 1 - i);
        }
        col[rho] += w;
    }
    col
}

/// Outcome of the exact rational decision.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFeasibility {
    pub feasible: bool,
    pub q: Option<Vec<(Partition, BigRational)>>,
    pub certificate: Option<Vec<BigRational>>,
}

/// Exact decision for rational inputs; no tolerances are involved.
pub fn lp_feasibility_rational(n: usize, nu: &[BigRational], p: &BigRational) -> Result<RationalFeasibility> {
    if nu.len() != 1 << n {
        return Err(Error::Size(format!("expected {} cells, got {}", 1 << n, nu.len())));
    }
    if *p < BigRational::zero() || *p > BigRational::one() {
        return range("p outside [0,1]");
    }
    let total = nu.iter().fold(BigRational::zero(), |a, b| a + b.clone());
    if total != BigRational::one() {
        return invalid("rational law does not sum to 1");
    }
    let parts = enumerate_partitions(n)?;
    let cols: Vec<Vec<BigRational>> = parts.iter().map(|s| color_column_exact(s, p)).collect();
    let rows: Vec<Vec<BigRational>> = (0..1usize << n)
        .map(|i| cols.iter().map(|c| c[i].clone()).collect())
        .collect();
    let sol = phase_one(&rows, nu);
    if Scalar::is_zero(&sol.infeasibility) {
        let q = parts
            .into_iter()
            .zip(sol.x)
            .filter(|(_, v)| !Scalar::is_zero(v))
            .collect();
        Ok(RationalFeasibility { feasible: true, q: Some(q), certificate: None })
    } else {
        Ok(RationalFeasibility { feasible: false, q: None, certificate: Some(sol.y) })
    }
}

/// p/q as an exact rational.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// The eight symmetries of the square acting on positions 0..4.
fn dihedral() -> [[usize; 4]; 8] {
    let mut g = [[0; 4]; 8];
    for k in 0..4 {
        for i in 0..4 {
            g[k][i] = (i + k) % 4;
            g[k + 4][i] = (k + 4 - i) % 4;
        }
    }
    g
}

fn permute_pattern(rho: usize, g: &[usize; 4]) -> usize {
    let mut out = 0;
    for i in 0..4 {
        let b = (rho >> (3 - g[i])) & 1;
        out |= b << (3 - i);
    }
    out
}

/// Extends a three-point representation satisfying the square inequalities
/// to a dihedrally invariant representation on [4]. Weights are in the
/// order of `KEYS_3`.
pub fn square_reconstruct(q3: [f64; 5]) -> Result<PartitionDistribution> {
    let [q123, q12_3, q13_2, _q1_23, q1_2_3] = q3;
    let mut entries = Vec::new();
    let mut add = |key: &str, w: f64| -> Result<()> {
        entries.push((Partition::parse_key(4, key)?, w));
        Ok(())
    };
    add("1234", q123 - q13_2)?;
    for k in ["123|4", "124|3", "134|2", "1|234"] {
        add(k, q13_2)?;
    }
    for k in ["12|34", "14|23"] {
        add(k, q12_3 - q13_2 - q1_2_3 / 2.0)?;
    }
    for k in ["12|3|4", "1|23|4", "1|2|34", "14|2|3"] {
        add(k, q1_2_3 / 2.0)?;
    }
    for k in ["13|24", "13|2|4", "1|24|3", "1|2|3|4"] {
        add(k, 0.0)?;
    }
    let signed = entries.iter().any(|(_, w)| *w < -SIGN_TOL);
    PartitionDistribution::new(4, entries, signed)
}

/// Decides the square's four-point law through its first three points.
///
/// The law must be invariant under the symmetries of the square with
/// ν_0101 = ν_1010 = 0. A representation of (X1, X2, X3) obeying
/// q_123 ≥ q_13,2 ≥ 0 and 2q_12,3 − 2q_13,2 ≥ q_1,2,3 ≥ 0 is searched by a
/// small LP and then extended to [4]. When none exists the full LP is run
/// for an independent verdict and its certificate.
pub fn square_circle_solver(nu4: &BinaryLaw, policy: TolPolicy) -> Result<FeasibilityResult> {
    if nu4.n() != 4 {
        return Err(Error::Size(format!("need n = 4, got {}", nu4.n())));
    }
    let tol = match nu4.stderr() {
        Some(se) => policy.se_mult * se.iter().cloned().fold(0.0, f64::max) + 1e-12,
        None => 1e-9,
    };
    let group = dihedral();
    let probs = nu4.probs();
    for g in &group {
        for rho in 0..16 {
            if (probs[rho] - probs[permute_pattern(rho, g)]).abs() > tol {
                return invalid("law is not invariant under the symmetries of the square");
            }
        }
    }
    if probs[0b0101] > tol || probs[0b1010] > tol {
        return invalid("nu_0101 must vanish for the square");
    }
    let mut sym = vec![0.0; 16];
    for g in &group {
        for (rho, s) in sym.iter_mut().enumerate() {
            *s += probs[permute_pattern(rho, g)] / 8.0;
        }
    }
    sym[0b0101] = 0.0;
    sym[0b1010] = 0.0;
    let total: f64 = sym.iter().sum();
    sym.iter_mut().for_each(|v| *v /= total);
    let mut law = BinaryLaw::new(4, sym.clone())?;
    if let (Some(se), Some(m)) = (nu4.stderr(), nu4.samples()) {
        law = law.with_stderr(se.to_vec(), Some(m))?;
    }
    let nu3 = law.marginal_law(&[0, 1, 2])?;
    let p = nu3.marginals().iter().sum::<f64>() / 3.0;

    // variables: the five weights of KEYS_3, then two slacks
    let (parts, rows3) = color_rows(3, p)?;
    let order: Vec<usize> = KEYS_3
        .iter()
        .map(|k| parts.iter().position(|s| s.key() == *k).expect("all keys present"))
        .collect();
    let mut a: Vec<Vec<f64>> = rows3
        .iter()
        .map(|r| {
            let mut v: Vec<f64> = order.iter().map(|&j| r[j]).collect();
            v.extend([0.0, 0.0]);
            v
        })
        .collect();
    let mut b: Vec<f64> = nu3.probs().to_vec();
    a.push(vec![1.0, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0]);
    b.push(0.0);
    a.push(vec![0.0, 2.0, -2.0, 0.0, -1.0, 0.0, -1.0]);
    b.push(0.0);
    let sol = phase_one(&a, &b);
    if sol.infeasibility <= policy.feasible {
        let mut w = [0.0; 5];
        w.copy_from_slice(&sol.x[..5]);
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let q4 = square_reconstruct(w)?;
        let margin = residual(&q4, p, &sym)?;
        let status = if margin <= tol.max(1e-9) && !q4.is_signed() {
            FeasibilityStatus::Feasible
        } else {
            FeasibilityStatus::Borderline
        };
        let q = if q4.is_signed() { None } else { Some(q4) };
        return Ok(FeasibilityResult { status, q, margin, certificate: None, relaxed: false, pivots: sol.pivots });
    }
    let full = lp_feasibility(&law, Some(p), policy)?;
    let status = match full.status {
        FeasibilityStatus::Infeasible => FeasibilityStatus::Infeasible,
        _ => FeasibilityStatus::Borderline,
    };
    Ok(FeasibilityResult {
        status,
        q: full.q,
        margin: sol.infeasibility.max(full.margin),
        certificate: full.certificate,
        relaxed: full.relaxed,
        pivots: sol.pivots + full.pivots,
    })
}

/// The square solver on the exact law at polar angle θ and level h.
pub fn square_circle_at(theta: f64, h: f64, policy: TolPolicy) -> Result<FeasibilityResult> {
    square_circle_solver(&square_threshold_law(theta, h)?, policy)
}

/// ν_{0^n} ≥ 1/4 suffices for a {0,1}-symmetric law; never rules anything out.
pub fn quick_sufficient_symmetric(nu: &BinaryLaw) -> Result<ClassificationReport> {
    if !nu.is_flip_symmetric(symmetry_tol(nu)) {
        return invalid("law is not {0,1}-symmetric");
    }
    let zero = nu.prob(0);
    let verdict = if zero >= 0.25 { Verdict::ColorRep } else { Verdict::Undetermined };
    Ok(ClassificationReport::new(verdict, Regime::FixedH, "all-zero cell at least 1/4")
        .with_detail(format!("nu_0 = {zero}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_law::{threshold_law_mc, zero_threshold_law_3, CovarianceSpec};
    use crate::partitions::push_forward;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn random_q(n: usize, r: &mut impl Rng, sparse: bool) -> PartitionDistribution {
        let parts = enumerate_partitions(n).unwrap();
        let mut w: Vec<f64> = parts
            .iter()
            .map(|_| if sparse && r.random::<f64>() < 0.5 { 0.0 } else { r.random::<f64>() })
            .collect();
        if w.iter().sum::<f64>() == 0.0 {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        PartitionDistribution::new(n, parts.into_iter().zip(w.into_iter().map(|v| v / s)).collect(), false)
            .unwrap()
    }

    fn product_law(n: usize, p: f64) -> BinaryLaw {
        let probs = (0..1usize << n)
            .map(|r| p.powi(r.count_ones() as i32) * (1.0 - p).powi(n as i32 - r.count_ones() as i32))
            .collect();
        BinaryLaw::new(n, probs).unwrap()
    }

    #[test]
    fn signed_rep_examples() {
        let r = signed_rep_3(&product_law(3, 0.3)).unwrap();
        let w = r.weights();
        assert!((w[4] - 1.0).abs() < 1e-12 && w[..4].iter().all(|v| v.abs() < 1e-12));
        let mut probs = vec![0.0; 8];
        probs[0] = 0.7;
        probs[7] = 0.3;
        let r = signed_rep_3(&BinaryLaw::new(3, probs).unwrap()).unwrap();
        assert!((r.q_123 - 1.0).abs() < 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn signed_rep_refuses_half_and_unequal() {
        assert!(matches!(signed_rep_3(&product_law(3, 0.5)), Err(Error::Range(_))));
        let probs = vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 0.25];
        assert!(matches!(
            signed_rep_3(&BinaryLaw::new(3, probs).unwrap()),
            Err(Error::UnequalMarginals(_))
        ));
    }

    #[test]
    fn signed_rep_round_trip() {
        let mut r = rng::seeded(31);
        for &p in &[0.2, 0.3, 0.35, 0.7] {
            for _ in 0..200 {
                let q = random_q(3, &mut r, true);
                let rep = signed_rep_3(&push_forward(&q, p).unwrap()).unwrap();
                assert!(rep.feasible);
                for (k, w) in KEYS_3.iter().zip(rep.weights()) {
                    assert!((q.weight_of(k).unwrap() - w).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn fair_coin_family() {
        let fam = symmetric_rep_family_3(&product_law(3, 0.5)).unwrap();
        assert!((fam.t_lo - 0.5).abs() < 1e-15 && (fam.t_hi - 0.5).abs() < 1e-15);
        let q = fam.canonical().unwrap();
        assert!((q.weight_of("1|2|3").unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_family_interval_in_angles() {
        // the interval is [max(0, Σθ/π − 1), (Σθ − 2 max θ)/π]
        let mut r = rng::seeded(32);
        for _ in 0..300 {
            let a: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let Ok(cov) = CovarianceSpec::standard3(a[0], a[1], a[2]) else { continue };
            if !cov.is_pd() {
                continue;
            }
            let fam = symmetric_rep_family_3(&zero_threshold_law_3(&cov).unwrap()).unwrap();
            let th = [a[0].acos(), a[1].acos(), a[2].acos()];
            let sum: f64 = th.iter().sum();
            let max = th.iter().cloned().fold(0.0, f64::max);
            assert!((fam.t_lo - (sum / PI - 1.0).max(0.0)).abs() < 1e-12);
            assert!((fam.t_hi - (sum - 2.0 * max) / PI).abs() < 1e-12);
            // nonnegative correlations always admit a representation
            assert!(!fam.is_empty());
        }
        for &theta in &[0.1, 0.7, PI / 2.0] {
            let a = theta.cos();
            let cov = CovarianceSpec::fully_symmetric(3, a).unwrap();
            let fam = symmetric_rep_family_3(&zero_threshold_law_3(&cov).unwrap()).unwrap();
            assert!((fam.t_lo - (3.0 * theta / PI - 1.0).max(0.0)).abs() < 1e-12);
            assert!((fam.t_hi - theta / PI).abs() < 1e-12);
        }
    }

    #[test]
    fn family_members_reproduce_the_law() {
        let cov = CovarianceSpec::standard3(0.2, 0.5, 0.4).unwrap();
        let nu = zero_threshold_law_3(&cov).unwrap();
        let fam = symmetric_rep_family_3(&nu).unwrap();
        for k in 0..=10 {
            let t = fam.t_lo + (fam.t_hi - fam.t_lo) * k as f64 / 10.0;
            let w = fam.weights(t);
            assert!(w.iter().all(|v| *v >= -1e-12));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let fit = push_forward_signed(&fam.distribution(t).unwrap(), 0.5).unwrap();
            for (a, b) in fit.iter().zip(nu.probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_example_angles() {
        // θ12 = θ23 = arccos(cos² π/4) = π/3, θ13 = π/2
        let t = PI / 4.0;
        let c2 = t.cos().powi(2);
        let cov = CovarianceSpec::standard3(c2, 0.0, c2).unwrap();
        let fam = symmetric_rep_family_3(&zero_threshold_law_3(&cov).unwrap()).unwrap();
        assert!(!fam.is_empty());
        // the square caps: t ≥ (2θ12 − π/2)/π and t ≤ 2(θ13 − θ12)/π
        let lo = fam.t_lo.max((2.0 * PI / 3.0 - PI / 2.0) / PI);
        let hi = fam.t_hi.min(2.0 * (PI / 2.0 - PI / 3.0) / PI);
        // the constraints meet in the single point t = 1/6
        assert!(lo <= hi + 1e-12);
        assert!((lo - 1.0 / 6.0).abs() < 1e-12);
        assert!((c2.acos() - t - PI / 12.0).abs() < 1e-15);
    }

    fn check_certificate(res: &FeasibilityResult, nu: &BinaryLaw, p: f64) {
        let y = res.certificate.as_ref().unwrap();
        let (_, rows) = color_rows(nu.n(), p).unwrap();
        for j in 0..rows[0].len() {
            let s: f64 = (0..rows.len()).map(|i| rows[i][j] * y[i]).sum();
            assert!(s <= 1e-9, "column {j}: {s}");
        }
        let yn: f64 = y.iter().zip(nu.probs()).map(|(a, b)| a * b).sum();
        assert!(yn > 0.0);
    }

    #[test]
    fn negative_pair_correlation_is_infeasible() {
        let nu = BinaryLaw::new(2, vec![0.2, 0.3, 0.3, 0.2]).unwrap();
        let res = lp_feasibility(&nu, None, TolPolicy::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Infeasible);
        check_certificate(&res, &nu, 0.5);
    }

    #[test]
    fn lp_agrees_with_closed_form() {
        let mut r = rng::seeded(33);
        let parts = enumerate_partitions(3).unwrap();
        let (mut yes, mut no) = (0, 0);
        for k in 0..1000 {
            let p = [0.2, 0.35, 0.7][k % 3];
            // a signed q with one negative weight, kept if ν stays a law
            let mut w: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
            if k % 2 == 1 {
                let j = r.random_range(0..5);
                w[j] = -0.3 * r.random::<f64>();
            }
            let s: f64 = w.iter().sum();
            let q = PartitionDistribution::new(
                3,
                parts.iter().cloned().zip(w.iter().map(|v| v / s)).collect(),
                true,
            )
            .unwrap();
            let nu = push_forward_signed(&q, p).unwrap();
            if nu.iter().any(|v| *v < 0.0) {
                continue;
            }
            let nu = BinaryLaw::new(3, nu).unwrap();
            let rep = signed_rep_3(&nu).unwrap();
            let res = lp_feasibility(&nu, Some(p), TolPolicy::default()).unwrap();
            assert_eq!(rep.feasible, res.is_feasible(), "rep {rep:?} lp {:?}", res.status);
            if res.is_feasible() {
                yes += 1;
                assert!(res.margin < 1e-9);
            } else {
                no += 1;
                check_certificate(&res, &nu, p);
            }
        }
        assert!(yes > 50 && no > 50, "{yes} {no}");
    }

    #[test]
    fn negative_correlation_rejected_in_higher_dimensions() {
        // coordinates 1 and 2 anticorrelated, the rest fair and independent
        let mut probs = vec![0.0; 16];
        for (rho, v) in probs.iter_mut().enumerate() {
            let (x, y) = ((rho >> 3) & 1, (rho >> 2) & 1);
            *v = if x == y { 0.2 } else { 0.3 } * 0.25;
        }
        let nu = BinaryLaw::new(4, probs).unwrap();
        assert!(nu.covariance(0, 1) < 0.0);
        let res = lp_feasibility(&nu, None, TolPolicy::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Infeasible);
        check_certificate(&res, &nu, 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn lp_round_trip(n in 1usize..=5, pi in 0usize..3, seed in 0u64..1000) {
            let p = [0.2, 0.5, 0.8][pi];
            let mut r = rng::seeded(seed);
            let q = random_q(n, &mut r, seed % 2 == 0);
            let nu = push_forward(&q, p).unwrap();
            let res = lp_feasibility(&nu, Some(p), TolPolicy::default()).unwrap();
            prop_assert_eq!(res.status, FeasibilityStatus::Feasible);
            prop_assert!(res.margin < 1e-9);
            let fit = push_forward(res.q.as_ref().unwrap(), p).unwrap();
            prop_assert!(fit.max_abs_diff(&nu) < 1e-9);
        }
    }

    #[test]
    fn mc_laws_are_not_rejected_on_noise() {
        let cov = CovarianceSpec::fully_symmetric(3, 0.5).unwrap();
        let nu = threshold_law_mc(&cov, 0.0, 100_000, 34).unwrap();
        let res = lp_feasibility(&nu, None, TolPolicy::default()).unwrap();
        assert_ne!(res.status, FeasibilityStatus::Infeasible);
        if res.status == FeasibilityStatus::Borderline {
            assert!(res.relaxed);
            let se = nu.stderr().unwrap();
            let fit = push_forward_signed(res.q.as_ref().unwrap(), nu.marginal_p()).unwrap();
            for i in 0..8 {
                assert!((fit[i] - nu.prob(i)).abs() <= 3.0 * se[i] + 1e-9);
            }
        }
    }

    #[test]
    fn mc_certificate_for_anticorrelated_pair() {
        let nu = BinaryLaw::from_counts(2, &[20_000, 30_000, 30_000, 20_000]).unwrap();
        let res = lp_feasibility(&nu, None, TolPolicy::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Infeasible);
        assert!(res.relaxed);
        check_certificate(&res, &nu, nu.marginal_p());
    }

    #[test]
    fn rational_mode() {
        // n = 2 at p = 1/3 with ν_11 = p² + 1/18
        let p = ratio(1, 3);
        let nu = vec![ratio(4, 9) + ratio(1, 18), ratio(2, 9) - ratio(1, 18), ratio(2, 9) - ratio(1, 18), ratio(1, 9) + ratio(1, 18)];
        let r = lp_feasibility_rational(2, &nu, &p).unwrap();
        assert!(r.feasible);
        let q = r.q.unwrap();
        let total = q.iter().fold(BigRational::zero(), |a, (_, w)| a + w.clone());
        assert_eq!(total, BigRational::one());
        // exactly uncorrelated is feasible, anticorrelated is not
        let nu = vec![ratio(4, 9) - ratio(1, 18), ratio(2, 9) + ratio(1, 18), ratio(2, 9) + ratio(1, 18), ratio(1, 9) - ratio(1, 18)];
        let r = lp_feasibility_rational(2, &nu, &p).unwrap();
        assert!(!r.feasible);
        let y = r.certificate.unwrap();
        let yn = y.iter().zip(&nu).fold(BigRational::zero(), |a, (u, v)| a + u.clone() * v.clone());
        assert!(yn > BigRational::zero());
    }

    #[test]
    fn rational_column_matches_float() {
        for s in enumerate_partitions(4).unwrap() {
            let exact = color_column_exact(&s, &ratio(3, 10));
            let float = crate::partitions::color_column(&s, 0.3);
            for (a, b) in exact.iter().zip(float) {
                assert!((a.as_float() - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn square_feasible_at_zero() {
        for &theta in &[0.2, 0.5, PI / 4.0] {
            let res = square_circle_at(theta, 0.0, TolPolicy::default()).unwrap();
            assert_eq!(res.status, FeasibilityStatus::Feasible, "theta = {theta}");
            let q = res.q.unwrap();
            for k in ["1|2|3|4", "13|2|4", "1|24|3", "13|24"] {
                assert_eq!(q.weight_of(k).unwrap(), 0.0);
            }
            assert!(res.margin < 1e-9);
        }
    }

    #[test]
    fn square_reconstruction_agrees_with_full_lp() {
        for &(theta, h) in &[(0.3, 0.0), (0.3, 0.1), (0.6, 0.4), (0.15, 0.05)] {
            let nu = square_threshold_law(theta, h).unwrap();
            let fast = square_circle_solver(&nu, TolPolicy::default()).unwrap();
            let full = lp_feasibility(&nu, None, TolPolicy::default()).unwrap();
            assert_eq!(fast.is_feasible(), full.is_feasible(), "theta={theta} h={h}");
        }
    }

    #[test]
    fn square_small_angle_small_h() {
        let res = square_circle_at(0.1, 0.02, TolPolicy::default()).unwrap();
        assert_eq!(res.status, FeasibilityStatus::Feasible);
    }

    #[test]
    fn square_rejects_asymmetric_input() {
        let nu = product_law(4, 0.5);
        assert!(square_circle_solver(&nu, TolPolicy::default()).is_err());
    }

    #[test]
    fn quick_check() {
        let mut probs = vec![0.0; 8];
        probs[0] = 0.5;
        probs[7] = 0.5;
        let r = quick_sufficient_symmetric(&BinaryLaw::new(3, probs).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::ColorRep);
        let r = quick_sufficient_symmetric(&product_law(3, 0.5)).unwrap();
        assert_eq!(r.verdict, Verdict::Undetermined);
    }
}
