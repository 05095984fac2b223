//! Symmetric α-stable vectors built as linear images of iid stable
//! variables: sampling, spectral measures, threshold laws by simulation,
//! the two-dimensional correlation criterion and the stable tail integral.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, range, Error, Result};
use crate::partitions::{BinaryLaw, MAX_N};
use crate::rng::{self, DcRng};

/// Tolerance for merging spectral directions.
pub const DIRECTION_TOL: f64 = 1e-10;
/// Tolerance for Σ_j |A_ij|^α = 1.
pub const STANDARD_TOL: f64 = 1e-10;

fn check_alpha(alpha: f64, allow_two: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 2.0 || (allow_two && alpha == 2.0));
    if ok {
        Ok(())
    } else {
        range(format!("stability exponent {alpha} out of range"))
    }
}

/// One S_α(1,0,0) draw by Chambers–Mallows–Stuck.
pub fn sym_stable_draw(r: &mut DcRng, alpha: f64) -> f64 {
    if alpha == 2.0 {
        let n: f64 = StandardNormal.sample(r);
        return std::f64::consts::SQRT_2 * n;
    }
    let u = PI * (r.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return u.tan();
    }
    let w: f64 = Exp1.sample(r);
    (alpha * u).sin() / u.cos().powf(1.0 / alpha)
        * (((1.0 - alpha) * u).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One S_g(1,1,0) draw, g in (0,1), by the one-sided CMS transform.
pub fn pos_stable_draw(r: &mut DcRng, g: f64) -> f64 {
    let u = PI * (r.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(r);
    let shifted = g * (u + FRAC_PI_2);
    let x = (FRAC_PI_2 * g).cos().powf(-1.0 / g) * shifted.sin() / u.cos().powf(1.0 / g)
        * ((u - shifted).cos() / w).powf((1.0 - g) / g);
    // u = -π/2 exactly gives 0; nudge to the smallest positive value
    x.max(f64::MIN_POSITIVE)
}

/// `m` iid S_α(σ,0,0) variates. At α = 2 these are N(0, 2σ²).
pub fn sample_sym_stable(alpha: f64, sigma: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha, true)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return range(format!("scale {sigma} must be positive"));
    }
    let mut r = rng::seeded(seed);
    Ok((0..m).map(|_| sigma * sym_stable_draw(&mut r, alpha)).collect())
}

/// `m` iid totally skewed S_g(scale,1,0) variates, g in (0,1).
pub fn sample_pos_stable(g: f64, scale: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    if !(g > 0.0 && g < 1.0) {
        return range(format!("index {g} must lie in (0,1)"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return range(format!("scale {scale} must be positive"));
    }
    let mut r = rng::seeded(seed);
    Ok((0..m).map(|_| scale * pos_stable_draw(&mut r, g)).collect())
}

/// Scale of the positive α/2-stable S for which S^{1/2}·N(0,1) ~ S_α(1,0,0).
pub fn subordinator_scale(alpha: f64) -> f64 {
    2.0 * (PI * alpha / 4.0).cos().powf(2.0 / alpha)
}

/// X = loadings · (S_1, …, S_m) with S_j iid S_α(1,0,0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelJson", into = "ModelJson")]
pub struct StableLinearModel {
    alpha: f64,
    loadings: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    alpha: f64,
    loadings: Vec<Vec<f64>>,
}

impl TryFrom<ModelJson> for StableLinearModel {
    type Error = Error;
    fn try_from(j: ModelJson) -> Result<Self> {
        StableLinearModel::from_rows(j.alpha, &j.loadings)
    }
}

impl From<StableLinearModel> for ModelJson {
    fn from(m: StableLinearModel) -> Self {
        ModelJson {
            alpha: m.alpha,
            loadings: (0..m.loadings.nrows())
                .map(|i| m.loadings.row(i).iter().copied().collect())
                .collect(),
        }
    }
}

impl StableLinearModel {
    pub fn new(alpha: f64, loadings: DMatrix<f64>) -> Result<Self> {
        check_alpha(alpha, false)?;
        let (d, m) = loadings.shape();
        if d == 0 || d > MAX_N || m == 0 {
            return Err(Error::Size(format!("{d}x{m} loading matrix")));
        }
        if loadings.iter().any(|v| !v.is_finite()) {
            return invalid("non-finite loading");
        }
        for i in 0..d {
            if loadings.row(i).iter().all(|&v| v == 0.0) {
                return invalid(format!("row {i} is zero"));
            }
            for k in i + 1..d {
                if loadings.row(i) == loadings.row(k) {
                    return invalid(format!("rows {i} and {k} coincide"));
                }
            }
        }
        Ok(StableLinearModel { alpha, loadings })
    }

    pub fn from_rows(alpha: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return invalid("ragged loading rows");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(alpha, DMatrix::from_row_slice(rows.len(), m, &flat))
    }

    /// n independent copies of S_α(1,0,0).
    pub fn independent(n: usize, alpha: f64) -> Result<Self> {
        Self::new(alpha, DMatrix::identity(n, n))
    }

    /// X_1 = aS_1 + cS_2, X_2 = −aS_1 + cS_2 with c = (1−a^α)^{1/α}.
    pub fn corr2d(a: f64, alpha: f64) -> Result<Self> {
        check_unit(a)?;
        let c = complement(a, alpha);
        Self::from_rows(alpha, &[vec![a, c], vec![-a, c]])
    }

    /// X_i = aS_0 + (1−a^α)^{1/α} S_i, i = 1..3.
    pub fn ptalpha12(a: f64, alpha: f64) -> Result<Self> {
        check_unit(a)?;
        let c = complement(a, alpha);
        let mut l = DMatrix::zeros(3, 4);
        for i in 0..3 {
            l[(i, 0)] = a;
            l[(i, i + 1)] = c;
        }
        Self::new(alpha, l)
    }

    /// X_1 = S_1, X_{i+1} = aX_i + (1−a^α)^{1/α} S_{i+1}.
    pub fn markov_chain(n: usize, a: f64, alpha: f64) -> Result<Self> {
        check_unit(a)?;
        if n < 2 {
            return Err(Error::Size(format!("chain length {n}")));
        }
        let c = complement(a, alpha);
        let mut l = DMatrix::zeros(n, n);
        l[(0, 0)] = 1.0;
        for i in 1..n {
            for j in 0..i {
                l[(i, j)] = a * l[(i - 1, j)];
            }
            l[(i, i)] = c;
        }
        Self::new(alpha, l)
    }

    /// The permutation-invariant 3×7 two-parameter example.
    pub fn alt_example(a: f64, b: f64, alpha: f64) -> Result<Self> {
        check_unit(a)?;
        check_unit(b)?;
        let rest = 1.0 - 2.0 * a.powf(alpha) - 2.0 * b.powf(alpha);
        if rest <= 0.0 {
            return range(format!("need 2a^α + 2b^α < 1, got {}", 1.0 - rest));
        }
        let d = rest.powf(1.0 / alpha);
        Self::from_rows(
            alpha,
            &[
                vec![a, b, 0.0, b, a, 0.0, d],
                vec![0.0, a, b, 0.0, b, a, d],
                vec![b, 0.0, a, a, 0.0, b, d],
            ],
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn m(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    /// σ_i^α = Σ_j |A_ij|^α.
    pub fn row_scale_pow(&self, i: usize) -> f64 {
        self.loadings.row(i).iter().map(|v| v.abs().powf(self.alpha)).sum()
    }

    pub fn is_standardized(&self) -> bool {
        (0..self.d()).all(|i| (self.row_scale_pow(i) - 1.0).abs() <= STANDARD_TOL)
    }

    pub fn spectral_measure(&self) -> Result<SpectralMeasure> {
        spectral_from_matrix(self)
    }

    /// Draws one vector X into `out`, using `s` as scratch of length m.
    pub fn draw(&self, r: &mut DcRng, s: &mut [f64], out: &mut [f64]) {
        for v in s.iter_mut() {
            *v = sym_stable_draw(r, self.alpha);
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..s.len()).map(|j| self.loadings[(i, j)] * s[j]).sum();
        }
    }
}

fn check_unit(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        range(format!("coefficient {a} must lie in (0,1)"))
    }
}

fn complement(a: f64, alpha: f64) -> f64 {
    (1.0 - a.powf(alpha)).powf(1.0 / alpha)
}

/// A finite symmetric atomic measure on the unit sphere. Both members of
/// each antipodal pair are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct SpectralMeasure {
    alpha: f64,
    d: usize,
    atoms: Vec<(Vec<f64>, f64)>,
}

#[derive(Serialize, Deserialize)]
struct AtomJson {
    x: Vec<f64>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    alpha: f64,
    d: usize,
    atoms: Vec<AtomJson>,
}

impl TryFrom<MeasureJson> for SpectralMeasure {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        SpectralMeasure::from_representatives(
            j.alpha,
            j.d,
            j.atoms.into_iter().map(|a| (a.x, a.w)).collect(),
        )
    }
}

impl From<SpectralMeasure> for MeasureJson {
    fn from(m: SpectralMeasure) -> Self {
        MeasureJson {
            alpha: m.alpha,
            d: m.d,
            atoms: m
                .representatives()
                .map(|(x, w)| AtomJson { x: x.clone(), w })
                .collect(),
        }
    }
}

/// True when the first nonzero coordinate is positive.
fn is_canonical(x: &[f64]) -> bool {
    x.iter().find(|v| **v != 0.0).is_some_and(|v| *v > 0.0)
}

impl SpectralMeasure {
    /// Builds the symmetric measure from one member of each antipodal pair
    /// (any member; directions are normalized and merged).
    pub fn from_representatives(alpha: f64, d: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        check_alpha(alpha, false)?;
        if d == 0 || d > MAX_N {
            return Err(Error::Size(format!("dimension {d}")));
        }
        let mut merged: Vec<(Vec<f64>, f64)> = Vec::new();
        for (x, w) in atoms {
            if x.len() != d {
                return Err(Error::Size(format!("atom of length {} in dimension {d}", x.len())));
            }
            if !(w > 0.0 && w.is_finite()) {
                return invalid(format!("atom weight {w} must be positive"));
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return invalid("zero or non-finite atom direction");
            }
            let mut u: Vec<f64> = x.iter().map(|v| v / norm).collect();
            if !is_canonical(&u) {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            match merged.iter_mut().find(|(y, _)| {
                y.iter().zip(&u).all(|(p, q)| (p - q).abs() <= DIRECTION_TOL)
            }) {
                Some((_, acc)) => *acc += w,
                None => merged.push((u, w)),
            }
        }
        if merged.is_empty() {
            return invalid("spectral measure has no atoms");
        }
        let mut all = Vec::with_capacity(2 * merged.len());
        for (u, w) in merged {
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            all.push((u, w));
            all.push((neg, w));
        }
        Ok(SpectralMeasure { alpha, d, atoms: all })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// All atoms, mirrors included.
    pub fn atoms(&self) -> &[(Vec<f64>, f64)] {
        &self.atoms
    }

    /// One atom of each antipodal pair.
    pub fn representatives(&self) -> impl Iterator<Item = (&Vec<f64>, f64)> {
        self.atoms.iter().step_by(2).map(|(x, w)| (x, *w))
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Multiplies every weight by `t`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return range(format!("scale factor {t} must be positive"));
        }
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|a| a.1 *= t);
        Ok(out)
    }

    /// σ_i^α = ∫ |x_i|^α dΛ.
    pub fn marginal_scale_pow(&self, i: usize) -> f64 {
        self.atoms.iter().map(|(x, w)| w * x[i].abs().powf(self.alpha)).sum()
    }

    pub fn is_standardized(&self) -> bool {
        (0..self.d).all(|i| (self.marginal_scale_pow(i) - 1.0).abs() <= STANDARD_TOL)
    }

    /// The atom rescaled to x̂ = (2Λ(x))^{1/α} x.
    pub fn scaled_atom(&self, k: usize) -> Vec<f64> {
        let (x, w) = &self.atoms[k];
        let s = (2.0 * w).powf(1.0 / self.alpha);
        x.iter().map(|v| s * v).collect()
    }

    /// Whether every open orthant holds an atom.
    pub fn charges_every_orthant(&self) -> bool {
        (0..1usize << self.d).all(|signs| {
            self.atoms.iter().any(|(x, _)| {
                x.iter()
                    .enumerate()
                    .all(|(i, &v)| if signs >> i & 1 == 1 { v > 0.0 } else { v < 0.0 })
            })
        })
    }
}

/// Columns x_j become atoms ±x_j/|x_j| of weight |x_j|^α/2 each.
pub fn spectral_from_matrix(model: &StableLinearModel) -> Result<SpectralMeasure> {
    let l = model.loadings();
    let mut reps = Vec::with_capacity(l.ncols());
    for j in 0..l.ncols() {
        let col: Vec<f64> = l.column(j).iter().copied().collect();
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return invalid(format!("column {j} is zero"));
        }
        reps.push((col, norm.powf(model.alpha()) / 2.0));
    }
    SpectralMeasure::from_representatives(model.alpha(), model.d(), reps)
}

/// Threshold law of the model at level `h` from `m` draws.
/// Rows must be standardized unless h = 0.
pub fn stable_threshold_law_mc(model: &StableLinearModel, h: f64, m: u64, seed: u64) -> Result<BinaryLaw> {
    if !h.is_finite() {
        return range("threshold must be finite");
    }
    if m == 0 {
        return range("need at least one sample");
    }
    if h != 0.0 && !model.is_standardized() {
        return Err(Error::UnequalMarginals(
            "rows are not standardized, so the threshold marginals differ".into(),
        ));
    }
    let d = model.d();
    let counts = rng::chunked(
        m,
        seed,
        |r, len| {
            let mut c = vec![0u64; 1 << d];
            let mut s = vec![0.0; model.m()];
            let mut x = vec![0.0; d];
            for _ in 0..len {
                model.draw(r, &mut s, &mut x);
                let rho = x
                    .iter()
                    .fold(0usize, |acc, &v| (acc << 1) | usize::from(v > h));
                c[rho] += 1;
            }
            c
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        },
        vec![0u64; 1 << d],
    );
    BinaryLaw::from_counts(d, &counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corr2dVerdict {
    /// The threshold process is a color process at every level.
    AlwaysColor,
    /// Negative correlation already at h = 0.
    NotColorAtZero,
}

/// Color iff a ≤ 2^{−1/α}.
pub fn corr2d_criterion(a: f64, alpha: f64) -> Result<Corr2dVerdict> {
    check_alpha(alpha, false)?;
    check_unit(a)?;
    Ok(if a <= 2f64.powf(-1.0 / alpha) {
        Corr2dVerdict::AlwaysColor
    } else {
        Corr2dVerdict::NotColorAtZero
    })
}

/// Both sides of P(c S_2 ≥ a|S_1| + h) ≥ P(S_1 ≥ h)² by simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corr2dInequality {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub samples: u64,
}

impl Corr2dInequality {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn gap_stderr(&self) -> f64 {
        self.lhs_stderr.hypot(self.rhs_stderr)
    }
}

pub fn corr2d_inequality_mc(a: f64, alpha: f64, h: f64, m: u64, seed: u64) -> Result<Corr2dInequality> {
    check_alpha(alpha, false)?;
    check_unit(a)?;
    if m == 0 {
        return range("need at least one sample");
    }
    let c = complement(a, alpha);
    let (hits_l, hits_r) = rng::chunked(
        m,
        seed,
        |r, len| {
            let (mut l, mut rr) = (0u64, 0u64);
            for _ in 0..len {
                let s1 = sym_stable_draw(r, alpha);
                let s2 = sym_stable_draw(r, alpha);
                l += u64::from(c * s2 >= a * s1.abs() + h);
                rr += u64::from(s1 >= h);
            }
            (l, rr)
        },
        |x, y| (x.0 + y.0, x.1 + y.1),
        (0, 0),
    );
    let mf = m as f64;
    let lhs = hits_l as f64 / mf;
    let p1 = hits_r as f64 / mf;
    let se1 = (p1 * (1.0 - p1) / mf).sqrt();
    Ok(Corr2dInequality {
        lhs,
        lhs_stderr: (lhs * (1.0 - lhs) / mf).sqrt(),
        rhs: p1 * p1,
        rhs_stderr: 2.0 * p1 * se1,
        samples: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableGood {
    /// 2 ∫ (x^{(2)} ∨ 0)^α dΛ
    pub integral: f64,
    pub below_one: bool,
    /// Every open orthant carries mass.
    pub support_in_every_orthant: bool,
}

/// The tail integral over the second largest coordinate.
pub fn stablegood_integral(measure: &SpectralMeasure) -> Result<StableGood> {
    if measure.d() < 2 {
        return Err(Error::Size("need dimension at least 2".into()));
    }
    let alpha = measure.alpha();
    let integral = 2.0
        * measure
            .atoms()
            .iter()
            .map(|(x, w)| {
                let mut v = x.clone();
                v.sort_by(|p, q| q.total_cmp(p));
                w * v[1].max(0.0).powf(alpha)
            })
            .sum::<f64>();
    Ok(StableGood {
        integral,
        below_one: integral < 1.0,
        support_in_every_orthant: measure.charges_every_orthant(),
    })
}
