//! Threshold laws of centred Gaussian vectors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, range, Error, Result};
use crate::partitions::{BinaryLaw, MAX_N};
use crate::quad;
use crate::rng;
use crate::special::{erf, norm_pdf, norm_sf};

pub const SYM_TOL: f64 = 1e-12;
pub const RANK_CUTOFF: f64 = 1e-10;

/// A covariance matrix together with its spectral data.
#[derive(Debug, Clone)]
pub struct CovarianceSpec {
    a: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    is_pd: bool,
    is_standard: bool,
    inverse: Option<DMatrix<f64>>,
    det: f64,
}

impl CovarianceSpec {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || n != a.ncols() {
            return invalid("covariance must be a nonempty square matrix");
        }
        if n > MAX_N {
            return Err(Error::Size(format!("n = {n} exceeds {MAX_N}")));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return invalid("non-finite covariance entry");
        }
        for i in 0..n {
            if a[(i, i)] <= 0.0 {
                return invalid(format!("diagonal entry {} is not positive", i + 1));
            }
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > SYM_TOL * (1.0 + a[(i, j)].abs()) {
                    return invalid("matrix is not symmetric");
                }
            }
        }
        let a = (&a + a.transpose()) * 0.5;
        for i in 0..n {
            for j in 0..i {
                let (x, y, c) = (a[(i, i)], a[(j, j)], a[(i, j)]);
                if (x - y).abs() <= SYM_TOL * x && (c - x).abs() <= SYM_TOL * x {
                    return invalid(format!("X_{} and X_{} are almost surely equal", j + 1, i + 1));
                }
            }
        }
        let is_standard = (0..n).all(|i| (a[(i, i)] - 1.0).abs() <= SYM_TOL);
        if is_standard {
            for i in 0..n {
                for j in 0..n {
                    if i != j && a[(i, j)].abs() > 1.0 + SYM_TOL {
                        return invalid("correlation outside [-1, 1]");
                    }
                }
            }
        }
        let eig = a.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
        let lmax = eigenvalues[0];
        let cutoff = RANK_CUTOFF * lmax;
        if *eigenvalues.last().unwrap() < -cutoff {
            return invalid("matrix is not positive semidefinite");
        }
        let rank = eigenvalues.iter().filter(|&&l| l > cutoff).count();
        let is_pd = rank == n;
        let (inverse, det) = if is_pd {
            match a.clone().cholesky() {
                Some(ch) => {
                    let det = ch.l().diagonal().iter().map(|d| d * d).product();
                    (Some(ch.inverse()), det)
                }
                None => (None, eigenvalues.iter().product()),
            }
        } else {
            (None, 0.0)
        };
        let is_pd = is_pd && inverse.is_some();
        Ok(CovarianceSpec { a, eigenvalues, eigenvectors, rank, is_pd, is_standard, inverse, det })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return invalid("covariance rows must all have length n");
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Standard 3-vector from (a12, a13, a23).
    pub fn standard3(a12: f64, a13: f64, a23: f64) -> Result<Self> {
        Self::from_rows(&[vec![1.0, a12, a13], vec![a12, 1.0, a23], vec![a13, a23, 1.0]])
    }

    /// Unit diagonal, every off-diagonal entry `a`.
    pub fn fully_symmetric(n: usize, a: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { a }))
    }

    /// Stationary Gaussian Markov chain: a_ij = a^{|i-j|}.
    pub fn markov(n: usize, a: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |i, j| a.powi((i as i32 - j as i32).abs())))
    }

    /// The matrix [[1,a,a],[a,1,b],[a,b,1]].
    pub fn ab(a: f64, b: f64) -> Result<Self> {
        Self::standard3(a, a, b)
    }

    /// Four points at one latitude of the 2-sphere, forming a square;
    /// `theta` is their polar angle. Rank 3, with X1 + X3 = X2 + X4.
    pub fn square_on_sphere(theta: f64) -> Result<Self> {
        let c2 = theta.cos().powi(2);
        let d = c2 - theta.sin().powi(2);
        Self::from_rows(&[
            vec![1.0, c2, d, c2],
            vec![c2, 1.0, c2, d],
            vec![d, c2, 1.0, c2],
            vec![c2, d, c2, 1.0],
        ])
    }

    /// Three iid standard normals and their normalised sum.
    pub fn symmetric_plus_mean() -> Result<Self> {
        let s = 1.0 / 3f64.sqrt();
        Self::from_rows(&[
            vec![1.0, 0.0, 0.0, s],
            vec![0.0, 1.0, 0.0, s],
            vec![0.0, 0.0, 1.0, s],
            vec![s, s, s, 1.0],
        ])
    }

    /// Gram matrix of the given vectors, X_i = x_i · W.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            points[i].iter().zip(&points[j]).map(|(x, y)| x * y).sum()
        }))
    }

    /// Unit vectors on the circle at the given angles.
    pub fn circle_points(angles: &[f64]) -> Result<Self> {
        let pts: Vec<Vec<f64>> = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        Self::from_points(&pts)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_pd(&self) -> bool {
        self.is_pd
    }

    pub fn is_standard(&self) -> bool {
        self.is_standard
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns, ordered with decreasing eigenvalue.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn inverse(&self) -> Result<&DMatrix<f64>> {
        self.inverse.as_ref().ok_or(Error::Singular)
    }

    /// theta_ij = arccos a_ij (standard matrices only).
    pub fn angle(&self, i: usize, j: usize) -> Result<f64> {
        if !self.is_standard {
            return invalid("angles need a unit diagonal");
        }
        Ok(self.a[(i, j)].clamp(-1.0, 1.0).acos())
    }

    /// Loading matrix L (n × rank) with L Lᵀ = A.
    pub fn factor(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, self.rank, |i, k| self.eigenvectors[(i, k)] * self.eigenvalues[k].sqrt())
    }

    /// Null vectors of A (eigenvectors below the rank cutoff).
    pub fn null_vectors(&self) -> Vec<DVector<f64>> {
        (self.rank..self.n()).map(|k| self.eigenvectors.column(k).into_owned()).collect()
    }

    /// Principal submatrix on the sorted index list `s`.
    pub fn principal(&self, s: &[usize]) -> Result<Self> {
        if s.is_empty() || s.iter().any(|&i| i >= self.n()) {
            return invalid("bad index subset");
        }
        Self::new(DMatrix::from_fn(s.len(), s.len(), |i, j| self.a[(s[i], s[j])]))
    }

    /// 1ᵀA⁻¹ (column sums of the inverse).
    pub fn savage_vector(&self) -> Result<Vec<f64>> {
        let b = self.inverse()?;
        Ok((0..self.n()).map(|j| b.column(j).sum()).collect())
    }

    /// 1ᵀA⁻¹1.
    pub fn quadratic(&self) -> Result<f64> {
        Ok(self.inverse()?.sum())
    }
}

impl PartialEq for CovarianceSpec {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a
    }
}

#[derive(Serialize, Deserialize)]
struct CovJson {
    n: usize,
    a: Vec<Vec<f64>>,
}

impl Serialize for CovarianceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.n();
        CovJson { n, a: (0..n).map(|i| (0..n).map(|j| self.a[(i, j)]).collect()).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CovarianceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CovJson::deserialize(d)?;
        if j.a.len() != j.n {
            return Err(serde::de::Error::custom("n does not match the matrix"));
        }
        CovarianceSpec::from_rows(&j.a).map_err(serde::de::Error::custom)
    }
}

/// Threshold h with its marginal p = P(X_1 > h) for unit variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub h: f64,
    pub p: f64,
}

impl ThresholdQuery {
    pub fn new(h: f64) -> Result<Self> {
        if !h.is_finite() {
            return range("threshold must be finite");
        }
        let p = norm_sf(h);
        if p <= 0.0 || p >= 1.0 {
            return range(format!("threshold {h} gives a degenerate marginal"));
        }
        Ok(ThresholdQuery { h, p })
    }
}

fn check_corr(a: f64) -> Result<()> {
    if !(a.abs() < 1.0) {
        return range(format!("correlation {a} must lie in (-1, 1)"));
    }
    Ok(())
}

/// P(X1 > 0, X2 > 0) for a standard pair with correlation a.
pub fn sheppard_pair(a: f64) -> Result<f64> {
    check_corr(a)?;
    Ok(0.5 - a.acos() / (2.0 * PI))
}

/// Weight 1 - 2 arccos(a)/pi that a two-point color representation at
/// h = 0 puts on the partition {12}.
pub fn pair_cluster_weight(a: f64) -> Result<f64> {
    check_corr(a)?;
    Ok(1.0 - 2.0 * a.acos() / PI)
}

/// Exact law of X^0 for a standard 3-vector.
pub fn zero_threshold_law_3(cov: &CovarianceSpec) -> Result<BinaryLaw> {
    if cov.n() != 3 {
        return invalid("zero_threshold_law_3 needs n = 3");
    }
    if !cov.is_standard() {
        return invalid("zero_threshold_law_3 needs a unit diagonal");
    }
    let t12 = cov.angle(0, 1)?;
    let t13 = cov.angle(0, 2)?;
    let t23 = cov.angle(1, 2)?;
    let all = 0.5 - (t12 + t13 + t23) / (4.0 * PI);
    // P(X_i ≤ 0, X_j ≤ 0) minus the all-negative cell
    let pair = |t: f64| 0.5 - t / (2.0 * PI) - all;
    let c001 = pair(t12);
    let c010 = pair(t13);
    let c100 = pair(t23);
    let probs = vec![all, c001, c010, c100, c100, c010, c001, all];
    BinaryLaw::new(3, probs)
}

/// P(X1 > h, X2 > h) for a standard pair with correlation a, by adaptive
/// quadrature of Φ̄((h - a x)/sqrt(1 - a²)) φ(x) over x > h.
pub fn bivariate_threshold_exact(a: f64, h: f64) -> Result<f64> {
    check_corr(a)?;
    if !h.is_finite() {
        return range("threshold must be finite");
    }
    let s = (1.0 - a * a).sqrt();
    let f = |x: f64| norm_sf((h - a * x) / s) * norm_pdf(x);
    // beyond x = max(h,0) + 40 the integrand is below e^{-800} relative
    let upper = h.max(0.0) + 40.0;
    let mut total = 0.0;
    // split at 0 so the peak of φ lies on a subinterval boundary
    let mut cuts = vec![h];
    if h < 0.0 {
        cuts.push(0.0);
    }
    cuts.push(upper);
    for w in cuts.windows(2) {
        // relative accuracy keeps the deep tail meaningful; |I| ≤ 1 so the
        // absolute error stays far below 1e-10 as well
        total += quad::integrate(f, w[0], w[1], 0.0, 1e-12)?.value;
    }
    Ok(total)
}

/// Monte Carlo law of X^h with X = L Z, L from the eigendecomposition.
pub fn threshold_law_mc(cov: &CovarianceSpec, h: f64, m: u64, seed: u64) -> Result<BinaryLaw> {
    if m < 1 {
        return range("m must be at least 1");
    }
    if !h.is_finite() {
        return range("threshold must be finite");
    }
    let n = cov.n();
    let l = cov.factor();
    let r = l.ncols();
    let counts = rng::chunked(
        m,
        seed,
        |g, len| {
            let mut c = vec![0u64; 1 << n];
            let mut z = vec![0.0; r];
            for _ in 0..len {
                for zk in z.iter_mut() {
                    *zk = StandardNormal.sample(g);
                }
                let mut rho = 0;
                for i in 0..n {
                    let mut x = 0.0;
                    for k in 0..r {
                        x += l[(i, k)] * z[k];
                    }
                    rho = (rho << 1) | usize::from(x > h);
                }
                c[rho] += 1;
            }
            c
        },
        |mut a, b| {
            if a.is_empty() {
                return b;
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
        Vec::new(),
    );
    BinaryLaw::from_counts(n, &counts)
}

/// Exact law of X^h for the four-point square on the sphere.
///
/// With X_i = x_i · W and W = (W1, W2, W3), the pair (X1, X3) depends on
/// W1 and (X2, X4) on W2 only, given W3 = w. Each cell is then a single
/// integral over w of a product of closed-form normal probabilities.
pub fn square_threshold_law(theta: f64, h: f64) -> Result<BinaryLaw> {
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return range(format!("polar angle {theta} must lie in (0, pi/2]"));
    }
    if !h.is_finite() {
        return range("threshold must be finite");
    }
    let (s, c) = theta.sin_cos();
    // law of (X_i > h, X_{i+2} > h) given W3 = w, with u = (h - c w)/s:
    // X_i > h iff W > u, X_{i+2} > h iff W < -u
    let pair = |first: bool, second: bool, w: f64| -> f64 {
        let u = (h - c * w) / s;
        match (first, second) {
            (true, true) if u < 0.0 => erf(-u / std::f64::consts::SQRT_2),
            (false, false) if u > 0.0 => erf(u / std::f64::consts::SQRT_2),
            (true, false) | (false, true) => norm_sf(u.abs()),
            _ => 0.0,
        }
    };
    // φ(w) underflows beyond |w| = 40; split at the kink u = 0
    let mut cuts = vec![-40.0];
    if c > 0.0 && (h / c).abs() < 40.0 {
        cuts.push(h / c);
    }
    cuts.push(40.0);
    let mut probs = vec![0.0; 16];
    for (rho, cell) in probs.iter_mut().enumerate() {
        let b = |i: usize| (rho >> (3 - i)) & 1 == 1;
        let (b1, b2, b3, b4) = (b(0), b(1), b(2), b(3));
        if (b1, b3) == (false, false) && (b2, b4) == (true, true)
            || (b1, b3) == (true, true) && (b2, b4) == (false, false)
        {
            continue;
        }
        let f = |w: f64| norm_pdf(w) * pair(b1, b3, w) * pair(b2, b4, w);
        for win in cuts.windows(2) {
            *cell += quad::integrate(f, win[0], win[1], 0.0, 1e-12)?.value;
        }
    }
    BinaryLaw::new(4, probs)
}

/// Leading large-h behaviour of an orthant cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TailAsymptote {
    Leading {
        value: f64,
        /// log of `value`, usable where `value` underflows.
        log_value: f64,
        /// 1ᵀA⁻¹1, the rate in exp(-h² q / 2).
        exponent: f64,
        /// (2π)^{-n/2} det(A)^{-1/2} / ∏|α_i|.
        prefactor: f64,
    },
    /// 1ᵀA⁻¹ has zero coordinates; for each such k,
    /// ν_{1^n}(h) / ν_{1 on [n]∖k}(h) → 1/2.
    HalfRatioRule { zero_coords: Vec<usize>, limit: f64 },
}

pub fn tail_asymptote(cov: &CovarianceSpec, rho: usize, h: f64) -> Result<TailAsymptote> {
    if !cov.is_standard() || !cov.is_pd() {
        return invalid("tail asymptote needs a standard positive definite matrix");
    }
    if !(h > 0.0) {
        return range("tail asymptote needs h > 0");
    }
    let n = cov.n();
    if rho >= 1 << n {
        return invalid("pattern out of range");
    }
    let alpha = cov.savage_vector()?;
    let zeros: Vec<usize> = (0..n).filter(|&i| alpha[i].abs() <= 1e-10).collect();
    if !zeros.is_empty() {
        return Ok(TailAsymptote::HalfRatioRule { zero_coords: zeros, limit: 0.5 });
    }
    let want = alpha.iter().fold(0, |acc, &x| (acc << 1) | usize::from(x > 0.0));
    if rho != want {
        return invalid(format!(
            "the leading term applies to the sign pattern of 1ᵀA⁻¹, {}",
            crate::partitions::pattern_key(want, n)
        ));
    }
    let q = cov.quadratic()?;
    let prod: f64 = alpha.iter().map(|x| x.abs()).product();
    let prefactor = (2.0 * PI).powf(-(n as f64) / 2.0) / (cov.det().sqrt() * prod);
    let log_value = prefactor.ln() - n as f64 * h.ln() - 0.5 * h * h * q;
    Ok(TailAsymptote::Leading { value: log_value.exp(), log_value, exponent: q, prefactor })
}
