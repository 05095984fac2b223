//! Set partitions of [n], the color map, and color processes.
//!
//! Binary strings are stored as integers with element `i` (0-based) in bit
//! `n-1-i`, so the integer order equals the lexicographic order of the
//! string `rho_1 rho_2 ... rho_n`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, range, Error, Result};
use crate::rng;

pub const MAX_N: usize = 12;
/// Largest n for which the color map is materialised as a dense matrix.
pub const MAX_DENSE_N: usize = 8;
pub const EXACT_TOL: f64 = 1e-12;

/// A set partition of {0,…,n-1}, stored as its restricted growth string:
/// `labels[i]` is the index of the block containing `i`, blocks numbered by
/// their least element. The derived order is the order of those strings,
/// which lists `123, 12|3, 13|2, 1|23, 1|2|3` for n = 3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    n: u8,
    labels: [u8; MAX_N],
}

impl Partition {
    /// Canonicalises an arbitrary block labelling.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let n = labels.len();
        if n == 0 || n > MAX_N {
            return Err(Error::Size(format!("n = {n} outside 1..={MAX_N}")));
        }
        let mut map: Vec<(usize, u8)> = Vec::new();
        let mut out = [0u8; MAX_N];
        for (i, &l) in labels.iter().enumerate() {
            let c = match map.iter().find(|(k, _)| *k == l) {
                Some(&(_, c)) => c,
                None => {
                    let c = map.len() as u8;
                    map.push((l, c));
                    c
                }
            };
            out[i] = c;
        }
        Ok(Partition { n: n as u8, labels: out })
    }

    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::Size(format!("n = {n} outside 1..={MAX_N}")));
        }
        let mut lab = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return invalid("empty block");
            }
            for &i in block {
                if i >= n {
                    return invalid(format!("index {} outside [1,{n}]", i + 1));
                }
                if lab[i] != usize::MAX {
                    return invalid(format!("index {} appears twice", i + 1));
                }
                lab[i] = b;
            }
        }
        if lab.contains(&usize::MAX) {
            return invalid("blocks do not cover [n]");
        }
        Self::from_labels(&lab)
    }

    pub fn one_block(n: usize) -> Result<Self> {
        Self::from_labels(&vec![0; n])
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Self::from_labels(&(0..n).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels[..self.n()]
    }

    pub fn num_blocks(&self) -> usize {
        self.labels().iter().copied().max().map_or(0, |m| m as usize + 1)
    }

    /// Blocks with 0-based indices, sorted internally and by least element.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for i in 0..self.n() {
            out[self.label(i)].push(i);
        }
        out
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Induced partition on the sorted index list `s`.
    pub fn restrict(&self, s: &[usize]) -> Result<Self> {
        let lab: Vec<usize> = s.iter().map(|&i| self.label(i)).collect();
        Self::from_labels(&lab)
    }

    /// True when every block is a run of consecutive indices.
    pub fn is_interval(&self) -> bool {
        (1..self.n()).all(|i| self.labels[i] >= self.labels[i - 1])
    }

    /// True when `rho` (bit-packed) is constant on every block.
    pub fn is_constant_on(&self, rho: usize) -> bool {
        let n = self.n();
        let mut colour = [u8::MAX; MAX_N];
        for i in 0..n {
            let b = bit(rho, i, n) as u8;
            let l = self.label(i);
            if colour[l] == u8::MAX {
                colour[l] = b;
            } else if colour[l] != b {
                return false;
            }
        }
        true
    }

    /// "12|3" for n ≤ 9; larger n separates indices with commas.
    pub fn key(&self) -> String {
        let sep = if self.n() > 9 { "," } else { "" };
        self.blocks()
            .iter()
            .map(|b| b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(sep))
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn parse_key(n: usize, key: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for part in key.split('|') {
            let idx: Result<Vec<usize>> = if part.contains(',') || n > 9 {
                part.split(',')
                    .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Invalid(format!("bad key {key}"))))
                    .collect()
            } else {
                part.chars()
                    .map(|c| {
                        c.to_digit(10)
                            .map(|d| d as usize)
                            .ok_or_else(|| Error::Invalid(format!("bad key {key}")))
                    })
                    .collect()
            };
            let idx = idx?;
            if idx.contains(&0) {
                return invalid(format!("indices are 1-based in key {key}"));
            }
            blocks.push(idx.into_iter().map(|i| i - 1).collect::<Vec<_>>());
        }
        Self::from_blocks(n, &blocks)
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

/// Value of element `i` in the bit-packed string `rho` of length `n`.
#[inline]
pub fn bit(rho: usize, i: usize, n: usize) -> usize {
    (rho >> (n - 1 - i)) & 1
}

pub fn pattern_key(rho: usize, n: usize) -> String {
    (0..n).map(|i| if bit(rho, i, n) == 1 { '1' } else { '0' }).collect()
}

pub fn parse_pattern(key: &str) -> Result<(usize, usize)> {
    let n = key.len();
    if n == 0 || n > MAX_N {
        return Err(Error::Size(format!("pattern length {n}")));
    }
    let mut rho = 0;
    for c in key.chars() {
        rho <<= 1;
        match c {
            '0' => {}
            '1' => rho |= 1,
            _ => return invalid(format!("bad pattern {key}")),
        }
    }
    Ok((rho, n))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_N {
        Err(Error::Size(format!("n = {n} outside 1..={MAX_N}")))
    } else {
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        range(format!("p = {p} outside [0,1]"))
    } else {
        Ok(())
    }
}

/// All partitions of [n] in canonical order.
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    check_n(n)?;
    let mut out = Vec::with_capacity(bell(n) as usize);
    let mut labels = [0u8; MAX_N];
    fn rec(i: usize, max: u8, n: usize, labels: &mut [u8; MAX_N], out: &mut Vec<Partition>) {
        if i == n {
            out.push(Partition { n: n as u8, labels: *labels });
            return;
        }
        for l in 0..=max + 1 {
            labels[i] = l;
            rec(i + 1, max.max(l), n, labels, out);
        }
        labels[i] = 0;
    }
    if n == 1 {
        out.push(Partition { n: 1, labels });
    } else {
        rec(1, 0, n, &mut labels, &mut out);
    }
    Ok(out)
}

/// Bell numbers via the Bell triangle.
pub fn bell(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        row = next;
    }
    row[0]
}

/// Column of the color map for one partition: a law on {0,1}^n.
pub fn color_column(sigma: &Partition, p: f64) -> Vec<f64> {
    let n = sigma.n();
    let k = sigma.num_blocks();
    let mut col = vec![0.0; 1 << n];
    for c in 0..(1usize << k) {
        let ones = c.count_ones() as i32;
        let w = p.powi(ones) * (1.0 - p).powi(k as i32 - ones);
        let mut rho = 0;
        for i in 0..n {
            // block colour c bit for block label(i), block 0 in the top bit
            let b = (c >> (k - 1 - sigma.label(i))) & 1;
            rho |= b << (n - 1 - i);
        }
        col[rho] += w;
    }
    col
}

/// The linear map from partition distributions to laws on {0,1}^n.
#[derive(Debug, Clone)]
pub struct ColorMap {
    pub n: usize,
    pub p: f64,
    pub partitions: Vec<Partition>,
}

impl ColorMap {
    pub fn rows(&self) -> usize {
        1 << self.n
    }

    pub fn cols(&self) -> usize {
        self.partitions.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        color_column(&self.partitions[j], self.p)
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.n > MAX_DENSE_N {
            return Err(Error::Size(format!(
                "dense color map limited to n ≤ {MAX_DENSE_N}; use columns"
            )));
        }
        let mut m = DMatrix::zeros(self.rows(), self.cols());
        for j in 0..self.cols() {
            for (i, v) in self.column(j).into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

pub fn color_map(n: usize, p: f64) -> Result<ColorMap> {
    check_p(p)?;
    Ok(ColorMap { n, p, partitions: enumerate_partitions(n)? })
}

/// A (possibly signed) distribution over the partitions of [n].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionDistribution {
    n: usize,
    weights: BTreeMap<Partition, f64>,
    signed: bool,
}

impl PartitionDistribution {
    pub fn new(n: usize, entries: Vec<(Partition, f64)>, signed: bool) -> Result<Self> {
        check_n(n)?;
        let mut weights = BTreeMap::new();
        for (s, w) in entries {
            if s.n() != n {
                return invalid(format!("partition {s} is not on [{n}]"));
            }
            if !w.is_finite() {
                return invalid("non-finite weight");
            }
            *weights.entry(s).or_insert(0.0) += w;
        }
        let total: f64 = weights.values().sum();
        if (total - 1.0).abs() > EXACT_TOL * (1.0 + weights.len() as f64).sqrt() {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        if !signed {
            if let Some((s, w)) = weights.iter().find(|(_, w)| **w < -EXACT_TOL) {
                return invalid(format!("negative weight {w} on {s}"));
            }
        }
        Ok(PartitionDistribution { n, weights, signed })
    }

    pub fn point_mass(sigma: Partition) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(sigma, 1.0);
        PartitionDistribution { n: sigma.n(), weights, signed: false }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let all = enumerate_partitions(n)?;
        let w = 1.0 / all.len() as f64;
        Self::new(n, all.into_iter().map(|s| (s, w)).collect(), false)
    }

    /// Builds from `(key, weight)` pairs such as `("12|3", 0.4)`.
    pub fn from_keys(n: usize, entries: &[(&str, f64)], signed: bool) -> Result<Self> {
        let e: Result<Vec<_>> = entries
            .iter()
            .map(|(k, w)| Partition::parse_key(n, k).map(|s| (s, *w)))
            .collect();
        Self::new(n, e?, signed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    pub fn is_probability(&self) -> bool {
        self.weights.values().all(|w| *w >= -EXACT_TOL)
    }

    pub fn weight(&self, sigma: &Partition) -> f64 {
        self.weights.get(sigma).copied().unwrap_or(0.0)
    }

    pub fn weight_of(&self, key: &str) -> Result<f64> {
        Ok(self.weight(&Partition::parse_key(self.n, key)?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Partition, &f64)> {
        self.weights.iter()
    }

    /// Weights aligned with `enumerate_partitions(n)`.
    pub fn dense(&self) -> Vec<f64> {
        enumerate_partitions(self.n)
            .expect("n validated")
            .iter()
            .map(|s| self.weight(s))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct QEntry {
    key: String,
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct QJson {
    n: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    signed: bool,
    entries: Vec<QEntry>,
}

impl Serialize for PartitionDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        QJson {
            n: self.n,
            signed: self.signed,
            entries: self.weights.iter().map(|(k, q)| QEntry { key: k.key(), q: *q }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PartitionDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = QJson::deserialize(d)?;
        let entries: Result<Vec<_>> = j
            .entries
            .iter()
            .map(|e| Partition::parse_key(j.n, &e.key).map(|s| (s, e.q)))
            .collect();
        entries
            .and_then(|e| PartitionDistribution::new(j.n, e, j.signed))
            .map_err(serde::de::Error::custom)
    }
}

/// A law on {0,1}^n, exact or estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLaw {
    n: usize,
    probs: Vec<f64>,
    marginal_p: f64,
    stderr: Option<Vec<f64>>,
    samples: Option<u64>,
}

impl BinaryLaw {
    /// Exact law; the probabilities must sum to 1.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if probs.len() != 1 << n {
            return invalid(format!("expected {} cells, got {}", 1 << n, probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return invalid("non-finite probability");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > EXACT_TOL * (1usize << n) as f64 {
            return invalid(format!("probabilities sum to {total}"));
        }
        if let Some(p) = probs.iter().find(|p| **p < -EXACT_TOL) {
            return invalid(format!("negative probability {p}"));
        }
        let mut law = BinaryLaw { n, probs, marginal_p: 0.0, stderr: None, samples: None };
        law.marginal_p = law.marginals().iter().sum::<f64>() / n as f64;
        Ok(law)
    }

    /// Empirical law from cell counts with per-cell standard errors.
    pub fn from_counts(n: usize, counts: &[u64]) -> Result<Self> {
        check_n(n)?;
        if counts.len() != 1 << n {
            return invalid("count vector has wrong length");
        }
        let m: u64 = counts.iter().sum();
        if m == 0 {
            return range("no samples");
        }
        let mf = m as f64;
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / mf).collect();
        let se = probs.iter().map(|&p| (p * (1.0 - p) / mf).sqrt()).collect();
        let mut law = BinaryLaw::new(n, probs)?;
        law.stderr = Some(se);
        law.samples = Some(m);
        Ok(law)
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>, samples: Option<u64>) -> Result<Self> {
        if stderr.len() != self.probs.len() {
            return invalid("stderr has wrong length");
        }
        self.stderr = Some(stderr);
        self.samples = samples;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, rho: usize) -> f64 {
        self.probs[rho]
    }

    pub fn cell(&self, key: &str) -> Result<f64> {
        let (rho, n) = parse_pattern(key)?;
        if n != self.n {
            return invalid(format!("pattern {key} has wrong length"));
        }
        Ok(self.probs[rho])
    }

    pub fn marginal_p(&self) -> f64 {
        self.marginal_p
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn samples(&self) -> Option<u64> {
        self.samples
    }

    pub fn is_mc(&self) -> bool {
        self.stderr.is_some()
    }

    /// P(rho_i = 1) for each i.
    pub fn marginals(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.probs
                    .iter()
                    .enumerate()
                    .filter(|(rho, _)| bit(*rho, i, n) == 1)
                    .map(|(_, p)| p)
                    .sum()
            })
            .collect()
    }

    /// Tolerance for marginal comparisons: exact, or three standard errors
    /// of a marginal estimate.
    pub fn marginal_tolerance(&self) -> f64 {
        match self.samples {
            Some(m) => {
                let p = self.marginal_p;
                3.0 * (p * (1.0 - p) / m as f64).sqrt() + EXACT_TOL
            }
            None => 1e-10,
        }
    }

    /// Checks all single-site marginals agree and returns their mean.
    pub fn common_marginal(&self, tol: f64) -> Result<f64> {
        let m = self.marginals();
        let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > tol {
            return Err(Error::UnequalMarginals(format!("marginals range over [{lo}, {hi}]")));
        }
        Ok(self.marginal_p)
    }

    /// nu_rho = nu_{1-rho} for every rho, within `tol`.
    pub fn is_flip_symmetric(&self, tol: f64) -> bool {
        let full = (1 << self.n) - 1;
        (0..self.probs.len()).all(|r| (self.probs[r] - self.probs[full ^ r]).abs() <= tol)
    }

    /// Law of the coordinates in `s` (sorted, 0-based).
    pub fn marginal_law(&self, s: &[usize]) -> Result<BinaryLaw> {
        check_subset(s, self.n)?;
        let k = s.len();
        let mut probs = vec![0.0; 1 << k];
        for (rho, p) in self.probs.iter().enumerate() {
            let mut r = 0;
            for &i in s {
                r = (r << 1) | bit(rho, i, self.n);
            }
            probs[r] += p;
        }
        let mut law = BinaryLaw::new(k, probs)?;
        if let Some(m) = self.samples {
            let mf = m as f64;
            law.stderr = Some(law.probs.iter().map(|&p| (p * (1.0 - p) / mf).sqrt()).collect());
            law.samples = Some(m);
        }
        Ok(law)
    }

    /// Pairwise covariances of the indicator coordinates.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let both: f64 = self
            .probs
            .iter()
            .enumerate()
            .filter(|(r, _)| bit(*r, i, n) == 1 && bit(*r, j, n) == 1)
            .map(|(_, p)| p)
            .sum();
        let m = self.marginals();
        both - m[i] * m[j]
    }

    pub fn max_abs_diff(&self, other: &BinaryLaw) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_subset(s: &[usize], n: usize) -> Result<()> {
    if s.is_empty() {
        return invalid("empty index subset");
    }
    if s.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("index subset must be strictly increasing");
    }
    if *s.last().unwrap() >= n {
        return invalid("index subset out of range");
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NuEntry {
    key: String,
    p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct NuJson {
    n: usize,
    entries: Vec<NuEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    samples: Option<u64>,
}

impl Serialize for BinaryLaw {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NuJson {
            n: self.n,
            entries: self
                .probs
                .iter()
                .enumerate()
                .map(|(r, p)| NuEntry {
                    key: pattern_key(r, self.n),
                    p: *p,
                    stderr: self.stderr.as_ref().map(|se| se[r]),
                })
                .collect(),
            samples: self.samples,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BinaryLaw {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = NuJson::deserialize(d)?;
        if j.n == 0 || j.n > MAX_N {
            return Err(D::Error::custom(format!("n = {} out of range", j.n)));
        }
        let mut probs = vec![0.0; 1 << j.n];
        let mut se = vec![0.0; 1 << j.n];
        let mut any_se = false;
        for e in &j.entries {
            let (r, k) = parse_pattern(&e.key).map_err(D::Error::custom)?;
            if k != j.n {
                return Err(D::Error::custom(format!("pattern {} has wrong length", e.key)));
            }
            probs[r] += e.p;
            if let Some(s) = e.stderr {
                se[r] = s;
                any_se = true;
            }
        }
        let mut law = BinaryLaw::new(j.n, probs).map_err(D::Error::custom)?;
        if any_se {
            law.stderr = Some(se);
            law.samples = j.samples;
        }
        Ok(law)
    }
}

/// nu = color_map(n, p) q, allowing signed q.
pub fn push_forward_signed(q: &PartitionDistribution, p: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    let mut nu = vec![0.0; 1 << q.n];
    for (s, w) in q.iter() {
        for (r, c) in color_column(s, p).into_iter().enumerate() {
            nu[r] += w * c;
        }
    }
    Ok(nu)
}

pub fn push_forward(q: &PartitionDistribution, p: f64) -> Result<BinaryLaw> {
    if q.is_signed() || !q.is_probability() {
        return invalid("push_forward needs a probability distribution");
    }
    let nu = push_forward_signed(q, p)?;
    let mut law = BinaryLaw::new(q.n, nu)?;
    law.marginal_p = p;
    Ok(law)
}

pub fn marginalize_partition(q: &PartitionDistribution, s: &[usize]) -> Result<PartitionDistribution> {
    check_subset(s, q.n)?;
    let mut entries = Vec::new();
    for (sigma, w) in q.iter() {
        entries.push((sigma.restrict(s)?, *w));
    }
    PartitionDistribution::new(s.len(), entries, q.is_signed())
}

/// Samples from a color process.
#[derive(Debug, Clone)]
pub struct ColorSample {
    /// Bit-packed binary strings.
    pub samples: Vec<usize>,
    pub partitions: Vec<Partition>,
    pub law: BinaryLaw,
}

pub fn simulate_color_process(
    q: &PartitionDistribution,
    p: f64,
    m: usize,
    seed: u64,
) -> Result<ColorSample> {
    check_p(p)?;
    if m == 0 {
        return range("m must be positive");
    }
    if !q.is_probability() {
        return invalid("simulation needs a probability distribution");
    }
    let support: Vec<(Partition, f64)> =
        q.iter().filter(|(_, w)| **w > 0.0).map(|(s, w)| (*s, *w)).collect();
    let mut cdf = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for (_, w) in &support {
        acc += w;
        cdf.push(acc);
    }
    let n = q.n;
    let mut r = rng::seeded(seed);
    let mut samples = Vec::with_capacity(m);
    let mut partitions = Vec::with_capacity(m);
    let mut counts = vec![0u64; 1 << n];
    for _ in 0..m {
        let u = r.random::<f64>() * acc;
        let j = cdf.partition_point(|c| *c <= u).min(support.len() - 1);
        let sigma = support[j].0;
        let mut colour = [0usize; MAX_N];
        for c in colour.iter_mut().take(sigma.num_blocks()) {
            *c = usize::from(r.random::<f64>() < p);
        }
        let mut rho = 0;
        for i in 0..n {
            rho |= colour[sigma.label(i)] << (n - 1 - i);
        }
        counts[rho] += 1;
        samples.push(rho);
        partitions.push(sigma);
    }
    let law = BinaryLaw::from_counts(n, &counts)?;
    Ok(ColorSample { samples, partitions, law })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force partitions: every labelling of [n] by 0..n, canonicalised.
    fn brute_partitions(n: usize) -> Vec<Partition> {
        let mut set = std::collections::BTreeSet::new();
        let total = n.pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let lab: Vec<usize> = (0..n)
                .map(|_| {
                    let d = c % n;
                    c /= n;
                    d
                })
                .collect();
            set.insert(Partition::from_labels(&lab).unwrap());
        }
        set.into_iter().collect()
    }

    #[test]
    fn bell_counts() {
        assert_eq!(enumerate_partitions(1).unwrap().len(), 1);
        assert_eq!(enumerate_partitions(3).unwrap().len(), 5);
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
        for n in 1..=12 {
            assert_eq!(bell(n), [1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597][n]);
        }
        assert_eq!(enumerate_partitions(7).unwrap().len() as u64, bell(7));
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(13).is_err());
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 1..=6 {
            assert_eq!(enumerate_partitions(n).unwrap(), brute_partitions(n));
        }
    }

    #[test]
    fn order_for_three() {
        let keys: Vec<String> = enumerate_partitions(3).unwrap().iter().map(|p| p.key()).collect();
        assert_eq!(keys, ["123", "12|3", "13|2", "1|23", "1|2|3"]);
    }

    #[test]
    fn keys_round_trip() {
        for n in [1, 4, 10] {
            for s in enumerate_partitions(n).unwrap().iter().take(300) {
                assert_eq!(Partition::parse_key(n, &s.key()).unwrap(), *s);
            }
        }
        assert_eq!(Partition::parse_key(3, "3|21").unwrap().key(), "12|3");
        assert!(Partition::parse_key(3, "12").is_err());
        assert!(Partition::parse_key(3, "12|23").is_err());
    }

    #[test]
    fn color_map_small_cases() {
        let m = color_map(1, 0.3).unwrap().dense().unwrap();
        assert!((m[(0, 0)] - 0.7).abs() < 1e-15 && (m[(1, 0)] - 0.3).abs() < 1e-15);
        let p = 0.37;
        let one = color_column(&Partition::one_block(2).unwrap(), p);
        assert_eq!(one, vec![1.0 - p, 0.0, 0.0, p]);
        let ind = color_column(&Partition::singletons(2).unwrap(), p);
        let want = [(1.0 - p) * (1.0 - p), (1.0 - p) * p, p * (1.0 - p), p * p];
        for (a, b) in ind.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    /// Column by brute force over block colourings, written independently.
    fn brute_column(s: &Partition, p: f64) -> Vec<f64> {
        let n = s.n();
        (0..1usize << n)
            .map(|rho| {
                if !s.is_constant_on(rho) {
                    return 0.0;
                }
                let mut w = 1.0;
                for b in s.blocks() {
                    w *= if bit(rho, b[0], n) == 1 { p } else { 1.0 - p };
                }
                w
            })
            .collect()
    }

    #[test]
    fn columns_match_brute_force_and_are_stochastic() {
        for n in 1..=5 {
            for p in [0.2, 0.5, 0.7] {
                let cm = color_map(n, p).unwrap();
                for j in 0..cm.cols() {
                    let c = cm.column(j);
                    let b = brute_column(&cm.partitions[j], p);
                    for (x, y) in c.iter().zip(&b) {
                        assert!((x - y).abs() < 1e-15);
                    }
                    assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                }
            }
        }
        assert!(color_map(9, 0.5).unwrap().dense().is_err());
        assert_eq!(color_map(9, 0.5).unwrap().column(100).len(), 512);
    }

    #[test]
    fn push_forward_examples() {
        let q = PartitionDistribution::point_mass(Partition::singletons(3).unwrap());
        let nu = push_forward(&q, 0.5).unwrap();
        assert!(nu.probs().iter().all(|p| (p - 0.125).abs() < 1e-15));
        let q = PartitionDistribution::point_mass(Partition::one_block(3).unwrap());
        let nu = push_forward(&q, 0.3).unwrap();
        assert!((nu.cell("111").unwrap() - 0.3).abs() < 1e-15);
        assert!((nu.cell("000").unwrap() - 0.7).abs() < 1e-15);
        assert!(nu.cell("101").unwrap() == 0.0);

        // uniform over B_3 at p = 0.4, averaged by hand over the five columns
        let p: f64 = 0.4;
        let q = PartitionDistribution::uniform(3).unwrap();
        let nu = push_forward(&q, p).unwrap();
        let (a, b) = (p, 1.0 - p);
        let want_000 = (b + b * b + b * b + b * b + b * b * b) / 5.0;
        let want_110 = (0.0 + a * b + 0.0 + 0.0 + a * a * b) / 5.0;
        assert!((nu.cell("000").unwrap() - want_000).abs() < 1e-15);
        assert!((nu.cell("110").unwrap() - want_110).abs() < 1e-15);

        let signed = PartitionDistribution::from_keys(2, &[("12", 1.5), ("1|2", -0.5)], true).unwrap();
        assert!(push_forward(&signed, 0.5).is_err());
    }

    #[test]
    fn marginalize_examples() {
        let q = PartitionDistribution::from_keys(4, &[("12|34", 1.0)], false).unwrap();
        let r = marginalize_partition(&q, &[0, 1, 2]).unwrap();
        assert_eq!(r.weight_of("12|3").unwrap(), 1.0);
        let q = PartitionDistribution::point_mass(Partition::singletons(5).unwrap());
        let r = marginalize_partition(&q, &[1, 3, 4]).unwrap();
        assert_eq!(r.weight_of("1|2|3").unwrap(), 1.0);
        assert!(marginalize_partition(&q, &[]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let q = PartitionDistribution::uniform(3).unwrap();
        let s = serde_json::to_string(&q).unwrap();
        assert!(s.contains("\"key\":\"12|3\""));
        let back: PartitionDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let nu = push_forward(&q, 0.4).unwrap();
        let s = serde_json::to_string(&nu).unwrap();
        assert!(s.contains("\"key\":\"101\""));
        let back: BinaryLaw = serde_json::from_str(&s).unwrap();
        assert!(back.max_abs_diff(&nu) == 0.0);
    }

    #[test]
    fn simulation_examples() {
        let q = PartitionDistribution::point_mass(Partition::one_block(3).unwrap());
        let s = simulate_color_process(&q, 1.0, 1000, 1).unwrap();
        assert!(s.samples.iter().all(|&r| r == 0b111));

        let q = PartitionDistribution::point_mass(Partition::singletons(3).unwrap());
        let s = simulate_color_process(&q, 0.5, 100_000, 2).unwrap();
        assert!(s.law.probs().iter().all(|p| (p - 0.125).abs() < 0.01));

        let q = PartitionDistribution::uniform(3).unwrap();
        let exact = push_forward(&q, 0.4).unwrap();
        let s = simulate_color_process(&q, 0.4, 100_000, 3).unwrap();
        for r in 0..8 {
            let se = (exact.prob(r) * (1.0 - exact.prob(r)) / 1e5).sqrt();
            assert!((s.law.prob(r) - exact.prob(r)).abs() <= 3.0 * se + 1e-12, "cell {r}");
        }
        let again = simulate_color_process(&q, 0.4, 100_000, 3).unwrap();
        assert_eq!(again.samples, s.samples);
    }

    fn random_q(n: usize, raw: &[f64]) -> PartitionDistribution {
        let parts = enumerate_partitions(n).unwrap();
        let w: Vec<f64> = parts.iter().enumerate().map(|(i, _)| raw[i % raw.len()]).collect();
        let t: f64 = w.iter().sum();
        PartitionDistribution::new(n, parts.into_iter().zip(w.into_iter().map(|x| x / t)).collect(), false)
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn push_forward_has_marginals_p(
            n in 1usize..=6,
            pi in 0usize..3,
            raw in proptest::collection::vec(0.01f64..1.0, 1..60),
        ) {
            let p = [0.2, 0.5, 0.7][pi];
            let nu = push_forward(&random_q(n, &raw), p).unwrap();
            for m in nu.marginals() {
                prop_assert!((m - p).abs() < 1e-12);
            }
        }

        #[test]
        fn marginalization_commutes_with_color_map(
            n in 2usize..=5,
            mask in 1usize..32,
            pi in 0usize..3,
            raw in proptest::collection::vec(0.01f64..1.0, 1..60),
        ) {
            let p = [0.2, 0.5, 0.7][pi];
            let s: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            prop_assume!(!s.is_empty());
            let q = random_q(n, &raw);
            let lhs = push_forward(&q, p).unwrap().marginal_law(&s).unwrap();
            let rhs = push_forward(&marginalize_partition(&q, &s).unwrap(), p).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
        }
    }
}
