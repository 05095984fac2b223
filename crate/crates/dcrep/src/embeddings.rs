//! Exact samplers for the zero-threshold color representations of Markov
//! chains: a path is drawn at the integer times, the zero crossings between
//! consecutive times are drawn from the Brownian bridge law, and the blocks
//! are the maximal runs without a crossing.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{range, Error, Result};
use crate::partitions::{push_forward, BinaryLaw, Partition, PartitionDistribution, MAX_N};
use crate::rng::{self, DcRng};
use crate::stable_law::{pos_stable_draw, subordinator_scale, sym_stable_draw};
use crate::stats::chi_square;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSample {
    /// ±1 per coordinate.
    pub signs: Vec<i8>,
    #[serde(serialize_with = "partition_key")]
    pub partition: Partition,
    /// Crossing probability used on each edge (1 when the endpoints differ in sign).
    pub path_meta: Vec<f64>,
    /// The underlying path values.
    pub values: Vec<f64>,
}

fn partition_key<S: serde::Serializer>(p: &Partition, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.key())
}

impl EmbeddingSample {
    pub fn n(&self) -> usize {
        self.signs.len()
    }

    /// Bit-packed indicator of the positive coordinates.
    pub fn pattern(&self) -> usize {
        self.signs.iter().fold(0, |acc, &s| (acc << 1) | usize::from(s > 0))
    }
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::Size(format!("n = {n} outside 1..={MAX_N}")));
    }
    Ok(())
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        range(format!("a = {a} must lie in (0,1)"))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 2.0 {
        Ok(())
    } else {
        range(format!("alpha = {alpha} must lie in (0,2)"))
    }
}

/// P(a Brownian bridge of duration `t` from x to y has no zero) is
/// 1 − exp(−2xy/t); this returns the crossing probability.
fn bridge_crossing(x: f64, y: f64, t: f64) -> f64 {
    if x * y <= 0.0 {
        1.0
    } else {
        (-2.0 * x * y / t).exp()
    }
}

fn assemble(values: Vec<f64>, cross_p: Vec<f64>, crossed: &[bool]) -> Result<EmbeddingSample> {
    let mut labels = Vec::with_capacity(values.len());
    let mut block = 0;
    labels.push(0);
    for &c in crossed {
        block += usize::from(c);
        labels.push(block);
    }
    Ok(EmbeddingSample {
        signs: values.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect(),
        partition: Partition::from_labels(&labels)?,
        path_meta: cross_p,
        values,
    })
}

/// One draw of the stationary OU process Z_t = e^{−t} W_{e^{2t}} at the
/// times k·log(1/a). In the recentred variables Y_k the crossing exponent
/// 2 w_k w_{k+1}/(τ_{k+1} − τ_k) is 2a Y_k Y_{k+1}/(1 − a²), which avoids the
/// overflow of τ_k = a^{−2k}.
fn ou_draw(r: &mut DcRng, a: f64, n: usize) -> Result<EmbeddingSample> {
    let s = (1.0 - a * a).sqrt();
    let mut y: f64 = StandardNormal.sample(r);
    let mut values = vec![y];
    let mut probs = Vec::with_capacity(n - 1);
    let mut crossed = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(r);
        let next = a * y + s * z;
        let p = bridge_crossing(a * y, next, 1.0 - a * a);
        crossed.push(r.random::<f64>() < p);
        probs.push(p);
        values.push(next);
        y = next;
    }
    assemble(values, probs, &crossed)
}

pub fn ou_partition_sample(a: f64, n: usize, seed: u64) -> Result<EmbeddingSample> {
    check_a(a)?;
    check_size(n)?;
    ou_draw(&mut rng::seeded(seed), a, n)
}

fn batch<F>(m: u64, seed: u64, draw: F) -> Result<Vec<EmbeddingSample>>
where
    F: Fn(&mut DcRng) -> Result<EmbeddingSample> + Sync,
{
    if m == 0 {
        return range("need at least one sample");
    }
    rng::chunked(
        m,
        seed,
        |r, len| (0..len).map(|_| draw(r)).collect::<Result<Vec<_>>>(),
        |acc, part| {
            let mut acc = acc?;
            acc.extend(part?);
            Ok(acc)
        },
        Ok(Vec::with_capacity(m as usize)),
    )
}

/// `m` independent OU samples; deterministic in (seed, m).
pub fn ou_partition_samples(a: f64, n: usize, m: u64, seed: u64) -> Result<Vec<EmbeddingSample>> {
    check_a(a)?;
    check_size(n)?;
    batch(m, seed, |r| ou_draw(r, a, n))
}

/// One transition Y → aY + c S^{1/2} B of the stable chain, with the
/// crossing probability of the Brownian segment from aY to the new value.
/// The deterministic jump Y → aY keeps the sign.
fn stable_step(r: &mut DcRng, alpha: f64, a: f64, c: f64, y: f64) -> (f64, f64) {
    let s = if alpha == 2.0 { 1.0 } else { subordinator_scale(alpha) * pos_stable_draw(r, alpha / 2.0) };
    let b: f64 = StandardNormal.sample(r);
    let next = a * y + c * s.sqrt() * b;
    (next, bridge_crossing(a * y, next, c * c * s))
}

fn stable_draw(r: &mut DcRng, alpha: f64, a: f64, n: usize) -> Result<EmbeddingSample> {
    let c = (1.0 - a.powf(alpha)).powf(1.0 / alpha);
    let mut y = sym_stable_draw(r, alpha);
    let mut values = vec![y];
    let mut probs = Vec::with_capacity(n - 1);
    let mut crossed = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let (next, p) = stable_step(r, alpha, a, c, y);
        crossed.push(r.random::<f64>() < p);
        probs.push(p);
        values.push(next);
        y = next;
    }
    assemble(values, probs, &crossed)
}

pub fn stable_chain_partition_sample(alpha: f64, a: f64, n: usize, seed: u64) -> Result<EmbeddingSample> {
    check_alpha(alpha)?;
    check_a(a)?;
    check_size(n)?;
    stable_draw(&mut rng::seeded(seed), alpha, a, n)
}

pub fn stable_chain_partition_samples(
    alpha: f64,
    a: f64,
    n: usize,
    m: u64,
    seed: u64,
) -> Result<Vec<EmbeddingSample>> {
    check_alpha(alpha)?;
    check_a(a)?;
    check_size(n)?;
    batch(m, seed, |r| stable_draw(r, alpha, a, n))
}

/// The chain on a star: coordinate 0 is the root and each of the `leaves`
/// leaves is one step from it. A leaf joins the root's block when its edge
/// has no crossing.
pub fn stable_star_partition_samples(
    alpha: f64,
    a: f64,
    leaves: usize,
    m: u64,
    seed: u64,
) -> Result<Vec<EmbeddingSample>> {
    check_alpha(alpha)?;
    check_a(a)?;
    check_size(leaves + 1)?;
    let c = (1.0 - a.powf(alpha)).powf(1.0 / alpha);
    batch(m, seed, |r| {
        let root = sym_stable_draw(r, alpha);
        let mut values = vec![root];
        let mut probs = Vec::with_capacity(leaves);
        let mut labels = vec![0usize];
        for k in 0..leaves {
            let (leaf, p) = stable_step(r, alpha, a, c, root);
            let crossed = r.random::<f64>() < p;
            labels.push(if crossed { k + 1 } else { 0 });
            probs.push(p);
            values.push(leaf);
        }
        Ok(EmbeddingSample {
            signs: values.iter().map(|v| if *v > 0.0 { 1 } else { -1 }).collect(),
            partition: Partition::from_labels(&labels)?,
            path_meta: probs,
            values,
        })
    })
}

/// Smallest expected count per cell for a partition bin to be tested.
pub const MIN_EXPECTED_PER_CELL: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCheck {
    pub partition: String,
    pub count: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorCheck {
    pub passed: bool,
    pub samples: u64,
    pub n: usize,
    /// Per-partition test that block colors are iid fair coins. The level
    /// is Bonferroni-split across the tested bins.
    pub bins: Vec<BinCheck>,
    pub warnings: Vec<String>,
    pub empirical_law: Vec<f64>,
    /// push_forward of the empirical partition law at p = 1/2.
    pub predicted_law: Vec<f64>,
    /// Largest |empirical − predicted| in standard errors.
    pub aggregate_max_z: f64,
    pub aggregate_passed: bool,
    pub significance: f64,
    pub se_mult: f64,
}

/// Checks that the signs are a color process of the sampled partitions
/// with p = 1/2.
pub fn verify_color_property(samples: &[EmbeddingSample], significance: f64, se_mult: f64) -> Result<ColorCheck> {
    let Some(first) = samples.first() else {
        return range("no samples");
    };
    if !(significance > 0.0 && significance < 1.0) || !(se_mult > 0.0) {
        return range("significance must lie in (0,1) and the SE multiple be positive");
    }
    let n = first.n();
    if samples.iter().any(|s| s.n() != n || s.partition.n() != n) {
        return Err(Error::Size("samples differ in length".into()));
    }
    let m = samples.len() as u64;
    let mut warnings = Vec::new();
    if m < 10_000 {
        warnings.push(format!("only {m} samples; at least 10000 are advised"));
    }

    let mut by_partition: BTreeMap<Partition, Vec<u64>> = BTreeMap::new();
    let mut sign_counts = vec![0u64; 1 << n];
    for s in samples {
        let pattern = s.pattern();
        sign_counts[pattern] += 1;
        let blocks = s.partition.blocks();
        let mut colours = 0usize;
        for b in &blocks {
            let c = usize::from(s.signs[b[0]] > 0);
            if b.iter().any(|&i| usize::from(s.signs[i] > 0) != c) {
                warnings.push(format!("signs not constant on a block of {}", s.partition.key()));
                // forces the bin to fail
                colours = usize::MAX;
                break;
            }
            colours = (colours << 1) | c;
        }
        let cells = by_partition.entry(s.partition).or_insert_with(|| vec![0; (1 << blocks.len()) + 1]);
        if colours == usize::MAX {
            let last = cells.len() - 1;
            cells[last] += 1;
        } else {
            cells[colours] += 1;
        }
    }

    let tested: Vec<_> = by_partition
        .iter()
        .filter(|(sigma, cells)| {
            let count: u64 = cells.iter().sum();
            let expected = count as f64 / (1u64 << sigma.num_blocks()) as f64;
            expected >= MIN_EXPECTED_PER_CELL
        })
        .collect();
    for (sigma, cells) in &by_partition {
        if !tested.iter().any(|(t, _)| *t == sigma) {
            warnings.push(format!("bin {} excluded: {} samples", sigma.key(), cells.iter().sum::<u64>()));
        }
    }
    let level = significance / tested.len().max(1) as f64;
    let mut bins = Vec::new();
    for (sigma, cells) in &tested {
        let k = 1usize << sigma.num_blocks();
        let count: u64 = cells.iter().sum();
        let broken = cells[k] > 0;
        let (statistic, dof, p_value) = if broken {
            (f64::INFINITY, k - 1, 0.0)
        } else {
            chi_square(&cells[..k], &vec![1.0 / k as f64; k])
        };
        bins.push(BinCheck {
            partition: sigma.key(),
            count,
            statistic,
            dof,
            p_value,
            passed: !broken && (k == 1 || p_value >= level),
        });
    }

    let entries: Vec<(Partition, f64)> = by_partition
        .iter()
        .map(|(sigma, cells)| (*sigma, cells.iter().sum::<u64>() as f64 / m as f64))
        .collect();
    let q = PartitionDistribution::new(n, entries, false)?;
    let predicted = push_forward(&q, 0.5)?;
    let empirical = BinaryLaw::from_counts(n, &sign_counts)?;
    let mut aggregate_max_z: f64 = 0.0;
    for (e, p) in empirical.probs().iter().zip(predicted.probs()) {
        let se = (e * (1.0 - e) / m as f64).sqrt().max(1.0 / m as f64);
        aggregate_max_z = aggregate_max_z.max((e - p).abs() / se);
    }
    let aggregate_passed = aggregate_max_z <= se_mult;
    let passed = if n == 1 { true } else { aggregate_passed && bins.iter().all(|b| b.passed) };
    Ok(ColorCheck {
        passed,
        samples: m,
        n,
        bins,
        warnings,
        empirical_law: empirical.probs().to_vec(),
        predicted_law: predicted.probs().to_vec(),
        aggregate_max_z,
        aggregate_passed,
        significance,
        se_mult,
    })
}

/// Empirical sign law of a batch.
pub fn sign_law(samples: &[EmbeddingSample]) -> Result<BinaryLaw> {
    let Some(first) = samples.first() else {
        return range("no samples");
    };
    let n = first.n();
    let mut counts = vec![0u64; 1 << n];
    for s in samples {
        counts[s.pattern()] += 1;
    }
    BinaryLaw::from_counts(n, &counts)
}
