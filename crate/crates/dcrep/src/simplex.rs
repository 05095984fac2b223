//! Dense phase-I simplex with Bland's rule, generic over the scalar so the
//! same code runs in floating point and in exact rationals.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_float(v: f64) -> Option<Self>;
    fn as_float(&self) -> f64;
    /// Pivot and optimality tolerance; zero for exact arithmetic.
    fn eps() -> Self;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_float(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn as_float(&self) -> f64 {
        *self
    }
    fn eps() -> Self {
        1e-12
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    /// Exact binary value of the float.
    fn from_float(v: f64) -> Option<Self> {
        <BigRational as FromPrimitive>::from_f64(v)
    }
    fn as_float(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn eps() -> Self {
        <BigRational as Zero>::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Outcome of minimizing the total artificial mass for A x = b, x ≥ 0.
#[derive(Debug, Clone)]
pub struct PhaseOne<T> {
    /// Structural part of the optimal basic solution.
    pub x: Vec<T>,
    /// Optimal total artificial mass; zero iff the system is feasible.
    pub infeasibility: T,
    /// Dual vector with Aᵀy ≤ 0 and bᵀy = `infeasibility`.
    pub y: Vec<T>,
    pub pivots: usize,
}

/// Solves the phase-I problem for the dense system `a` (rows) x = `b`.
pub fn phase_one<T: Scalar>(a: &[Vec<T>], b: &[T]) -> PhaseOne<T> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let total = n + m;
    let eps = T::eps();
    let zero = T::zero();
    // tableau rows: [A | I | b], rows with negative b negated
    let mut sign = vec![T::one(); m];
    let mut t: Vec<Vec<T>> = Vec::with_capacity(m);
    for i in 0..m {
        let neg = b[i] < zero;
        if neg {
            sign[i] = -T::one();
        }
        let mut row = Vec::with_capacity(total + 1);
        for v in &a[i] {
            row.push(if neg { -v.clone() } else { v.clone() });
        }
        for k in 0..m {
            row.push(if k == i { T::one() } else { T::zero() });
        }
        row.push(if neg { -b[i].clone() } else { b[i].clone() });
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..total).collect();
    // reduced costs and objective (last entry)
    let mut d = vec![T::zero(); total + 1];
    for row in &t {
        for j in 0..n {
            d[j] = d[j].clone() - row[j].clone();
        }
        d[total] = d[total].clone() - row[total].clone();
    }
    let mut pivots = 0;
    loop {
        let Some(enter) = (0..total).find(|&j| d[j] < -eps.clone()) else {
            break;
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            if t[i][enter] > eps {
                let ratio = t[i][total].clone() / t[i][enter].clone();
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        let diff = ratio.clone() - lr.clone();
                        diff < -eps.clone()
                            || (!(diff > eps) && basis[i] < basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // phase I is bounded below by zero, so a pivot row always exists
        let Some((r, _)) = leave else { break };
        let piv = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = v.clone() / piv.clone();
        }
        let prow = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (v, p) in row.iter_mut().zip(&prow) {
                if !p.is_zero() {
                    *v = v.clone() - f.clone() * p.clone();
                }
            }
        }
        let f = d[enter].clone();
        for (v, p) in d.iter_mut().zip(&prow) {
            if !p.is_zero() {
                *v = v.clone() - f.clone() * p.clone();
            }
        }
        basis[r] = enter;
        pivots += 1;
    }
    let mut x = vec![T::zero(); n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][total].clone();
        }
    }
    // y_i = 1 − (reduced cost of artificial i), then undo the row flips
    let y = (0..m)
        .map(|i| (T::one() - d[n + i].clone()) * sign[i].clone())
        .collect();
    PhaseOne { x, infeasibility: -d[total].clone(), y, pivots }
}

/// Converts a float matrix to exact rationals.
pub fn to_rational(a: &[Vec<f64>]) -> Option<Vec<Vec<BigRational>>> {
    a.iter()
        .map(|r| r.iter().map(|v| <BigRational as Scalar>::from_float(*v)).collect())
        .collect()
}
