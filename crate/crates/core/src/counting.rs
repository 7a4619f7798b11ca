//! Exact combinatorial oracles.
//!
//! `Lambda_s^n` is the number of vectors in `{1..L}^n` summing to `s`. It is
//! computed two independent ways (dynamic programming and the bounded
//! composition inclusion-exclusion sum) and feeds the exact expected
//! collision counts of both binary schemes.
//!
//! Two identities let the expected counts avoid full tables when `L` is large:
//! reflecting `alpha -> L + 1 - alpha` on one factor gives
//! `sum_s (Lambda_s^n)^2 = Lambda^{2n}_{n(L+1)}` and
//! `sum_l Lambda_l^r Lambda_l^{k-r} = Lambda^k_{(k-r)(L+1)}`.

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{composition_of, SourceSequence, WeightSet};

/// Maximum `n * n * L` cells for a dynamic-programming table.
pub const TABLE_CELL_LIMIT: u128 = 100_000_000;
/// Maximum composition-class size enumerated by the constrained brute force.
pub const CONSTRAINED_ENUM_LIMIT: u128 = 100_000_000;
/// Maximum `2^N` enumerated by the unconstrained brute force.
pub const UNCONSTRAINED_ENUM_LIMIT: u128 = 1 << 26;

/// Exact `Lambda_s^n` for `s in n..=nL`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    n: usize,
    level: u64,
    counts: Vec<BigUint>,
}

impl CountTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn min_sum(&self) -> u64 {
        self.n as u64
    }

    pub fn max_sum(&self) -> u64 {
        self.n as u64 * self.level
    }

    /// `Lambda_s^n`, zero outside `n..=nL`.
    pub fn get(&self, s: u64) -> BigUint {
        self.get_ref(s).cloned().unwrap_or_default()
    }

    fn get_ref(&self, s: u64) -> Option<&BigUint> {
        if s < self.min_sum() || s > self.max_sum() {
            None
        } else {
            Some(&self.counts[(s - self.min_sum()) as usize])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &BigUint)> + '_ {
        self.counts.iter().enumerate().map(move |(i, c)| (self.min_sum() + i as u64, c))
    }

    pub fn total(&self) -> BigUint {
        self.counts.iter().sum()
    }

    /// `s,count` lines with a header; counts in decimal.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,count\n");
        for (s, c) in self.iter() {
            out.push_str(&format!("{s},{c}\n"));
        }
        out
    }
}

fn table_cells(n: usize, level: u64) -> u128 {
    n as u128 * n as u128 * level as u128
}

pub fn lambda_table(n: usize, level: u64) -> Result<CountTable> {
    if n == 0 || level == 0 {
        return Err(invalid("lambda_table needs n >= 1 and L >= 1"));
    }
    let cells = table_cells(n, level);
    if cells > TABLE_CELL_LIMIT {
        return Err(Error::GuardExceeded {
            what: "Lambda table cells",
            size: cells,
            limit: TABLE_CELL_LIMIT,
        });
    }
    let l = level as usize;
    // row m covers sums m..=mL
    let mut row: Vec<BigUint> = vec![BigUint::one(); l];
    for m in 2..=n {
        let prev_min = m - 1;
        // prefix[i] = sum of row[..i]
        let mut prefix = Vec::with_capacity(row.len() + 1);
        prefix.push(BigUint::zero());
        for c in &row {
            let next = prefix.last().unwrap() + c;
            prefix.push(next);
        }
        let width = m * (l - 1) + 1;
        let next: Vec<BigUint> = (0..width)
            .map(|i| {
                let s = m + i;
                // sum of prev[t] for t in s-L..=s-1, clipped to prev support
                let hi = (s - 1).min(prev_min + row.len() - 1);
                let lo = s.saturating_sub(l).max(prev_min);
                &prefix[hi - prev_min + 1] - &prefix[lo - prev_min]
            })
            .collect();
        row = next;
    }
    Ok(CountTable { n, level, counts: row })
}

/// `C(a, b)` as a big integer; zero when `b > a`.
pub fn binomial(a: u64, b: u64) -> BigUint {
    if b > a {
        return BigUint::zero();
    }
    let b = b.min(a - b);
    // u128 fast path while the running product fits
    let mut acc: u128 = 1;
    let mut i = 0;
    while i < b {
        match acc.checked_mul((a - i) as u128) {
            Some(v) => {
                acc = v / (i as u128 + 1);
                i += 1;
            }
            None => break,
        }
    }
    if i == b {
        return BigUint::from(acc);
    }
    let mut big = BigUint::from(acc);
    while i < b {
        big = big * BigUint::from(a - i) / BigUint::from(i + 1);
        i += 1;
    }
    big
}

/// `Lambda_s^n`, zero outside `n..=nL`, by inclusion-exclusion over parts
/// exceeding the shifted bound: `sum_j (-1)^j C(n,j) C(s - jL - 1, n - 1)`.
fn lambda_ie(n: u64, level: u64, s: u64) -> BigUint {
    if n == 0 {
        return if s == 0 { BigUint::one() } else { BigUint::zero() };
    }
    if s < n || s > n * level {
        return BigUint::zero();
    }
    let mut acc = BigInt::zero();
    for j in 0..=n {
        let shift = j * level + 1;
        if shift > s {
            break;
        }
        let term = BigInt::from(binomial(n, j) * binomial(s - shift, n - 1));
        if j % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc.to_biguint().expect("inclusion-exclusion count is nonnegative")
}

pub fn lambda_inclusion_exclusion(n: usize, level: u64, s: u64) -> Result<BigUint> {
    if n == 0 || level == 0 {
        return Err(invalid("need n >= 1 and L >= 1"));
    }
    let n64 = n as u64;
    if s < n64 || s > n64 * level {
        return Err(invalid(format!("s = {s} outside {n64}..={}", n64 * level)));
    }
    Ok(lambda_ie(n64, level, s))
}

/// `sum_s (Lambda_s^n)^2` without a table.
pub fn sum_of_squares(n: usize, level: u64) -> BigUint {
    let n = n as u64;
    lambda_ie(2 * n, level, n * (level + 1))
}

/// `sum_l Lambda_l^r Lambda_l^{k-r}` without tables; zero when `r = 0` or `r = k`.
pub fn cross_sum(r: usize, k: usize, level: u64) -> BigUint {
    if r == 0 || r >= k {
        return BigUint::zero();
    }
    lambda_ie(k as u64, level, (k - r) as u64 * (level + 1))
}

/// CDF of the sum of `m` independent U[0,1] variables.
pub fn irwin_hall_cdf(m: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= m as f64 {
        return 1.0;
    }
    let mut fact = 1.0_f64;
    for i in 1..=m {
        fact *= i as f64;
    }
    let mut sum = 0.0;
    let mut binom = 1.0_f64;
    for j in 0..=m {
        let d = x - j as f64;
        if d <= 0.0 {
            break;
        }
        let term = binom * d.powi(m as i32);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * (m - j) as f64 / (j + 1) as f64;
    }
    (sum / fact).clamp(0.0, 1.0)
}

/// Volume of `{y in [0,1]^m : a <= sum y <= b}`.
pub fn slab_volume(m: usize, a: f64, b: f64) -> Result<f64> {
    if m == 0 {
        return Err(invalid("slab dimension must be >= 1"));
    }
    if !(a <= b) {
        return Err(invalid(format!("slab bounds reversed: {a} > {b}")));
    }
    let (a, b) = (a.clamp(0.0, m as f64), b.clamp(0.0, m as f64));
    Ok((irwin_hall_cdf(m, b) - irwin_hall_cdf(m, a)).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBoundsPoint {
    pub zeta: f64,
    pub s: u64,
    pub count: f64,
    pub lower: f64,
    pub upper: f64,
    /// `count / (L^{n-1} vol{n zeta - 1 <= sum <= n zeta})`.
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBoundsReport {
    pub n: usize,
    pub level: u64,
    pub points: Vec<LatticeBoundsPoint>,
    pub all_hold: bool,
    /// Largest `|ln ratio|` over points with a nonzero count.
    pub worst_log_ratio: f64,
}

/// Checks that every `Lambda_s^n` with `s = round(zeta n L)` lies between the
/// lattice-point bounds obtained by shrinking or expanding the slab
/// `n zeta - 1 <= sum_{i<n} y_i <= n zeta` by `n/L` on each side.
pub fn lattice_volume_bounds_check(n: usize, level: u64, zeta_grid: &[f64]) -> Result<LatticeBoundsReport> {
    let table = lambda_table(n, level)?;
    let lf = level as f64;
    let scale = lf.powi(n as i32 - 1);
    let slack = n as f64 / lf;
    let mut points = Vec::with_capacity(zeta_grid.len());
    for &zeta in zeta_grid {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(invalid(format!("zeta = {zeta} outside [0, 1]")));
        }
        let s = (zeta * n as f64 * lf).round() as u64;
        let count = table.get(s).to_f64().unwrap_or(f64::INFINITY);
        let point = if n == 1 {
            LatticeBoundsPoint {
                zeta,
                s,
                count,
                lower: 0.0,
                upper: 1.0,
                ratio: if count > 0.0 { 1.0 } else { 0.0 },
                holds: count <= 1.0,
            }
        } else {
            let m = n - 1;
            let top = s as f64 / lf;
            let bottom = top - 1.0;
            let lower = if bottom + slack <= top - slack {
                scale * slab_volume(m, bottom + slack, top - slack)?
            } else {
                0.0
            };
            let upper = scale * slab_volume(m, bottom - slack, top + slack)?;
            let nominal = scale * slab_volume(m, bottom, top)?;
            let tol = 1e-9 * upper.max(1.0);
            LatticeBoundsPoint {
                zeta,
                s,
                count,
                lower,
                upper,
                ratio: if nominal > 0.0 { count / nominal } else { f64::NAN },
                holds: lower <= count + tol && count <= upper + tol,
            }
        };
        points.push(point);
    }
    let all_hold = points.iter().all(|p| p.holds);
    let worst_log_ratio = points
        .iter()
        .filter(|p| p.count > 0.0 && p.ratio.is_finite() && p.ratio > 0.0)
        .map(|p| p.ratio.ln().abs())
        .fold(0.0, f64::max);
    Ok(LatticeBoundsReport {
        n,
        level,
        points,
        all_hold,
        worst_log_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaScheme {
    Constrained,
    Unconstrained,
}

/// How the inner collision sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMethod {
    /// Literal sums over dynamic-programming tables.
    Table,
    /// Closed single-count form via the reflection identities.
    Reflection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaParams {
    Constrained { n_plus: usize, n_minus: usize, level: u64 },
    Unconstrained { n: usize, p: f64, level: u64 },
}

/// Exact expected number of sequences sharing the encoded message.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedOmega {
    pub value: BigRational,
    pub scheme: OmegaScheme,
    pub params: OmegaParams,
    pub method: CollisionMethod,
}

impl ExpectedOmega {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64().unwrap_or(f64::INFINITY)
    }

    /// `<Omega> - 1` as a float.
    pub fn excess(&self) -> f64 {
        (&self.value - BigRational::one()).to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "scheme": self.scheme,
            "params": self.params,
            "value": self.to_f64(),
            "exact": self.value.to_string(),
            "method": self.method,
        })
    }
}

fn pick_method(max_n: usize, level: u64) -> CollisionMethod {
    if table_cells(max_n.max(1), level) <= 1_000_000 {
        CollisionMethod::Table
    } else {
        CollisionMethod::Reflection
    }
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn expected_omega_constrained(n_plus: usize, n_minus: usize, level: u64) -> Result<ExpectedOmega> {
    expected_omega_constrained_with(n_plus, n_minus, level, pick_method(n_plus.min(n_minus), level))
}

/// `1 + sum_n L^{-2n} C(N+,n) C(N-,n) sum_s (Lambda_s^n)^2`.
pub fn expected_omega_constrained_with(
    n_plus: usize,
    n_minus: usize,
    level: u64,
    method: CollisionMethod,
) -> Result<ExpectedOmega> {
    if level == 0 {
        return Err(invalid("L must be >= 1"));
    }
    let top = n_plus.min(n_minus);
    let table = match method {
        CollisionMethod::Table if top > 0 => Some(lambda_table(top, level)?),
        _ => None,
    };
    let mut value = BigRational::one();
    for n in 1..=top {
        let squares = match method {
            CollisionMethod::Reflection => sum_of_squares(n, level),
            CollisionMethod::Table => {
                let t = if n == top { table.clone().unwrap() } else { lambda_table(n, level)? };
                t.iter().map(|(_, c)| c * c).sum()
            }
        };
        let num = binomial(n_plus as u64, n as u64) * binomial(n_minus as u64, n as u64) * squares;
        let den = BigUint::from(level).pow(2 * n as u32);
        value += ratio(num, den);
    }
    Ok(ExpectedOmega {
        value,
        scheme: OmegaScheme::Constrained,
        params: OmegaParams::Constrained {
            n_plus,
            n_minus,
            level,
        },
        method,
    })
}

pub fn expected_omega_unconstrained(n: usize, p: f64, level: u64) -> Result<ExpectedOmega> {
    expected_omega_unconstrained_with(n, p, level, pick_method(n, level))
}

/// `1 + sum_k C(N,k) L^{-k} sum_r C(k,r) p^r q^{k-r} sum_l Lambda_l^r Lambda_l^{k-r}`,
/// averaged over a memoryless source with `P(+1) = p`. `p` is taken as the
/// exact rational value of its binary representation.
pub fn expected_omega_unconstrained_with(
    n: usize,
    p: f64,
    level: u64,
    method: CollisionMethod,
) -> Result<ExpectedOmega> {
    if n == 0 || level == 0 {
        return Err(invalid("need N >= 1 and L >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [0, 1]")));
    }
    let pr = BigRational::from_float(p).ok_or_else(|| invalid("p is not finite"))?;
    let qr = BigRational::one() - &pr;
    let tables: Vec<CountTable> = match method {
        CollisionMethod::Table => (1..n).map(|r| lambda_table(r, level)).collect::<Result<_>>()?,
        CollisionMethod::Reflection => Vec::new(),
    };
    let collisions = |r: usize, k: usize| -> BigUint {
        if r == 0 || r >= k {
            return BigUint::zero();
        }
        match method {
            CollisionMethod::Reflection => cross_sum(r, k, level),
            CollisionMethod::Table => {
                let (a, b) = (&tables[r - 1], &tables[k - r - 1]);
                let lo = a.min_sum().max(b.min_sum());
                let hi = a.max_sum().min(b.max_sum());
                (lo..=hi)
                    .filter_map(|l| Some(a.get_ref(l)? * b.get_ref(l)?))
                    .sum()
            }
        }
    };
    let mut value = BigRational::one();
    for k in 1..=n {
        let mut inner = BigRational::zero();
        for r in 1..k {
            let c = collisions(r, k);
            if c.is_zero() {
                continue;
            }
            let weight = num_traits::pow(pr.clone(), r) * num_traits::pow(qr.clone(), k - r);
            inner += weight * ratio(binomial(k as u64, r as u64) * c, BigUint::one());
        }
        let scale = ratio(binomial(n as u64, k as u64), BigUint::from(level).pow(k as u32));
        value += inner * scale;
    }
    Ok(ExpectedOmega {
        value,
        scheme: OmegaScheme::Unconstrained,
        params: OmegaParams::Unconstrained { n, p, level },
        method,
    })
}

/// Iterates all `width`-bit masks with exactly `ones` bits set, increasing.
fn for_each_fixed_weight(width: usize, ones: usize, mut f: impl FnMut(u64)) {
    if ones > width {
        return;
    }
    if ones == 0 {
        f(0);
        return;
    }
    let limit: u64 = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    let mut v: u64 = (1u64 << ones) - 1;
    loop {
        f(v);
        let t = v | (v - 1);
        let next = (t.wrapping_add(1)) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
        if t == u64::MAX || next > limit || next <= v {
            break;
        }
        v = next;
    }
}

fn check_pair(weights: &WeightSet, seq: &SourceSequence) -> Result<()> {
    if !seq.is_binary() {
        return Err(invalid("brute-force counters need a binary sequence"));
    }
    if seq.len() != weights.n() {
        return Err(Error::LengthMismatch {
            expected: weights.n(),
            actual: seq.len(),
        });
    }
    if seq.len() > 63 {
        return Err(invalid("brute-force counters support N <= 63"));
    }
    Ok(())
}

/// Number of equal-composition sequences with the same subset sum as `seq` (row 0).
pub fn brute_force_omega_constrained(weights: &WeightSet, seq: &SourceSequence) -> Result<u64> {
    check_pair(weights, seq)?;
    let n = seq.len();
    let n_plus = composition_of(seq).n_plus();
    let size = binomial(n as u64, n_plus as u64).to_u128().unwrap_or(u128::MAX);
    if size > CONSTRAINED_ENUM_LIMIT {
        return Err(Error::GuardExceeded {
            what: "composition class",
            size,
            limit: CONSTRAINED_ENUM_LIMIT,
        });
    }
    let a = weights.row(0);
    let target: u64 = seq.symbols().iter().zip(a).filter(|(&s, _)| s == 1).map(|(_, &w)| w).sum();
    let mut count = 0u64;
    for_each_fixed_weight(n, n_plus, |mask| {
        let mut sum = 0u64;
        let mut m = mask;
        while m != 0 {
            sum += a[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        count += u64::from(sum == target);
    });
    Ok(count)
}

/// Number of sign vectors with the same subset sum as `seq` (row 0).
pub fn brute_force_omega_unconstrained(weights: &WeightSet, seq: &SourceSequence) -> Result<u64> {
    check_pair(weights, seq)?;
    let n = seq.len();
    let size = 1u128 << n;
    if size > UNCONSTRAINED_ENUM_LIMIT {
        return Err(Error::GuardExceeded {
            what: "sign vectors",
            size,
            limit: UNCONSTRAINED_ENUM_LIMIT,
        });
    }
    let a = weights.row(0);
    let target: u64 = seq.symbols().iter().zip(a).filter(|(&s, _)| s == 1).map(|(_, &w)| w).sum();
    // Gray-code walk over plus-sets
    let mut sum = 0u64;
    let mut count = u64::from(target == 0);
    for i in 1u64..(1u64 << n) {
        let bit = i.trailing_zeros() as usize;
        let gray = i ^ (i >> 1);
        if gray >> bit & 1 == 1 {
            sum += a[bit];
        } else {
            sum -= a[bit];
        }
        count += u64::from(sum == target);
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub r: f64,
    pub gap_at_zero: f64,
    /// Smallest `lhs - rhs` over grid points with `omega != 0`.
    pub min_gap: f64,
    pub min_gap_omega: f64,
    pub violations: Vec<f64>,
    pub points: usize,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `(1-e^{-r})^2/r^2 - (1 + e^{-2r} - 2e^{-r} cos w)/(r^2 + w^2)`, evaluated
/// with `1 - e^{-r}` and `1 - cos w` in cancellation-free form.
pub fn dominance_gap(r: f64, omega: f64) -> f64 {
    let a = -(-r).exp_m1();
    let lhs = a * a / (r * r);
    let half = (omega / 2.0).sin();
    let numer = a * a + 4.0 * (-r).exp() * half * half;
    lhs - numer / (r * r + omega * omega)
}

/// `points` equally spaced values covering `[-pi, pi]`.
pub fn omega_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| -PI + 2.0 * PI * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Verifies that the integrand modulus on the vertical line `Re s = r` peaks
/// only at `omega = 0`. `omega = 0` is always evaluated in addition to the grid.
pub fn saddle_dominance_check(r: f64, omega_grid: &[f64]) -> Result<DominanceReport> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("r = {r} must be positive")));
    }
    if let Some(w) = omega_grid.iter().find(|w| !(w.abs() <= PI)) {
        return Err(invalid(format!("omega = {w} outside [-pi, pi]")));
    }
    let gap_at_zero = dominance_gap(r, 0.0);
    let mut violations = Vec::new();
    if gap_at_zero.abs() >= 1e-12 {
        violations.push(0.0);
    }
    let mut min_gap = f64::INFINITY;
    let mut min_gap_omega = f64::NAN;
    for &w in omega_grid.iter().filter(|w| **w != 0.0) {
        let g = dominance_gap(r, w);
        if g < min_gap {
            min_gap = g;
            min_gap_omega = w;
        }
        if !(g > 0.0) {
            violations.push(w);
        }
    }
    Ok(DominanceReport {
        r,
        gap_at_zero,
        min_gap,
        min_gap_omega,
        violations,
        points: omega_grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{sample_weights, SourceSequence};
    use proptest::prelude::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    /// Direct enumeration of `{1..L}^n`.
    fn enumerate_lambda(n: usize, level: u64) -> Vec<u64> {
        let mut counts = vec![0u64; n * level as usize + 1];
        let total = (level as usize).pow(n as u32);
        for idx in 0..total {
            let mut x = idx;
            let mut s = 0;
            for _ in 0..n {
                s += x % level as usize + 1;
                x /= level as usize;
            }
            counts[s] += 1;
        }
        counts
    }

    #[test]
    fn table_base_case_and_small_cases() {
        let t = lambda_table(1, 5).unwrap();
        assert!((1..=5).all(|s| t.get(s) == big(1)));
        assert_eq!(t.get(0), big(0));
        let t = lambda_table(2, 2).unwrap();
        assert_eq!(t.iter().map(|(s, c)| (s, c.clone())).collect::<Vec<_>>(), vec![(2, big(1)), (3, big(2)), (4, big(1))]);
        assert_eq!(lambda_table(6, 10).unwrap().total(), big(1_000_000));
    }

    #[test]
    fn table_matches_enumeration() {
        for (n, l) in [(3, 4), (4, 3), (5, 2), (2, 7), (1, 9)] {
            let direct = enumerate_lambda(n, l);
            let t = lambda_table(n, l).unwrap();
            for (s, c) in t.iter() {
                assert_eq!(*c, big(direct[s as usize]), "n={n} L={l} s={s}");
            }
        }
    }

    #[test]
    fn table_guard() {
        assert!(matches!(lambda_table(100, 100_000), Err(Error::GuardExceeded { .. })));
        assert!(lambda_table(0, 3).is_err());
    }

    #[test]
    fn inclusion_exclusion_examples() {
        assert_eq!(lambda_inclusion_exclusion(2, 2, 3).unwrap(), big(2));
        assert_eq!(lambda_inclusion_exclusion(3, 1, 3).unwrap(), big(1));
        let t = lambda_table(5, 7).unwrap();
        for (s, c) in t.iter() {
            assert_eq!(lambda_inclusion_exclusion(5, 7, s).unwrap(), *c);
        }
        assert!(lambda_inclusion_exclusion(3, 4, 2).is_err());
        assert!(lambda_inclusion_exclusion(3, 4, 13).is_err());
    }

    #[test]
    fn reflection_identities_match_tables() {
        for (n, l) in [(1, 5), (3, 6), (4, 9)] {
            let t = lambda_table(n, l).unwrap();
            let sq: BigUint = t.iter().map(|(_, c)| c * c).sum();
            assert_eq!(sum_of_squares(n, l), sq);
        }
        let l = 5;
        for k in 2..7 {
            for r in 1..k {
                let a = lambda_table(r, l).unwrap();
                let b = lambda_table(k - r, l).unwrap();
                let direct: BigUint = (0..=(k as u64 * l)).map(|s| a.get(s) * b.get(s)).sum();
                assert_eq!(cross_sum(r, k, l), direct, "r={r} k={k}");
            }
        }
        assert_eq!(cross_sum(0, 4, 3), big(0));
        assert_eq!(cross_sum(4, 4, 3), big(0));
    }

    #[test]
    fn binomial_fast_and_big_paths_agree() {
        assert_eq!(binomial(5, 2), big(10));
        assert_eq!(binomial(3, 5), big(0));
        assert_eq!(binomial(0, 0), big(1));
        // 200 choose 100 overflows u128; check Pascal's rule across the boundary
        assert_eq!(binomial(200, 100), binomial(199, 99) + binomial(199, 100));
    }

    #[test]
    fn slab_volume_examples() {
        assert!((slab_volume(1, 0.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert!((slab_volume(2, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        for m in 1..12 {
            assert!((slab_volume(m, 0.0, m as f64).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(slab_volume(3, 2.0, 1.0).is_err());
        assert_eq!(slab_volume(3, -5.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn irwin_hall_reflection_and_monotonicity() {
        for m in 1..=10 {
            let mut last = 0.0;
            for i in 0..=100 {
                let x = m as f64 * i as f64 / 100.0;
                let f = irwin_hall_cdf(m, x);
                assert!(f + 1e-10 >= last);
                last = f;
                assert!((f - (1.0 - irwin_hall_cdf(m, m as f64 - x))).abs() < 1e-9, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn lattice_bounds_examples() {
        let grid: Vec<f64> = (2..=8).map(|i| i as f64 / 10.0).collect();
        let r = lattice_volume_bounds_check(4, 50, &grid).unwrap();
        assert!(r.all_hold, "{r:?}");
        let r = lattice_volume_bounds_check(2, 1000, &[0.5]).unwrap();
        assert!(r.all_hold);
        assert!((0.99..=1.01).contains(&r.points[0].ratio));
        let r = lattice_volume_bounds_check(1, 10, &[0.0, 0.3, 1.0]).unwrap();
        assert!(r.all_hold);
    }

    #[test]
    fn constrained_closed_cases() {
        let v = expected_omega_constrained(1, 1, 1).unwrap();
        assert_eq!(v.value, BigRational::from_integer(2.into()));
        let v = expected_omega_constrained(1, 1, 2).unwrap();
        assert_eq!(v.value, BigRational::new(3.into(), 2.into()));
        assert_eq!(expected_omega_constrained(5, 0, 9).unwrap().value, BigRational::one());
    }

    #[test]
    fn constrained_methods_agree_and_decrease_in_level() {
        let mut last: Option<BigRational> = None;
        for l in 1..=20 {
            let a = expected_omega_constrained_with(4, 5, l, CollisionMethod::Table).unwrap();
            let b = expected_omega_constrained_with(4, 5, l, CollisionMethod::Reflection).unwrap();
            assert_eq!(a.value, b.value);
            assert!(a.value >= BigRational::one());
            if let Some(prev) = last {
                assert!(a.value <= prev, "L={l}");
            }
            last = Some(a.value);
        }
    }

    #[test]
    fn unconstrained_closed_cases() {
        let v = expected_omega_unconstrained(2, 0.5, 1).unwrap();
        assert_eq!(v.value, BigRational::new(3.into(), 2.into()));
        for l in [1, 3, 10] {
            for p in [0.0, 0.3, 1.0] {
                assert_eq!(expected_omega_unconstrained(1, p, l).unwrap().value, BigRational::one());
            }
        }
        // a constant source never collides
        assert_eq!(expected_omega_unconstrained(6, 1.0, 4).unwrap().value, BigRational::one());
    }

    #[test]
    fn unconstrained_methods_agree() {
        for (n, p, l) in [(6, 0.5, 8), (5, 0.3, 3), (7, 0.8, 5)] {
            let a = expected_omega_unconstrained_with(n, p, l, CollisionMethod::Table).unwrap();
            let b = expected_omega_unconstrained_with(n, p, l, CollisionMethod::Reflection).unwrap();
            assert_eq!(a.value, b.value);
        }
    }

    /// Exact average of the brute-force counter over every weight vector.
    fn exhaustive_average(n: usize, level: u64, seq: &SourceSequence, constrained: bool) -> BigRational {
        let total = (level as usize).pow(n as u32);
        let mut sum = 0u64;
        for idx in 0..total {
            let mut x = idx;
            let w: Vec<u64> = (0..n)
                .map(|_| {
                    let a = x as u64 % level + 1;
                    x /= level as usize;
                    a
                })
                .collect();
            let ws = WeightSet::single(w, level).unwrap();
            sum += if constrained {
                brute_force_omega_constrained(&ws, seq).unwrap()
            } else {
                brute_force_omega_unconstrained(&ws, seq).unwrap()
            };
        }
        BigRational::new(sum.into(), (total as u64).into())
    }

    #[test]
    fn constrained_formula_equals_exhaustive_average() {
        for (s, l) in [("+-", 2), ("++--", 3), ("+--+-", 3), ("+++-", 4)] {
            let seq: SourceSequence = s.parse().unwrap();
            let c = composition_of(&seq);
            let exact = expected_omega_constrained(c.n_plus(), c.n_minus(), l).unwrap();
            assert_eq!(exact.value, exhaustive_average(seq.len(), l, &seq, true), "{s} L={l}");
        }
    }

    #[test]
    fn unconstrained_formula_equals_exhaustive_average() {
        // average over both weights and the source sequence
        let (n, l, p) = (4usize, 3u64, 0.25f64);
        let mut acc = BigRational::zero();
        for bits in 0u32..(1 << n) {
            let sym: Vec<i8> = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let plus = sym.iter().filter(|&&x| x == 1).count();
            let prob = BigRational::from_float(p.powi(plus as i32) * (1.0 - p).powi((n - plus) as i32)).unwrap();
            let seq = SourceSequence::binary(sym).unwrap();
            acc += prob * exhaustive_average(n, l, &seq, false);
        }
        let exact = expected_omega_unconstrained(n, p, l).unwrap();
        assert_eq!(exact.value, acc);
    }

    #[test]
    fn brute_force_examples() {
        let w11 = WeightSet::single(vec![1, 1], 1).unwrap();
        let w12 = WeightSet::single(vec![1, 2], 2).unwrap();
        let s: SourceSequence = "+-".parse().unwrap();
        assert_eq!(brute_force_omega_constrained(&w11, &s).unwrap(), 2);
        assert_eq!(brute_force_omega_constrained(&w12, &s).unwrap(), 1);
        assert_eq!(brute_force_omega_unconstrained(&w11, &s).unwrap(), 2);
        let w = sample_weights(7, 30, 5).unwrap();
        assert_eq!(brute_force_omega_constrained(&w, &"+++++++".parse().unwrap()).unwrap(), 1);
    }

    #[test]
    fn powers_of_two_are_bijective() {
        let n = 10;
        let w = WeightSet::single((0..n).map(|i| 1u64 << i).collect(), 1 << (n - 1)).unwrap();
        for bits in [0u32, 1, 0b1011, 0x3ff, 0x155] {
            let sym = (0..n).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            let s = SourceSequence::binary(sym).unwrap();
            assert_eq!(brute_force_omega_unconstrained(&w, &s).unwrap(), 1);
        }
    }

    #[test]
    fn brute_force_guards() {
        let w = sample_weights(30, 10, 1).unwrap();
        let s = SourceSequence::binary(vec![1; 30]).unwrap();
        assert!(matches!(brute_force_omega_unconstrained(&w, &s), Err(Error::GuardExceeded { .. })));
        let w = sample_weights(3, 10, 1).unwrap();
        assert!(brute_force_omega_constrained(&w, &"+-".parse().unwrap()).is_err());
    }

    #[test]
    fn dominance_examples() {
        assert_eq!(dominance_gap(1.0, 0.0), 0.0);
        assert!(dominance_gap(1.0, PI) > 0.0);
        for r in [0.01, 0.1, 1.0, 10.0] {
            let rep = saddle_dominance_check(r, &omega_grid(10_000)).unwrap();
            assert!(rep.holds(), "r={r}: {:?}", rep.violations.len());
            assert!(rep.gap_at_zero.abs() < 1e-12 && rep.min_gap > 0.0);
        }
        assert!(saddle_dominance_check(0.0, &[0.1]).is_err());
        assert!(saddle_dominance_check(1.0, &[4.0]).is_err());
    }

    proptest! {
        #[test]
        fn table_symmetry_and_total(n in 1usize..8, l in 1u64..20) {
            let t = lambda_table(n, l).unwrap();
            prop_assert_eq!(t.total(), BigUint::from(l).pow(n as u32));
            let mirror = n as u64 * (l + 1);
            for (s, c) in t.iter() {
                prop_assert_eq!(c, &t.get(mirror - s));
            }
            prop_assert_eq!(t.get(n as u64), big(1));
            prop_assert_eq!(t.get(n as u64 * l), big(1));
        }

        #[test]
        fn table_equals_inclusion_exclusion(n in 1usize..9, l in 1u64..30, frac in 0.0f64..1.0) {
            let t = lambda_table(n, l).unwrap();
            let s = t.min_sum() + ((t.max_sum() - t.min_sum()) as f64 * frac) as u64;
            prop_assert_eq!(lambda_inclusion_exclusion(n, l, s).unwrap(), t.get(s));
        }
    }
}
