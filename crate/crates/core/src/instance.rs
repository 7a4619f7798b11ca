//! Source sequences, compositions and random weight instances.
//!
//! Binary sequences use the spin alphabet `{-1, +1}`; K-ary sequences use
//! `{1, ..., K}`. All randomness is derived from 64-bit seeds through
//! [`derive_seed`], so a weight set is a pure function of `(seed, n, L)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest admissible `N * L` for any subset-sum row.
pub const SUM_RANGE_LIMIT: u128 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// Spins `-1` / `+1`.
    Binary,
    /// Symbols `1..=K`.
    KAry(u8),
}

impl Alphabet {
    pub fn contains(self, symbol: i8) -> bool {
        match self {
            Alphabet::Binary => symbol == 1 || symbol == -1,
            Alphabet::KAry(k) => symbol >= 1 && (symbol as i16) <= k as i16,
        }
    }

    /// Symbols in canonical order: `+1, -1` for binary, `1..=K` otherwise.
    pub fn symbols(self) -> Vec<i8> {
        match self {
            Alphabet::Binary => vec![1, -1],
            Alphabet::KAry(k) => (1..=k as i8).collect(),
        }
    }

    /// Position of `symbol` in [`Alphabet::symbols`].
    pub fn index_of(self, symbol: i8) -> Option<usize> {
        if !self.contains(symbol) {
            return None;
        }
        Some(match self {
            Alphabet::Binary => usize::from(symbol == -1),
            Alphabet::KAry(_) => (symbol - 1) as usize,
        })
    }

    pub fn size(self) -> usize {
        match self {
            Alphabet::Binary => 2,
            Alphabet::KAry(k) => k as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSequence {
    alphabet: Alphabet,
    symbols: Vec<i8>,
}

impl SourceSequence {
    pub fn new(alphabet: Alphabet, symbols: Vec<i8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(invalid("source sequence must be nonempty"));
        }
        if let Alphabet::KAry(k) = alphabet {
            if !(2..=127).contains(&k) {
                return Err(invalid(format!("alphabet size K={k} outside 2..=127")));
            }
        }
        if let Some(bad) = symbols.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(invalid(format!("symbol {bad} not in alphabet {alphabet:?}")));
        }
        Ok(Self { alphabet, symbols })
    }

    pub fn binary(symbols: Vec<i8>) -> Result<Self> {
        Self::new(Alphabet::Binary, symbols)
    }

    pub fn kary(k: u8, symbols: Vec<i8>) -> Result<Self> {
        Self::new(Alphabet::KAry(k), symbols)
    }

    /// Parses a string of `+` / `-` characters.
    pub fn parse_binary(s: &str) -> Result<Self> {
        let symbols = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("unexpected character {other:?} in binary sequence"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::binary(symbols)
    }

    /// Parses a string of digits `1..=K`.
    pub fn parse_kary(s: &str, k: u8) -> Result<Self> {
        if k > 9 {
            return Err(invalid("digit strings support K <= 9"));
        }
        let symbols = s
            .trim()
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .map(|d| d as i8)
                    .ok_or_else(|| Error::Parse(format!("unexpected character {c:?} in K-ary sequence")))
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::kary(k, symbols)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.alphabet == Alphabet::Binary
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(invalid("operation requires a binary (+1/-1) sequence"))
        }
    }
}

impl fmt::Display for SourceSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.symbols {
            match self.alphabet {
                Alphabet::Binary => f.write_str(if s > 0 { "+" } else { "-" })?,
                Alphabet::KAry(_) => write!(f, "{s}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for SourceSequence {
    type Err = Error;

    /// Binary only; use [`SourceSequence::parse_kary`] for digit strings.
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_binary(s)
    }
}

/// Symbol occurrence counts of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    alphabet: Alphabet,
    counts: BTreeMap<i8, usize>,
    total: usize,
}

impl Composition {
    pub fn count(&self, symbol: i8) -> usize {
        self.counts.get(&symbol).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<i8, usize> {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn n_plus(&self) -> usize {
        self.count(1)
    }

    pub fn n_minus(&self) -> usize {
        self.count(-1)
    }

    /// `M = N_+ - N_-`, meaningful for binary sequences.
    pub fn magnetization(&self) -> i64 {
        self.n_plus() as i64 - self.n_minus() as i64
    }
}

pub fn composition_of(seq: &SourceSequence) -> Composition {
    let mut counts = BTreeMap::new();
    for &s in seq.symbols() {
        *counts.entry(s).or_insert(0) += 1;
    }
    Composition {
        alphabet: seq.alphabet(),
        counts,
        total: seq.len(),
    }
}

/// Random integer weights `a_i^k in {1..L_k}`, one row per subset sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightSet {
    n: usize,
    levels: Vec<u64>,
    rows: Vec<Vec<u64>>,
    seed: Option<u64>,
}

impl WeightSet {
    pub fn new(rows: Vec<Vec<u64>>, levels: Vec<u64>, seed: Option<u64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("weight set needs at least one row"));
        }
        if rows.len() != levels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                actual: levels.len(),
            });
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(invalid("weight rows must be nonempty"));
        }
        for (row, &level) in rows.iter().zip(&levels) {
            if level == 0 {
                return Err(invalid("level L must be >= 1"));
            }
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|&&a| a == 0 || a > level) {
                return Err(invalid(format!("weight {bad} outside 1..={level}")));
            }
            let range = n as u128 * level as u128;
            if range >= SUM_RANGE_LIMIT {
                return Err(Error::OverflowRisk(range));
            }
        }
        Ok(Self { n, levels, rows, seed })
    }

    /// A single-row weight set with hand-chosen weights.
    pub fn single(weights: Vec<u64>, level: u64) -> Result<Self> {
        Self::new(vec![weights], vec![level], None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rows (subset sums).
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[u64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn level(&self, k: usize) -> u64 {
        self.levels[k]
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row_total(&self, k: usize) -> i64 {
        self.rows[k].iter().map(|&a| a as i64).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&WeightSetWire::from(self)).expect("weight set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: WeightSetWire = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        wire.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct WeightSetWire {
    n: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    level: Option<u64>,
    #[serde(rename = "L_list", default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    weights: WeightsWire,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightsWire {
    Single(Vec<u64>),
    Multi(Vec<Vec<u64>>),
}

impl From<&WeightSet> for WeightSetWire {
    fn from(w: &WeightSet) -> Self {
        if w.m() == 1 {
            WeightSetWire {
                n: w.n,
                level: Some(w.levels[0]),
                levels: None,
                seed: w.seed,
                weights: WeightsWire::Single(w.rows[0].clone()),
            }
        } else {
            WeightSetWire {
                n: w.n,
                level: None,
                levels: Some(w.levels.clone()),
                seed: w.seed,
                weights: WeightsWire::Multi(w.rows.clone()),
            }
        }
    }
}

impl TryFrom<WeightSetWire> for WeightSet {
    type Error = Error;

    fn try_from(wire: WeightSetWire) -> Result<Self> {
        let (rows, levels) = match (wire.weights, wire.level, wire.levels) {
            (WeightsWire::Single(row), Some(l), None) => (vec![row], vec![l]),
            (WeightsWire::Single(row), None, Some(ls)) if ls.len() == 1 => (vec![row], ls),
            (WeightsWire::Multi(rows), None, Some(ls)) => (rows, ls),
            (WeightsWire::Multi(rows), Some(l), None) => {
                let ls = vec![l; rows.len()];
                (rows, ls)
            }
            _ => return Err(Error::Parse("weight JSON needs exactly one of L / L_list".into())),
        };
        let ws = WeightSet::new(rows, levels, wire.seed)?;
        if ws.n != wire.n {
            return Err(Error::LengthMismatch {
                expected: wire.n,
                actual: ws.n,
            });
        }
        Ok(ws)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from a master seed and a path of
/// indices (e.g. `[grid_index, trial_index, purpose]`).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p ^ 0xD1B5_4A32_D192_ED03)))
}

/// A generator for the stream at `path` below `master`.
pub fn stream_rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// `n` weights i.i.d. uniform on `{1..level}`.
pub fn sample_weights(n: usize, level: u64, seed: u64) -> Result<WeightSet> {
    sample_weight_rows(n, &[level], seed)
}

/// One row per entry of `levels`, row `k` uniform on `{1..levels[k]}`.
/// Rows are drawn in order from a single stream, so a one-level call
/// reproduces [`sample_weights`].
pub fn sample_weight_rows(n: usize, levels: &[u64], seed: u64) -> Result<WeightSet> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    if levels.is_empty() || levels.contains(&0) {
        return Err(invalid("every level L must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = levels
        .iter()
        .map(|&l| (0..n).map(|_| rng.gen_range(1..=l)).collect())
        .collect();
    WeightSet::new(rows, levels.to_vec(), Some(seed))
}

/// `E = sum_i a_i^row * sigma_i`.
pub fn subset_sum_value(seq: &SourceSequence, weights: &WeightSet, row: usize) -> Result<i64> {
    seq.require_binary()?;
    if row >= weights.m() {
        return Err(invalid(format!("row {row} out of range (m = {})", weights.m())));
    }
    if seq.len() != weights.n() {
        return Err(Error::LengthMismatch {
            expected: weights.n(),
            actual: seq.len(),
        });
    }
    Ok(seq
        .symbols()
        .iter()
        .zip(weights.row(row))
        .map(|(&s, &a)| s as i64 * a as i64)
        .sum())
}

/// Integer counts summing to `n` closest to `n * probs`: each entry gets
/// `floor(n p)` and the leftover units go to the largest fractional parts,
/// earlier entries first on ties.
pub fn largest_remainder(probs: &[f64], n: usize) -> Vec<usize> {
    let scaled: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &idx in order.iter().take(n.saturating_sub(assigned)) {
        counts[idx] += 1;
    }
    counts
}
