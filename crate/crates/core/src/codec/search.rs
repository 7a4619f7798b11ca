//! Plus-set search shared by every decoder.
//!
//! A problem is a list of positions, each tagged with a class, a set of
//! admissible per-class plus-counts (or none, meaning any count), and one or
//! more weight rows with target plus-sums. A solution is a set `S` of
//! positions with `sum_{i in S} a^r_i = T_r` for every row `r` and an
//! admissible class count vector.
//!
//! Witnesses are reported in lexicographic order of the sign string with
//! `+` before `-`. Internally a candidate is ordered by its minus-key: bit
//! `n - 1 - j` is set iff position `j` is a minus.

use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::counting::binomial;
use crate::error::{Error, Result};
use num_traits::ToPrimitive;

use super::Strategy;

/// Largest fixed-cardinality class enumerated exhaustively.
pub const EXHAUSTIVE_CLASS_LIMIT: u128 = 100_000_000;
/// Largest `2^N` enumerated exhaustively.
pub const EXHAUSTIVE_CUBE_LIMIT: u128 = 1 << 26;
/// Largest half table built by meet-in-the-middle.
pub const MITM_HALF_LIMIT: u128 = 1 << 26;
/// Largest number of admissible class-count vectors.
pub const ADMISSIBLE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub classes: Vec<usize>,
    pub n_classes: usize,
    pub admissible: Option<Vec<Vec<usize>>>,
    pub rows: Vec<Vec<u64>>,
    pub targets: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Solutions {
    pub count: u64,
    /// Plus-masks (bit `j` set iff position `j` is `+`), lexicographic order.
    pub witnesses: Vec<u64>,
}

impl Problem {
    /// One class with a fixed plus-count.
    pub fn fixed_cardinality(rows: Vec<Vec<u64>>, targets: Vec<u64>, plus: usize) -> Self {
        let n = rows.first().map_or(0, Vec::len);
        Self {
            classes: vec![0; n],
            n_classes: 1,
            admissible: Some(vec![vec![plus]]),
            rows,
            targets,
        }
    }

    /// Any plus-count.
    pub fn free(rows: Vec<Vec<u64>>, targets: Vec<u64>) -> Self {
        let n = rows.first().map_or(0, Vec::len);
        Self {
            classes: vec![0; n],
            n_classes: 1,
            admissible: None,
            rows,
            targets,
        }
    }

    fn n(&self) -> usize {
        self.classes.len()
    }

    fn single_cardinality(&self) -> Option<usize> {
        match &self.admissible {
            Some(v) if self.n_classes == 1 && v.len() == 1 => Some(v[0][0]),
            _ => None,
        }
    }
}

fn minus_key(plus_mask: u64, n: usize) -> u64 {
    if n == 0 {
        return 0;
    }
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    (!plus_mask & full).reverse_bits() >> (64 - n)
}

fn plus_mask(key: u64, n: usize) -> u64 {
    // the map is an involution
    minus_key(key, n)
}

/// Keeps the `cap` smallest keys seen.
struct Smallest {
    cap: usize,
    heap: BinaryHeap<u64>,
}

impl Smallest {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            heap: BinaryHeap::new(),
        }
    }

    fn offer(&mut self, key: u64) {
        if self.heap.len() < self.cap {
            self.heap.push(key);
        } else if self.heap.peek().is_some_and(|&top| key < top) {
            self.heap.pop();
            self.heap.push(key);
        }
    }

    fn into_sorted(self) -> Vec<u64> {
        self.heap.into_sorted_vec()
    }
}

pub(crate) fn solve(problem: &Problem, strategy: Strategy, max_witnesses: usize) -> Result<Solutions> {
    assert!(problem.n() <= 64, "search supports at most 64 positions");
    match strategy {
        Strategy::Exhaustive => exhaustive(problem, max_witnesses),
        Strategy::MeetInMiddle => meet_in_middle(problem, max_witnesses),
    }
}

fn exhaustive(p: &Problem, max_witnesses: usize) -> Result<Solutions> {
    let n = p.n();
    let mut count = 0u64;
    let mut best = Smallest::new(max_witnesses);
    if let Some(k) = p.single_cardinality() {
        let size = binomial(n as u64, k as u64).to_u128().unwrap_or(u128::MAX);
        if size > EXHAUSTIVE_CLASS_LIMIT {
            return Err(Error::GuardExceeded {
                what: "exhaustive composition class",
                size,
                limit: EXHAUSTIVE_CLASS_LIMIT,
            });
        }
        if k > n {
            return Ok(Solutions { count: 0, witnesses: Vec::new() });
        }
        let mut mask: u64 = if k == 0 { 0 } else { u64::MAX >> (64 - k) };
        loop {
            let hit = p.rows.iter().zip(&p.targets).all(|(row, &t)| {
                let mut s = 0u64;
                let mut m = mask;
                while m != 0 {
                    s += row[m.trailing_zeros() as usize];
                    m &= m - 1;
                }
                s == t
            });
            if hit {
                count += 1;
                best.offer(minus_key(mask, n));
            }
            if k == 0 || k == n {
                break;
            }
            let t = mask | (mask - 1);
            let next = t.wrapping_add(1) | (((!t & t.wrapping_add(1)) - 1) >> (mask.trailing_zeros() + 1));
            if n < 64 && next >> n != 0 {
                break;
            }
            mask = next;
        }
    } else {
        let size = 1u128 << n;
        if size > EXHAUSTIVE_CUBE_LIMIT {
            return Err(Error::GuardExceeded {
                what: "exhaustive sign vectors",
                size,
                limit: EXHAUSTIVE_CUBE_LIMIT,
            });
        }
        let admissible: Option<HashSet<&[usize]>> =
            p.admissible.as_ref().map(|v| v.iter().map(Vec::as_slice).collect());
        let mut sums = vec![0u64; p.rows.len()];
        let mut counts = vec![0usize; p.n_classes];
        let mut mask = 0u64;
        let check = |mask: u64, sums: &[u64], counts: &[usize], count: &mut u64, best: &mut Smallest| {
            let ok = sums == p.targets.as_slice() && admissible.as_ref().map_or(true, |a| a.contains(counts));
            if ok {
                *count += 1;
                best.offer(minus_key(mask, n));
            }
        };
        check(mask, &sums, &counts, &mut count, &mut best);
        // Gray-code walk: one position flips per step
        for i in 1u64..(1u64 << n) {
            let bit = i.trailing_zeros() as usize;
            mask ^= 1 << bit;
            let on = mask >> bit & 1 == 1;
            for (s, row) in sums.iter_mut().zip(&p.rows) {
                if on {
                    *s += row[bit];
                } else {
                    *s -= row[bit];
                }
            }
            let c = &mut counts[p.classes[bit]];
            if on {
                *c += 1;
            } else {
                *c -= 1;
            }
            check(mask, &sums, &counts, &mut count, &mut best);
        }
    }
    let witnesses = best.into_sorted().into_iter().map(|k| plus_mask(k, n)).collect();
    Ok(Solutions { count, witnesses })
}

/// Per-class plus-counts and per-row plus-sums of every assignment of a
/// contiguous block of positions, indexed by the block's minus-key.
struct HalfTable {
    width: usize,
    counts: Vec<Vec<usize>>,
    sums: Vec<Vec<u64>>,
}

fn half_table(p: &Problem, start: usize, width: usize) -> HalfTable {
    let size = 1usize << width;
    let mut counts = Vec::with_capacity(size);
    let mut sums = Vec::with_capacity(size);
    for v in 0..size as u64 {
        let mut c = vec![0usize; p.n_classes];
        let mut s = vec![0u64; p.rows.len()];
        for j in 0..width {
            // position start + j is plus iff bit width-1-j is clear
            if v >> (width - 1 - j) & 1 == 0 {
                let pos = start + j;
                c[p.classes[pos]] += 1;
                for (acc, row) in s.iter_mut().zip(&p.rows) {
                    *acc += row[pos];
                }
            }
        }
        counts.push(c);
        sums.push(s);
    }
    HalfTable { width, counts, sums }
}

fn meet_in_middle(p: &Problem, max_witnesses: usize) -> Result<Solutions> {
    let n = p.n();
    let left_w = n / 2;
    let right_w = n - left_w;
    let size = 1u128 << right_w;
    if size > MITM_HALF_LIMIT {
        return Err(Error::GuardExceeded {
            what: "meet-in-the-middle half table",
            size,
            limit: MITM_HALF_LIMIT,
        });
    }
    let use_counts = p.admissible.is_some();
    let left = half_table(p, 0, left_w);
    let right = half_table(p, left_w, right_w);

    let mut index: HashMap<Vec<u64>, Vec<u64>> = HashMap::new();
    for v in 0..(1u64 << right_w) {
        let mut key: Vec<u64> = Vec::with_capacity(p.n_classes + p.rows.len());
        if use_counts {
            key.extend(right.counts[v as usize].iter().map(|&c| c as u64));
        }
        key.extend(&right.sums[v as usize]);
        index.entry(key).or_default().push(v);
    }

    let free = [Vec::new()];
    let wanted: &[Vec<usize>] = p.admissible.as_deref().unwrap_or(&free);
    let mut count = 0u64;
    let mut witnesses = Vec::new();
    let mut key = Vec::with_capacity(p.n_classes + p.rows.len());
    for lv in 0..(1u64 << left_w) {
        let lc = &left.counts[lv as usize];
        let ls = &left.sums[lv as usize];
        if ls.iter().zip(&p.targets).any(|(s, t)| s > t) {
            continue;
        }
        let mut matched: Vec<&[u64]> = Vec::new();
        for x in wanted {
            key.clear();
            if use_counts {
                if x.iter().zip(lc).any(|(want, have)| want < have) {
                    continue;
                }
                key.extend(x.iter().zip(lc).map(|(want, have)| (want - have) as u64));
            }
            key.extend(p.targets.iter().zip(ls).map(|(t, s)| t - s));
            if let Some(list) = index.get(&key) {
                count += list.len() as u64;
                matched.push(list);
            }
        }
        if witnesses.len() < max_witnesses && !matched.is_empty() {
            let need = max_witnesses - witnesses.len();
            let mut rights: Vec<u64> = matched.iter().flat_map(|l| l.iter().take(need).copied()).collect();
            rights.sort_unstable();
            witnesses.extend(rights.into_iter().take(need).map(|rv| (lv << right.width) | rv));
        }
    }
    let witnesses = witnesses.into_iter().map(|k| plus_mask(k, n)).collect();
    Ok(Solutions { count, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Strategy;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, Strategy as _};

    #[test]
    fn key_round_trip() {
        for n in [1usize, 5, 17, 64] {
            for mask in [0u64, 1, 0b1011, u64::MAX] {
                let m = if n == 64 { mask } else { mask & ((1 << n) - 1) };
                assert_eq!(plus_mask(minus_key(m, n), n), m);
            }
        }
        // "+-" (position 0 plus) precedes "-+"
        assert!(minus_key(0b01, 2) < minus_key(0b10, 2));
    }

    #[test]
    fn empty_problem() {
        let p = Problem::fixed_cardinality(vec![vec![]], vec![0], 0);
        for s in [Strategy::Exhaustive, Strategy::MeetInMiddle] {
            assert_eq!(solve(&p, s, 2).unwrap(), Solutions { count: 1, witnesses: vec![0] });
        }
    }

    #[test]
    fn swap_symmetry() {
        let p = Problem::fixed_cardinality(vec![vec![1, 1]], vec![1], 1);
        for s in [Strategy::Exhaustive, Strategy::MeetInMiddle] {
            let sol = solve(&p, s, 2).unwrap();
            assert_eq!(sol.count, 2);
            assert_eq!(sol.witnesses, vec![0b01, 0b10]);
        }
    }

    fn brute(p: &Problem) -> Vec<u64> {
        let n = p.n();
        let mut out: Vec<u64> = (0..1u64 << n)
            .filter(|&mask| {
                let mut c = vec![0; p.n_classes];
                for j in 0..n {
                    if mask >> j & 1 == 1 {
                        c[p.classes[j]] += 1;
                    }
                }
                let ok_c = p.admissible.as_ref().map_or(true, |a| a.contains(&c));
                ok_c && p.rows.iter().zip(&p.targets).all(|(row, &t)| {
                    (0..n).filter(|j| mask >> j & 1 == 1).map(|j| row[j]).sum::<u64>() == t
                })
            })
            .collect();
        out.sort_by_key(|&m| minus_key(m, n));
        out
    }

    fn problem_strategy() -> impl proptest::strategy::Strategy<Value = Problem> {
        (1usize..11, 1usize..3, 1u64..6, 1usize..3, any::<u64>(), 0usize..3).prop_map(
            |(n, rows, level, classes, seed, mode)| {
                let mut x = seed;
                let mut next = move || {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    x >> 33
                };
                let rows: Vec<Vec<u64>> = (0..rows).map(|_| (0..n).map(|_| next() % level + 1).collect()).collect();
                let truth: u64 = next() & ((1 << n) - 1);
                let targets = rows
                    .iter()
                    .map(|r| (0..n).filter(|j| truth >> j & 1 == 1).map(|j| r[j]).sum())
                    .collect();
                let cls: Vec<usize> = (0..n).map(|_| (next() % classes as u64) as usize).collect();
                let mut truth_counts = vec![0; classes];
                for j in 0..n {
                    if truth >> j & 1 == 1 {
                        truth_counts[cls[j]] += 1;
                    }
                }
                let admissible = match mode {
                    0 => None,
                    1 => Some(vec![truth_counts]),
                    _ => {
                        let mut alt = truth_counts.clone();
                        alt[0] += 1;
                        Some(vec![truth_counts, alt])
                    }
                };
                Problem {
                    classes: cls,
                    n_classes: classes,
                    admissible,
                    rows,
                    targets,
                }
            },
        )
    }

    proptest! {
        #[test]
        fn strategies_match_brute_force(p in problem_strategy(), w in 1usize..5) {
            let expected = brute(&p);
            for s in [Strategy::Exhaustive, Strategy::MeetInMiddle] {
                let sol = solve(&p, s, w).unwrap();
                prop_assert_eq!(sol.count, expected.len() as u64);
                prop_assert!(sol.count >= 1);
                let want: Vec<u64> = expected.iter().take(w).copied().collect();
                prop_assert_eq!(&sol.witnesses, &want);
            }
        }
    }
}
