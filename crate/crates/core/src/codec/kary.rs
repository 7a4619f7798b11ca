//! Staged K-ary codec.
//!
//! Stage `s` (for `s = 1..K-1`) sends `N_s = #{i : sigma_i = s}` and
//! `E_s = sum_{sigma_i = s} a^s_i - sum_{sigma_i > s} a^s_i`. The sum only
//! covers positions with `sigma_i >= s`, so once stages `1..s-1` are fixed,
//! stage `s` is a constrained binary problem on the remaining positions.
//!
//! The decoder walks every chain of stage solutions, so the reported count
//! is the exact number of sequences matching all stages.

use crate::error::{invalid, Error, Result};
use crate::instance::{Alphabet, SourceSequence, WeightSet};

use super::search::{solve, Problem};
use super::{check_length, plus_target, DecodeOptions, DecodeOutcome, EncodedMessage};

/// Largest number of partial stage assignments explored.
pub const KARY_PATH_LIMIT: u64 = 1_000_000;

fn alphabet_size(seq: &SourceSequence) -> Result<u8> {
    match seq.alphabet() {
        Alphabet::KAry(k) => Ok(k),
        Alphabet::Binary => Err(invalid("K-ary codec needs a sequence over 1..=K")),
    }
}

pub fn encode_kary(seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    let k = alphabet_size(seq)? as usize;
    check_length(seq, weights)?;
    if weights.m() != k - 1 {
        return Err(invalid(format!("K = {k} needs {} weight rows, got {}", k - 1, weights.m())));
    }
    let sym = seq.symbols();
    let mut counts = Vec::with_capacity(k - 1);
    let mut sums = Vec::with_capacity(k - 1);
    for s in 1..k as i8 {
        let row = weights.row(s as usize - 1);
        counts.push(sym.iter().filter(|&&x| x == s).count());
        sums.push(
            sym.iter()
                .zip(row)
                .map(|(&x, &a)| match x.cmp(&s) {
                    std::cmp::Ordering::Equal => a as i64,
                    std::cmp::Ordering::Greater => -(a as i64),
                    std::cmp::Ordering::Less => 0,
                })
                .sum(),
        );
    }
    Ok(EncodedMessage::KAry {
        n: seq.len(),
        counts,
        e: sums,
    })
}

struct Walk<'a> {
    counts: &'a [usize],
    sums: &'a [i64],
    weights: &'a WeightSet,
    opts: DecodeOptions,
    k: usize,
    total: u64,
    explored: u64,
    witnesses: Vec<Vec<i8>>,
}

impl Walk<'_> {
    /// Assigns symbol `stage + 1` among `free` positions and recurses.
    fn visit(&mut self, stage: usize, free: &[usize], assigned: &mut Vec<i8>) -> Result<()> {
        self.explored += 1;
        if self.explored > KARY_PATH_LIMIT {
            return Err(Error::GuardExceeded {
                what: "K-ary stage paths",
                size: self.explored as u128,
                limit: KARY_PATH_LIMIT as u128,
            });
        }
        let row: Vec<u64> = free.iter().map(|&i| self.weights.row(stage)[i]).collect();
        let Some(target) = plus_target(self.sums[stage], &row) else {
            return Ok(());
        };
        let problem = Problem::fixed_cardinality(vec![row], vec![target], self.counts[stage]);
        let last = stage + 1 == self.k - 1;
        let want = if last { self.opts.max_witnesses.max(1) } else { usize::MAX };
        let sol = solve(&problem, self.opts.strategy, want)?;
        if last {
            self.total += sol.count;
            for mask in sol.witnesses {
                let mut full = assigned.clone();
                for (j, &pos) in free.iter().enumerate() {
                    full[pos] = if mask >> j & 1 == 1 { stage as i8 + 1 } else { self.k as i8 };
                }
                self.witnesses.push(full);
            }
            // depth-first order is not lexicographic across earlier stages
            self.witnesses.sort();
            self.witnesses.truncate(want);
            return Ok(());
        }
        for mask in sol.witnesses {
            let mut rest = Vec::with_capacity(free.len());
            for (j, &pos) in free.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    assigned[pos] = stage as i8 + 1;
                } else {
                    rest.push(pos);
                }
            }
            self.visit(stage + 1, &rest, assigned)?;
            for (j, &pos) in free.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    assigned[pos] = 0;
                }
            }
        }
        Ok(())
    }
}

/// Exact count of sequences matching every stage; witnesses in
/// lexicographic order.
pub fn decode_kary(msg: &EncodedMessage, weights: &WeightSet, opts: impl Into<DecodeOptions>) -> Result<DecodeOutcome> {
    let EncodedMessage::KAry { n, counts, e } = msg else {
        return Err(Error::InvalidMessage(format!("expected a kary message, got {}", msg.scheme())));
    };
    msg.check_against(weights)?;
    let k = counts.len() + 1;
    if k > 127 {
        return Err(invalid("K must be at most 127"));
    }
    if weights.m() != k - 1 {
        return Err(Error::InvalidMessage(format!(
            "message has {} stages but weights have {} rows",
            k - 1,
            weights.m()
        )));
    }
    let mut walk = Walk {
        counts,
        sums: e,
        weights,
        opts: opts.into(),
        k,
        total: 0,
        explored: 0,
        witnesses: Vec::new(),
    };
    let free: Vec<usize> = (0..*n).collect();
    walk.visit(0, &free, &mut vec![0; *n])?;
    let witnesses = walk
        .witnesses
        .into_iter()
        .map(|w| SourceSequence::kary(k as u8, w))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodeOutcome::from_parts(walk.total, witnesses))
}
