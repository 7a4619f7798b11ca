//! Constrained, unconstrained and multi-sum binary codecs.

use crate::error::{Error, Result};
use crate::instance::{composition_of, subset_sum_value, SourceSequence, WeightSet};

use super::search::{solve, Problem};
use super::{check_length, mask_to_binary, plus_target, DecodeOptions, DecodeOutcome, EncodedMessage};

fn sums(seq: &SourceSequence, weights: &WeightSet, rows: usize) -> Result<Vec<i64>> {
    (0..rows).map(|k| subset_sum_value(seq, weights, k)).collect()
}

/// `(M, E)` with `E` over the first weight row.
pub fn encode_constrained(seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    seq.require_binary()?;
    check_length(seq, weights)?;
    Ok(EncodedMessage::Constrained {
        n: seq.len(),
        m: composition_of(seq).magnetization(),
        e: subset_sum_value(seq, weights, 0)?,
    })
}

pub fn encode_unconstrained(seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    seq.require_binary()?;
    check_length(seq, weights)?;
    Ok(EncodedMessage::Unconstrained {
        n: seq.len(),
        e: subset_sum_value(seq, weights, 0)?,
    })
}

/// `(M, E_1, ..., E_m)`, one sum per weight row.
pub fn encode_multi(seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    seq.require_binary()?;
    check_length(seq, weights)?;
    Ok(EncodedMessage::Multi {
        n: seq.len(),
        m: composition_of(seq).magnetization(),
        e: sums(seq, weights, weights.m())?,
    })
}

/// Searches plus-sets reaching every row target; `plus` fixes the class size.
fn run(
    n: usize,
    e: &[i64],
    weights: &WeightSet,
    plus: Option<usize>,
    opts: DecodeOptions,
) -> Result<DecodeOutcome> {
    let rows: Vec<Vec<u64>> = (0..e.len()).map(|k| weights.row(k).to_vec()).collect();
    let Some(targets) = e.iter().zip(&rows).map(|(&e, r)| plus_target(e, r)).collect::<Option<Vec<_>>>() else {
        return Ok(DecodeOutcome::NotFound);
    };
    let problem = match plus {
        Some(k) => Problem::fixed_cardinality(rows, targets, k),
        None => Problem::free(rows, targets),
    };
    let sol = solve(&problem, opts.strategy, opts.max_witnesses.max(1))?;
    let witnesses = sol.witnesses.iter().map(|&m| mask_to_binary(m, n)).collect();
    Ok(DecodeOutcome::from_parts(sol.count, witnesses))
}

fn wrong_scheme(expected: &str, msg: &EncodedMessage) -> Error {
    Error::InvalidMessage(format!("expected a {expected} message, got {}", msg.scheme()))
}

/// All sequences with the announced composition and sum.
pub fn decode_constrained(
    msg: &EncodedMessage,
    weights: &WeightSet,
    opts: impl Into<DecodeOptions>,
) -> Result<DecodeOutcome> {
    let EncodedMessage::Constrained { n, m, e } = msg else {
        return Err(wrong_scheme("constrained", msg));
    };
    msg.check_against(weights)?;
    let plus = ((*n as i64 + m) / 2) as usize;
    run(*n, &[*e], weights, Some(plus), opts.into())
}

/// All sign vectors with the announced sum.
pub fn decode_unconstrained(
    msg: &EncodedMessage,
    weights: &WeightSet,
    opts: impl Into<DecodeOptions>,
) -> Result<DecodeOutcome> {
    let EncodedMessage::Unconstrained { n, e } = msg else {
        return Err(wrong_scheme("unconstrained", msg));
    };
    msg.check_against(weights)?;
    run(*n, &[*e], weights, None, opts.into())
}

/// All sequences with the announced composition satisfying every row.
pub fn decode_multi(msg: &EncodedMessage, weights: &WeightSet, opts: impl Into<DecodeOptions>) -> Result<DecodeOutcome> {
    let EncodedMessage::Multi { n, m, e } = msg else {
        return Err(wrong_scheme("multi", msg));
    };
    msg.check_against(weights)?;
    if e.len() != weights.m() {
        return Err(Error::InvalidMessage(format!(
            "message has {} sums but weights have {} rows",
            e.len(),
            weights.m()
        )));
    }
    let plus = ((*n as i64 + m) / 2) as usize;
    run(*n, e, weights, Some(plus), opts.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Strategy;
    use crate::counting::brute_force_omega_constrained;
    use crate::instance::{sample_weight_rows, sample_weights};
    use proptest::prelude::*;

    const BOTH: [Strategy; 2] = [Strategy::Exhaustive, Strategy::MeetInMiddle];

    fn w(a: &[u64]) -> WeightSet {
        WeightSet::single(a.to_vec(), *a.iter().max().unwrap()).unwrap()
    }

    fn seq(s: &str) -> SourceSequence {
        s.parse().unwrap()
    }

    #[test]
    fn constrained_encode_examples() {
        assert_eq!(
            encode_constrained(&seq("+-"), &w(&[1, 2])).unwrap(),
            EncodedMessage::Constrained { n: 2, m: 0, e: -1 }
        );
        assert_eq!(
            encode_constrained(&seq("++-"), &w(&[5, 5, 5])).unwrap(),
            EncodedMessage::Constrained { n: 3, m: 1, e: 5 }
        );
        assert!(matches!(encode_constrained(&seq("+-+"), &w(&[1, 2])), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn constrained_decode_examples() {
        for s in BOTH {
            let out = decode_constrained(&EncodedMessage::Constrained { n: 2, m: 0, e: -1 }, &w(&[1, 2]), s).unwrap();
            assert_eq!(out, DecodeOutcome::Unique(seq("+-")));
            let out = decode_constrained(&EncodedMessage::Constrained { n: 2, m: 0, e: 0 }, &w(&[1, 1]), s).unwrap();
            assert_eq!(
                out,
                DecodeOutcome::Ambiguous {
                    count: 2,
                    witnesses: vec![seq("+-"), seq("-+")]
                }
            );
            let out = decode_constrained(&EncodedMessage::Constrained { n: 2, m: 0, e: 2 }, &w(&[1, 2]), s).unwrap();
            assert_eq!(out, DecodeOutcome::NotFound);
        }
        let bad = EncodedMessage::Constrained { n: 3, m: 0, e: 0 };
        assert!(decode_constrained(&bad, &w(&[1, 2, 3]), Strategy::Exhaustive).is_err());
    }

    #[test]
    fn unconstrained_examples() {
        for s in BOTH {
            let out = decode_unconstrained(&EncodedMessage::Unconstrained { n: 3, e: -5 }, &w(&[1, 2, 4]), s).unwrap();
            assert_eq!(out, DecodeOutcome::Unique(seq("+--")));
            let out = decode_unconstrained(&EncodedMessage::Unconstrained { n: 2, e: 0 }, &w(&[1, 1]), s).unwrap();
            assert_eq!(out.count(), 2);
        }
        let too_big = EncodedMessage::Unconstrained { n: 2, e: 9 };
        assert!(decode_unconstrained(&too_big, &w(&[1, 2]), Strategy::Exhaustive).is_err());
    }

    #[test]
    fn unconstrained_mitm_n20_round_trip() {
        let weights = sample_weights(20, 1 << 20, 42).unwrap();
        let s = SourceSequence::binary((0..20).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect()).unwrap();
        let msg = encode_unconstrained(&s, &weights).unwrap();
        let start = std::time::Instant::now();
        let out = decode_unconstrained(&msg, &weights, Strategy::MeetInMiddle).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0);
        assert_eq!(out, DecodeOutcome::Unique(s));
    }

    #[test]
    fn multi_examples() {
        let weights = WeightSet::new(vec![vec![1, 1], vec![1, 2]], vec![1, 2], None).unwrap();
        let msg = encode_multi(&seq("+-"), &weights).unwrap();
        assert_eq!(
            msg,
            EncodedMessage::Multi {
                n: 2,
                m: 0,
                e: vec![0, -1]
            }
        );
        for s in BOTH {
            assert_eq!(decode_multi(&msg, &weights, s).unwrap(), DecodeOutcome::Unique(seq("+-")));
        }
    }

    #[test]
    fn multi_high_rate_is_mostly_unique() {
        let n = 16;
        let level = 2f64.powf(n as f64 * 0.55).round() as u64;
        let s = SourceSequence::binary((0..n).map(|i| if i < n / 2 { 1 } else { -1 }).collect()).unwrap();
        let trials = 200;
        let unique = (0..trials)
            .filter(|&t| {
                let weights = sample_weight_rows(n, &[level, level], 1000 + t).unwrap();
                let msg = encode_multi(&s, &weights).unwrap();
                decode_multi(&msg, &weights, Strategy::MeetInMiddle).unwrap().is_unique()
            })
            .count();
        assert!(unique as f64 >= 0.9 * trials as f64, "unique {unique}/{trials}");
    }

    fn random_binary(n: usize, bits: u64) -> SourceSequence {
        SourceSequence::binary((0..n).map(|j| if bits >> j & 1 == 1 { 1 } else { -1 }).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn constrained_round_trip_and_oracle(n in 1usize..15, level in 1u64..200, seed: u64, bits: u64) {
            let weights = sample_weights(n, level, seed).unwrap();
            let s = random_binary(n, bits);
            let msg = encode_constrained(&s, &weights).unwrap();
            let ex = decode_constrained(&msg, &weights, Strategy::Exhaustive).unwrap();
            let mitm = decode_constrained(&msg, &weights, Strategy::MeetInMiddle).unwrap();
            prop_assert_eq!(&ex, &mitm);
            prop_assert_eq!(ex.count(), brute_force_omega_constrained(&weights, &s).unwrap());
            match &ex {
                DecodeOutcome::Unique(w) => prop_assert_eq!(w, &s),
                DecodeOutcome::Ambiguous { witnesses, .. } => {
                    prop_assert!(witnesses.contains(&s) || witnesses.len() == 2);
                    for w in witnesses {
                        prop_assert_eq!(&encode_constrained(w, &weights).unwrap(), &msg);
                    }
                }
                DecodeOutcome::NotFound => prop_assert!(false, "encoded message not found"),
            }
        }

        #[test]
        fn unconstrained_strategies_agree(n in 1usize..15, level in 1u64..100, seed: u64, bits: u64) {
            let weights = sample_weights(n, level, seed).unwrap();
            let s = random_binary(n, bits);
            let msg = encode_unconstrained(&s, &weights).unwrap();
            let ex = decode_unconstrained(&msg, &weights, Strategy::Exhaustive).unwrap();
            let mitm = decode_unconstrained(&msg, &weights, Strategy::MeetInMiddle).unwrap();
            prop_assert_eq!(&ex, &mitm);
            prop_assert!(ex.count() >= 1);
            if let DecodeOutcome::Unique(w) = &ex {
                prop_assert_eq!(w, &s);
            }
        }

        #[test]
        fn multi_with_one_row_is_constrained(n in 1usize..13, level in 1u64..50, seed: u64, bits: u64) {
            let weights = sample_weights(n, level, seed).unwrap();
            let s = random_binary(n, bits);
            let c = decode_constrained(&encode_constrained(&s, &weights).unwrap(), &weights, Strategy::Exhaustive).unwrap();
            let m = decode_multi(&encode_multi(&s, &weights).unwrap(), &weights, Strategy::Exhaustive).unwrap();
            prop_assert_eq!(c, m);
        }

        #[test]
        fn collision_iff_crossed_sums_balance(n in 2usize..20, level in 1u64..6, seed: u64, perm_seed: u64, bits: u64) {
            let weights = sample_weights(n, level, seed).unwrap();
            let a = weights.row(0);
            let s = random_binary(n, bits);
            // a second sequence with the same composition: shuffle the spins
            let mut t: Vec<i8> = s.symbols().to_vec();
            let mut x = perm_seed;
            for i in (1..n).rev() {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1);
                t.swap(i, (x >> 33) as usize % (i + 1));
            }
            let t = SourceSequence::binary(t).unwrap();
            let same_e = subset_sum_value(&s, &weights, 0).unwrap() == subset_sum_value(&t, &weights, 0).unwrap();
            let lost: u64 = (0..n).filter(|&i| t.symbols()[i] == 1 && s.symbols()[i] == -1).map(|i| a[i]).sum();
            let gained: u64 = (0..n).filter(|&i| t.symbols()[i] == -1 && s.symbols()[i] == 1).map(|i| a[i]).sum();
            prop_assert_eq!(same_e, lost == gained);
        }
    }

    #[test]
    fn powers_of_two_are_bijective() {
        let n = 12;
        let weights = WeightSet::single((0..n).map(|i| 1u64 << i).collect(), 1 << (n - 1)).unwrap();
        for bits in (0u64..1 << n).step_by(37) {
            let s = random_binary(n, bits);
            let msg = encode_unconstrained(&s, &weights).unwrap();
            for st in BOTH {
                assert_eq!(decode_unconstrained(&msg, &weights, st).unwrap(), DecodeOutcome::Unique(s.clone()));
            }
        }
    }
}
