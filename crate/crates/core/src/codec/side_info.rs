//! Decoding with correlated side information at the receiver.
//!
//! The message is the bare sum `E`. The decoder restricts its search to
//! sequences whose joint empirical type with the side sequence `tau` is
//! within `epsilon` (max-norm) of the joint distribution.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::{largest_remainder, subset_sum_value, SourceSequence, WeightSet};

use super::search::{solve, Problem, ADMISSIBLE_LIMIT};
use super::{check_length, mask_to_binary, plus_target, DecodeOptions, DecodeOutcome, EncodedMessage};

/// Float slack when comparing type distances against `epsilon`.
const TYPE_SLACK: f64 = 1e-12;

/// `P(sigma, tau)` with rows `sigma = +1, -1` and one column per side symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointWire")]
pub struct JointDistribution {
    probs: Vec<Vec<f64>>,
    tau_symbols: Vec<i8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(Deserialize)]
struct JointWire {
    probs: Vec<Vec<f64>>,
    #[serde(default)]
    tau_symbols: Option<Vec<i8>>,
    #[serde(default)]
    epsilon: Option<f64>,
}

impl TryFrom<JointWire> for JointDistribution {
    type Error = Error;

    fn try_from(w: JointWire) -> Result<Self> {
        let symbols = w.tau_symbols.unwrap_or_else(|| vec![1, -1]);
        JointDistribution::new(w.probs, symbols, w.epsilon)
    }
}

impl JointDistribution {
    pub fn new(probs: Vec<Vec<f64>>, tau_symbols: Vec<i8>, epsilon: Option<f64>) -> Result<Self> {
        if probs.len() != 2 {
            return Err(invalid("joint distribution needs two rows (sigma = +1, -1)"));
        }
        if tau_symbols.is_empty() || probs.iter().any(|r| r.len() != tau_symbols.len()) {
            return Err(invalid("every row needs one entry per side symbol"));
        }
        let mut seen = tau_symbols.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != tau_symbols.len() {
            return Err(invalid("side symbols must be distinct"));
        }
        if probs.iter().flatten().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        if let Some(eps) = epsilon {
            if !(eps >= 0.0) || !eps.is_finite() {
                return Err(invalid(format!("epsilon = {eps} must be finite and >= 0")));
            }
        }
        Ok(Self {
            probs,
            tau_symbols,
            epsilon,
        })
    }

    /// Binary side channel flipping the source with probability `crossover`.
    pub fn binary_symmetric(crossover: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&crossover) {
            return Err(invalid(format!("crossover {crossover} outside [0, 1]")));
        }
        let same = (1.0 - crossover) / 2.0;
        let diff = crossover / 2.0;
        Self::new(vec![vec![same, diff], vec![diff, same]], vec![1, -1], None)
    }

    /// Source and side sequence independent and uniform.
    pub fn independent_uniform() -> Self {
        Self::new(vec![vec![0.25, 0.25], vec![0.25, 0.25]], vec![1, -1], None).expect("valid")
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = Some(epsilon);
        Self::new(self.probs, self.tau_symbols, self.epsilon)
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn tau_symbols(&self) -> &[i8] {
        &self.tau_symbols
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// Tolerance used at length `n`: the configured one, else `1/n`.
    pub fn epsilon_for(&self, n: usize) -> f64 {
        self.epsilon.unwrap_or(1.0 / n as f64)
    }

    /// `P(sigma = +1)`.
    pub fn p_plus(&self) -> f64 {
        self.probs[0].iter().sum()
    }

    /// `H(sigma | tau)` in bits.
    pub fn conditional_entropy_bits(&self) -> f64 {
        (0..self.tau_symbols.len())
            .map(|j| {
                let col = self.probs[0][j] + self.probs[1][j];
                (0..2)
                    .map(|i| {
                        let p = self.probs[i][j];
                        if p > 0.0 {
                            -p * (p / col).log2()
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Integer joint type closest to `n P`, rounded by largest remainder over
/// the flattened matrix.
pub fn canonical_joint_type(joint: &JointDistribution, n: usize) -> Vec<Vec<usize>> {
    let flat: Vec<f64> = joint.probs.iter().flatten().copied().collect();
    largest_remainder(&flat, n)
        .chunks(joint.tau_symbols.len())
        .map(<[usize]>::to_vec)
        .collect()
}

/// The bare sum `E`; no composition is sent.
pub fn encode_side_info(seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    seq.require_binary()?;
    check_length(seq, weights)?;
    Ok(EncodedMessage::SideInfo {
        n: seq.len(),
        e: subset_sum_value(seq, weights, 0)?,
    })
}

/// Plus-counts `x` admissible in a side-symbol class of size `c`.
fn admissible_counts(c: usize, n: usize, p_plus: f64, p_minus: f64, eps: f64) -> Vec<usize> {
    let nf = n as f64;
    (0..=c)
        .filter(|&x| {
            (x as f64 / nf - p_plus).abs() <= eps + TYPE_SLACK
                && ((c - x) as f64 / nf - p_minus).abs() <= eps + TYPE_SLACK
        })
        .collect()
}

pub fn decode_side_info(
    msg: &EncodedMessage,
    weights: &WeightSet,
    tau: &SourceSequence,
    joint: &JointDistribution,
    opts: impl Into<DecodeOptions>,
) -> Result<DecodeOutcome> {
    let opts = opts.into();
    let EncodedMessage::SideInfo { n, e } = msg else {
        return Err(Error::InvalidMessage(format!(
            "expected a side_info message, got {}",
            msg.scheme()
        )));
    };
    msg.check_against(weights)?;
    if tau.len() != *n {
        return Err(Error::LengthMismatch {
            expected: *n,
            actual: tau.len(),
        });
    }
    let classes = tau
        .symbols()
        .iter()
        .map(|s| {
            joint
                .tau_symbols
                .iter()
                .position(|t| t == s)
                .ok_or_else(|| invalid(format!("side symbol {s} not in the joint distribution")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let n_classes = joint.tau_symbols.len();
    let mut sizes = vec![0usize; n_classes];
    for &c in &classes {
        sizes[c] += 1;
    }
    let eps = joint.epsilon_for(*n);
    let per_class: Vec<Vec<usize>> = (0..n_classes)
        .map(|j| admissible_counts(sizes[j], *n, joint.probs[0][j], joint.probs[1][j], eps))
        .collect();
    if per_class.iter().any(Vec::is_empty) {
        return Ok(DecodeOutcome::NotFound);
    }
    let combos: usize = per_class.iter().map(Vec::len).try_fold(1usize, |acc, l| acc.checked_mul(l)).unwrap_or(usize::MAX);
    if combos > ADMISSIBLE_LIMIT {
        return Err(Error::GuardExceeded {
            what: "admissible joint types",
            size: combos as u128,
            limit: ADMISSIBLE_LIMIT as u128,
        });
    }
    let mut admissible: Vec<Vec<usize>> = vec![Vec::new()];
    for options in &per_class {
        admissible = admissible
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    let row = weights.row(0).to_vec();
    let Some(target) = plus_target(*e, &row) else {
        return Ok(DecodeOutcome::NotFound);
    };
    let problem = Problem {
        classes,
        n_classes,
        admissible: Some(admissible),
        rows: vec![row],
        targets: vec![target],
    };
    let sol = solve(&problem, opts.strategy, opts.max_witnesses.max(1))?;
    let witnesses = sol.witnesses.iter().map(|&m| mask_to_binary(m, *n)).collect();
    Ok(DecodeOutcome::from_parts(sol.count, witnesses))
}
