//! Encoders and decoders for the five subset-sum schemes.
//!
//! Every decoder reduces to a plus-set search: with `S = {i : sigma_i = +1}`,
//! `E = 2 sum_{i in S} a_i - sum_i a_i`, so a message fixes the plus-sum
//! `(E + sum_i a_i) / 2`. An odd numerator means no sequence matches.

mod binary;
mod kary;
mod search;
mod side_info;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Alphabet, SourceSequence, WeightSet};

pub use binary::{
    decode_constrained, decode_multi, decode_unconstrained, encode_constrained, encode_multi, encode_unconstrained,
};
pub use kary::{decode_kary, encode_kary, KARY_PATH_LIMIT};
pub use search::{ADMISSIBLE_LIMIT, EXHAUSTIVE_CLASS_LIMIT, EXHAUSTIVE_CUBE_LIMIT, MITM_HALF_LIMIT};
pub use side_info::{canonical_joint_type, decode_side_info, encode_side_info, JointDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Constrained,
    Unconstrained,
    Multi,
    SideInfo,
    #[serde(rename = "kary")]
    KAry,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Constrained => "constrained",
            Scheme::Unconstrained => "unconstrained",
            Scheme::Multi => "multi",
            Scheme::SideInfo => "side_info",
            Scheme::KAry => "kary",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "constrained" => Scheme::Constrained,
            "unconstrained" => Scheme::Unconstrained,
            "multi" => Scheme::Multi,
            "side_info" | "sideinfo" => Scheme::SideInfo,
            "kary" | "k_ary" => Scheme::KAry,
            other => return Err(Error::Parse(format!("unknown scheme {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Enumerates the whole candidate set.
    Exhaustive,
    /// Joins two half tables keyed by class counts and partial sums.
    #[default]
    #[serde(rename = "mitm", alias = "meet_in_middle")]
    MeetInMiddle,
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "mitm" | "meet_in_middle" | "meet-in-middle" => Ok(Strategy::MeetInMiddle),
            other => Err(Error::Parse(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub strategy: Strategy,
    /// Witnesses kept for an ambiguous outcome.
    pub max_witnesses: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::default(),
            max_witnesses: 2,
        }
    }
}

impl From<Strategy> for DecodeOptions {
    fn from(strategy: Strategy) -> Self {
        Self {
            strategy,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodedMessage {
    Constrained { n: usize, m: i64, e: i64 },
    Unconstrained { n: usize, e: i64 },
    Multi { n: usize, m: i64, e: Vec<i64> },
    SideInfo { n: usize, e: i64 },
    /// Stage `s = 1..K-1`: `counts[s-1] = N_s` and `e[s-1] = E_s`.
    KAry { n: usize, counts: Vec<usize>, e: Vec<i64> },
}

#[derive(Serialize, Deserialize)]
struct MessageWire {
    scheme: Scheme,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    m: Option<i64>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    e: Option<i64>,
    #[serde(rename = "E_list", default, skip_serializing_if = "Option::is_none")]
    e_list: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<usize>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidMessage(msg.into())
}

fn check_magnetization(n: usize, m: i64) -> Result<()> {
    if m.unsigned_abs() > n as u64 || (n as i64 + m) % 2 != 0 {
        return Err(bad(format!("M = {m} is inconsistent with N = {n}")));
    }
    Ok(())
}

impl EncodedMessage {
    pub fn scheme(&self) -> Scheme {
        match self {
            EncodedMessage::Constrained { .. } => Scheme::Constrained,
            EncodedMessage::Unconstrained { .. } => Scheme::Unconstrained,
            EncodedMessage::Multi { .. } => Scheme::Multi,
            EncodedMessage::SideInfo { .. } => Scheme::SideInfo,
            EncodedMessage::KAry { .. } => Scheme::KAry,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            EncodedMessage::Constrained { n, .. }
            | EncodedMessage::Unconstrained { n, .. }
            | EncodedMessage::Multi { n, .. }
            | EncodedMessage::SideInfo { n, .. }
            | EncodedMessage::KAry { n, .. } => *n,
        }
    }

    /// The subset sums carried by the message, one per row.
    pub fn sums(&self) -> Vec<i64> {
        match self {
            EncodedMessage::Constrained { e, .. }
            | EncodedMessage::Unconstrained { e, .. }
            | EncodedMessage::SideInfo { e, .. } => vec![*e],
            EncodedMessage::Multi { e, .. } | EncodedMessage::KAry { e, .. } => e.clone(),
        }
    }

    /// Structural checks that do not need the weights.
    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(bad("N must be >= 1"));
        }
        match self {
            EncodedMessage::Constrained { n, m, .. } => check_magnetization(*n, *m),
            EncodedMessage::Multi { n, m, e } => {
                if e.is_empty() {
                    return Err(bad("multi message needs at least one sum"));
                }
                check_magnetization(*n, *m)
            }
            EncodedMessage::KAry { n, counts, e } => {
                if counts.is_empty() || counts.len() != e.len() {
                    return Err(bad("K-ary message needs K-1 counts and K-1 sums"));
                }
                if counts.iter().sum::<usize>() > *n {
                    return Err(bad("K-ary counts exceed N"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Checks `|E_k| <= N L_k` against a weight set with matching shape.
    pub(crate) fn check_against(&self, weights: &WeightSet) -> Result<()> {
        self.validate()?;
        if self.n() != weights.n() {
            return Err(Error::LengthMismatch {
                expected: weights.n(),
                actual: self.n(),
            });
        }
        let sums = self.sums();
        if sums.len() > weights.m() {
            return Err(bad(format!("message has {} sums but weights have {} rows", sums.len(), weights.m())));
        }
        for (k, e) in sums.iter().enumerate() {
            let bound = weights.n() as u128 * weights.level(k) as u128;
            if e.unsigned_abs() as u128 > bound {
                return Err(bad(format!("|E| = {} exceeds N*L = {bound}", e.unsigned_abs())));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

impl Serialize for EncodedMessage {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut wire = MessageWire {
            scheme: self.scheme(),
            n: self.n(),
            m: None,
            e: None,
            e_list: None,
            counts: None,
        };
        match self {
            EncodedMessage::Constrained { m, e, .. } => {
                wire.m = Some(*m);
                wire.e = Some(*e);
            }
            EncodedMessage::Unconstrained { e, .. } | EncodedMessage::SideInfo { e, .. } => wire.e = Some(*e),
            EncodedMessage::Multi { m, e, .. } => {
                wire.m = Some(*m);
                wire.e_list = Some(e.clone());
            }
            EncodedMessage::KAry { counts, e, .. } => {
                wire.counts = Some(counts.clone());
                wire.e_list = Some(e.clone());
            }
        }
        wire.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EncodedMessage {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = MessageWire::deserialize(deserializer)?;
        let need = |field: &str| D::Error::custom(format!("{} message needs field {field}", w.scheme));
        let msg = match w.scheme {
            Scheme::Constrained => EncodedMessage::Constrained {
                n: w.n,
                m: w.m.ok_or_else(|| need("M"))?,
                e: w.e.ok_or_else(|| need("E"))?,
            },
            Scheme::Unconstrained => EncodedMessage::Unconstrained {
                n: w.n,
                e: w.e.ok_or_else(|| need("E"))?,
            },
            Scheme::SideInfo => EncodedMessage::SideInfo {
                n: w.n,
                e: w.e.ok_or_else(|| need("E"))?,
            },
            Scheme::Multi => EncodedMessage::Multi {
                n: w.n,
                m: w.m.ok_or_else(|| need("M"))?,
                e: w.e_list.clone().ok_or_else(|| need("E_list"))?,
            },
            Scheme::KAry => EncodedMessage::KAry {
                n: w.n,
                counts: w.counts.clone().ok_or_else(|| need("counts"))?,
                e: w.e_list.clone().ok_or_else(|| need("E_list"))?,
            },
        };
        msg.validate().map_err(D::Error::custom)?;
        Ok(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Unique,
    Ambiguous,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    Unique(SourceSequence),
    /// `count >= 2`; witnesses in lexicographic order.
    Ambiguous { count: u64, witnesses: Vec<SourceSequence> },
    NotFound,
}

impl DecodeOutcome {
    pub fn kind(&self) -> OutcomeKind {
        match self {
            DecodeOutcome::Unique(_) => OutcomeKind::Unique,
            DecodeOutcome::Ambiguous { .. } => OutcomeKind::Ambiguous,
            DecodeOutcome::NotFound => OutcomeKind::NotFound,
        }
    }

    /// Number of sequences consistent with the message.
    pub fn count(&self) -> u64 {
        match self {
            DecodeOutcome::Unique(_) => 1,
            DecodeOutcome::Ambiguous { count, .. } => *count,
            DecodeOutcome::NotFound => 0,
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, DecodeOutcome::Unique(_))
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            DecodeOutcome::Unique(seq) => serde_json::json!({
                "kind": "unique",
                "count": 1,
                "sequence": seq.to_string(),
            }),
            DecodeOutcome::Ambiguous { count, witnesses } => serde_json::json!({
                "kind": "ambiguous",
                "count": count,
                "witnesses": witnesses.iter().map(ToString::to_string).collect::<Vec<_>>(),
            }),
            DecodeOutcome::NotFound => serde_json::json!({ "kind": "not_found", "count": 0 }),
        }
    }

    /// Builds an outcome from a solution count and the first witnesses.
    pub(crate) fn from_parts(count: u64, mut witnesses: Vec<SourceSequence>) -> Self {
        match count {
            0 => DecodeOutcome::NotFound,
            1 => DecodeOutcome::Unique(witnesses.swap_remove(0)),
            _ => DecodeOutcome::Ambiguous { count, witnesses },
        }
    }
}

/// Spins from a plus-mask over `n` positions.
pub(crate) fn mask_to_binary(mask: u64, n: usize) -> SourceSequence {
    let symbols = (0..n).map(|j| if mask >> j & 1 == 1 { 1 } else { -1 }).collect();
    SourceSequence::new(Alphabet::Binary, symbols).expect("spins are valid")
}

/// `(E + sum a) / 2`, or `None` when no plus-set can reach `E`.
pub(crate) fn plus_target(e: i64, row: &[u64]) -> Option<u64> {
    let total: i128 = row.iter().map(|&a| a as i128).sum();
    let twice = e as i128 + total;
    if twice < 0 || twice % 2 != 0 || twice / 2 > total {
        return None;
    }
    Some((twice / 2) as u64)
}

pub(crate) fn check_length(seq: &SourceSequence, weights: &WeightSet) -> Result<()> {
    if seq.len() != weights.n() {
        return Err(Error::LengthMismatch {
            expected: weights.n(),
            actual: seq.len(),
        });
    }
    Ok(())
}

/// Encodes with any scheme; side information is not needed to encode.
pub fn encode(scheme: Scheme, seq: &SourceSequence, weights: &WeightSet) -> Result<EncodedMessage> {
    match scheme {
        Scheme::Constrained => encode_constrained(seq, weights),
        Scheme::Unconstrained => encode_unconstrained(seq, weights),
        Scheme::Multi => encode_multi(seq, weights),
        Scheme::SideInfo => encode_side_info(seq, weights),
        Scheme::KAry => encode_kary(seq, weights),
    }
}

/// Decodes any message that needs no side information.
pub fn decode(msg: &EncodedMessage, weights: &WeightSet, opts: impl Into<DecodeOptions>) -> Result<DecodeOutcome> {
    match msg.scheme() {
        Scheme::Constrained => decode_constrained(msg, weights, opts),
        Scheme::Unconstrained => decode_unconstrained(msg, weights, opts),
        Scheme::Multi => decode_multi(msg, weights, opts),
        Scheme::KAry => decode_kary(msg, weights, opts),
        Scheme::SideInfo => Err(Error::InvalidParameter(
            "side-information messages need the side sequence and joint distribution".into(),
        )),
    }
}

fn range_bits(n: usize, level: u64) -> f64 {
    (2.0 * n as f64 * level as f64 + 1.0).log2()
}

/// Fixed-length cost of a message: `log2(N+1)` per announced composition
/// count plus `log2(2 N L_k + 1)` per signed sum.
pub fn codeword_length_bits(msg: &EncodedMessage, levels: &[u64]) -> Result<f64> {
    msg.validate()?;
    let n = msg.n();
    let sums = msg.sums();
    if levels.len() != sums.len() {
        return Err(Error::InvalidParameter(format!(
            "{} message needs {} levels, got {}",
            msg.scheme(),
            sums.len(),
            levels.len()
        )));
    }
    if levels.contains(&0) {
        return Err(Error::InvalidParameter("levels must be >= 1".into()));
    }
    let composition = (n as f64 + 1.0).log2();
    let sum_bits: f64 = levels.iter().map(|&l| range_bits(n, l)).sum();
    Ok(match msg {
        EncodedMessage::Constrained { .. } | EncodedMessage::Multi { .. } => composition + sum_bits,
        EncodedMessage::Unconstrained { .. } | EncodedMessage::SideInfo { .. } => sum_bits,
        EncodedMessage::KAry { counts, .. } => counts.len() as f64 * composition + sum_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn message_json_shapes() {
        let m = EncodedMessage::Constrained { n: 2, m: 0, e: -1 };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v, serde_json::json!({"scheme": "constrained", "N": 2, "M": 0, "E": -1}));
        let k = EncodedMessage::KAry {
            n: 3,
            counts: vec![1, 1],
            e: vec![-5, -2],
        };
        let v: serde_json::Value = serde_json::from_str(&k.to_json()).unwrap();
        assert_eq!(v, serde_json::json!({"scheme": "kary", "N": 3, "counts": [1, 1], "E_list": [-5, -2]}));
        for msg in [
            m,
            k,
            EncodedMessage::Unconstrained { n: 3, e: 7 },
            EncodedMessage::SideInfo { n: 3, e: 7 },
            EncodedMessage::Multi {
                n: 4,
                m: 2,
                e: vec![1, -3],
            },
        ] {
            assert_eq!(EncodedMessage::from_json(&msg.to_json()).unwrap(), msg);
        }
    }

    #[test]
    fn message_validation() {
        assert!(EncodedMessage::from_json(r#"{"scheme":"constrained","N":3,"M":0,"E":1}"#).is_err());
        assert!(EncodedMessage::from_json(r#"{"scheme":"constrained","N":3,"M":5,"E":1}"#).is_err());
        assert!(EncodedMessage::from_json(r#"{"scheme":"constrained","N":3,"E":1}"#).is_err());
        assert!(EncodedMessage::from_json(r#"{"scheme":"bogus","N":3,"E":1}"#).is_err());
        assert!(EncodedMessage::from_json(r#"{"scheme":"kary","N":2,"counts":[2,1],"E_list":[0,0]}"#).is_err());
    }

    #[test]
    fn plus_target_parity_and_range() {
        assert_eq!(plus_target(-1, &[1, 2]), Some(1));
        assert_eq!(plus_target(2, &[1, 2]), None);
        assert_eq!(plus_target(3, &[1, 2]), Some(3));
        assert_eq!(plus_target(-3, &[1, 2]), Some(0));
        assert_eq!(plus_target(5, &[1, 2]), None);
    }

    #[test]
    fn codeword_lengths() {
        let c = EncodedMessage::Constrained { n: 4, m: 0, e: 0 };
        let bits = codeword_length_bits(&c, &[4]).unwrap();
        assert!((bits - (5f64.log2() + 33f64.log2())).abs() < 1e-12);
        assert!((bits - 7.366).abs() < 1e-3);
        let u = EncodedMessage::Unconstrained { n: 1, e: 1 };
        assert!((codeword_length_bits(&u, &[1]).unwrap() - 3f64.log2()).abs() < 1e-12);
        let k = EncodedMessage::KAry {
            n: 3,
            counts: vec![1, 1],
            e: vec![0, 0],
        };
        let want = 2.0 * 4f64.log2() + 13f64.log2() + 25f64.log2();
        assert!((codeword_length_bits(&k, &[2, 4]).unwrap() - want).abs() < 1e-12);
        assert!(codeword_length_bits(&k, &[2]).is_err());
    }

    #[test]
    fn per_symbol_rate_approaches_target() {
        let n = 32usize;
        let level = 2f64.powf(n as f64 * 0.6).round() as u64;
        let msg = EncodedMessage::Constrained { n, m: 0, e: 0 };
        let rate = codeword_length_bits(&msg, &[level]).unwrap() / n as f64;
        let overhead = ((n + 1) as f64).log2() + (2.0 * n as f64).log2() + 1.0;
        assert!(rate > 0.6 && rate - 0.6 < overhead / n as f64, "rate {rate}");
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("mitm".parse::<Strategy>().unwrap(), Strategy::MeetInMiddle);
        assert_eq!("Exhaustive".parse::<Strategy>().unwrap(), Strategy::Exhaustive);
        assert!("fast".parse::<Strategy>().is_err());
        assert_eq!("side-info".parse::<Scheme>().unwrap(), Scheme::SideInfo);
    }
}
