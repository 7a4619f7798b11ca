//! Subset-sum lossless compression codecs together with the exact counting
//! and rate-function machinery used to locate their decoding thresholds.
//!
//! A source sequence `sigma in {-1,+1}^N` is compressed into the subset sum
//! `E = sum_i a_i sigma_i` for random integer weights `a_i in {1..L}`
//! (plus, in the constrained scheme, the magnetization `M = sum_i sigma_i`).
//! With `L = 2^{NR}`, decoding is unambiguous with high probability once the
//! rate `R` exceeds a critical value: the entropy `h(p)` for the constrained
//! scheme and `log2(1 + e^{-xi(p)})` for the unconstrained one.

pub mod codec;
pub mod counting;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod ratefuncs;

pub use codec::{DecodeOptions, DecodeOutcome, EncodedMessage, JointDistribution, Scheme, Strategy};
pub use error::{Error, Result};
pub use instance::{composition_of, sample_weights, subset_sum_value, Alphabet, Composition, SourceSequence, WeightSet};
