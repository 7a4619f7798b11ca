//! Seeded Monte Carlo sweeps over the rate `R`, with `L = max(1, round(2^{NR}))`.
//!
//! Every trial draws its weights (and, where the scheme calls for it, its
//! source sequence) from a stream derived from `(seed, grid index, trial
//! index)`, so results do not depend on thread count or scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{
    canonical_joint_type, decode, decode_side_info, encode, DecodeOptions, DecodeOutcome, JointDistribution, Scheme,
    Strategy,
};
use crate::counting::{brute_force_omega_constrained, brute_force_omega_unconstrained};
use crate::error::{invalid, Error, Result};
use crate::instance::{
    derive_seed, largest_remainder, sample_weight_rows, sample_weights, stream_rng, Alphabet, SourceSequence,
};

pub const CSV_HEADER: &str = "scheme,N,R,L,trials,mean_omega,se_omega,frac_ambiguous,frac_unique,mean_decode_ns";

const WEIGHTS_STREAM: u64 = 0;
const SOURCE_STREAM: u64 = 1;

/// One grid point: a single rate, or one rate per weight row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatePoint {
    Single(f64),
    PerRow(Vec<f64>),
}

impl RatePoint {
    pub fn values(&self) -> Vec<f64> {
        match self {
            RatePoint::Single(r) => vec![*r],
            RatePoint::PerRow(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scheme: Scheme,
    pub n: usize,
    /// `P(+1)` for the binary schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Symbol probabilities for the K-ary scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    /// Source/side joint distribution for the side-information scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointDistribution>,
    /// Overrides the joint distribution's typicality tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub rates: Vec<RatePoint>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Measure decode wall time; off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Number of weight rows each grid point needs.
    fn rows(&self) -> Result<usize> {
        Ok(match self.scheme {
            Scheme::Multi => match self.rates.first() {
                Some(r) => r.values().len(),
                None => 0,
            },
            Scheme::KAry => self.kary_probs()?.len() - 1,
            _ => 1,
        })
    }

    fn kary_probs(&self) -> Result<&[f64]> {
        self.probs
            .as_deref()
            .ok_or_else(|| invalid("kary sweeps need `probs`"))
    }

    fn binary_p(&self) -> Result<f64> {
        self.p.ok_or_else(|| invalid(format!("{} sweeps need `p`", self.scheme)))
    }

    fn joint(&self) -> Result<JointDistribution> {
        let joint = self
            .joint
            .clone()
            .ok_or_else(|| invalid("side_info sweeps need `joint`"))?;
        match self.epsilon {
            Some(eps) => joint.with_epsilon(eps),
            None => Ok(joint),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > 64 {
            return Err(invalid(format!("N = {} outside 1..=64", self.n)));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be >= 1"));
        }
        if self.rates.is_empty() {
            return Err(invalid("rate grid is empty"));
        }
        match self.scheme {
            Scheme::Constrained | Scheme::Unconstrained | Scheme::Multi => {
                let p = self.binary_p()?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("p = {p} outside [0, 1]")));
                }
            }
            Scheme::SideInfo => {
                self.joint()?;
            }
            Scheme::KAry => {
                let probs = self.kary_probs()?;
                if probs.len() < 2 || probs.len() > 127 {
                    return Err(invalid("kary sweeps need between 2 and 127 probabilities"));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(invalid("kary probabilities must be nonnegative and sum to 1"));
                }
            }
        }
        let rows = self.rows()?;
        if rows == 0 {
            return Err(invalid("multi sweeps need at least one rate per point"));
        }
        for point in &self.rates {
            let values = point.values();
            let ok_len = values.len() == rows || (values.len() == 1 && self.scheme == Scheme::KAry);
            if !ok_len {
                return Err(invalid(format!("rate point {values:?} needs {rows} entries")));
            }
            if values.iter().any(|r| !r.is_finite() || *r < 0.0) {
                return Err(invalid(format!("rates must be finite and >= 0, got {values:?}")));
            }
        }
        Ok(())
    }
}

/// `max(1, round(2^{NR}))`.
pub fn level_for_rate(n: usize, rate: f64) -> Result<u64> {
    let l = (n as f64 * rate).exp2().round();
    if !(l < 2f64.powi(62)) {
        return Err(Error::OverflowRisk(l as u128));
    }
    Ok((l as u64).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rates: Vec<f64>,
    pub levels: Vec<u64>,
    /// `log2(L)/N` per row, the rate actually realized after rounding.
    pub effective_rates: Vec<f64>,
    pub trials: usize,
    pub mean_omega: f64,
    pub se_omega: f64,
    pub frac_ambiguous: f64,
    pub frac_unique: f64,
    pub frac_not_found: f64,
    pub mean_decode_ns: f64,
    /// Set when the point could not be run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepPoint {
    /// A scalar position on the rate axis: the rate, or the sum over rows.
    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    fn failed(rates: Vec<f64>, trials: usize, error: String) -> Self {
        Self {
            rates,
            levels: Vec::new(),
            effective_rates: Vec::new(),
            trials,
            mean_omega: f64::NAN,
            se_omega: f64::NAN,
            frac_ambiguous: f64::NAN,
            frac_unique: f64::NAN,
            frac_not_found: f64::NAN,
            mean_decode_ns: f64::NAN,
            error: Some(error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub version: String,
    pub points: Vec<SweepPoint>,
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.config.scheme,
                self.config.n,
                join(&p.rates),
                join(&p.levels),
                p.trials,
                p.mean_omega,
                p.se_omega,
                p.frac_ambiguous,
                p.frac_unique,
                p.mean_decode_ns
            );
        }
        out
    }

    pub fn metadata_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "version": self.version,
            "csv_header": CSV_HEADER,
            "points": self.points,
        })
    }

    /// Writes the CSV to `path` and the metadata to `<stem>.meta.json` beside it.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let io = |e: std::io::Error| Error::Parse(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, self.to_csv()).map_err(io)?;
        let meta = metadata_path(path);
        let text = serde_json::to_string_pretty(&self.metadata_json()).expect("metadata serializes");
        std::fs::write(&meta, text + "\n").map_err(io)?;
        Ok(meta)
    }
}

pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// What one trial observed.
#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    omega: u64,
    unique: bool,
    ambiguous: bool,
    decode_ns: u64,
}

/// Canonical binary sequence: the first `round(pN)` positions `+1`.
fn canonical_binary(n: usize, p: f64) -> SourceSequence {
    let plus = largest_remainder(&[p, 1.0 - p], n)[0];
    SourceSequence::binary((0..n).map(|i| if i < plus { 1 } else { -1 }).collect()).expect("valid")
}

/// Canonical K-ary sequence: symbol counts by largest remainder, in order.
fn canonical_kary(n: usize, probs: &[f64]) -> SourceSequence {
    let counts = largest_remainder(probs, n);
    let symbols = counts
        .iter()
        .enumerate()
        .flat_map(|(s, &c)| std::iter::repeat(s as i8 + 1).take(c))
        .collect();
    SourceSequence::new(Alphabet::KAry(probs.len() as u8), symbols).expect("valid")
}

/// A source/side pair with the canonical joint type, positions shuffled.
fn draw_joint_pair(joint: &JointDistribution, n: usize, rng: &mut impl Rng) -> (SourceSequence, SourceSequence) {
    let ty = canonical_joint_type(joint, n);
    let mut pairs = Vec::with_capacity(n);
    for (i, sigma) in [1i8, -1].into_iter().enumerate() {
        for (j, &tau) in joint.tau_symbols().iter().enumerate() {
            pairs.extend(std::iter::repeat((sigma, tau)).take(ty[i][j]));
        }
    }
    pairs.shuffle(rng);
    let sigma = SourceSequence::binary(pairs.iter().map(|p| p.0).collect()).expect("valid");
    let tau_alphabet = if joint.tau_symbols().iter().all(|&t| t == 1 || t == -1) {
        Alphabet::Binary
    } else {
        let k = joint.tau_symbols().iter().copied().max().unwrap_or(1).max(2) as u8;
        Alphabet::KAry(k)
    };
    let tau = SourceSequence::new(tau_alphabet, pairs.iter().map(|p| p.1).collect()).expect("side symbols fit");
    (sigma, tau)
}

fn draw_iid_binary(n: usize, p: f64, rng: &mut impl Rng) -> SourceSequence {
    SourceSequence::binary((0..n).map(|_| if rng.gen_bool(p) { 1 } else { -1 }).collect()).expect("valid")
}

struct PointPlan<'a> {
    config: &'a SweepConfig,
    grid: u64,
    levels: Vec<u64>,
    joint: Option<JointDistribution>,
}

impl PointPlan<'_> {
    fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let cfg = self.config;
        let weights = sample_weight_rows(cfg.n, &self.levels, derive_seed(cfg.seed, &[self.grid, t, WEIGHTS_STREAM]))?;
        let mut rng = stream_rng(cfg.seed, &[self.grid, t, SOURCE_STREAM]);
        let opts = DecodeOptions::from(cfg.strategy);
        let (seq, tau) = match cfg.scheme {
            Scheme::Constrained | Scheme::Multi => (canonical_binary(cfg.n, cfg.binary_p()?), None),
            Scheme::Unconstrained => (draw_iid_binary(cfg.n, cfg.binary_p()?, &mut rng), None),
            Scheme::SideInfo => {
                let (s, tau) = draw_joint_pair(self.joint.as_ref().expect("joint"), cfg.n, &mut rng);
                (s, Some(tau))
            }
            Scheme::KAry => (canonical_kary(cfg.n, cfg.kary_probs()?), None),
        };
        let msg = encode(cfg.scheme, &seq, &weights)?;
        let start = cfg.timing.then(Instant::now);
        let outcome = match &tau {
            Some(tau) => decode_side_info(&msg, &weights, tau, self.joint.as_ref().expect("joint"), opts)?,
            None => decode(&msg, &weights, opts)?,
        };
        let decode_ns = start.map_or(0, |s| s.elapsed().as_nanos() as u64);
        Ok(TrialOutcome {
            omega: outcome.count(),
            unique: outcome.is_unique(),
            ambiguous: matches!(outcome, DecodeOutcome::Ambiguous { .. }),
            decode_ns,
        })
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_point(config: &SweepConfig, grid: usize, rates: Vec<f64>) -> SweepPoint {
    let rows = config.rows().unwrap_or(1);
    let row_rates = if rates.len() == 1 && rows > 1 {
        vec![rates[0]; rows]
    } else {
        rates.clone()
    };
    let levels = match row_rates
        .iter()
        .map(|&r| level_for_rate(config.n, r))
        .collect::<Result<Vec<u64>>>()
    {
        Ok(l) => l,
        Err(e) => return SweepPoint::failed(rates, config.trials, e.to_string()),
    };
    let joint = match config.scheme {
        Scheme::SideInfo => match config.joint() {
            Ok(j) => Some(j),
            Err(e) => return SweepPoint::failed(rates, config.trials, e.to_string()),
        },
        _ => None,
    };
    let plan = PointPlan {
        config,
        grid: grid as u64,
        levels: levels.clone(),
        joint,
    };
    let outcomes: Result<Vec<TrialOutcome>> = (0..config.trials as u64).into_par_iter().map(|t| plan.trial(t)).collect();
    let outcomes = match outcomes {
        Ok(o) => o,
        Err(e) => return SweepPoint::failed(rates, config.trials, e.to_string()),
    };
    let trials = outcomes.len() as f64;
    let (mean_omega, se_omega) = mean_and_se(outcomes.iter().map(|o| o.omega as f64));
    let unique = outcomes.iter().filter(|o| o.unique).count() as f64;
    let ambiguous = outcomes.iter().filter(|o| o.ambiguous).count() as f64;
    let effective_rates = levels.iter().map(|&l| (l as f64).log2() / config.n as f64).collect();
    SweepPoint {
        rates,
        levels,
        effective_rates,
        trials: config.trials,
        mean_omega,
        se_omega,
        frac_ambiguous: ambiguous / trials,
        frac_unique: unique / trials,
        frac_not_found: (trials - unique - ambiguous) / trials,
        mean_decode_ns: outcomes.iter().map(|o| o.decode_ns as f64).sum::<f64>() / trials,
        error: None,
    }
}

/// Runs every grid point on the current rayon pool.
pub fn run_ambiguity_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let points = config
        .rates
        .iter()
        .enumerate()
        .map(|(g, r)| run_point(config, g, r.values()))
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        points,
    })
}

/// Runs on a dedicated pool with `threads` workers (`None`: rayon's default).
pub fn run_ambiguity_sweep_with_threads(config: &SweepConfig, threads: Option<usize>) -> Result<SweepResult> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| invalid(e.to_string()))?;
    pool.install(|| run_ambiguity_sweep(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub mean: f64,
    pub se: f64,
    pub trials: usize,
}

/// Sample mean of the brute-force collision count over fresh weights.
///
/// The constrained scheme uses the canonical sequence with `round(pN)`
/// pluses; the unconstrained one draws the source sequence every trial.
pub fn estimate_expected_omega(
    scheme: Scheme,
    n: usize,
    p: f64,
    level: u64,
    trials: usize,
    seed: u64,
) -> Result<OmegaEstimate> {
    if trials == 0 {
        return Err(invalid("trials must be >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [0, 1]")));
    }
    let counts: Result<Vec<u64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let weights = sample_weights(n, level, derive_seed(seed, &[0, t, WEIGHTS_STREAM]))?;
            match scheme {
                Scheme::Constrained => brute_force_omega_constrained(&weights, &canonical_binary(n, p)),
                Scheme::Unconstrained => {
                    let mut rng = stream_rng(seed, &[0, t, SOURCE_STREAM]);
                    brute_force_omega_unconstrained(&weights, &draw_iid_binary(n, p, &mut rng))
                }
                other => Err(invalid(format!("no brute-force counter for the {other} scheme"))),
            }
        })
        .collect();
    let counts = counts?;
    let (mean, se) = mean_and_se(counts.iter().map(|&c| c as f64));
    Ok(OmegaEstimate { mean, se, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub r_star: f64,
    pub uncertainty: f64,
}

/// First crossing of `1/2` by linear interpolation between neighbours.
pub fn locate_crossing(rates: &[f64], frac_ambiguous: &[f64]) -> Result<Transition> {
    if rates.len() != frac_ambiguous.len() {
        return Err(Error::LengthMismatch {
            expected: rates.len(),
            actual: frac_ambiguous.len(),
        });
    }
    for i in 1..rates.len() {
        let (r0, r1) = (rates[i - 1], rates[i]);
        let (f0, f1) = (frac_ambiguous[i - 1] - 0.5, frac_ambiguous[i] - 0.5);
        if f0 * f1 <= 0.0 && f0 != f1 {
            let r_star = r0 + (0.0 - f0) / (f1 - f0) * (r1 - r0);
            return Ok(Transition {
                r_star,
                uncertainty: (r1 - r0).abs(),
            });
        }
    }
    Err(Error::NoCrossing)
}

/// Crossing of the ambiguous fraction through `1/2` along the grid, using
/// the summed rate for multi-row points. Failed points are skipped.
pub fn locate_transition(sweep: &SweepResult) -> Result<Transition> {
    let ok: Vec<&SweepPoint> = sweep.points.iter().filter(|p| p.error.is_none()).collect();
    let rates: Vec<f64> = ok.iter().map(|p| p.total_rate()).collect();
    let fracs: Vec<f64> = ok.iter().map(|p| p.frac_ambiguous).collect();
    locate_crossing(&rates, &fracs)
}
