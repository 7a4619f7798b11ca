//! `subsum`: encode, decode and analyse subset-sum compression.
//!
//! Exit codes: 0 success (or a unique decode), 1 malformed input, 2 ambiguous
//! decode, 3 no matching sequence, 4 a failed verification check.

mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use subsum_core::codec::{self, codeword_length_bits, decode_side_info, JointDistribution, OutcomeKind};
use subsum_core::counting::{expected_omega_constrained, expected_omega_unconstrained, lambda_inclusion_exclusion, lambda_table};
use subsum_core::experiments::{level_for_rate, run_ambiguity_sweep_with_threads, RatePoint, SweepConfig};
use subsum_core::instance::{largest_remainder, sample_weight_rows};
use subsum_core::ratefuncs::RateFunction;
use subsum_core::{DecodeOptions, EncodedMessage, Scheme, SourceSequence, Strategy, WeightSet};

const EXIT_MALFORMED: u8 = 1;
const EXIT_AMBIGUOUS: u8 = 2;
const EXIT_NOT_FOUND: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "subsum", version, about = "Lossless compression by random subset sums")]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a sequence; prints the message JSON.
    Encode(EncodeArgs),
    /// Decode a message; prints the outcome JSON.
    Decode(DecodeArgs),
    /// Exact counts: Lambda tables and expected collision numbers.
    #[command(subcommand)]
    Count(CountCommand),
    /// Evaluate a rate function.
    Ratefunc(RatefuncArgs),
    /// Run a seeded Monte Carlo rate sweep and write CSV plus metadata.
    Sweep(SweepArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Sample a seeded WeightSet JSON.
    Weights(WeightsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Constrained,
    Unconstrained,
    Multi,
    #[value(alias = "side_info")]
    SideInfo,
    Kary,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Constrained => Scheme::Constrained,
            SchemeArg::Unconstrained => Scheme::Unconstrained,
            SchemeArg::Multi => Scheme::Multi,
            SchemeArg::SideInfo => Scheme::SideInfo,
            SchemeArg::Kary => Scheme::KAry,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Exhaustive,
    Mitm,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Exhaustive => Strategy::Exhaustive,
            StrategyArg::Mitm => Strategy::MeetInMiddle,
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// `+`/`-` string, or digits `1..K` for the kary scheme.
    #[arg(long)]
    seq: String,
    /// Alphabet size for kary sequences (default: largest digit, at least 2).
    #[arg(long)]
    k: Option<u8>,
    /// WeightSet JSON file.
    #[arg(long)]
    weights: PathBuf,
    /// Also report the fixed codeword length in bits.
    #[arg(long)]
    bits: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Message JSON file, or `-` for standard input.
    #[arg(long)]
    message: PathBuf,
    /// WeightSet JSON file.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_enum, default_value = "mitm")]
    strategy: StrategyArg,
    /// Witnesses listed for an ambiguous outcome.
    #[arg(long, default_value_t = 2)]
    max_witnesses: usize,
    /// Side sequence (`+`/`-` string) for side_info messages.
    #[arg(long)]
    tau: Option<String>,
    /// Joint distribution JSON file for side_info messages.
    #[arg(long)]
    joint: Option<PathBuf>,
    /// Crossover of a binary symmetric joint, instead of --joint.
    #[arg(long, conflicts_with = "joint")]
    crossover: Option<f64>,
    /// Typicality tolerance (default 1/N).
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum CountCommand {
    /// Lambda_s^n: the full table as CSV, or one entry with --s.
    Lambda {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        level: u64,
        #[arg(long)]
        s: Option<u64>,
    },
    /// Exact expected collision count as JSON.
    Omega {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long)]
        n: usize,
        /// P(+1); the constrained scheme uses round(pN) pluses.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, conflicts_with = "rate")]
        level: Option<u64>,
        /// Sets L = max(1, round(2^{NR})).
        #[arg(long)]
        rate: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RatefuncName {
    H,
    Phi,
    Psi,
    Xi,
    Rc,
}

#[derive(Args)]
struct RatefuncArgs {
    #[arg(value_enum)]
    function: RatefuncName,
    /// Argument (may be given several times).
    #[arg(required = true, allow_negative_numbers = true)]
    x: Vec<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML or JSON sweep configuration; flags override its fields.
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated K-ary symbol probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    /// Binary symmetric side channel crossover (side_info).
    #[arg(long)]
    crossover: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated grid; per-row rates within a point are joined with `:`.
    #[arg(long, value_delimiter = ',')]
    rate: Option<Vec<String>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// CSV output path (metadata goes to `<stem>.meta.json`); stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record decode wall time (makes the CSV nondeterministic).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct WeightsArgs {
    #[arg(long)]
    n: usize,
    /// Upper weight bound; one value per row, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "rate", required_unless_present = "rate")]
    level: Option<Vec<u64>>,
    /// Rates per row, comma-separated; sets L = max(1, round(2^{NR})).
    #[arg(long, value_delimiter = ',')]
    rate: Option<Vec<f64>>,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    suite: verify::Suite,
    /// Seed for the Monte Carlo checks.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trials for the Monte Carlo checks.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load_weights(path: &Path) -> Result<WeightSet> {
    Ok(WeightSet::from_json(&read_input(path)?)?)
}

fn parse_sequence(s: &str, scheme: Scheme, k: Option<u8>) -> Result<SourceSequence> {
    if scheme == Scheme::KAry {
        let largest = s.trim().chars().filter_map(|c| c.to_digit(10)).max().unwrap_or(2) as u8;
        Ok(SourceSequence::parse_kary(s, k.unwrap_or(largest.max(2)))?)
    } else {
        Ok(SourceSequence::parse_binary(s)?)
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(value)?)?;
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<u8> {
    let scheme = Scheme::from(args.scheme);
    let weights = load_weights(&args.weights)?;
    let seq = parse_sequence(&args.seq, scheme, args.k)?;
    let msg = codec::encode(scheme, &seq, &weights)?;
    let mut value = serde_json::to_value(&msg)?;
    if args.bits {
        let levels = &weights.levels()[..msg.sums().len()];
        value["bits"] = json!(codeword_length_bits(&msg, levels)?);
    }
    print_json(&value)?;
    Ok(0)
}

fn cmd_decode(args: DecodeArgs) -> Result<u8> {
    let msg = EncodedMessage::from_json(&read_input(&args.message)?)?;
    let weights = load_weights(&args.weights)?;
    let opts = DecodeOptions {
        strategy: args.strategy.into(),
        max_witnesses: args.max_witnesses,
    };
    let outcome = if msg.scheme() == Scheme::SideInfo {
        let tau = SourceSequence::parse_binary(args.tau.as_deref().ok_or_else(|| anyhow!("side_info needs --tau"))?)?;
        let mut joint = match (&args.joint, args.crossover) {
            (Some(path), _) => serde_json::from_str::<JointDistribution>(&read_input(path)?)?,
            (None, Some(c)) => JointDistribution::binary_symmetric(c)?,
            (None, None) => bail!("side_info needs --joint or --crossover"),
        };
        if let Some(eps) = args.epsilon {
            joint = joint.with_epsilon(eps)?;
        }
        decode_side_info(&msg, &weights, &tau, &joint, opts)?
    } else {
        codec::decode(&msg, &weights, opts)?
    };
    print_json(&outcome.to_json())?;
    Ok(match outcome.kind() {
        OutcomeKind::Unique => 0,
        OutcomeKind::Ambiguous => EXIT_AMBIGUOUS,
        OutcomeKind::NotFound => EXIT_NOT_FOUND,
    })
}

fn cmd_count(cmd: CountCommand) -> Result<u8> {
    match cmd {
        CountCommand::Lambda { n, level, s: Some(s) } => {
            let value = lambda_inclusion_exclusion(n, level, s)?;
            print_json(&json!({"n": n, "L": level, "s": s, "count": value.to_string()}))?;
        }
        CountCommand::Lambda { n, level, s: None } => {
            print!("{}", lambda_table(n, level)?.to_csv());
        }
        CountCommand::Omega {
            scheme,
            n,
            p,
            level,
            rate,
        } => {
            let level = match (level, rate) {
                (Some(l), _) => l,
                (None, Some(r)) => level_for_rate(n, r)?,
                (None, None) => bail!("give --level or --rate"),
            };
            let omega = match Scheme::from(scheme) {
                Scheme::Constrained => {
                    let plus = largest_remainder(&[p, 1.0 - p], n)[0];
                    expected_omega_constrained(plus, n - plus, level)?
                }
                Scheme::Unconstrained => expected_omega_unconstrained(n, p, level)?,
                other => bail!("no exact formula for the {other} scheme"),
            };
            print_json(&omega.to_json())?;
        }
    }
    Ok(0)
}

fn cmd_ratefunc(args: RatefuncArgs) -> Result<u8> {
    let (name, f) = match args.function {
        RatefuncName::H => ("h", RateFunction::H),
        RatefuncName::Phi => ("phi", RateFunction::Phi),
        RatefuncName::Psi => ("psi", RateFunction::Psi),
        RatefuncName::Xi => ("xi", RateFunction::Xi),
        RatefuncName::Rc => ("rc", RateFunction::Rc),
    };
    for x in args.x {
        let v = f.eval(x)?;
        // JSON has no infinities; spell them out
        let value = if v.is_finite() { json!(v) } else { json!(v.to_string()) };
        print_json(&json!({"function": name, "x": x, "value": value}))?;
    }
    Ok(0)
}

fn parse_rate_point(s: &str) -> Result<RatePoint> {
    let parts = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad rate {p:?}")))
        .collect::<Result<Vec<f64>>>()?;
    Ok(match parts.as_slice() {
        [r] => RatePoint::Single(*r),
        _ => RatePoint::PerRow(parts),
    })
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig {
            scheme: args.scheme.ok_or_else(|| anyhow!("--scheme is required without a config file"))?.into(),
            n: args.n.ok_or_else(|| anyhow!("--n is required without a config file"))?,
            p: None,
            probs: None,
            joint: None,
            epsilon: None,
            rates: Vec::new(),
            trials: 1000,
            seed: args.seed.ok_or_else(|| anyhow!("--seed is required: sweeps are always seeded"))?,
            strategy: Strategy::MeetInMiddle,
            out: None,
            timing: false,
        },
    };
    if let Some(s) = args.scheme {
        cfg.scheme = s.into();
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if args.p.is_some() {
        cfg.p = args.p;
    }
    if args.probs.is_some() {
        cfg.probs = args.probs.clone();
    }
    if let Some(c) = args.crossover {
        cfg.joint = Some(JointDistribution::binary_symmetric(c)?);
    }
    if args.epsilon.is_some() {
        cfg.epsilon = args.epsilon;
    }
    if let Some(rates) = &args.rate {
        cfg.rates = rates.iter().map(|r| parse_rate_point(r)).collect::<Result<_>>()?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.strategy {
        cfg.strategy = s.into();
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    cfg.timing |= args.timing;
    if cfg.scheme != Scheme::KAry && cfg.scheme != Scheme::SideInfo && cfg.p.is_none() {
        cfg.p = Some(0.5);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_sweep(args: SweepArgs, threads: Option<usize>) -> Result<u8> {
    let cfg = sweep_config(&args)?;
    let result = run_ambiguity_sweep_with_threads(&cfg, threads)?;
    for p in result.points.iter().filter(|p| p.error.is_some()) {
        eprintln!("note: rate point {:?} skipped: {}", p.rates, p.error.as_deref().unwrap_or(""));
    }
    match &cfg.out {
        Some(path) => {
            let meta = result.write(path)?;
            eprintln!("wrote {} and {}", path.display(), meta.display());
        }
        None => print!("{}", result.to_csv()),
    }
    Ok(0)
}

fn cmd_weights(args: WeightsArgs) -> Result<u8> {
    let levels = match (args.level, args.rate) {
        (Some(l), _) => l,
        (None, Some(rates)) => rates.iter().map(|&r| level_for_rate(args.n, r)).collect::<Result<_, _>>()?,
        (None, None) => bail!("give --level or --rate"),
    };
    let weights = sample_weight_rows(args.n, &levels, args.seed)?;
    println!("{}", weights.to_json());
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    let threads = cli.threads;
    if threads == Some(0) {
        bail!("--threads must be >= 1");
    }
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Count(c) => cmd_count(c),
        Command::Ratefunc(a) => cmd_ratefunc(a),
        Command::Sweep(a) => cmd_sweep(a, threads),
        Command::Weights(a) => cmd_weights(a),
        Command::Verify(a) => {
            let ok = verify::run(a.suite, a.seed, a.trials, threads)?;
            Ok(if ok { 0 } else { EXIT_VERIFY_FAILED })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_MALFORMED } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_MALFORMED)
        }
    }
}
