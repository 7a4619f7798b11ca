//! Closed-form rate functions and critical rates.
//!
//! Units: [`binary_entropy`], [`critical_rate_unconstrained`],
//! [`composition_growth_exponent`] and [`kary_rate_allocation`] are in bits.
//! [`relative_entropy`], [`phi`], [`psi`] and [`xi`] are in nats.
//! Infinite values are IEEE infinities (`f64::INFINITY` / `f64::NEG_INFINITY`),
//! never large finite stand-ins.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Below this `t` the stationarity map and the objective use their series.
const SERIES_CUTOFF: f64 = 1e-4;
const PHI_REL_TOL: f64 = 1e-12;
const PSI_TOL: f64 = 1e-10;
const XI_STEP: f64 = 1e-3;
const XI_TOL: f64 = 1e-9;

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} outside [0, 1]")))
    }
}

/// `x log2 x` with `0 log 0 = 0`.
fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

fn h2(p: f64) -> f64 {
    -xlog2x(p) - xlog2x(1.0 - p)
}

pub fn binary_entropy(p: f64) -> Result<f64> {
    check_unit("p", p)?;
    Ok(h2(p))
}

/// Shannon entropy of a probability vector, in bits.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| xlog2x(p)).sum::<f64>()
}

/// `D(beta || p)` between Bernoulli laws, in nats.
pub fn relative_entropy(beta: f64, p: f64) -> Result<f64> {
    check_unit("beta", beta)?;
    check_unit("p", p)?;
    Ok(kl(beta, p))
}

fn kl(beta: f64, p: f64) -> f64 {
    let term = |b: f64, q: f64| {
        if b == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            b * (b / q).ln()
        }
    };
    term(beta, p) + term(1.0 - beta, 1.0 - p)
}

/// Maximizer and value of `ln t - ln(1 - e^{-t}) - zeta t` over `t >= 0`.
///
/// For `zeta > 1/2` the fields describe the mirrored problem at `1 - zeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub zeta: f64,
    pub t_star: f64,
    pub phi_value: f64,
}

/// `1/t - 1/(e^t - 1)`; decreases from 1/2 at `t -> 0+` to 0.
pub fn stationarity_map(t: f64) -> f64 {
    if t < SERIES_CUTOFF {
        0.5 - t / 12.0 + t * t * t / 720.0
    } else {
        1.0 / t - (-t).exp() / -(-t).exp_m1()
    }
}

/// `ln t - ln(1 - e^{-t}) - zeta t`.
fn phi_objective(t: f64, zeta: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let log_ratio = if t < SERIES_CUTOFF {
        t / 2.0 - t * t / 24.0 + t.powi(4) / 2880.0
    } else {
        t.ln() - (-(-t).exp_m1()).ln()
    };
    log_ratio - zeta * t
}

fn solve_stationarity(zeta: f64) -> f64 {
    debug_assert!(zeta > 0.0 && zeta < 0.5);
    // stationarity_map(t) < 1/t, so the root lies below 1/zeta.
    let (mut lo, mut hi) = (0.0_f64, 1.0 / zeta);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if stationarity_map(mid) > zeta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= PHI_REL_TOL * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn phi(zeta: f64) -> Result<SaddleSolution> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid(format!("zeta = {zeta} outside (0, 1)")));
    }
    let z = if zeta > 0.5 { 1.0 - zeta } else { zeta };
    if z == 0.5 {
        return Ok(SaddleSolution {
            zeta,
            t_star: 0.0,
            phi_value: 0.0,
        });
    }
    let t_star = solve_stationarity(z);
    Ok(SaddleSolution {
        zeta,
        t_star,
        phi_value: phi_objective(t_star, z).max(0.0),
    })
}

/// `Phi` extended to `[0, 1]` with `Phi(0) = Phi(1) = +inf`.
pub(crate) fn phi_closed(zeta: f64) -> f64 {
    if zeta <= 0.0 || zeta >= 1.0 {
        f64::INFINITY
    } else {
        phi(zeta).map(|s| s.phi_value).unwrap_or(f64::INFINITY)
    }
}

/// Minimizes a unimodal function on `[lo, hi]` by ternary search.
fn ternary_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    while hi - lo > tol {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// `min_x beta Phi(x/beta) + (1-beta) Phi(x/(1-beta))` over `0 < x < min(beta, 1-beta)`.
pub fn psi(beta: f64) -> Result<f64> {
    check_unit("beta", beta)?;
    Ok(psi_unchecked(beta))
}

/// The objective minimized by [`psi`].
pub fn psi_objective(beta: f64, x: f64) -> f64 {
    beta * phi_closed(x / beta) + (1.0 - beta) * phi_closed(x / (1.0 - beta))
}

fn psi_unchecked(beta: f64) -> f64 {
    if beta <= 0.0 || beta >= 1.0 {
        return f64::INFINITY;
    }
    let upper = beta.min(1.0 - beta);
    ternary_min(0.0, upper, PSI_TOL, |x| psi_objective(beta, x)).1
}

/// `min_beta [D(beta || p) + psi(beta)]`, in nats.
pub fn xi(p: f64) -> Result<f64> {
    xi_with_step(p, XI_STEP)
}

/// [`xi`] with an explicit coarse-grid step.
pub fn xi_with_step(p: f64, step: f64) -> Result<f64> {
    check_unit("p", p)?;
    if !(step > 0.0 && step < 0.5) {
        return Err(invalid(format!("grid step {step} outside (0, 1/2)")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(f64::INFINITY);
    }
    let objective = |b: f64| kl(b, p) + psi_unchecked(b);
    let points = (1.0 / step).round() as usize;
    let (best_i, _) = (1..points)
        .map(|i| (i, objective(i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = ((best_i as f64 - 1.0) * step).max(0.0);
    let hi = ((best_i as f64 + 1.0) * step).min(1.0);
    Ok(ternary_min(lo, hi, XI_TOL, objective).1)
}

/// `log2(1 + e^{-xi(p)})`, in bits; `-inf` when `xi(p) = +inf`.
pub fn critical_rate_unconstrained(p: f64) -> Result<f64> {
    let x = xi(p)?;
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((-x).exp().ln_1p() / LN_2)
}

/// The objective maximized by [`composition_growth_exponent`].
pub fn composition_growth_objective(p: f64, alpha: f64) -> f64 {
    let q = 1.0 - p;
    p * h2(alpha / p) + q * h2(alpha / q)
}

/// `sup_{0 < alpha < min(p,q)} [p h(alpha/p) + q h(alpha/q)]`, in bits.
pub fn composition_growth_exponent(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p = {p} must lie in (0, 1)")));
    }
    let upper = p.min(1.0 - p);
    let (_, neg) = ternary_min(0.0, upper, PSI_TOL, |a| -composition_growth_objective(p, a));
    Ok(-neg)
}

/// Per-stage rates of the K-ary decomposition into binary stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub stage_rates: Vec<f64>,
    pub total: f64,
}

pub fn kary_rate_allocation(probs: &[f64]) -> Result<RateAllocation> {
    if probs.len() < 2 {
        return Err(invalid("probability vector needs K >= 2 entries"));
    }
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(invalid("probabilities must lie in [0, 1]"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("probabilities sum to {sum}, not 1")));
    }
    let stage_rates: Vec<f64> = (0..probs.len() - 1)
        .map(|s| {
            // remaining mass 1 - p_1 - ... - p_{s-1}, summed from the tail
            let rest: f64 = probs[s..].iter().sum();
            if rest <= 0.0 {
                0.0
            } else {
                rest * h2((probs[s] / rest).clamp(0.0, 1.0))
            }
        })
        .collect();
    let total = stage_rates.iter().sum();
    Ok(RateAllocation { stage_rates, total })
}

/// The named functions the CLI can tabulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateFunction {
    H,
    Phi,
    Psi,
    Xi,
    Rc,
}

impl RateFunction {
    pub fn eval(self, x: f64) -> Result<f64> {
        match self {
            RateFunction::H => binary_entropy(x),
            RateFunction::Phi => phi(x).map(|s| s.phi_value),
            RateFunction::Psi => psi(x),
            RateFunction::Xi => xi(x),
            RateFunction::Rc => critical_rate_unconstrained(x),
        }
    }
}

impl std::str::FromStr for RateFunction {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(RateFunction::H),
            "phi" => Ok(RateFunction::Phi),
            "psi" => Ok(RateFunction::Psi),
            "xi" => Ok(RateFunction::Xi),
            "rc" => Ok(RateFunction::Rc),
            other => Err(crate::Error::Parse(format!("unknown rate function {other:?}"))),
        }
    }
}
