//! Self-check suites behind `subsum verify`.

use clap::ValueEnum;
use num_bigint::BigUint;
use subsum_core::counting::{
    expected_omega_constrained, expected_omega_unconstrained, lambda_inclusion_exclusion, lambda_table,
    lattice_volume_bounds_check, omega_grid, saddle_dominance_check,
};
use subsum_core::experiments::estimate_expected_omega;
use subsum_core::ratefuncs::{
    binary_entropy, composition_growth_exponent, critical_rate_unconstrained, kary_rate_allocation, shannon_entropy,
};
use subsum_core::Scheme;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Lambda,
    #[value(name = "appendixA", alias = "appendix-a")]
    AppendixA,
    #[value(name = "appendixB", alias = "appendix-b")]
    AppendixB,
    Omega,
    Ratefuncs,
    All,
}

struct Report {
    passed: usize,
    failed: Vec<String>,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

fn lambda(r: &mut Report) -> anyhow::Result<()> {
    let mut mismatches = 0usize;
    let mut tables = 0usize;
    for n in 1..=12usize {
        for level in 1..=64u64 {
            let t = lambda_table(n, level)?;
            tables += 1;
            let total_ok = t.total() == BigUint::from(level).pow(n as u32);
            let mirror = n as u64 * (level + 1);
            let sym_ok = t.iter().all(|(s, c)| *c == t.get(mirror - s));
            let ie_ok = t
                .iter()
                .all(|(s, c)| lambda_inclusion_exclusion(n, level, s).map(|v| v == *c).unwrap_or(false));
            mismatches += usize::from(!(total_ok && sym_ok && ie_ok));
        }
    }
    r.check(
        "lambda tables",
        mismatches == 0,
        format!("{tables} tables (n <= 12, L <= 64): DP = inclusion-exclusion, total L^n, mirror symmetry; {mismatches} mismatches"),
    );
    Ok(())
}

fn appendix_a(r: &mut Report) -> anyhow::Result<()> {
    let grid: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    for (n, level) in [(4usize, 50u64), (2, 1000)] {
        let rep = lattice_volume_bounds_check(n, level, &grid)?;
        let bad = rep.points.iter().filter(|p| !p.holds).count();
        r.check(
            &format!("lattice bounds n={n} L={level}"),
            rep.all_hold,
            format!("{} points, {bad} violations, worst |ln ratio| {:.4}", rep.points.len(), rep.worst_log_ratio),
        );
    }
    Ok(())
}

fn appendix_b(r: &mut Report) -> anyhow::Result<()> {
    let grid = omega_grid(10_000);
    for rr in [0.01, 0.1, 1.0, 10.0] {
        let rep = saddle_dominance_check(rr, &grid)?;
        r.check(
            &format!("saddle dominance r={rr}"),
            rep.holds(),
            format!(
                "gap at 0 = {:.1e}, min gap elsewhere {:.3e} at omega {:.4}",
                rep.gap_at_zero, rep.min_gap, rep.min_gap_omega
            ),
        );
    }
    Ok(())
}

fn omega(r: &mut Report, seed: u64, trials: usize) -> anyhow::Result<()> {
    let two = expected_omega_constrained(1, 1, 1)?;
    r.check("closed case N+=N-=1, L=1", two.to_f64() == 2.0, format!("<Omega> = {}", two.value));
    let half = expected_omega_constrained(1, 1, 2)?;
    r.check("closed case N+=N-=1, L=2", half.to_f64() == 1.5, format!("<Omega> = {}", half.value));
    for level in [4u64, 16, 64] {
        let exact = expected_omega_constrained(4, 4, level)?.to_f64();
        let est = estimate_expected_omega(Scheme::Constrained, 8, 0.5, level, trials, seed)?;
        let z = (est.mean - exact) / est.se.max(f64::MIN_POSITIVE);
        r.check(
            &format!("constrained N=8 L={level}"),
            z.abs() <= 4.0,
            format!("exact {exact:.6}, MC {:.6} +- {:.6} ({z:+.2} s.e.)", est.mean, est.se),
        );
    }
    let exact = expected_omega_unconstrained(6, 0.5, 8)?.to_f64();
    let est = estimate_expected_omega(Scheme::Unconstrained, 6, 0.5, 8, trials, seed)?;
    let z = (est.mean - exact) / est.se.max(f64::MIN_POSITIVE);
    r.check(
        "unconstrained N=6 L=8",
        z.abs() <= 4.0,
        format!("exact {exact:.6}, MC {:.6} +- {:.6} ({z:+.2} s.e.)", est.mean, est.se),
    );
    Ok(())
}

fn ratefuncs(r: &mut Report) -> anyhow::Result<()> {
    let half = critical_rate_unconstrained(0.5)?;
    r.check("R_c(1/2) = 1", (half - 1.0).abs() < 1e-6, format!("{half:.9}"));
    let ends = (critical_rate_unconstrained(0.0)?, critical_rate_unconstrained(1.0)?);
    r.check(
        "R_c(0) = R_c(1) = -inf",
        ends.0 == f64::NEG_INFINITY && ends.1 == f64::NEG_INFINITY,
        format!("{ends:?}"),
    );
    let mut worst_sym = 0.0f64;
    let mut bracket_ok = true;
    let mut worst_growth = 0.0f64;
    for i in 1..10 {
        let p = i as f64 / 10.0;
        let rc = critical_rate_unconstrained(p)?;
        let h = binary_entropy(p)?;
        bracket_ok &= rc >= h - 1e-9 && (rc < 1.0 || i == 5);
        worst_sym = worst_sym.max((rc - critical_rate_unconstrained(1.0 - p)?).abs());
        worst_growth = worst_growth.max((composition_growth_exponent(p)? - h).abs());
    }
    r.check("h(p) <= R_c(p) < 1", bracket_ok, "p = 0.1..0.9".into());
    r.check("R_c symmetric", worst_sym < 1e-8, format!("max |R_c(p) - R_c(1-p)| = {worst_sym:.2e}"));
    r.check("growth exponent = h", worst_growth < 1e-8, format!("max deviation {worst_growth:.2e}"));
    let mut worst_chain = 0.0f64;
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    for _ in 0..1000 {
        let k = 2 + (state % 6) as usize;
        let mut v: Vec<f64> = (0..k)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        let fix: f64 = 1.0 - v[1..].iter().sum::<f64>();
        v[0] = fix.max(0.0);
        worst_chain = worst_chain.max((kary_rate_allocation(&v)?.total - shannon_entropy(&v)).abs());
    }
    r.check("K-ary chain rule", worst_chain < 1e-12, format!("max deviation {worst_chain:.2e} over 1000 vectors"));
    Ok(())
}

/// Runs `suite`; returns whether every check passed.
pub fn run(suite: Suite, seed: u64, trials: usize, threads: Option<usize>) -> anyhow::Result<bool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    let mut report = Report {
        passed: 0,
        failed: Vec::new(),
    };
    pool.install(|| -> anyhow::Result<()> {
        let all = suite == Suite::All;
        if all || suite == Suite::Lambda {
            lambda(&mut report)?;
        }
        if all || suite == Suite::AppendixA {
            appendix_a(&mut report)?;
        }
        if all || suite == Suite::AppendixB {
            appendix_b(&mut report)?;
        }
        if all || suite == Suite::Omega {
            omega(&mut report, seed, trials)?;
        }
        if all || suite == Suite::Ratefuncs {
            ratefuncs(&mut report)?;
        }
        Ok(())
    })?;
    println!("{} passed, {} failed", report.passed, report.failed.len());
    if !report.failed.is_empty() {
        println!("failures: {}", report.failed.join(", "));
    }
    Ok(report.failed.is_empty())
}
