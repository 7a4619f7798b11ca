use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use subsum_core::codec::{decode, encode};
use subsum_core::counting::{expected_omega_constrained, lambda_table};
use subsum_core::experiments::level_for_rate;
use subsum_core::ratefuncs::{phi, xi};
use subsum_core::{sample_weights, Scheme, SourceSequence, Strategy};

fn counting(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda_table");
    for (n, level) in [(12usize, 64u64), (40, 64), (16, 4096)] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_L{level}")), &(n, level), |b, &(n, l)| {
            b.iter(|| lambda_table(black_box(n), black_box(l)).unwrap())
        });
    }
    g.finish();
    c.bench_function("expected_omega_constrained/8_8_L4096", |b| {
        b.iter(|| expected_omega_constrained(black_box(8), black_box(8), black_box(4096)).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let mut g = c.benchmark_group("decode");
    g.sample_size(20);
    for (n, strategies) in [
        (16usize, &[Strategy::Exhaustive, Strategy::MeetInMiddle][..]),
        (32, &[Strategy::MeetInMiddle][..]),
    ] {
        let weights = sample_weights(n, level_for_rate(n, 1.0).unwrap(), 7).unwrap();
        let seq = SourceSequence::binary((0..n).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect()).unwrap();
        for scheme in [Scheme::Constrained, Scheme::Unconstrained] {
            let msg = encode(scheme, &seq, &weights).unwrap();
            for &strategy in strategies {
                let id = BenchmarkId::new(format!("{scheme}/{strategy:?}"), n);
                g.bench_function(id, |b| b.iter(|| decode(black_box(&msg), &weights, strategy).unwrap()));
            }
        }
    }
    g.finish();
}

fn rate_functions(c: &mut Criterion) {
    c.bench_function("phi/0.25", |b| b.iter(|| phi(black_box(0.25)).unwrap()));
    c.bench_function("xi/0.3", |b| b.iter(|| xi(black_box(0.3)).unwrap()));
}

criterion_group!(benches, counting, decoding, rate_functions);
criterion_main!(benches);
