use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plurisem_bench::{burst_signal, gold_index, random_matrix};
use plurisem_core::cfbsf::{self, CfbsfConfig};
use plurisem_core::eval;
use plurisem_core::isomorphy;
use plurisem_core::linmap::{self, SolveOptions};

fn least_squares(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_least_squares");
    g.sample_size(10);
    for (n, p) in [(2000, 300), (300, 3000)] {
        let x = random_matrix(2, n, p);
        let y = random_matrix(3, n, 300);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{n}x{p}")), &(x, y), |b, (x, y)| {
            b.iter(|| linmap::solve_least_squares(x, y, SolveOptions::default()).unwrap())
        });
    }
    g.finish();
}

fn extract(c: &mut Criterion) {
    let cfg = CfbsfConfig::default();
    let signal = burst_signal(2, 0.5);
    c.bench_function("cfbsf_extract_0.5s", |b| {
        b.iter(|| cfbsf::extract_signal(&signal, "bench", &cfg).unwrap())
    });
}

fn edit_distance(c: &mut Criterion) {
    let a: Vec<u8> = b"SIHNTAEKTIHKAHLIY".to_vec();
    let b: Vec<u8> = b"SIHMAENTIHKSAHLZ".to_vec();
    c.bench_function("damerau_levenshtein_osa", |bn| bn.iter(|| isomorphy::damerau_levenshtein(&a, &b)));
    c.bench_function("damerau_levenshtein_full", |bn| {
        bn.iter(|| isomorphy::damerau_levenshtein_full(&a, &b))
    });
}

fn ranking(c: &mut Criterion) {
    let gold = gold_index(1000, 300);
    let predictions = random_matrix(4, 500, 300);
    let targets: Vec<String> = (0..500).map(|i| format!("w{:05}", i * 3)).collect();
    let mut g = c.benchmark_group("rank_predictions");
    g.sample_size(10);
    g.bench_function("500x2000", |b| {
        b.iter(|| eval::rank_predictions(&predictions, &targets, &gold).unwrap())
    });
    g.finish();
}

criterion_group!(benches, least_squares, extract, edit_distance, ranking);
criterion_main!(benches);
