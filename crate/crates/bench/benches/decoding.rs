use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use stackparse::numcore::Tensor;
use stackparse::parser::{decode_greedy, decode_mst, decode_mst_single_root};
use stackparse::tagger::{crf_log_partition, viterbi_decode};

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
}

fn crf(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("crf");
    for n in [10, 40] {
        let em = random(&mut rng, n, 17);
        let tr = random(&mut rng, 19, 19);
        group.bench_with_input(BenchmarkId::new("viterbi", n), &n, |b, _| b.iter(|| viterbi_decode(black_box(&em), &tr)));
        group.bench_with_input(BenchmarkId::new("log_partition", n), &n, |b, _| {
            b.iter(|| crf_log_partition(black_box(&em), &tr))
        });
    }
    group.finish();
}

fn trees(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("tree");
    for n in [10, 40] {
        let s = random(&mut rng, n + 1, n + 1);
        group.bench_with_input(BenchmarkId::new("greedy", n), &n, |b, _| b.iter(|| decode_greedy(black_box(&s))));
        group.bench_with_input(BenchmarkId::new("mst", n), &n, |b, _| b.iter(|| decode_mst(black_box(&s))));
        group.bench_with_input(BenchmarkId::new("mst_single_root", n), &n, |b, _| {
            b.iter(|| decode_mst_single_root(black_box(&s)))
        });
    }
    group.finish();
}

criterion_group!(benches, crf, trees);
criterion_main!(benches);
