use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use iclparse_core::sampler::{self, dbscan::dbscan_1d, SamplerConfig};
use iclparse_core::selector::{Bm25Index, PromptOrder};
use iclparse_core::{tokenize, Execution, LogRecord, Template};

const WORDS: &[&str] = &[
    "session",
    "closed",
    "opened",
    "for",
    "user",
    "root",
    "block",
    "blk_38865",
    "received",
    "from",
    "10.251.43.21",
    "size",
    "67108864",
    "packet",
    "responder",
    "terminating",
    "error",
    "disk",
    "full",
    "connection",
    "reset",
    "by",
    "peer",
    "took",
    "ms",
];

fn corpus(n: usize, seed: u64) -> Vec<LogRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(3..14);
            let words: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
            LogRecord::new(i as u64 + 1, format!("{} {i}", words.join(" ")), "bench").unwrap()
        })
        .collect()
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench_complexity(c: &mut Criterion) {
    let mut g = c.benchmark_group("complexity");
    for n in [10_000, 100_000] {
        let records = corpus(n, 1);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &records, |b, recs| {
                b.iter(|| exec.map(recs, |r| sampler::complexity(&tokenize(&r.content))))
            });
        }
    }
    g.finish();
}

fn bench_dbscan(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbscan_1d");
    for n in [10_000, 100_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5_000.0)).collect();
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &values, |b, v| {
                b.iter(|| dbscan_1d(black_box(v), 10.0, 5, exec))
            });
        }
    }
    g.finish();
}

fn bench_sample(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample");
    g.sample_size(10);
    let records = corpus(50_000, 3);
    let config = SamplerConfig {
        sample_ratio: 0.01,
        ..SamplerConfig::default()
    };
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| sampler::sample_with(&records, &config, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_bm25(c: &mut Criterion) {
    let mut g = c.benchmark_group("bm25_top_k");
    for n in [1_000, 20_000] {
        let pool: Vec<(LogRecord, Template)> = corpus(n, 4)
            .into_iter()
            .map(|r| {
                let t = Template::new(format!("{} <*>", r.content)).unwrap();
                (r, t)
            })
            .collect();
        let index = Bm25Index::build(pool, Bm25Index::DEFAULT_K1, Bm25Index::DEFAULT_B).unwrap();
        let query = tokenize("session closed for user root block blk_38865 took ms");
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &index, |b, idx| {
                b.iter(|| idx.top_k_with(black_box(&query), 5, PromptOrder::Ascending, exec))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_complexity, bench_dbscan, bench_sample, bench_bm25);
criterion_main!(benches);
