use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use devsearch::par::Execution;
use devsearch::retrieval::search_with;
use devsearch::synthetic::{mock_index, synthetic_corpus};
use devsearch::tuning::{objective_hit5, QueryCase};
use devsearch::{HashEmbedder, RetrievalWeights};

const QUERIES: &[&str] =
    &["lung nodule ct", "breast density mammography", "sleep apnea", "stroke triage brain hemorrhage"];

fn modes() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    if cfg!(feature = "parallel") {
        v.push(("parallel", Execution::Parallel));
    }
    v
}

fn bench_search(c: &mut Criterion) {
    let index = mock_index(synthetic_corpus(1247, 0)).expect("synthetic index");
    let weights = RetrievalWeights::default();
    let mut group = c.benchmark_group("hybrid_search_1247");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                for q in QUERIES {
                    black_box(search_with(&index, &weights, q, &HashEmbedder, 10, exec).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn bench_build(c: &mut Criterion) {
    let corpus = synthetic_corpus(300, 1);
    c.bench_function("mock_index_300", |b| b.iter(|| black_box(mock_index(corpus.clone()).unwrap())));
}

fn bench_objective(c: &mut Criterion) {
    let index = mock_index(synthetic_corpus(400, 2)).expect("synthetic index");
    let cases: Vec<QueryCase> = index
        .features()
        .iter()
        .take(50)
        .map(|f| QueryCase { query: f.keywords[..2].join(" "), ground_truth_device: f.device_id.clone() })
        .collect();
    let weights = RetrievalWeights::default().with_lambda(1.0).unwrap();
    c.bench_function("objective_hit5_50_cases", |b| {
        b.iter(|| black_box(objective_hit5(&index, &weights, &cases, &HashEmbedder).unwrap()))
    });
}

criterion_group!(benches, bench_search, bench_build, bench_objective);
criterion_main!(benches);
