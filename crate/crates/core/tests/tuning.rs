use devsearch::extraction::{KeywordFallback, SimulatedQueryProvider};
use devsearch::synthetic::{mock_index, synthetic_corpus, InformativeBenchmark};
use devsearch::tuning::{
    grid_search_lambda, optimize_weights, write_history, QueryCase, TpeConfig, TuningContext, TuningError,
};
use devsearch::{FeatureName, HashEmbedder, RetrievalWeights};

#[test]
fn same_seed_same_history() {
    let b = InformativeBenchmark::new(60, 1);
    let ctx = TuningContext { n_cases: 20, ..TuningContext::new(&b.index, &b.pool, &b.embedder, &b.queries) };
    let a = optimize_weights(&ctx, 15, &TpeConfig::with_seed(7)).unwrap();
    let c = optimize_weights(&ctx, 15, &TpeConfig::with_seed(7)).unwrap();
    assert_eq!(a, c);
    let d = optimize_weights(&ctx, 15, &TpeConfig::with_seed(8)).unwrap();
    assert_ne!(a.history, d.history);

    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_history(&p1, &a.history, &TpeConfig::with_seed(7)).unwrap();
    write_history(&p2, &c.history, &TpeConfig::with_seed(7)).unwrap();
    let text = std::fs::read_to_string(&p1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&p2).unwrap());
    assert_eq!(text.lines().count(), 15);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["trial_index", "weights", "objective", "validation_snapshot_id", "seed", "config_hash"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn single_trial_is_its_own_best() {
    let b = InformativeBenchmark::new(60, 1);
    let ctx = TuningContext::new(&b.index, &b.pool, &b.embedder, &b.queries);
    let out = optimize_weights(&ctx, 1, &TpeConfig::with_seed(3)).unwrap();
    assert_eq!(out.history.len(), 1);
    assert_eq!(out.best, out.history[0]);
    assert!(out.best.weights.weights().iter().all(|w| (0.01..=0.5).contains(w)));
    assert_eq!(out.best.weights.lambda(), 1.0);
    assert!(matches!(optimize_weights(&ctx, 0, &TpeConfig::default()), Err(TuningError::Config(_))));
}

#[test]
fn snapshots_advance_every_trial() {
    let b = InformativeBenchmark::new(60, 2);
    let ctx = TuningContext::new(&b.index, &b.pool, &b.embedder, &b.queries);
    let out = optimize_weights(&ctx, 12, &TpeConfig::with_seed(1)).unwrap();
    let ids: Vec<usize> = out.history.iter().map(|t| t.validation_snapshot_id).collect();
    assert_eq!(ids, (0..12).collect::<Vec<_>>());
    let best = out.history.iter().map(|t| t.objective).fold(f64::MIN, f64::max);
    assert_eq!(out.best.objective, best);
}

#[test]
fn tpe_finds_the_informative_feature() {
    let b = InformativeBenchmark::new(120, 11);
    let ctx = TuningContext::new(&b.index, &b.pool, &b.embedder, &b.queries);
    let mut thesis_max = 0;
    for seed in 0..5 {
        let out = optimize_weights(&ctx, 60, &TpeConfig::with_seed(seed)).unwrap();
        let w = out.best.weights;
        if FeatureName::ALL.iter().all(|&f| w.weight(f) <= w.weight(FeatureName::Thesis)) {
            thesis_max += 1;
        }
    }
    assert!(thesis_max >= 4, "thesis max in {thesis_max}/5 runs");
}

#[test]
fn grid_covers_unit_interval_and_picks_argmax() {
    let corpus = synthetic_corpus(40, 5);
    let index = mock_index(corpus).unwrap();
    let cases: Vec<QueryCase> = index
        .features()
        .iter()
        .map(|f| QueryCase { query: KeywordFallback.generate(f).unwrap(), ground_truth_device: f.device_id.clone() })
        .collect();
    let out = grid_search_lambda(&index, &RetrievalWeights::default(), &cases, &HashEmbedder, 21).unwrap();
    assert_eq!(out.curve.len(), 21);
    for (i, (l, _)) in out.curve.iter().enumerate() {
        assert!((l - i as f64 / 20.0).abs() < 1e-12);
    }
    assert_eq!(out.curve[0].0, 0.0);
    assert_eq!(out.curve[20].0, 1.0);
    let max = out.curve.iter().map(|c| c.1).fold(f64::MIN, f64::max);
    assert_eq!(out.best_objective, max);
    let last_max = out.curve.iter().rev().find(|c| c.1 == max).unwrap().0;
    assert_eq!(out.best_lambda, last_max);
}

#[test]
fn constant_curve_picks_lambda_one() {
    // singleton corpus: every λ ranks the device first
    let corpus = synthetic_corpus(1, 9);
    let index = mock_index(corpus).unwrap();
    let f = &index.features()[0];
    let cases = vec![QueryCase { query: "anything".into(), ground_truth_device: f.device_id.clone() }];
    let out = grid_search_lambda(&index, &RetrievalWeights::default(), &cases, &HashEmbedder, 21).unwrap();
    assert!(out.curve.iter().all(|c| c.1 == 1.0));
    assert_eq!(out.best_lambda, 1.0);
}

#[test]
fn unknown_ground_truth_is_an_error() {
    let b = InformativeBenchmark::new(60, 1);
    let cases = vec![QueryCase { query: "probe 1".into(), ground_truth_device: "NOPE".into() }];
    let err = grid_search_lambda(&b.index, &RetrievalWeights::default(), &cases, &b.embedder, 21).unwrap_err();
    assert!(matches!(err, TuningError::UnknownGroundTruth(_)));
}
