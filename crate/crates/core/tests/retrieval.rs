mod common;

use std::collections::BTreeSet;

use common::{device, features, index};
use devsearch::embedding::embed_device;
use devsearch::par::Execution;
use devsearch::retrieval::{
    build_index, hybrid_score, keyword_search, keyword_search_with, search_with, KeywordMode, RetrievalError,
    DEFAULT_LAMBDA, DEFAULT_WEIGHTS,
};
use devsearch::synthetic::{random_phrase, random_small_index};
use devsearch::text::tokenize;
use devsearch::{Corpus, EmbeddingProvider, EmbeddingVector, HashEmbedder, RetrievalWeights, SearchIndex};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn breast_and_sleep() -> SearchIndex {
    index(vec![
        (
            device("K250001", "DensityCheck", "Mammo Inc"),
            features(
                "K250001",
                &["mammography", "breast density"],
                "Assesses breast density on mammograms.",
                &["density grading"],
            ),
        ),
        (
            device("K190002", "SleepWatch", "Rest Co"),
            features(
                "K190002",
                &["sleep apnea", "oximetry"],
                "Detects obstructive sleep apnea from wearable signals.",
                &["apnea hypopnea index"],
            ),
        ),
        (
            device("DEN200003", "LungFind", "Chest AI"),
            features("DEN200003", &["lung nodule", "ct"], "Flags lung nodules on chest CT.", &["nodule detection"]),
        ),
    ])
}

#[test]
fn keyword_breast_density_matches() {
    let idx = breast_and_sleep();
    assert_eq!(keyword_search(&idx, "breast density"), ["K250001"]);
}

#[test]
fn keyword_absent_term_is_empty() {
    assert!(keyword_search(&breast_and_sleep(), "genitourinary").is_empty());
}

#[test]
fn keyword_matches_id_substring() {
    let idx = breast_and_sleep();
    assert_eq!(keyword_search(&idx, "K25"), ["K250001"]);
    assert!(keyword_search(&idx, "").is_empty());
    assert!(keyword_search(&idx, "   ").is_empty());
}

#[test]
fn keyword_whole_word_mode_is_stricter() {
    let idx = breast_and_sleep();
    assert_eq!(keyword_search_with(&idx, "dens", KeywordMode::Substring), ["K250001"]);
    assert!(keyword_search_with(&idx, "dens", KeywordMode::WholeWord).is_empty());
    assert_eq!(keyword_search_with(&idx, "density", KeywordMode::WholeWord), ["K250001"]);
}

#[test]
fn keyword_results_in_corpus_order() {
    let idx = breast_and_sleep();
    // corpus order is ascending id
    assert_eq!(keyword_search(&idx, "e"), ["DEN200003", "K190002", "K250001"]);
}

#[test]
fn bm25_statistics_from_document_lengths() {
    let idx = index(vec![
        (device("A", "a", "x"), features("A", &["cardiac mri segmentation tool"], "", &[])),
        (device("B", "b", "x"), features("B", &["lung ct nodule"], "cardiac follow up", &[])),
        (device("C", "c", "x"), features("C", &["one two three four"], "five six seven eight", &[])),
    ]);
    let stats = idx.bm25_stats();
    assert_eq!(stats.doc_len, [4, 6, 8]);
    assert_eq!(stats.avg_len, 6.0);
    assert_eq!(stats.doc_freq["cardiac"], 2);
    assert_eq!(stats.n_docs, 3);
}

#[test]
fn bm25_score_zero_cases_and_unknown_device() {
    let idx = breast_and_sleep();
    assert_eq!(idx.bm25_score(&tokenize("genitourinary"), "K250001").unwrap(), 0.0);
    assert_eq!(idx.bm25_score(&[], "K250001").unwrap(), 0.0);
    assert!(idx.bm25_score(&tokenize("density"), "K250001").unwrap() > 0.0);
    assert!(matches!(idx.bm25_score(&[], "NOPE"), Err(RetrievalError::UnknownDevice(_))));
}

#[test]
fn missing_embeddings_name_the_device() {
    let rows = [
        (device("A1", "a", "x"), features("A1", &["k"], "t", &["c"])),
        (device("B2", "b", "x"), features("B2", &["k"], "t", &["c"])),
    ];
    let corpus = Corpus::new(rows.iter().map(|r| r.0.clone()).collect(), "t").unwrap();
    let feats: Vec<_> = rows.iter().map(|r| r.1.clone()).collect();
    let embs = vec![embed_device(&feats[0], &HashEmbedder).unwrap()];
    match build_index(corpus, feats, embs) {
        Err(RetrievalError::Coverage(ids)) => assert_eq!(ids, ["B2"]),
        other => panic!("expected coverage error, got {other:?}"),
    }
}

#[test]
fn singleton_corpus_ranks_its_device_first() {
    let idx = index(vec![(device("K1", "Solo", "x"), features("K1", &["only"], "single device", &["one"]))]);
    for q in ["anything at all", "", "single", "🦀"] {
        let r = search_with(&idx, &RetrievalWeights::default(), q, &HashEmbedder, 10, Execution::Sequential).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].device_id.as_str(), r[0].rank), ("K1", 1));
    }
}

#[test]
fn equal_scores_order_by_submission_id() {
    let f = |id| features(id, &["same words"], "identical thesis", &["same concept"]);
    let idx = index(vec![
        (device("K3", "n", "c"), f("K3")),
        (device("K1", "n", "c"), f("K1")),
        (device("K2", "n", "c"), f("K2")),
    ]);
    let r = search_with(&idx, &RetrievalWeights::default(), "identical thesis", &HashEmbedder, 3, Execution::Parallel)
        .unwrap();
    assert_eq!(r.iter().map(|r| r.device_id.as_str()).collect::<Vec<_>>(), ["K1", "K2", "K3"]);
    assert_eq!(r.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    assert_eq!(r[0].score, r[2].score);
}

#[test]
fn own_thesis_retrieves_device_among_disjoint_distractors() {
    let idx = index(vec![
        (device("A", "a", "x"), features("A", &["alpha beta"], "gamma delta epsilon", &["zeta"])),
        (device("B", "b", "y"), features("B", &["lung nodule"], "chest ct screening", &["detection"])),
        (device("C", "c", "z"), features("C", &["sleep apnea"], "wearable oximetry monitor", &["hypopnea"])),
    ]);
    for (id, q) in [("A", "gamma delta epsilon"), ("B", "chest ct screening"), ("C", "wearable oximetry monitor")] {
        let r = search_with(&idx, &RetrievalWeights::default(), q, &HashEmbedder, 1, Execution::auto()).unwrap();
        assert_eq!(r[0].device_id, id);
    }
}

#[test]
fn k_beyond_corpus_returns_full_ranking() {
    let idx = breast_and_sleep();
    let r = search_with(&idx, &RetrievalWeights::default(), "lung", &HashEmbedder, 100, Execution::auto()).unwrap();
    assert_eq!(r.len(), 3);
}

#[test]
fn default_weights_hand_arithmetic() {
    // one device whose keywords vector equals the query; other features orthogonal
    let idx = breast_and_sleep();
    let q = idx.embeddings()[0].get(devsearch::FeatureName::Keywords).clone();
    let w = RetrievalWeights::default();
    assert_eq!(w.weights(), &DEFAULT_WEIGHTS);
    assert_eq!(w.lambda(), DEFAULT_LAMBDA);
    let c = hybrid_score(&idx, &w, &q, &[], "DEN200003", 0.0).unwrap();
    let cos: Vec<f64> = idx.embeddings()[0].vectors().iter().map(|v| devsearch::cosine_similarity(&q, v)).collect();
    let expected: f64 = DEFAULT_WEIGHTS.iter().zip(&cos).map(|(w, c)| w * c).sum::<f64>() / w.sum();
    assert!((c.embedding_component - expected).abs() < 1e-9);
    assert_eq!(c.bm25_component_normalized, 0.0);
    assert!((c.score - 0.8 * expected).abs() < 1e-9);
}

#[test]
fn equal_cosines_give_weighted_mean() {
    // every feature identical, so all seven cosines coincide
    let same = |id| {
        let mut f = features(id, &["cardiac mri"], "cardiac mri", &["cardiac mri"]);
        f.questions = vec!["cardiac mri".into()];
        f.search_boost = "cardiac mri".into();
        f.query_match_1 = "cardiac mri".into();
        f.query_match_2 = "cardiac mri".into();
        f.query_match_3 = "cardiac mri".into();
        f
    };
    let idx = index(vec![(device("A", "a", "x"), same("A"))]);
    let q = HashEmbedder.embed("cardiac").unwrap();
    let cos = devsearch::cosine_similarity(&q, idx.embeddings()[0].get(devsearch::FeatureName::Thesis));
    for w in [RetrievalWeights::default(), RetrievalWeights::new([0.5, 0.01, 0.2, 0.3, 0.05, 0.4, 0.1], 1.0).unwrap()] {
        let w = w.with_lambda(1.0).unwrap();
        let c = hybrid_score(&idx, &w, &q, &[], "A", 0.0).unwrap();
        assert!((c.score - cos).abs() < 1e-12);
    }
}

#[test]
fn lambda_zero_is_normalized_bm25() {
    let idx = breast_and_sleep();
    let w = RetrievalWeights::default().with_lambda(0.0).unwrap();
    let r = search_with(&idx, &w, "sleep apnea", &HashEmbedder, 3, Execution::auto()).unwrap();
    assert_eq!(r[0].device_id, "K190002");
    for x in &r {
        assert_eq!(x.score, x.bm25_component_normalized);
    }
    assert_eq!(r[0].score, 1.0);
}

#[test]
fn persisted_index_searches_identically() {
    let idx = breast_and_sleep();
    let dir = tempfile::tempdir().unwrap();
    let h1 = idx.save(dir.path()).unwrap();
    let (loaded, h2) = SearchIndex::load(dir.path()).unwrap();
    assert_eq!(h1, h2);
    assert_eq!(idx.manifest(), loaded.manifest());
    for q in ["breast density", "sleep", "K19", "lung nodule ct"] {
        let a = search_with(&idx, &RetrievalWeights::default(), q, &HashEmbedder, 3, Execution::auto()).unwrap();
        let b = search_with(&loaded, &RetrievalWeights::default(), q, &HashEmbedder, 3, Execution::auto()).unwrap();
        let ids = |v: &[devsearch::ScoredResult]| v.iter().map(|r| r.device_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        for (x, y) in a.iter().zip(&b) {
            // embeddings are stored as f32
            assert!((x.score - y.score).abs() < 1e-6);
        }
        assert_eq!(keyword_search(&idx, q), keyword_search(&loaded, q));
    }
}

#[test]
fn corrupted_manifest_is_rejected() {
    let idx = breast_and_sleep();
    let dir = tempfile::tempdir().unwrap();
    idx.save(dir.path()).unwrap();
    std::fs::write(dir.path().join(devsearch::retrieval::MANIFEST_FILE), "{").unwrap();
    assert!(SearchIndex::load(dir.path()).is_err());
}

fn ids(r: &[devsearch::ScoredResult]) -> Vec<String> {
    r.iter().map(|x| x.device_id.clone()).collect()
}

/// Reference ordering: descending key, ascending id.
fn order_by(r: &[devsearch::ScoredResult], key: impl Fn(&devsearch::ScoredResult) -> f64) -> Vec<String> {
    let mut v: Vec<_> = r.iter().collect();
    v.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap().then(a.device_id.cmp(&b.device_id)));
    v.into_iter().map(|x| x.device_id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hybrid_algebra(seed in any::<u64>(), lambda in 0.0f64..=1.0, alpha in 0.5f64..2.0,
                      w in prop::array::uniform7(0.02f64..0.25)) {
        let idx = random_small_index(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let q = random_phrase(&mut rng, 4);
        let n = idx.len();
        let weights = RetrievalWeights::new(w, lambda).unwrap();
        let r = search_with(&idx, &weights, &q, &HashEmbedder, n, Execution::auto()).unwrap();

        // full permutation
        let got: BTreeSet<_> = ids(&r).into_iter().collect();
        prop_assert_eq!(got.len(), n);
        prop_assert_eq!(r.iter().map(|x| x.rank).collect::<Vec<_>>(), (1..=n).collect::<Vec<_>>());

        // decomposition, normalized bm25 bounds
        for x in &r {
            let blend = lambda * x.embedding_component + (1.0 - lambda) * x.bm25_component_normalized;
            prop_assert!((x.score - blend).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&x.bm25_component_normalized));
        }
        let max = r.iter().map(|x| x.bm25_component_normalized).fold(0.0, f64::max);
        let any_match = idx.corpus().iter().any(|d| idx.bm25_score(&tokenize(&q), &d.submission_id).unwrap() > 0.0);
        prop_assert_eq!(max, if any_match { 1.0 } else { 0.0 });

        // boundary reductions
        let r1 = search_with(&idx, &weights.with_lambda(1.0).unwrap(), &q, &HashEmbedder, n, Execution::auto()).unwrap();
        prop_assert_eq!(ids(&r1), order_by(&r1, |x| x.embedding_component));
        let r0 = search_with(&idx, &weights.with_lambda(0.0).unwrap(), &q, &HashEmbedder, n, Execution::auto()).unwrap();
        prop_assert_eq!(ids(&r0), order_by(&r0, |x| x.bm25_component_normalized));

        // scaling invariance
        let scaled = RetrievalWeights::new(w.map(|v| v * alpha), lambda).unwrap();
        let rs = search_with(&idx, &scaled, &q, &HashEmbedder, n, Execution::auto()).unwrap();
        for x in &rs {
            let y = r.iter().find(|y| y.device_id == x.device_id).unwrap();
            prop_assert!((x.score - y.score).abs() < 1e-9);
        }
    }

    #[test]
    fn sequential_and_parallel_agree(seed in any::<u64>()) {
        let idx = random_small_index(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_phrase(&mut rng, 3);
        let w = RetrievalWeights::default();
        let a = search_with(&idx, &w, &q, &HashEmbedder, idx.len(), Execution::Sequential).unwrap();
        let b = search_with(&idx, &w, &q, &HashEmbedder, idx.len(), Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn keyword_invariant_to_order_and_case(seed in any::<u64>()) {
        let idx = random_small_index(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let q = random_phrase(&mut rng, 3);
        let mut words: Vec<&str> = q.split_whitespace().collect();
        words.reverse();
        let reordered = words.join(" ").to_uppercase();
        prop_assert_eq!(keyword_search(&idx, &q), keyword_search(&idx, &reordered));
    }

    #[test]
    fn query_embedding_never_panics(q in "\\PC{0,40}") {
        let idx = random_small_index(3);
        let v: EmbeddingVector = HashEmbedder.embed(&q).unwrap();
        let r = search_with(&idx, &RetrievalWeights::default(), &q, &HashEmbedder, 5, Execution::auto()).unwrap();
        prop_assert!(!r.is_empty());
        prop_assert!(r.iter().all(|x| x.score.is_finite()));
        prop_assert!(v.is_zero() || (v.norm() - 1.0).abs() < 1e-9);
    }
}
