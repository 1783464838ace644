//! Synthetic corpora and benchmark indexes.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, DeviceRecord, Pathway};
use crate::embedding::{
    embed_device, DeviceEmbeddings, EmbeddingError, EmbeddingProvider, EmbeddingVector, FeatureName, HashEmbedder,
    EMBEDDING_DIM,
};
use crate::extraction::{
    extract_features, ExtractOptions, ExtractionError, FeatureSet, MockProvider, SimulatedQueryProvider,
};
use crate::par::{try_map_indexed, Execution};
use crate::retrieval::{build_index_with, IndexConfig, RetrievalError, RetrievalWeights, SearchIndex};

const ANATOMY: &[&str] = &[
    "lung", "breast", "brain", "cardiac", "liver", "prostate", "kidney", "colon", "retina", "spine", "knee", "thyroid",
    "pancreas", "skin", "bone", "dental", "coronary", "carotid",
];
const MODALITY: &[&str] = &[
    "CT",
    "MRI",
    "mammography",
    "ultrasound",
    "radiograph",
    "PET",
    "fundus photography",
    "ECG",
    "EEG",
    "endoscopy",
    "dermoscopy",
    "tomosynthesis",
];
const TASK: &[&str] = &[
    "detection",
    "segmentation",
    "triage",
    "quantification",
    "classification",
    "measurement",
    "registration",
    "enhancement",
    "prioritization",
    "screening",
];
const FINDING: &[&str] = &[
    "nodule",
    "lesion",
    "hemorrhage",
    "stenosis",
    "fracture",
    "density",
    "calcification",
    "effusion",
    "pneumothorax",
    "occlusion",
    "arrhythmia",
    "apnea",
    "aneurysm",
    "polyp",
    "melanoma",
    "retinopathy",
    "embolism",
    "stroke",
    "tumor",
    "cyst",
];
const SYLLABLES: &[&str] = &[
    "ra", "ve", "lo", "qui", "den", "sor", "mi", "ta", "nex", "ul", "cor", "vi", "pra", "zen", "tho", "ly", "mar",
    "ki", "bel", "tron",
];

fn coined<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(3..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect()
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().collect::<String>() + c.as_str()).unwrap_or_default()
}

/// `n` devices with templated summaries. Devices share clinical vocabulary
/// (anatomy, modality, task, finding) but each also carries coined terms of
/// its own, so every device is distinguishable.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pathways = [Pathway::FiveTenK, Pathway::FiveTenK, Pathway::FiveTenK, Pathway::DeNovo, Pathway::Pma];
    let devices = (0..n)
        .map(|i| {
            let anatomy = *ANATOMY.choose(&mut rng).unwrap();
            let modality = *MODALITY.choose(&mut rng).unwrap();
            let task = *TASK.choose(&mut rng).unwrap();
            let finding = *FINDING.choose(&mut rng).unwrap();
            let terms: Vec<String> = (0..4).map(|_| coined(&mut rng)).collect();
            let name = format!("{}{}", capitalized(&coined(&mut rng)), capitalized(task));
            let company = format!("{} Medical", capitalized(&coined(&mut rng)));
            let pathway = *pathways.choose(&mut rng).unwrap();
            let summary = format!(
                "{name} is a software device for {task} of {anatomy} {finding} findings on {modality} studies. \
                 The {terms0} engine analyzes {terms1} features to flag suspected {finding} cases for clinician review. \
                 Performance was evaluated in a retrospective {anatomy} {modality} study with {cases} cases from {sites} sites. \
                 Sensitivity and specificity exceeded predefined {terms2} endpoints.\n\n\
                 The {terms3} module integrates with existing {modality} workflows and does not replace clinical judgment. \
                 Output includes {finding} localization and a {task} report for the {anatomy} examination.",
                terms0 = terms[0],
                terms1 = terms[1],
                terms2 = terms[2],
                terms3 = terms[3],
                cases = rng.random_range(100..2000),
                sites = rng.random_range(2..12),
            );
            DeviceRecord {
                submission_id: format!("K{:06}", 200_000 + i),
                device_name: name,
                company,
                pathway,
                panel: "Radiology".into(),
                decision_date: None,
                summary_text: summary,
            }
        })
        .collect();
    Corpus::new(devices, format!("synthetic-{n}-{seed}")).expect("unique ids")
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Extraction with [`MockProvider`] and embedding with [`HashEmbedder`].
pub fn mock_features_and_embeddings(
    corpus: &Corpus,
) -> Result<(Vec<FeatureSet>, Vec<DeviceEmbeddings>), PipelineError> {
    let devices = corpus.devices();
    let opts = ExtractOptions::default();
    let rows = try_map_indexed(devices.len(), Execution::auto(), |i| {
        let f = extract_features(&devices[i], &MockProvider, &opts)?;
        let e = embed_device(&f, &HashEmbedder)?;
        Ok::<_, PipelineError>((f, e))
    })?;
    Ok(rows.into_iter().unzip())
}

/// Full offline pipeline: mock extraction, hashing embeddings, index.
pub fn mock_index(corpus: Corpus) -> Result<SearchIndex, PipelineError> {
    let (features, embeddings) = mock_features_and_embeddings(&corpus)?;
    let config = IndexConfig { embedder_family: HashEmbedder.family(), ..IndexConfig::default() };
    Ok(build_index_with(corpus, features, embeddings, config)?)
}

/// Small vocabulary for randomized corpora; overlapping on purpose.
pub const SMALL_VOCAB: &[&str] = &[
    "cardiac",
    "mri",
    "segmentation",
    "lung",
    "ct",
    "nodule",
    "ultrasound",
    "breast",
    "density",
    "stroke",
    "triage",
    "retina",
    "fundus",
    "fracture",
    "radiograph",
    "apnea",
    "sleep",
    "eeg",
    "polyp",
    "colon",
    "liver",
    "lesion",
    "brain",
    "hemorrhage",
];

/// `1..=max_words` words drawn from [`SMALL_VOCAB`].
pub fn random_phrase<R: Rng + ?Sized>(rng: &mut R, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n).map(|_| SMALL_VOCAB[rng.random_range(0..SMALL_VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

/// A seeded index of 1 to 12 devices whose features are random phrases
/// over [`SMALL_VOCAB`], embedded with [`HashEmbedder`].
pub fn random_small_index(seed: u64) -> SearchIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=12);
    let mut devices = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("R{i:03}");
        let list = |rng: &mut ChaCha8Rng, k: usize| (0..k).map(|_| random_phrase(rng, 3)).collect::<Vec<_>>();
        let f = FeatureSet {
            device_id: id.clone(),
            summary: random_phrase(&mut rng, 8),
            keywords: list(&mut rng, 3),
            questions: list(&mut rng, 2),
            key_concepts: list(&mut rng, 2),
            thesis: random_phrase(&mut rng, 6),
            search_boost: random_phrase(&mut rng, 4),
            query_match_1: random_phrase(&mut rng, 4),
            query_match_2: random_phrase(&mut rng, 4),
            query_match_3: random_phrase(&mut rng, 4),
            warnings: Vec::new(),
        };
        devices.push(DeviceRecord {
            submission_id: id,
            device_name: format!("Device {i}"),
            company: "Acme".into(),
            pathway: Pathway::FiveTenK,
            panel: String::new(),
            decision_date: None,
            summary_text: f.summary.clone(),
        });
        features.push(f);
    }
    let embeddings =
        features.iter().map(|f| embed_device(f, &HashEmbedder).expect("hash embedder is infallible")).collect();
    let corpus = Corpus::new(devices, format!("random-{seed}")).expect("unique ids");
    build_index_with(corpus, features, embeddings, IndexConfig::default()).expect("aligned")
}

fn basis(i: usize) -> EmbeddingVector {
    let mut v = vec![0.0; EMBEDDING_DIM];
    v[i] = 1.0;
    EmbeddingVector::new(v).expect("finite")
}

/// Maps benchmark probe queries to basis vectors.
#[derive(Debug, Clone, Copy)]
pub struct ProbeEmbedder {
    n: usize,
}

pub const PROBE_PREFIX: &str = "probe ";

impl EmbeddingProvider for ProbeEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let i: usize = text
            .strip_prefix(PROBE_PREFIX)
            .and_then(|s| s.parse().ok())
            .filter(|&i| i < self.n)
            .ok_or_else(|| EmbeddingError::Provider(format!("not a probe query: {text:?}")))?;
        Ok(basis(i))
    }

    fn family(&self) -> String {
        "probe-basis".into()
    }
}

/// Generates `probe <i>` for the i-th benchmark device.
#[derive(Debug, Clone, Copy)]
pub struct ProbeQueries;

impl SimulatedQueryProvider for ProbeQueries {
    fn generate(&self, features: &FeatureSet) -> Result<String, ExtractionError> {
        let i: usize = features
            .device_id
            .trim_start_matches('B')
            .parse()
            .map_err(|_| ExtractionError::EmptyQuery(features.device_id.clone()))?;
        Ok(format!("{PROBE_PREFIX}{i}"))
    }
}

/// Tuning benchmark where only the thesis feature identifies a device.
///
/// Device `i`'s thesis vector is basis vector `eᵢ`, and the query generated
/// for it embeds to `eᵢ`, so the thesis cosine is 1 for the true device and
/// 0 for every other. The six other features say nothing about their own
/// device. Each of them is assigned `n / 6` target queries, and every device
/// points that feature at one of the targets (never itself) with cosine `c`,
/// where `c` ramps from 0.4 to 1.0 across the targets. Each target query thus
/// has at least five distractors scoring `c · w_f` against the true device's
/// `w_thesis`, so Hit@5 falls smoothly as `w_thesis / w_f` drops and is
/// perfect only when thesis carries the largest weight.
pub struct InformativeBenchmark {
    pub index: SearchIndex,
    pub pool: Vec<FeatureSet>,
    pub embedder: ProbeEmbedder,
    pub queries: ProbeQueries,
}

/// Cosine between a distractor and the `k`-th of `t` targets.
fn distractor_cosine(k: usize, t: usize) -> f64 {
    (0.4 + 0.8 * k as f64 / (t - 1) as f64).min(1.0)
}

impl InformativeBenchmark {
    pub const INFORMATIVE: FeatureName = FeatureName::Thesis;

    /// `n` devices; the last embedding dimension is reserved, so `n < 384`.
    pub fn new(n: usize, seed: u64) -> Self {
        assert!((36..EMBEDDING_DIM).contains(&n), "benchmark size must be in 36..384");
        let spare = EMBEDDING_DIM - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut rng);
        let per_feature = n / 6;

        let mut vectors: Vec<[EmbeddingVector; 7]> =
            (0..n).map(|_| std::array::from_fn(|_| EmbeddingVector::zeros())).collect();
        for (i, v) in vectors.iter_mut().enumerate() {
            v[FeatureName::Thesis.index()] = basis(i);
        }
        let noise = FeatureName::ALL.iter().filter(|&&f| f != Self::INFORMATIVE);
        for (g, feature) in noise.enumerate() {
            let targets = &ids[g * per_feature..(g + 1) * per_feature];
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for (slot, &dev) in order.iter().enumerate() {
                let mut k = slot % per_feature;
                if targets[k] == dev {
                    k = (k + 1) % per_feature;
                }
                let c = distractor_cosine(k, per_feature);
                let mut v = vec![0.0; EMBEDDING_DIM];
                v[targets[k]] = c;
                v[spare] = (1.0 - c * c).max(0.0).sqrt();
                vectors[dev][feature.index()] = EmbeddingVector::new(v).expect("finite");
            }
        }

        let devices: Vec<DeviceRecord> = (0..n)
            .map(|i| DeviceRecord {
                submission_id: format!("B{i:04}"),
                device_name: format!("Bench {i}"),
                company: "Bench".into(),
                pathway: Pathway::FiveTenK,
                panel: String::new(),
                decision_date: None,
                summary_text: format!("benchmark device {i}"),
            })
            .collect();
        let features: Vec<FeatureSet> = (0..n)
            .map(|i| FeatureSet {
                device_id: format!("B{i:04}"),
                keywords: vec![format!("bench{i}")],
                thesis: format!("benchmark device {i}"),
                ..FeatureSet::default()
            })
            .collect();
        let embeddings =
            vectors.into_iter().enumerate().map(|(i, v)| DeviceEmbeddings::new(format!("B{i:04}"), v)).collect();
        let corpus = Corpus::new(devices, "informative-benchmark").expect("unique ids");
        let index =
            build_index_with(corpus, features.clone(), embeddings, IndexConfig::default()).expect("aligned benchmark");
        Self { index, pool: features, embedder: ProbeEmbedder { n }, queries: ProbeQueries }
    }

    /// Thesis at the top of the range, everything else at the bottom.
    pub fn thesis_dominant_weights() -> RetrievalWeights {
        let mut w = [0.01; 7];
        w[FeatureName::Thesis.index()] = 0.5;
        RetrievalWeights::new(w, 1.0).expect("in range")
    }
}
