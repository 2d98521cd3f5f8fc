//! Browser demo: runs the matching-audit pipeline on a bundled sample
//! taxonomy, exposing three interactive operations to the page. All exports
//! return JSON strings for the page script to parse.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use skillmatch_core::evaluate::{
    evaluate_all, gsr_audit, EvalConfig, EvalResources, MetricKind, VectorPipeline,
};
use skillmatch_core::project::emit_projection;
use skillmatch_core::scoring::MatchModel;
use skillmatch_core::simulation::generate_pairs;
use skillmatch_core::taxonomy::{parse_taxonomy, skill_text_corpus, Taxonomy};
use skillmatch_core::vectorize::{
    fit_bow, parse_embeddings, AnyVectorizer, EmbeddingTable, LoadedEmbeddings, VectorizerKind,
    Vocabulary,
};

const OCCUPATIONS_CSV: &str = include_str!("../../../sample/occupations.csv");
const SKILLS_CSV: &str = include_str!("../../../sample/skills.csv");
const GENDER_CSV: &str = include_str!("../../../sample/gender.csv");
const EMBEDDINGS_TXT: &str = include_str!("../../../sample/embeddings.txt");

fn taxonomy() -> &'static Taxonomy {
    static TAXONOMY: OnceLock<Taxonomy> = OnceLock::new();
    TAXONOMY.get_or_init(|| {
        parse_taxonomy(
            (OCCUPATIONS_CSV, "occupations.csv"),
            (SKILLS_CSV, "skills.csv"),
            Some((GENDER_CSV, "gender.csv")),
        )
        .expect("bundled sample taxonomy is valid")
        .taxonomy
    })
}

fn bow_vocabulary() -> &'static Vocabulary {
    static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
    VOCAB.get_or_init(|| {
        let corpus = skill_text_corpus(taxonomy()).expect("sample occupations have skills");
        fit_bow(&corpus).expect("sample corpus is non-empty")
    })
}

fn embedding_table() -> &'static EmbeddingTable {
    static TABLE: OnceLock<EmbeddingTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        parse_embeddings(EMBEDDINGS_TXT, "embeddings.txt")
            .expect("bundled sample embeddings are valid")
            .table
    })
}

fn vectorizer_for(name: &str) -> Result<AnyVectorizer, String> {
    match VectorizerKind::parse(name) {
        Some(VectorizerKind::Bow) => Ok(AnyVectorizer::Bow(bow_vocabulary().clone())),
        Some(VectorizerKind::WordVec) => Ok(AnyVectorizer::WordVec(embedding_table().clone())),
        _ => Err(format!(
            "vectorizer {name:?} is not available in the demo (bow|wordvec)"
        )),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// PCA map of the sample occupations under the chosen vectorizer.
#[wasm_bindgen]
pub fn projection(vectorizer: &str) -> Result<String, JsError> {
    projection_json(vectorizer).map_err(|e| JsError::new(&e))
}

/// Simulates a pair dataset and evaluates the chosen vectorizer under all
/// three metrics, returning AUC and GSR per row.
#[wasm_bindgen]
pub fn benchmark(vectorizer: &str, n_pairs: u32, seed: u32) -> Result<String, JsError> {
    benchmark_json(vectorizer, n_pairs, seed).map_err(|e| JsError::new(&e))
}

/// Gender-segregation audit scatter for one (vectorizer, metric) model:
/// each occupation's own female share against the mean share of its top-k
/// highest-scoring occupations.
#[wasm_bindgen]
pub fn audit(vectorizer: &str, metric: &str, top_k: u32, seed: u32) -> Result<String, JsError> {
    audit_json(vectorizer, metric, top_k, seed).map_err(|e| JsError::new(&e))
}

pub fn projection_json(vectorizer: &str) -> Result<String, String> {
    #[derive(Serialize)]
    struct Out {
        rows: Vec<Row>,
        explained_variance: (f64, f64),
    }
    #[derive(Serialize)]
    struct Row {
        code: String,
        title: String,
        x: f64,
        y: f64,
        female_share: Option<f64>,
    }
    let v = vectorizer_for(vectorizer)?;
    let proj = emit_projection(taxonomy(), &v).map_err(|e| e.to_string())?;
    let rows = proj
        .rows
        .into_iter()
        .map(|r| Row {
            code: r.code,
            title: r.title,
            x: r.x,
            y: r.y,
            female_share: r.female_share,
        })
        .collect();
    to_json(&Out {
        rows,
        explained_variance: proj.explained_variance,
    })
}

pub fn benchmark_json(vectorizer: &str, n_pairs: u32, seed: u32) -> Result<String, String> {
    #[derive(Serialize)]
    struct Row {
        vectorizer: String,
        metric: String,
        auc: Option<f64>,
        gsr: Option<f64>,
        warnings: Vec<String>,
    }
    let kind = VectorizerKind::parse(vectorizer)
        .filter(|k| *k != VectorizerKind::Sentence)
        .ok_or_else(|| "vectorizer must be bow or wordvec".to_string())?;
    if n_pairs == 0 || !n_pairs.is_multiple_of(4) {
        return Err("n_pairs must be a positive multiple of 4".to_string());
    }
    let tax = taxonomy();
    let (dataset, _) =
        generate_pairs(tax, 5, n_pairs as usize, u64::from(seed)).map_err(|e| e.to_string())?;
    let resources = EvalResources {
        embeddings: Some(LoadedEmbeddings {
            table: embedding_table().clone(),
            duplicate_tokens: 0,
        }),
        ..Default::default()
    };
    let cfg = EvalConfig {
        vectorizers: vec![kind],
        metrics: vec![MetricKind::Cosine, MetricKind::Euclidean, MetricKind::Learned],
        // Keep the learned metric interactive in the browser: reduce
        // bag-of-words inputs to a small principal subspace first.
        itml_pca_reduce: Some(16),
        ..EvalConfig::new(u64::from(seed))
    };
    let out = evaluate_all(tax, &dataset, &resources, &cfg);
    let rows: Vec<Row> = out
        .report
        .rows
        .into_iter()
        .map(|r| Row {
            vectorizer: r.vectorizer,
            metric: r.metric,
            auc: r.auc,
            gsr: r.gsr,
            warnings: r.warnings,
        })
        .collect();
    to_json(&rows)
}

pub fn audit_json(vectorizer: &str, metric: &str, top_k: u32, seed: u32) -> Result<String, String> {
    #[derive(Serialize)]
    struct Out {
        gsr: f64,
        n_occupations: usize,
        points: Vec<Point>,
    }
    #[derive(Serialize)]
    struct Point {
        code: String,
        title: String,
        female_share: f64,
        mean_neighbor_share: f64,
        top_codes: Vec<String>,
    }
    let v = vectorizer_for(vectorizer)?;
    let model = match MetricKind::parse(metric) {
        Some(MetricKind::Cosine) => MatchModel::Cosine,
        Some(MetricKind::Euclidean) => MatchModel::Euclidean,
        _ => {
            return Err(
                "audit metric must be cosine or euclidean (learned metrics live in the benchmark panel)"
                    .to_string(),
            )
        }
    };
    let tax = taxonomy();
    let pipeline = VectorPipeline {
        vectorizer: &v,
        reducer: None,
    };
    let audit = gsr_audit(
        tax,
        &pipeline,
        &model,
        top_k.max(1) as usize,
        5,
        u64::from(seed),
    )
    .map_err(|e| e.to_string())?;
    let titles: BTreeMap<&str, &str> = tax
        .iter()
        .map(|o| (o.code.as_str(), o.title.as_str()))
        .collect();
    let points = audit
        .records
        .into_iter()
        .map(|r| Point {
            title: titles.get(r.code.as_str()).unwrap_or(&"").to_string(),
            code: r.code,
            female_share: r.female_share,
            mean_neighbor_share: r.mean_neighbor_share,
            top_codes: r.top_codes,
        })
        .collect();
    to_json(&Out {
        gsr: audit.gsr,
        n_occupations: audit.n_occupations_used,
        points,
    })
}
