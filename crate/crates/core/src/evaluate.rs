//! Model evaluation: ranking performance and gender segregation risk.
//!
//! AUC over the test pairs measures matching performance. Gender Segregation
//! Risk (GSR) is the Pearson correlation between each occupation's female
//! share and the mean female share of its top-k highest-scoring occupations,
//! computed over one seeded skill profile per occupation. `evaluate_all`
//! crosses every enabled vectorizer with every enabled metric and emits one
//! report row per combination.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::PrincipalAxes;
use crate::rng::{derive_seed, substream};
use crate::scoring::{
    train_itml, ItmlConfig, MatchModel, MatchScore, PairScorer, ScoringError, TrainingPair,
};
use crate::simulation::{sample_profile, MatchLabel, MatchPair, PairDataset, SkillProfile};
use crate::taxonomy::{skill_text_corpus, Taxonomy, TaxonomyError};
use crate::vectorize::{fit_bow, AnyVectorizer, ProfileVector, VectorizeError, VectorizerKind};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("AUC needs at least one good and one bad scored pair")]
    SingleClassScores,
    #[error("pearson needs two equal-length series of >= 2 points, got {x} and {y}")]
    PearsonInput { x: usize, y: usize },
    #[error("pearson is undefined: {which} series has zero variance")]
    ZeroVariance { which: &'static str },
    #[error("query occupation {code:?} has no profile vector")]
    QueryMissing { code: String },
    #[error("top-k retrieval needs at least 2 profiles")]
    TooFewProfiles,
    #[error("audit needs at least {need} occupations with female_share, found {found}")]
    TooFewLabeled { found: usize, need: usize },
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Simulation(#[from] crate::simulation::SimulationError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error("{0}")]
    Other(String),
}

/// A match pair together with its model score.
#[derive(Debug, Clone)]
pub struct ScoredPair {
    pub pair: MatchPair,
    pub score: MatchScore,
}

/// Rank-based ROC AUC with ties counted one half; equals brute-force
/// counting of concordant (good, bad) pairs.
pub fn auc(scored: &[ScoredPair]) -> Result<f64, EvaluateError> {
    let n = scored.len();
    let n_good = scored
        .iter()
        .filter(|s| s.pair.label == MatchLabel::Good)
        .count();
    let n_bad = n - n_good;
    if n_good == 0 || n_bad == 0 {
        return Err(EvaluateError::SingleClassScores);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scored[a].score.value.total_cmp(&scored[b].score.value));
    let mut rank_sum_good = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scored[order[j]].score.value == scored[order[i]].score.value {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average rank.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].pair.label == MatchLabel::Good {
                rank_sum_good += avg_rank;
            }
        }
        i = j;
    }
    let n_good = n_good as f64;
    let n_bad = n_bad as f64;
    Ok((rank_sum_good - n_good * (n_good + 1.0) / 2.0) / (n_good * n_bad))
}

/// Pearson correlation, clamped to [-1, 1] against rounding.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvaluateError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(EvaluateError::PearsonInput {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 {
        return Err(EvaluateError::ZeroVariance { which: "first" });
    }
    if vy == 0.0 {
        return Err(EvaluateError::ZeroVariance { which: "second" });
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(PartialEq)]
struct Candidate {
    score: f64,
    code: String,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Greater = better match: higher score, ties by ascending code.
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.code.cmp(&self.code))
    }
}

/// The `k` highest-scoring occupation codes against the query's vector,
/// query excluded, ties broken by ascending code string.
pub fn top_k_neighbors(
    query_code: &str,
    profiles: &BTreeMap<String, ProfileVector>,
    scorer: &dyn PairScorer,
    k: usize,
) -> Result<Vec<String>, EvaluateError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let query = profiles.get(query_code).ok_or(EvaluateError::QueryMissing {
        code: query_code.to_string(),
    })?;
    if profiles.len() < 2 {
        return Err(EvaluateError::TooFewProfiles);
    }
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(k + 1);
    for (code, vector) in profiles {
        if code == query_code {
            continue;
        }
        let score = scorer.score_pair(query, vector)?.value;
        heap.push(Reverse(Candidate {
            score,
            code: code.clone(),
        }));
        if heap.len() > k {
            heap.pop();
        }
    }
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .map(|Reverse(c)| c.code)
        .collect())
}

/// Per-occupation audit record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsrRecord {
    pub code: String,
    pub female_share: f64,
    pub top_codes: Vec<String>,
    pub mean_neighbor_share: f64,
}

/// Gender segregation audit for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GsrAudit {
    pub records: Vec<GsrRecord>,
    /// Pearson correlation between own share and mean neighbor share.
    pub gsr: f64,
    pub n_occupations_used: usize,
}

/// A vectorizer plus an optional linear reduction applied to its output
/// (used when a learned metric was trained on reduced inputs).
pub struct VectorPipeline<'a> {
    pub vectorizer: &'a AnyVectorizer,
    pub reducer: Option<&'a PrincipalAxes>,
}

impl VectorPipeline<'_> {
    pub fn vector(&self, key: &str, text: &str) -> Result<ProfileVector, VectorizeError> {
        let v = self.vectorizer.vector(key, text)?;
        Ok(match self.reducer {
            Some(axes) => ProfileVector {
                values: axes.project(&v.values),
                source: v.source,
            },
            None => v,
        })
    }
}

/// One seeded audit profile per occupation with gender data, in code order.
/// These are the texts (and lookup keys) the audit will vectorize.
pub fn audit_profiles(
    taxonomy: &Taxonomy,
    subset_k: usize,
    seed: u64,
) -> Result<Vec<(String, SkillProfile)>, EvaluateError> {
    let mut out = Vec::new();
    for occ in taxonomy.iter() {
        if occ.female_share.is_none() {
            continue;
        }
        let mut rng = substream(seed, &format!("audit/{}", occ.code));
        let profile = sample_profile(&occ.code, &occ.skills, subset_k, &mut rng)?;
        out.push((occ.code.clone(), profile));
    }
    Ok(out)
}

/// Runs the gender-segregation audit: one seeded size-`subset_k` profile per
/// occupation with gender data, scored against every other, top-`top_k`
/// neighbor shares averaged, and correlated with the occupation's own share.
///
/// Occupations without gender data are excluded from both the query and the
/// candidate pool.
pub fn gsr_audit(
    taxonomy: &Taxonomy,
    pipeline: &VectorPipeline,
    scorer: &dyn PairScorer,
    top_k: usize,
    subset_k: usize,
    seed: u64,
) -> Result<GsrAudit, EvaluateError> {
    if top_k == 0 {
        return Err(EvaluateError::Other("top_k must be >= 1".into()));
    }
    let eligible = audit_profiles(taxonomy, subset_k, seed)?;
    let need = top_k + 2;
    if eligible.len() < need {
        return Err(EvaluateError::TooFewLabeled {
            found: eligible.len(),
            need,
        });
    }
    let mut vectors: BTreeMap<String, ProfileVector> = BTreeMap::new();
    for (code, profile) in &eligible {
        vectors.insert(code.clone(), pipeline.vector(code, &profile.text)?);
    }
    let share_of = |code: &str| -> f64 {
        taxonomy
            .get(code)
            .and_then(|o| o.female_share)
            .expect("audit pool only contains labeled occupations")
    };
    let mut records = Vec::with_capacity(eligible.len());
    let mut own = Vec::with_capacity(eligible.len());
    let mut neighbor_means = Vec::with_capacity(eligible.len());
    for (code, _) in &eligible {
        let top_codes = top_k_neighbors(code, &vectors, scorer, top_k)?;
        let mean_neighbor_share =
            top_codes.iter().map(|c| share_of(c)).sum::<f64>() / top_codes.len() as f64;
        own.push(share_of(code));
        neighbor_means.push(mean_neighbor_share);
        records.push(GsrRecord {
            code: code.clone(),
            female_share: share_of(code),
            top_codes,
            mean_neighbor_share,
        });
    }
    let gsr = pearson(&own, &neighbor_means)?;
    Ok(GsrAudit {
        records,
        gsr,
        n_occupations_used: eligible.len(),
    })
}

/// Which metric to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    Cosine,
    Euclidean,
    Learned,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cosine => "cosine",
            MetricKind::Euclidean => "euclidean",
            MetricKind::Learned => "learned",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cosine" => Some(MetricKind::Cosine),
            "euclidean" => Some(MetricKind::Euclidean),
            "learned" => Some(MetricKind::Learned),
            _ => None,
        }
    }
}

/// Loaded external vector resources for the evaluation run.
#[derive(Default)]
pub struct EvalResources {
    pub embeddings: Option<crate::vectorize::LoadedEmbeddings>,
    /// Sentence vectors for pair sides, keyed `split:index:side`.
    pub sentence_pairs: Option<crate::vectorize::PrecomputedVectors>,
    /// Sentence vectors for audit profiles, keyed by occupation code.
    pub sentence_audit: Option<crate::vectorize::PrecomputedVectors>,
}

/// Evaluation parameters.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub vectorizers: Vec<VectorizerKind>,
    pub metrics: Vec<MetricKind>,
    pub itml: ItmlConfig,
    /// Reduce vectors to at most this many principal dims before ITML
    /// training (and all scoring under the learned metric). Off by default.
    pub itml_pca_reduce: Option<usize>,
    pub top_k: usize,
    pub subset_k: usize,
    pub seed: u64,
    /// Average GSR over this many repeated audit draws (1 = single draw).
    pub audit_repeats: usize,
}

impl EvalConfig {
    pub fn new(seed: u64) -> Self {
        EvalConfig {
            vectorizers: vec![
                VectorizerKind::Bow,
                VectorizerKind::WordVec,
                VectorizerKind::Sentence,
            ],
            metrics: vec![MetricKind::Cosine, MetricKind::Euclidean, MetricKind::Learned],
            itml: ItmlConfig::default(),
            itml_pca_reduce: None,
            top_k: 10,
            subset_k: 5,
            seed,
            audit_repeats: 1,
        }
    }
}

/// One report row: a (vectorizer, metric) combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub vectorizer: String,
    pub metric: String,
    pub auc: Option<f64>,
    pub gsr: Option<f64>,
    pub n_test_pairs: usize,
    pub n_occupations: usize,
    pub warnings: Vec<String>,
}

/// The Table-1-style report: one row per evaluated combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<ReportRow>,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("report serialization cannot fail")
    }

    /// True when any row failed to produce both measurements.
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.auc.is_none() || r.gsr.is_none())
    }
}

/// Full evaluation output: the report plus per-combination audit details.
pub struct EvalOutput {
    pub report: AuditReport,
    /// Audit detail keyed by `(vectorizer, metric)` for successful rows.
    pub details: BTreeMap<(String, String), GsrAudit>,
}

/// Lookup key for one side of a serialized pair, used by the precomputed
/// sentence-vector contract.
pub fn pair_side_key(split: &str, index: usize, side: &str) -> String {
    format!("{split}:{index}:{side}")
}

fn vectorize_side(
    pipeline: &VectorPipeline,
    split: &str,
    index: usize,
    side: &str,
    profile: &SkillProfile,
) -> Result<ProfileVector, VectorizeError> {
    pipeline.vector(&pair_side_key(split, index, side), &profile.text)
}

struct RowOutcome {
    auc: f64,
    gsr: f64,
    n_occupations: usize,
    warnings: Vec<String>,
    detail: GsrAudit,
}

fn build_vectorizer(
    kind: VectorizerKind,
    taxonomy: &Taxonomy,
    resources: &EvalResources,
) -> Result<(AnyVectorizer, Option<AnyVectorizer>, Vec<String>), EvaluateError> {
    let mut warnings = Vec::new();
    match kind {
        VectorizerKind::Bow => {
            let corpus = skill_text_corpus(taxonomy)?;
            let vocab = fit_bow(&corpus)?;
            Ok((AnyVectorizer::Bow(vocab), None, warnings))
        }
        VectorizerKind::WordVec => {
            let loaded = resources.embeddings.as_ref().ok_or_else(|| {
                EvaluateError::Other("wordvec enabled but no embeddings loaded".into())
            })?;
            if loaded.duplicate_tokens > 0 {
                warnings.push(format!(
                    "wordvec: {} duplicate embedding tokens (last occurrence kept)",
                    loaded.duplicate_tokens
                ));
            }
            Ok((AnyVectorizer::WordVec(loaded.table.clone()), None, warnings))
        }
        VectorizerKind::Sentence => {
            let pairs = resources.sentence_pairs.as_ref().ok_or_else(|| {
                EvaluateError::Other("sentence enabled but no pair vectors loaded".into())
            })?;
            let audit = resources.sentence_audit.as_ref().ok_or_else(|| {
                EvaluateError::Other("sentence enabled but no audit vectors loaded".into())
            })?;
            Ok((
                AnyVectorizer::Sentence(pairs.clone()),
                Some(AnyVectorizer::Sentence(audit.clone())),
                warnings,
            ))
        }
    }
}

fn run_row(
    taxonomy: &Taxonomy,
    dataset: &PairDataset,
    pair_vectorizer: &AnyVectorizer,
    audit_vectorizer: &AnyVectorizer,
    metric: MetricKind,
    cfg: &EvalConfig,
) -> Result<RowOutcome, EvaluateError> {
    let mut warnings = Vec::new();

    // Learned metric: train on the train split only, optionally after a
    // principal-axes reduction fitted on the train-side vectors.
    let (model, reducer): (MatchModel, Option<PrincipalAxes>) = match metric {
        MetricKind::Cosine => (MatchModel::Cosine, None),
        MetricKind::Euclidean => (MatchModel::Euclidean, None),
        MetricKind::Learned => {
            let raw_pipeline = VectorPipeline {
                vectorizer: pair_vectorizer,
                reducer: None,
            };
            let mut train_vectors = Vec::with_capacity(dataset.train.len() * 2);
            for (i, pair) in dataset.train.iter().enumerate() {
                train_vectors.push(vectorize_side(&raw_pipeline, "train", i, "left", &pair.left)?);
                train_vectors.push(vectorize_side(&raw_pipeline, "train", i, "right", &pair.right)?);
            }
            let dim = train_vectors.first().map(ProfileVector::dim).unwrap_or(0);
            let reducer = match cfg.itml_pca_reduce {
                Some(r) if r > 0 && r < dim => {
                    let data: Vec<Vec<f64>> =
                        train_vectors.iter().map(|v| v.values.clone()).collect();
                    // Tractability transform: a loose residual target and a
                    // flop-capped budget are plenty here.
                    let work = (data.len() * dim * r) as u64;
                    let budget = (4_000_000_000u64 / work.max(1)).clamp(20, 2_000) as usize;
                    let axes = crate::linalg::principal_axes_with(&data, r, 1e-8, Some(budget))
                        .ok_or_else(|| {
                        EvaluateError::Other(
                            "itml pca reduction failed: degenerate training vectors".into(),
                        )
                    })?;
                    warnings.push(format!(
                        "itml: inputs reduced to {} principal dims (from {})",
                        axes.axes.len(),
                        dim
                    ));
                    Some(axes)
                }
                _ => None,
            };
            let training: Vec<TrainingPair> = dataset
                .train
                .iter()
                .zip(train_vectors.chunks_exact(2))
                .map(|(pair, sides)| {
                    let reduce = |v: &ProfileVector| match &reducer {
                        Some(axes) => ProfileVector {
                            values: axes.project(&v.values),
                            source: v.source,
                        },
                        None => v.clone(),
                    };
                    TrainingPair {
                        left: reduce(&sides[0]),
                        right: reduce(&sides[1]),
                        good: pair.label == MatchLabel::Good,
                    }
                })
                .collect();
            let outcome = train_itml(&training, &cfg.itml)?;
            if outcome.converged {
                warnings.push(format!("itml: converged after {} sweeps", outcome.sweeps));
            } else {
                warnings.push(format!(
                    "itml: stopped unconverged after {} sweeps",
                    outcome.sweeps
                ));
            }
            if outcome.skipped_constraints > 0 {
                warnings.push(format!(
                    "itml: {} constraints skipped (vanishing direction)",
                    outcome.skipped_constraints
                ));
            }
            (MatchModel::Learned(outcome.metric), reducer)
        }
    };

    let pipeline = VectorPipeline {
        vectorizer: pair_vectorizer,
        reducer: reducer.as_ref(),
    };

    // Score the test split.
    let mut scored = Vec::with_capacity(dataset.test.len());
    let mut zero_coverage = 0usize;
    let mut degenerate = 0usize;
    for (i, pair) in dataset.test.iter().enumerate() {
        let left = vectorize_side(&pipeline, "test", i, "left", &pair.left)?;
        let right = vectorize_side(&pipeline, "test", i, "right", &pair.right)?;
        for (profile, _side) in [(&pair.left, "left"), (&pair.right, "right")] {
            if pair_vectorizer.zero_coverage(&profile.text) {
                zero_coverage += 1;
            }
        }
        let score = model.score_pair(&left, &right)?;
        if score.degenerate {
            degenerate += 1;
        }
        scored.push(ScoredPair {
            pair: pair.clone(),
            score,
        });
    }
    if zero_coverage > 0 {
        warnings.push(format!(
            "wordvec: {zero_coverage} test profile(s) with zero embedding coverage"
        ));
    }
    if degenerate > 0 {
        warnings.push(format!(
            "cosine: {degenerate} degenerate zero-vector score(s)"
        ));
    }
    let auc_value = auc(&scored)?;

    // Audit, averaged over repeats (records kept from the first draw).
    let audit_pipeline = VectorPipeline {
        vectorizer: audit_vectorizer,
        reducer: reducer.as_ref(),
    };
    let mut gsr_sum = 0.0;
    let mut detail: Option<GsrAudit> = None;
    for rep in 0..cfg.audit_repeats.max(1) {
        let rep_seed = if rep == 0 {
            cfg.seed
        } else {
            derive_seed(cfg.seed, &format!("audit-rep/{rep}"))
        };
        let audit = gsr_audit(
            taxonomy,
            &audit_pipeline,
            &model,
            cfg.top_k,
            cfg.subset_k,
            rep_seed,
        )?;
        gsr_sum += audit.gsr;
        if detail.is_none() {
            detail = Some(audit);
        }
    }
    let repeats = cfg.audit_repeats.max(1);
    let gsr = gsr_sum / repeats as f64;
    if repeats > 1 {
        warnings.push(format!("gsr averaged over {repeats} audit draws"));
    }
    let detail = detail.expect("at least one audit repeat");
    Ok(RowOutcome {
        auc: auc_value,
        gsr,
        n_occupations: detail.n_occupations_used,
        warnings,
        detail,
    })
}

/// Evaluates every enabled (vectorizer, metric) combination. A failing
/// combination becomes a row with empty measurements and the error recorded
/// in its warnings; other rows proceed.
pub fn evaluate_all(
    taxonomy: &Taxonomy,
    dataset: &PairDataset,
    resources: &EvalResources,
    cfg: &EvalConfig,
) -> EvalOutput {
    let mut vectorizers = cfg.vectorizers.clone();
    vectorizers.sort_by_key(|v| v.name());
    vectorizers.dedup();
    let mut metrics = cfg.metrics.clone();
    metrics.sort_by_key(|m| m.name());
    metrics.dedup();

    let mut rows = Vec::new();
    let mut details = BTreeMap::new();
    for &vkind in &vectorizers {
        let built = build_vectorizer(vkind, taxonomy, resources);
        for &metric in &metrics {
            let mut row = ReportRow {
                vectorizer: vkind.name().to_string(),
                metric: metric.name().to_string(),
                auc: None,
                gsr: None,
                n_test_pairs: dataset.test.len(),
                n_occupations: 0,
                warnings: Vec::new(),
            };
            match &built {
                Err(err) => row.warnings.push(format!("error: {err}")),
                Ok((pair_vectorizer, audit_vectorizer, load_warnings)) => {
                    row.warnings.extend(load_warnings.iter().cloned());
                    let audit_vectorizer = audit_vectorizer.as_ref().unwrap_or(pair_vectorizer);
                    match run_row(taxonomy, dataset, pair_vectorizer, audit_vectorizer, metric, cfg)
                    {
                        Ok(outcome) => {
                            row.auc = Some(outcome.auc);
                            row.gsr = Some(outcome.gsr);
                            row.n_occupations = outcome.n_occupations;
                            row.warnings.extend(outcome.warnings);
                            details.insert(
                                (row.vectorizer.clone(), row.metric.clone()),
                                outcome.detail,
                            );
                        }
                        Err(err) => row.warnings.push(format!("error: {err}")),
                    }
                }
            }
            rows.push(row);
        }
    }
    EvalOutput {
        report: AuditReport { rows },
        details,
    }
}

/// Writes the audit detail CSV: the two variables behind the GSR correlation
/// plus the occupation key.
pub fn write_audit_detail_csv(audit: &GsrAudit, mut out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["code", "female_share", "mean_neighbor_share"])
        .map_err(csv_io)?;
    for r in &audit.records {
        w.write_record([
            r.code.as_str(),
            &r.female_share.to_string(),
            &r.mean_neighbor_share.to_string(),
        ])
        .map_err(csv_io)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    out.write_all(&bytes)
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::MahalanobisMetric;
    use crate::taxonomy::Occupation;
    use crate::vectorize::PrecomputedVectors;
    use std::collections::HashMap;

    fn sp(good: bool, value: f64) -> ScoredPair {
        let profile = SkillProfile {
            occupation_code: if good { "A".into() } else { "B".into() },
            skill_texts: vec!["s".into()],
            text: "s".into(),
        };
        let other = SkillProfile {
            occupation_code: "A".into(),
            skill_texts: vec!["s".into()],
            text: "s".into(),
        };
        ScoredPair {
            pair: MatchPair {
                left: other,
                right: profile,
                label: if good { MatchLabel::Good } else { MatchLabel::Bad },
            },
            score: MatchScore {
                value,
                degenerate: false,
            },
        }
    }

    /// Brute-force AUC oracle: count concordant (good, bad) comparisons,
    /// ties worth one half.
    fn auc_brute_force(scored: &[ScoredPair]) -> f64 {
        let goods: Vec<f64> = scored
            .iter()
            .filter(|s| s.pair.label == MatchLabel::Good)
            .map(|s| s.score.value)
            .collect();
        let bads: Vec<f64> = scored
            .iter()
            .filter(|s| s.pair.label == MatchLabel::Bad)
            .map(|s| s.score.value)
            .collect();
        let mut total = 0.0;
        for g in &goods {
            for b in &bads {
                if g > b {
                    total += 1.0;
                } else if g == b {
                    total += 0.5;
                }
            }
        }
        total / (goods.len() * bads.len()) as f64
    }

    #[test]
    fn auc_examples() {
        let perfect = vec![sp(true, 0.9), sp(true, 0.8), sp(false, 0.2), sp(false, 0.1)];
        assert_eq!(auc(&perfect).unwrap(), 1.0);

        let tie = vec![sp(true, 0.5), sp(false, 0.5)];
        assert_eq!(auc(&tie).unwrap(), 0.5);

        // 3 of 4 ordered (good, bad) comparisons correct.
        let mixed = vec![sp(true, 0.8), sp(true, 0.3), sp(false, 0.6), sp(false, 0.1)];
        assert_eq!(auc(&mixed).unwrap(), 0.75);
        assert_eq!(auc_brute_force(&mixed), 0.75);
    }

    #[test]
    fn auc_rejects_single_class() {
        let all_good = vec![sp(true, 0.5), sp(true, 0.6)];
        assert!(matches!(
            auc(&all_good),
            Err(EvaluateError::SingleClassScores)
        ));
    }

    #[test]
    fn auc_label_swap_complements() {
        let scored = vec![
            sp(true, 0.9),
            sp(true, 0.2),
            sp(false, 0.6),
            sp(false, 0.6),
            sp(false, 0.1),
        ];
        let swapped: Vec<ScoredPair> = scored
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.pair.label = match s.pair.label {
                    MatchLabel::Good => MatchLabel::Bad,
                    MatchLabel::Bad => MatchLabel::Good,
                };
                t
            })
            .collect();
        let a = auc(&scored).unwrap();
        let b = auc(&swapped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        let mut rng = crate::rng::substream(99, "auc-test");
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let mut scored = Vec::new();
            let mut has = [false, false];
            for i in 0..n {
                let good = if i == 0 {
                    true
                } else if i == 1 {
                    false
                } else {
                    rng.gen_bool(0.5)
                };
                has[good as usize] = true;
                // Coarse grid injects plenty of ties.
                let value = (rng.gen_range(0..8) as f64) / 4.0;
                scored.push(sp(good, value));
            }
            assert!(has[0] && has[1]);
            let fast = auc(&scored).unwrap();
            let slow = auc_brute_force(&scored);
            assert!((fast - slow).abs() < 1e-12, "fast={fast} slow={slow}");
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);

        // Hand-computed from the defining formula: cov = 3, var_x = var_y = 5.
        let x4 = [1.0, 2.0, 3.0, 4.0];
        let y4 = [2.0, 1.0, 4.0, 3.0];
        assert!((pearson(&x4, &y4).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(EvaluateError::PearsonInput { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(EvaluateError::ZeroVariance { which: "first" })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[3.0, 3.0]),
            Err(EvaluateError::ZeroVariance { which: "second" })
        ));
    }

    fn profile_map(entries: &[(&str, &[f64])]) -> BTreeMap<String, ProfileVector> {
        entries
            .iter()
            .map(|(code, values)| {
                (
                    code.to_string(),
                    ProfileVector {
                        values: values.to_vec(),
                        source: VectorizerKind::Sentence,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn top_k_caps_and_excludes_self() {
        let profiles = profile_map(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.9, 0.1]),
            ("c", &[0.0, 1.0]),
        ]);
        let top = top_k_neighbors("a", &profiles, &MatchModel::Cosine, 10).unwrap();
        assert_eq!(top, vec!["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn top_k_tie_break_by_code() {
        let profiles = profile_map(&[
            ("q", &[1.0, 0.0]),
            ("zz", &[2.0, 0.0]),
            ("aa", &[3.0, 0.0]),
            ("mm", &[0.0, 1.0]),
        ]);
        // zz and aa are both perfectly cosine-aligned with q: tie, aa first.
        let top = top_k_neighbors("q", &profiles, &MatchModel::Cosine, 2).unwrap();
        assert_eq!(top, vec!["aa".to_string(), "zz".to_string()]);
    }

    #[test]
    fn top_k_identical_vector_ranks_first() {
        let profiles = profile_map(&[
            ("q", &[0.5, 0.5]),
            ("twin", &[0.5, 0.5]),
            ("other", &[1.0, 0.0]),
        ]);
        let top = top_k_neighbors("q", &profiles, &MatchModel::Euclidean, 1).unwrap();
        assert_eq!(top, vec!["twin".to_string()]);
    }

    #[test]
    fn top_k_missing_query_is_error() {
        let profiles = profile_map(&[("a", &[1.0]), ("b", &[2.0])]);
        assert!(matches!(
            top_k_neighbors("nope", &profiles, &MatchModel::Cosine, 1),
            Err(EvaluateError::QueryMissing { code }) if code == "nope"
        ));
    }

    /// Exhaustive sort oracle for top-k.
    fn top_k_oracle(
        query: &str,
        profiles: &BTreeMap<String, ProfileVector>,
        scorer: &dyn PairScorer,
        k: usize,
    ) -> Vec<String> {
        let q = &profiles[query];
        let mut all: Vec<(f64, String)> = profiles
            .iter()
            .filter(|(c, _)| c.as_str() != query)
            .map(|(c, v)| (scorer.score_pair(q, v).unwrap().value, c.clone()))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, c)| c).collect()
    }

    #[test]
    fn top_k_equals_sort_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::substream(5, "topk-test");
        for _ in 0..30 {
            let n = rng.gen_range(2..30);
            let dim = rng.gen_range(1..8);
            let entries: Vec<(String, Vec<f64>)> = (0..n)
                .map(|i| {
                    let code = format!("occ{:02}", i);
                    // Coarse values force score ties.
                    let v: Vec<f64> = (0..dim)
                        .map(|_| rng.gen_range(0..4) as f64)
                        .collect();
                    (code, v)
                })
                .collect();
            let profiles: BTreeMap<String, ProfileVector> = entries
                .into_iter()
                .map(|(c, values)| {
                    (
                        c,
                        ProfileVector {
                            values,
                            source: VectorizerKind::Sentence,
                        },
                    )
                })
                .collect();
            let k = rng.gen_range(1..12);
            for model in [MatchModel::Euclidean, MatchModel::Cosine] {
                let fast = top_k_neighbors("occ00", &profiles, &model, k).unwrap();
                let slow = top_k_oracle("occ00", &profiles, &model, k);
                assert_eq!(fast, slow);
            }
        }
    }

    fn clustered_taxonomy() -> Taxonomy {
        // Two vocabulary-disjoint clusters with opposite gender shares.
        let mut occupations = Vec::new();
        for i in 0..20 {
            let skills: Vec<String> = (0..12)
                .map(|j| format!("alpha{} common{} widget{}", (i + j) % 15, j % 4, (i * j) % 9))
                .collect();
            occupations.push(Occupation {
                code: format!("A{:02}", i),
                title: format!("Alpha {i}"),
                skills,
                female_share: Some(0.9),
            });
        }
        for i in 0..20 {
            let skills: Vec<String> = (0..12)
                .map(|j| format!("beta{} shared{} gadget{}", (i + j) % 15, j % 4, (i * j) % 9))
                .collect();
            occupations.push(Occupation {
                code: format!("B{:02}", i),
                title: format!("Beta {i}"),
                skills,
                female_share: Some(0.1),
            });
        }
        Taxonomy::new(occupations, "synthetic")
    }

    #[test]
    fn gsr_two_cluster_taxonomy_is_near_one() {
        let tax = clustered_taxonomy();
        let corpus = skill_text_corpus(&tax).unwrap();
        let vocab = fit_bow(&corpus).unwrap();
        let vectorizer = AnyVectorizer::Bow(vocab);
        let pipeline = VectorPipeline {
            vectorizer: &vectorizer,
            reducer: None,
        };
        let audit = gsr_audit(&tax, &pipeline, &MatchModel::Cosine, 10, 5, 42).unwrap();
        assert!(audit.gsr > 0.95, "gsr={}", audit.gsr);
        // Exhaustively verify neighbors stay in-cluster.
        for record in &audit.records {
            let cluster = &record.code[..1];
            assert!(
                record.top_codes.iter().all(|c| c.starts_with(cluster)),
                "{} leaked out of cluster: {:?}",
                record.code,
                record.top_codes
            );
        }
    }

    #[test]
    fn gsr_with_noise_vectors_is_near_zero() {
        use rand::Rng;
        let tax = clustered_taxonomy();
        let mut total = 0.0;
        for seed in 0..10u64 {
            let mut rng = crate::rng::substream(seed, "noise-vectors");
            let map: HashMap<String, Vec<f64>> = tax
                .codes()
                .map(|code| {
                    let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    (code.to_string(), v)
                })
                .collect();
            let pre = PrecomputedVectors::from_map(map).unwrap();
            let vectorizer = AnyVectorizer::Sentence(pre);
            let pipeline = VectorPipeline {
                vectorizer: &vectorizer,
                reducer: None,
            };
            let audit = gsr_audit(&tax, &pipeline, &MatchModel::Cosine, 10, 5, seed).unwrap();
            total += audit.gsr;
        }
        let mean = total / 10.0;
        assert!(mean.abs() < 0.3, "mean gsr = {mean}");
    }

    #[test]
    fn gsr_zero_share_variance_is_error() {
        let occupations: Vec<Occupation> = (0..15)
            .map(|i| Occupation {
                code: format!("C{:02}", i),
                title: "same".into(),
                skills: (0..8).map(|j| format!("word{} thing{}", i + j, j)).collect(),
                female_share: Some(0.5),
            })
            .collect();
        let tax = Taxonomy::new(occupations, "flat");
        let corpus = skill_text_corpus(&tax).unwrap();
        let vectorizer = AnyVectorizer::Bow(fit_bow(&corpus).unwrap());
        let pipeline = VectorPipeline {
            vectorizer: &vectorizer,
            reducer: None,
        };
        let err = gsr_audit(&tax, &pipeline, &MatchModel::Cosine, 10, 5, 1).unwrap_err();
        assert!(matches!(err, EvaluateError::ZeroVariance { .. }));
    }

    #[test]
    fn gsr_requires_enough_labeled_occupations() {
        let occupations: Vec<Occupation> = (0..8)
            .map(|i| Occupation {
                code: format!("C{i}"),
                title: "t".into(),
                skills: vec![format!("skill{i} one"), format!("skill{i} two")],
                female_share: Some(i as f64 / 10.0),
            })
            .collect();
        let tax = Taxonomy::new(occupations, "small");
        let corpus = skill_text_corpus(&tax).unwrap();
        let vectorizer = AnyVectorizer::Bow(fit_bow(&corpus).unwrap());
        let pipeline = VectorPipeline {
            vectorizer: &vectorizer,
            reducer: None,
        };
        let err = gsr_audit(&tax, &pipeline, &MatchModel::Cosine, 10, 5, 1).unwrap_err();
        assert!(matches!(
            err,
            EvaluateError::TooFewLabeled { found: 8, need: 12 }
        ));
    }

    /// A scorer wrapping another with a strictly increasing transform.
    struct Monotone<'a> {
        inner: &'a dyn PairScorer,
        f: fn(f64) -> f64,
    }

    impl PairScorer for Monotone<'_> {
        fn score_pair(
            &self,
            a: &ProfileVector,
            b: &ProfileVector,
        ) -> Result<MatchScore, ScoringError> {
            let s = self.inner.score_pair(a, b)?;
            Ok(MatchScore {
                value: (self.f)(s.value),
                degenerate: s.degenerate,
            })
        }
    }

    #[test]
    fn gsr_invariant_under_monotone_score_transform() {
        let tax = clustered_taxonomy();
        let corpus = skill_text_corpus(&tax).unwrap();
        let vectorizer = AnyVectorizer::Bow(fit_bow(&corpus).unwrap());
        let pipeline = VectorPipeline {
            vectorizer: &vectorizer,
            reducer: None,
        };
        let base = gsr_audit(&tax, &pipeline, &MatchModel::Cosine, 10, 5, 7).unwrap();
        let affine = Monotone {
            inner: &MatchModel::Cosine,
            f: |x| 2.0 * x + 7.0,
        };
        let transformed = gsr_audit(&tax, &pipeline, &affine, 10, 5, 7).unwrap();
        assert_eq!(base.gsr, transformed.gsr);
        assert_eq!(base.records, transformed.records);
    }

    #[test]
    fn evaluate_all_emits_sorted_rows_and_isolates_failures() {
        let tax = clustered_taxonomy();
        let (dataset, _) = crate::simulation::generate_pairs(&tax, 5, 80, 9).unwrap();
        let cfg = EvalConfig {
            vectorizers: vec![VectorizerKind::WordVec, VectorizerKind::Bow],
            metrics: vec![MetricKind::Euclidean, MetricKind::Cosine],
            ..EvalConfig::new(9)
        };
        // No embeddings supplied: the wordvec rows must fail, bow rows succeed.
        let out = evaluate_all(&tax, &dataset, &EvalResources::default(), &cfg);
        let names: Vec<(String, String)> = out
            .report
            .rows
            .iter()
            .map(|r| (r.vectorizer.clone(), r.metric.clone()))
            .collect();
        assert_eq!(
            names,
            vec![
                ("bow".to_string(), "cosine".to_string()),
                ("bow".to_string(), "euclidean".to_string()),
                ("wordvec".to_string(), "cosine".to_string()),
                ("wordvec".to_string(), "euclidean".to_string()),
            ]
        );
        for row in &out.report.rows {
            if row.vectorizer == "bow" {
                assert!(row.auc.is_some() && row.gsr.is_some());
                assert!(row.auc.unwrap() >= 0.0 && row.auc.unwrap() <= 1.0);
            } else {
                assert!(row.auc.is_none());
                assert!(row.warnings.iter().any(|w| w.contains("embeddings")));
            }
        }
        assert!(out.report.has_failures());
        assert!(out.details.contains_key(&("bow".to_string(), "cosine".to_string())));
    }

    #[test]
    fn learned_metric_row_trains_on_train_split_only() {
        let tax = clustered_taxonomy();
        let (dataset, _) = crate::simulation::generate_pairs(&tax, 5, 80, 4).unwrap();
        let cfg = EvalConfig {
            vectorizers: vec![VectorizerKind::Bow],
            metrics: vec![MetricKind::Learned],
            itml_pca_reduce: Some(8),
            ..EvalConfig::new(4)
        };
        let out = evaluate_all(&tax, &dataset, &EvalResources::default(), &cfg);
        let row = &out.report.rows[0];
        assert!(row.auc.is_some(), "warnings: {:?}", row.warnings);
        assert!(row.warnings.iter().any(|w| w.contains("reduced to 8 principal dims")));
    }

    #[test]
    fn mahalanobis_identity_ranks_like_euclidean() {
        let profiles = profile_map(&[
            ("q", &[0.2, 0.4, 0.1]),
            ("w", &[0.3, 0.4, 0.1]),
            ("x", &[1.2, 0.4, 0.2]),
            ("y", &[0.2, 2.0, 0.3]),
            ("z", &[4.0, 0.1, 0.9]),
        ]);
        let learned = MatchModel::Learned(MahalanobisMetric::identity(3));
        let a = top_k_neighbors("q", &profiles, &learned, 3).unwrap();
        let b = top_k_neighbors("q", &profiles, &MatchModel::Euclidean, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn audit_detail_csv_shape() {
        let audit = GsrAudit {
            records: vec![GsrRecord {
                code: "A".into(),
                female_share: 0.25,
                top_codes: vec!["B".into()],
                mean_neighbor_share: 0.75,
            }],
            gsr: 1.0,
            n_occupations_used: 1,
        };
        let mut buf = Vec::new();
        write_audit_detail_csv(&audit, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "code,female_share,mean_neighbor_share\nA,0.25,0.75\n");
    }
}
