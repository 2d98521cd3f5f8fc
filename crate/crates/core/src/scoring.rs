//! Matching scores between profile vectors.
//!
//! All scores are oriented so that higher means a better match: similarity is
//! used as-is and distances are negated. The learned option is a Mahalanobis
//! metric trained by information-theoretic metric learning (cyclic Bregman
//! projections against pairwise similarity/dissimilarity constraints,
//! regularized toward the identity prior).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, dot};
use crate::vectorize::ProfileVector;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("training needs at least one good and one bad pair")]
    SingleClassTraining,
    #[error(
        "degenerate pair-distance distribution (u={u} >= l={l}); inspect the training data"
    )]
    DegenerateBounds { u: f64, l: f64 },
    #[error("training pair has dimension {found}, expected {expected}")]
    TrainingDimensionMismatch { expected: usize, found: usize },
    #[error("empty training set")]
    EmptyTraining,
    #[error("invalid metric json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("metric matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid itml config: {0}")]
    InvalidConfig(String),
}

/// A matching score; higher is always a better match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    pub value: f64,
    /// Set when a zero-norm vector forced the cosine fallback.
    pub degenerate: bool,
}

impl MatchScore {
    fn of(value: f64) -> Self {
        MatchScore {
            value,
            degenerate: false,
        }
    }
}

fn check_dims(a: &ProfileVector, b: &ProfileVector) -> Result<(), ScoringError> {
    if a.dim() != b.dim() {
        return Err(ScoringError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Cosine similarity; zero-norm input yields score 0 with the degenerate flag.
pub fn cosine_score(a: &ProfileVector, b: &ProfileVector) -> Result<MatchScore, ScoringError> {
    check_dims(a, b)?;
    let na = linalg::norm(&a.values);
    let nb = linalg::norm(&b.values);
    if na == 0.0 || nb == 0.0 {
        return Ok(MatchScore {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(MatchScore::of(dot(&a.values, &b.values) / (na * nb)))
}

/// Negated Euclidean distance.
pub fn euclidean_score(a: &ProfileVector, b: &ProfileVector) -> Result<MatchScore, ScoringError> {
    check_dims(a, b)?;
    let sq: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(MatchScore::of(-sq.sqrt()))
}

/// Symmetric positive-semidefinite matrix for a squared Mahalanobis distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisMetric {
    dim: usize,
    /// Row-major `dim x dim`.
    data: Vec<f64>,
}

impl MahalanobisMetric {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        MahalanobisMetric { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        linalg::mat_vec(&self.data, self.dim, v)
    }

    /// `v^T M v`.
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply(v))
    }

    /// Largest absolute asymmetry `|M - M^T|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue, for on-demand PSD checks.
    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = linalg::jacobi_eigh(&self.data, self.dim);
        vals.last().copied().unwrap_or(0.0)
    }

    fn symmetrize(&mut self) {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let m = 0.5 * (self.data[i * self.dim + j] + self.data[j * self.dim + i]);
                self.data[i * self.dim + j] = m;
                self.data[j * self.dim + i] = m;
            }
        }
    }

    /// `M += scale * w w^T`.
    fn rank_one_update(&mut self, scale: f64, w: &[f64]) {
        for i in 0..self.dim {
            let wi = scale * w[i];
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (cell, wj) in row.iter_mut().zip(w) {
                *cell += wi * wj;
            }
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc {
            dim: usize,
            matrix: Vec<Vec<f64>>,
        }
        let matrix = (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect();
        serde_json::to_string(&Doc {
            dim: self.dim,
            matrix,
        })
        .expect("metric serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ScoringError> {
        #[derive(Deserialize)]
        struct Doc {
            dim: usize,
            matrix: Vec<Vec<f64>>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        let rows = doc.matrix.len();
        if rows != doc.dim || doc.matrix.iter().any(|r| r.len() != doc.dim) {
            let cols = doc.matrix.first().map(Vec::len).unwrap_or(0);
            return Err(ScoringError::NotSquare { rows, cols });
        }
        Ok(MahalanobisMetric {
            dim: doc.dim,
            data: doc.matrix.into_iter().flatten().collect(),
        })
    }
}

/// Negated squared Mahalanobis distance under `m`.
pub fn mahalanobis_score(
    m: &MahalanobisMetric,
    a: &ProfileVector,
    b: &ProfileVector,
) -> Result<MatchScore, ScoringError> {
    check_dims(a, b)?;
    if a.dim() != m.dim() {
        return Err(ScoringError::DimensionMismatch {
            left: a.dim(),
            right: m.dim(),
        });
    }
    let diff: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    Ok(MatchScore::of(-m.quadratic(&diff)))
}

/// ITML training configuration. The defaults mirror the conventional
/// implementation defaults: identity prior, gamma 1, 5th/95th percentile
/// bounds, tolerance 1e-3, at most 1000 sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItmlConfig {
    pub gamma: f64,
    pub max_iter: usize,
    pub conv_tol: f64,
    pub percentile_low: f64,
    pub percentile_high: f64,
}

impl Default for ItmlConfig {
    fn default() -> Self {
        ItmlConfig {
            gamma: 1.0,
            max_iter: 1000,
            conv_tol: 1e-3,
            percentile_low: 5.0,
            percentile_high: 95.0,
        }
    }
}

impl ItmlConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.gamma <= 0.0 || self.gamma.is_nan() {
            return Err(format!("itml gamma must be > 0, got {}", self.gamma));
        }
        if !(0.0 < self.percentile_low
            && self.percentile_low < self.percentile_high
            && self.percentile_high < 100.0)
        {
            return Err(format!(
                "itml percentiles must satisfy 0 < low < high < 100, got {}/{}",
                self.percentile_low, self.percentile_high
            ));
        }
        Ok(())
    }
}

/// One training constraint: a pair of profile vectors plus the good/bad label.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub left: ProfileVector,
    pub right: ProfileVector,
    pub good: bool,
}

/// Result of ITML training.
#[derive(Debug, Clone)]
pub struct ItmlOutcome {
    pub metric: MahalanobisMetric,
    /// Similarity upper bound (5th-percentile squared distance by default).
    pub upper_bound: f64,
    /// Dissimilarity lower bound (95th percentile by default).
    pub lower_bound: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Constraints skipped at least once because `v^T M v` vanished.
    pub skipped_constraints: usize,
}

/// Trains a Mahalanobis metric by cyclic Bregman projections.
pub fn train_itml(
    pairs: &[TrainingPair],
    cfg: &ItmlConfig,
) -> Result<ItmlOutcome, ScoringError> {
    train_itml_observed(pairs, cfg, |_, _| {})
}

/// [`train_itml`] with a per-sweep observer over the current metric, used by
/// invariant checks.
pub fn train_itml_observed(
    pairs: &[TrainingPair],
    cfg: &ItmlConfig,
    mut on_sweep: impl FnMut(usize, &MahalanobisMetric),
) -> Result<ItmlOutcome, ScoringError> {
    cfg.validate().map_err(ScoringError::InvalidConfig)?;
    if pairs.is_empty() {
        return Err(ScoringError::EmptyTraining);
    }
    let n_good = pairs.iter().filter(|p| p.good).count();
    if n_good == 0 || n_good == pairs.len() {
        return Err(ScoringError::SingleClassTraining);
    }
    let dim = pairs[0].left.dim();
    for p in pairs {
        if p.left.dim() != dim || p.right.dim() != dim {
            return Err(ScoringError::TrainingDimensionMismatch {
                expected: dim,
                found: p.left.dim().max(p.right.dim()),
            });
        }
    }

    let diffs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|p| {
            p.left
                .values
                .iter()
                .zip(&p.right.values)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    let sq_dists: Vec<f64> = diffs.iter().map(|v| dot(v, v)).collect();
    let upper = linalg::percentile(&sq_dists, cfg.percentile_low).expect("non-empty");
    let lower = linalg::percentile(&sq_dists, cfg.percentile_high).expect("non-empty");
    if upper >= lower {
        return Err(ScoringError::DegenerateBounds { u: upper, l: lower });
    }

    let gamma = cfg.gamma;
    let mut metric = MahalanobisMetric::identity(dim);
    let mut lambda = vec![0.0f64; pairs.len()];
    let mut lambda_prev = vec![0.0f64; pairs.len()];
    let mut bounds: Vec<f64> = pairs
        .iter()
        .map(|p| if p.good { upper } else { lower })
        .collect();
    let mut skipped = vec![false; pairs.len()];
    let mut sweeps = 0usize;
    let mut converged = false;

    while sweeps < cfg.max_iter {
        for (c, pair) in pairs.iter().enumerate() {
            let v = &diffs[c];
            let mv = metric.apply(v);
            let p = dot(v, &mv);
            if p <= 1e-12 {
                skipped[c] = true;
                continue;
            }
            let delta = if pair.good { 1.0 } else { -1.0 };
            let alpha = lambda[c].min(delta * (1.0 / p - gamma / bounds[c]) / 2.0);
            lambda[c] -= alpha;
            debug_assert!(lambda[c] >= -1e-12, "slack went negative: {}", lambda[c]);
            bounds[c] = gamma * bounds[c] / (gamma + delta * alpha * bounds[c]);
            let denom = 1.0 - delta * alpha * p;
            if denom.abs() <= 1e-15 {
                skipped[c] = true;
                continue;
            }
            let beta = delta * alpha / denom;
            metric.rank_one_update(beta, &mv);
        }
        metric.symmetrize();
        sweeps += 1;
        on_sweep(sweeps, &metric);

        let diff_norm = lambda
            .iter()
            .zip(&lambda_prev)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let prev_norm = linalg::norm(&lambda_prev);
        if prev_norm == 0.0 {
            if diff_norm == 0.0 {
                converged = true;
                break;
            }
        } else if diff_norm / prev_norm < cfg.conv_tol {
            converged = true;
            break;
        }
        lambda_prev.copy_from_slice(&lambda);
    }

    Ok(ItmlOutcome {
        metric,
        upper_bound: upper,
        lower_bound: lower,
        sweeps,
        converged,
        skipped_constraints: skipped.iter().filter(|&&s| s).count(),
    })
}

/// A scoring model: either a static metric or a learned Mahalanobis metric.
#[derive(Debug, Clone)]
pub enum MatchModel {
    Cosine,
    Euclidean,
    Learned(MahalanobisMetric),
}

impl MatchModel {
    pub fn name(&self) -> &'static str {
        match self {
            MatchModel::Cosine => "cosine",
            MatchModel::Euclidean => "euclidean",
            MatchModel::Learned(_) => "learned",
        }
    }
}

/// Anything that can score a pair of profile vectors.
pub trait PairScorer {
    fn score_pair(&self, a: &ProfileVector, b: &ProfileVector)
        -> Result<MatchScore, ScoringError>;
}

impl PairScorer for MatchModel {
    fn score_pair(
        &self,
        a: &ProfileVector,
        b: &ProfileVector,
    ) -> Result<MatchScore, ScoringError> {
        match self {
            MatchModel::Cosine => cosine_score(a, b),
            MatchModel::Euclidean => euclidean_score(a, b),
            MatchModel::Learned(m) => mahalanobis_score(m, a, b),
        }
    }
}
