//! Run configuration: a flat TOML document merged with CLI flag overrides.
//!
//! Defaults reproduce the published setup: subset size 5, 3940 pairs, top-10
//! retrieval, seed 42, ITML defaults, all vectorizers and metrics enabled.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;
use skillmatch_core::evaluate::MetricKind;
use skillmatch_core::scoring::ItmlConfig;
use skillmatch_core::vectorize::VectorizerKind;

/// Raw config file contents; every field optional so flags can fill gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub occupations: Option<PathBuf>,
    pub skills: Option<PathBuf>,
    pub gender: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub sentence_pairs: Option<PathBuf>,
    pub sentence_audit: Option<PathBuf>,
    pub sentence_occupations: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub texts_out: Option<PathBuf>,
    pub k: Option<usize>,
    pub n_pairs: Option<usize>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub audit_repeats: Option<usize>,
    pub vectorizers: Option<Vec<String>>,
    pub metrics: Option<Vec<String>>,
    pub vectorizer: Option<String>,
    pub audit_detail: Option<String>,
    pub itml_gamma: Option<f64>,
    pub itml_max_iter: Option<usize>,
    pub itml_conv_tol: Option<f64>,
    pub itml_percentile_low: Option<f64>,
    pub itml_percentile_high: Option<f64>,
    pub itml_pca_reduce: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// File values lose to `overrides` wherever the override is set.
    pub fn merged_with(mut self, overrides: RunConfig) -> Self {
        macro_rules! take {
            ($($field:ident),* $(,)?) => {
                $(if overrides.$field.is_some() { self.$field = overrides.$field; })*
            };
        }
        take!(
            occupations, skills, gender, taxonomy, pairs, embeddings, sentence_pairs,
            sentence_audit, sentence_occupations, out_dir, texts_out, k, n_pairs, top_k, seed,
            audit_repeats, vectorizers, metrics, vectorizer, audit_detail, itml_gamma,
            itml_max_iter, itml_conv_tol, itml_percentile_low, itml_percentile_high,
            itml_pca_reduce,
        );
        self
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(5)
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs.unwrap_or(3940)
    }

    pub fn top_k(&self) -> usize {
        self.top_k.unwrap_or(10)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    pub fn audit_repeats(&self) -> usize {
        self.audit_repeats.unwrap_or(1).max(1)
    }

    pub fn itml(&self) -> Result<ItmlConfig> {
        let defaults = ItmlConfig::default();
        let cfg = ItmlConfig {
            gamma: self.itml_gamma.unwrap_or(defaults.gamma),
            max_iter: self.itml_max_iter.unwrap_or(defaults.max_iter),
            conv_tol: self.itml_conv_tol.unwrap_or(defaults.conv_tol),
            percentile_low: self.itml_percentile_low.unwrap_or(defaults.percentile_low),
            percentile_high: self
                .itml_percentile_high
                .unwrap_or(defaults.percentile_high),
        };
        cfg.validate().map_err(|m| anyhow!(m))?;
        Ok(cfg)
    }

    pub fn vectorizer_kinds(&self) -> Result<Vec<VectorizerKind>> {
        match &self.vectorizers {
            None => Ok(vec![
                VectorizerKind::Bow,
                VectorizerKind::WordVec,
                VectorizerKind::Sentence,
            ]),
            Some(names) => names
                .iter()
                .map(|n| {
                    VectorizerKind::parse(n)
                        .ok_or_else(|| anyhow!("unknown vectorizer {n:?} (bow|wordvec|sentence)"))
                })
                .collect(),
        }
    }

    pub fn metric_kinds(&self) -> Result<Vec<MetricKind>> {
        match &self.metrics {
            None => Ok(vec![
                MetricKind::Cosine,
                MetricKind::Euclidean,
                MetricKind::Learned,
            ]),
            Some(names) => names
                .iter()
                .map(|n| {
                    MetricKind::parse(n)
                        .ok_or_else(|| anyhow!("unknown metric {n:?} (cosine|euclidean|learned)"))
                })
                .collect(),
        }
    }

    /// Which combination's audit detail goes to `audit_detail.csv`.
    pub fn audit_detail_combo(&self) -> Result<(String, String)> {
        let raw = self.audit_detail.as_deref().unwrap_or("bow,cosine");
        let (v, m) = raw
            .split_once(',')
            .ok_or_else(|| anyhow!("audit_detail must be \"<vectorizer>,<metric>\""))?;
        let v = VectorizerKind::parse(v.trim())
            .ok_or_else(|| anyhow!("unknown vectorizer {v:?} in audit_detail"))?;
        let m = MetricKind::parse(m.trim())
            .ok_or_else(|| anyhow!("unknown metric {m:?} in audit_detail"))?;
        Ok((v.name().to_string(), m.name().to_string()))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| anyhow!("--out-dir (or out_dir in the config) is required"))
    }

    pub fn require<'a>(&self, field: Option<&'a PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .map(PathBuf::as_path)
            .ok_or_else(|| anyhow!("--{name} (or {name} in the config) is required"))
    }
}

/// Comma-separated list flag ("bow,wordvec") into a vector.
pub fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_prefers_overrides() {
        let file = RunConfig {
            seed: Some(1),
            k: Some(7),
            ..Default::default()
        };
        let flags = RunConfig {
            seed: Some(99),
            ..Default::default()
        };
        let merged = file.merged_with(flags);
        assert_eq!(merged.seed(), 99);
        assert_eq!(merged.k(), 7);
    }

    #[test]
    fn defaults_match_published_setup() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.k(), 5);
        assert_eq!(cfg.n_pairs(), 3940);
        assert_eq!(cfg.top_k(), 10);
        assert_eq!(cfg.seed(), 42);
        assert_eq!(cfg.vectorizer_kinds().unwrap().len(), 3);
        assert_eq!(cfg.metric_kinds().unwrap().len(), 3);
        let itml = cfg.itml().unwrap();
        assert_eq!(itml.gamma, 1.0);
        assert_eq!(itml.max_iter, 1000);
    }

    #[test]
    fn toml_round_trip() {
        let text = "seed = 7\nn_pairs = 40\nvectorizers = [\"bow\", \"wordvec\"]\nout_dir = \"out\"\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.n_pairs(), 40);
        assert_eq!(cfg.vectorizer_kinds().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 7\n").is_err());
    }

    #[test]
    fn bad_names_rejected() {
        let cfg = RunConfig {
            vectorizers: Some(vec!["tfidf".into()]),
            ..Default::default()
        };
        assert!(cfg.vectorizer_kinds().is_err());
        let cfg = RunConfig {
            metrics: Some(vec!["manhattan".into()]),
            ..Default::default()
        };
        assert!(cfg.metric_kinds().is_err());
    }
}
