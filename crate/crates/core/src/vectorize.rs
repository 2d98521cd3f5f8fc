//! Text vectorizers for skill profiles.
//!
//! Three interchangeable vectorizers turn a profile string into one dense
//! real vector: 1+2-gram bag-of-words counts fitted on a corpus, the mean of
//! pretrained word vectors, and precomputed sentence embeddings ingested from
//! file (the toolkit never runs a neural encoder).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VectorizeError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus yields zero tokens; nothing to fit")]
    EmptyCorpus,
    #[error("{file} line {line}: {message}")]
    MalformedLine {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file} line {line}: vector has dimension {found}, expected {expected}")]
    InconsistentDimension {
        file: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}: no vectors found")]
    EmptyFile { file: String },
    #[error("{file} line {line}: duplicate key {key:?}")]
    DuplicateKey {
        file: String,
        line: usize,
        key: String,
    },
    #[error("no precomputed vector for key {key:?}")]
    MissingKey { key: String },
}

/// Which vectorizer produced a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VectorizerKind {
    /// 1+2-gram bag-of-words counts.
    Bow,
    /// Averaged pretrained word vectors.
    WordVec,
    /// Precomputed sentence embeddings.
    Sentence,
}

impl VectorizerKind {
    pub fn name(self) -> &'static str {
        match self {
            VectorizerKind::Bow => "bow",
            VectorizerKind::WordVec => "wordvec",
            VectorizerKind::Sentence => "sentence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bow" => Some(VectorizerKind::Bow),
            "wordvec" => Some(VectorizerKind::WordVec),
            "sentence" => Some(VectorizerKind::Sentence),
            _ => None,
        }
    }
}

impl fmt::Display for VectorizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dense profile vector with its producer tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileVector {
    pub values: Vec<f64>,
    pub source: VectorizerKind,
}

impl ProfileVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Lowercases and splits `text` into maximal alphanumeric runs, dropping
/// tokens shorter than 2 characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Fitted 1+2-gram vocabulary. Indices are assigned by lexicographic order of
/// the n-gram string, so a refit on a permuted corpus is identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// N-grams in index order.
    pub fn ngrams(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

fn ngrams_of(tokens: &[String]) -> impl Iterator<Item = String> + '_ {
    let unigrams = tokens.iter().cloned();
    let bigrams = tokens.windows(2).map(|w| format!("{} {}", w[0], w[1]));
    unigrams.chain(bigrams)
}

/// Collects all distinct unigrams and adjacent bigrams over the corpus.
pub fn fit_bow<S: AsRef<str>>(corpus: &[S]) -> Result<Vocabulary, VectorizeError> {
    let mut grams: BTreeSet<String> = BTreeSet::new();
    for doc in corpus {
        let tokens = tokenize(doc.as_ref());
        grams.extend(ngrams_of(&tokens));
    }
    if grams.is_empty() {
        return Err(VectorizeError::EmptyCorpus);
    }
    let index = grams.into_iter().zip(0..).collect();
    Ok(Vocabulary { index })
}

/// Raw occurrence counts of every vocabulary n-gram in `text`.
/// Out-of-vocabulary n-grams are ignored.
pub fn transform_bow(vocab: &Vocabulary, text: &str) -> ProfileVector {
    let mut values = vec![0.0; vocab.len()];
    let tokens = tokenize(text);
    for gram in ngrams_of(&tokens) {
        if let Some(i) = vocab.index_of(&gram) {
            values[i] += 1.0;
        }
    }
    ProfileVector {
        values,
        source: VectorizerKind::Bow,
    }
}

/// Token -> vector table loaded from the word-vector text format.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// An embedding table plus its load-time warning counts.
#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub table: EmbeddingTable,
    /// Tokens that appeared more than once; the last occurrence won.
    pub duplicate_tokens: usize,
}

/// Reads the word-vector text format: an optional `<count> <dim>` header
/// line, then one `token v1 v2 ... vd` row per token.
pub fn load_embeddings(path: &Path) -> Result<LoadedEmbeddings, VectorizeError> {
    let text = std::fs::read_to_string(path).map_err(|e| VectorizeError::Io {
        file: path.display().to_string(),
        source: e,
    })?;
    parse_embeddings(&text, &path.display().to_string())
}

/// [`load_embeddings`] over in-memory contents; `file_name` labels errors.
pub fn parse_embeddings(text: &str, file_name: &str) -> Result<LoadedEmbeddings, VectorizeError> {
    let file_name = file_name.to_string();
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    let mut duplicate_tokens = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1
            && fields.len() == 2
            && fields.iter().all(|f| f.parse::<usize>().is_ok())
        {
            continue; // header line
        }
        if fields.len() < 2 {
            return Err(VectorizeError::MalformedLine {
                file: file_name.clone(),
                line: line_no,
                message: "expected a token followed by vector components".into(),
            });
        }
        let token = fields[0].to_string();
        let values = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    VectorizeError::MalformedLine {
                        file: file_name.clone(),
                        line: line_no,
                        message: format!("cannot parse component {f:?}"),
                    }
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(VectorizeError::InconsistentDimension {
                    file: file_name.clone(),
                    line: line_no,
                    expected: d,
                    found: values.len(),
                });
            }
            Some(_) => {}
        }
        if vectors.insert(token, values).is_some() {
            duplicate_tokens += 1;
        }
    }
    let dim = dim.ok_or(VectorizeError::EmptyFile { file: file_name })?;
    Ok(LoadedEmbeddings {
        table: EmbeddingTable { dim, vectors },
        duplicate_tokens,
    })
}

/// Arithmetic mean of the embeddings of in-table tokens (multiplicity
/// counts). Returns the number of covered token instances alongside the
/// vector; zero coverage yields the zero vector and should be surfaced as a
/// warning by the caller.
pub fn transform_avg(table: &EmbeddingTable, text: &str) -> (ProfileVector, usize) {
    let mut values = vec![0.0; table.dim];
    let mut covered = 0usize;
    for token in tokenize(text) {
        if let Some(v) = table.get(&token) {
            for (acc, x) in values.iter_mut().zip(v) {
                *acc += x;
            }
            covered += 1;
        }
    }
    if covered > 0 {
        for x in &mut values {
            *x /= covered as f64;
        }
    }
    (
        ProfileVector {
            values,
            source: VectorizerKind::WordVec,
        },
        covered,
    )
}

/// Precomputed profile vectors keyed by profile identifier.
#[derive(Debug, Clone)]
pub struct PrecomputedVectors {
    dim: usize,
    map: HashMap<String, Vec<f64>>,
}

impl PrecomputedVectors {
    /// Builds a table from an in-memory map, checking dimensional consistency
    /// and finiteness.
    pub fn from_map(map: HashMap<String, Vec<f64>>) -> Result<Self, VectorizeError> {
        let mut dim = None;
        for (key, vector) in &map {
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(VectorizeError::MalformedLine {
                    file: "<memory>".into(),
                    line: 0,
                    message: format!("non-finite component in vector for {key:?}"),
                });
            }
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(VectorizeError::InconsistentDimension {
                        file: "<memory>".into(),
                        line: 0,
                        expected: d,
                        found: vector.len(),
                    });
                }
                Some(_) => {}
            }
        }
        let dim = dim.ok_or(VectorizeError::EmptyFile {
            file: "<memory>".into(),
        })?;
        Ok(PrecomputedVectors { dim, map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Looks up the vector for `key`; a missing key is a hard error naming it.
    pub fn get(&self, key: &str) -> Result<ProfileVector, VectorizeError> {
        self.map
            .get(key)
            .map(|values| ProfileVector {
                values: values.clone(),
                source: VectorizerKind::Sentence,
            })
            .ok_or_else(|| VectorizeError::MissingKey { key: key.to_string() })
    }
}

/// Reads precomputed vectors from JSON Lines of `{"key": ..., "vector": [...]}`.
pub fn load_precomputed(path: &Path) -> Result<PrecomputedVectors, VectorizeError> {
    #[derive(Deserialize)]
    struct Row {
        key: String,
        vector: Vec<f64>,
    }
    let file = File::open(path).map_err(|e| VectorizeError::Io {
        file: path.display().to_string(),
        source: e,
    })?;
    let reader = BufReader::new(file);
    let file_name = path.display().to_string();
    let mut map: HashMap<String, Vec<f64>> = HashMap::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| VectorizeError::Io {
            file: file_name.clone(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Row = serde_json::from_str(&line).map_err(|e| VectorizeError::MalformedLine {
            file: file_name.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        if row.vector.iter().any(|v| !v.is_finite()) {
            return Err(VectorizeError::MalformedLine {
                file: file_name.clone(),
                line: line_no,
                message: format!("non-finite component in vector for {:?}", row.key),
            });
        }
        match dim {
            None => dim = Some(row.vector.len()),
            Some(d) if d != row.vector.len() => {
                return Err(VectorizeError::InconsistentDimension {
                    file: file_name.clone(),
                    line: line_no,
                    expected: d,
                    found: row.vector.len(),
                });
            }
            Some(_) => {}
        }
        if map.insert(row.key.clone(), row.vector).is_some() {
            return Err(VectorizeError::DuplicateKey {
                file: file_name.clone(),
                line: line_no,
                key: row.key,
            });
        }
    }
    let dim = dim.ok_or(VectorizeError::EmptyFile { file: file_name })?;
    Ok(PrecomputedVectors { dim, map })
}

/// A fitted/loaded vectorizer behind one dispatch point. Immutable, safe for
/// concurrent transforms.
pub enum AnyVectorizer {
    Bow(Vocabulary),
    WordVec(EmbeddingTable),
    Sentence(PrecomputedVectors),
}

impl AnyVectorizer {
    pub fn kind(&self) -> VectorizerKind {
        match self {
            AnyVectorizer::Bow(_) => VectorizerKind::Bow,
            AnyVectorizer::WordVec(_) => VectorizerKind::WordVec,
            AnyVectorizer::Sentence(_) => VectorizerKind::Sentence,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            AnyVectorizer::Bow(v) => v.len(),
            AnyVectorizer::WordVec(t) => t.dim(),
            AnyVectorizer::Sentence(p) => p.dim(),
        }
    }

    /// Vector for a profile. `key` identifies the profile for the
    /// sentence-embedding lookup; the other vectorizers transform `text`.
    pub fn vector(&self, key: &str, text: &str) -> Result<ProfileVector, VectorizeError> {
        match self {
            AnyVectorizer::Bow(v) => Ok(transform_bow(v, text)),
            AnyVectorizer::WordVec(t) => Ok(transform_avg(t, text).0),
            AnyVectorizer::Sentence(p) => p.get(key),
        }
    }

    /// True when averaging `text` would cover no token (wordvec only).
    pub fn zero_coverage(&self, text: &str) -> bool {
        match self {
            AnyVectorizer::WordVec(t) => tokenize(text).iter().all(|tok| t.get(tok).is_none()),
            _ => false,
        }
    }
}
