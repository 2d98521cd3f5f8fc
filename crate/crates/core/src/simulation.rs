//! Simulated matching data.
//!
//! Builds the supervised signal for matching models out of the taxonomy
//! alone: skill profiles are random size-`k` subsets of an occupation's skill
//! statements, a good pair is two profiles from the same occupation, a bad
//! pair is two profiles from different occupations, and every occupation's
//! statements are split in half so train-side and test-side profiles never
//! share a statement.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;
use crate::taxonomy::Taxonomy;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("profile sampling needs a non-empty skill pool")]
    EmptyPool,
    #[error("subset size k must be >= 1")]
    InvalidSubsetSize,
    #[error("n_pairs must be a positive multiple of 4, got {0}")]
    InvalidPairCount(usize),
    #[error("need at least 2 occupations with >= 2 skills, found {0}")]
    TooFewEligible(usize),
    #[error("jsonl line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A candidate/vacancy stand-in: `k` skill statements sampled from one
/// occupation, concatenated into one string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub occupation_code: String,
    pub skill_texts: Vec<String>,
    pub text: String,
}

impl SkillProfile {
    fn new(occupation_code: &str, skill_texts: Vec<String>) -> Self {
        let text = skill_texts.join(" ");
        SkillProfile {
            occupation_code: occupation_code.to_string(),
            skill_texts,
            text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchLabel {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub left: SkillProfile,
    pub right: SkillProfile,
    pub label: MatchLabel,
}

/// The simulated dataset: balanced good/bad pairs in a skill-disjoint
/// train/test split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDataset {
    pub train: Vec<MatchPair>,
    pub test: Vec<MatchPair>,
    pub seed: u64,
    pub k: usize,
}

/// One occupation's statement partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSplit {
    pub train_half: Vec<String>,
    pub test_half: Vec<String>,
}

/// Per-occupation partitions plus the count of occupations excluded for
/// having fewer than 2 statements.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub halves: BTreeMap<String, SkillSplit>,
    pub excluded: usize,
}

/// Shuffles every eligible occupation's statements (seeded per occupation)
/// and partitions them into disjoint halves of sizes ceil(n/2) and
/// floor(n/2). Occupations with fewer than 2 statements are excluded.
pub fn split_skills(taxonomy: &Taxonomy, seed: u64) -> SplitOutcome {
    let mut halves = BTreeMap::new();
    let mut excluded = 0usize;
    for occ in taxonomy.iter() {
        if occ.skills.len() < 2 {
            excluded += 1;
            continue;
        }
        let mut rng = substream(seed, &format!("split/{}", occ.code));
        let mut skills = occ.skills.clone();
        skills.shuffle(&mut rng);
        let cut = skills.len().div_ceil(2);
        let test_half = skills.split_off(cut);
        halves.insert(
            occ.code.clone(),
            SkillSplit {
                train_half: skills,
                test_half,
            },
        );
    }
    SplitOutcome { halves, excluded }
}

/// Samples `min(k, pool.len())` statements uniformly without replacement;
/// the profile text joins them in sampled order.
pub fn sample_profile(
    occupation_code: &str,
    pool: &[String],
    k: usize,
    rng: &mut impl Rng,
) -> Result<SkillProfile, SimulationError> {
    if pool.is_empty() {
        return Err(SimulationError::EmptyPool);
    }
    if k == 0 {
        return Err(SimulationError::InvalidSubsetSize);
    }
    let amount = k.min(pool.len());
    let chosen: Vec<String> = rand::seq::index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    Ok(SkillProfile::new(occupation_code, chosen))
}

/// Generates `n_pairs` pairs: half train and half test, each split balanced
/// between good and bad. Good pairs draw both profiles from one occupation's
/// split-half; bad pairs draw from two distinct occupations chosen uniformly.
pub fn generate_pairs(
    taxonomy: &Taxonomy,
    k: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<(PairDataset, SplitOutcome), SimulationError> {
    if k == 0 {
        return Err(SimulationError::InvalidSubsetSize);
    }
    if n_pairs == 0 || !n_pairs.is_multiple_of(4) {
        return Err(SimulationError::InvalidPairCount(n_pairs));
    }
    let split = split_skills(taxonomy, seed);
    let codes: Vec<&String> = split.halves.keys().collect();
    if codes.len() < 2 {
        return Err(SimulationError::TooFewEligible(codes.len()));
    }

    let per_split = n_pairs / 2;
    let make_split = |name: &str, train_side: bool| -> Result<Vec<MatchPair>, SimulationError> {
        let mut rng = substream(seed, name);
        let pool_of = |code: &str| -> &[String] {
            let halves = &split.halves[code];
            if train_side {
                &halves.train_half
            } else {
                &halves.test_half
            }
        };
        let mut pairs = Vec::with_capacity(per_split);
        for _ in 0..per_split / 2 {
            let code = codes[rng.gen_range(0..codes.len())];
            let left = sample_profile(code, pool_of(code), k, &mut rng)?;
            let right = sample_profile(code, pool_of(code), k, &mut rng)?;
            pairs.push(MatchPair {
                left,
                right,
                label: MatchLabel::Good,
            });
        }
        for _ in 0..per_split / 2 {
            let first = rng.gen_range(0..codes.len());
            let offset = rng.gen_range(1..codes.len());
            let second = (first + offset) % codes.len();
            let left = sample_profile(codes[first], pool_of(codes[first]), k, &mut rng)?;
            let right = sample_profile(codes[second], pool_of(codes[second]), k, &mut rng)?;
            pairs.push(MatchPair {
                left,
                right,
                label: MatchLabel::Bad,
            });
        }
        Ok(pairs)
    };

    let train = make_split("pairs/train", true)?;
    let test = make_split("pairs/test", false)?;
    Ok((
        PairDataset {
            train,
            test,
            seed,
            k,
        },
        split,
    ))
}

/// One JSONL line of the serialized dataset.
#[derive(Debug, Serialize, Deserialize)]
struct PairRecord {
    left_code: String,
    left_skills: Vec<String>,
    right_code: String,
    right_skills: Vec<String>,
    label: MatchLabel,
    split: String,
}

/// Writes the dataset as JSON Lines, train split first.
pub fn write_jsonl(dataset: &PairDataset, mut out: impl Write) -> Result<(), SimulationError> {
    for (split, pairs) in [("train", &dataset.train), ("test", &dataset.test)] {
        for pair in pairs {
            let record = PairRecord {
                left_code: pair.left.occupation_code.clone(),
                left_skills: pair.left.skill_texts.clone(),
                right_code: pair.right.occupation_code.clone(),
                right_skills: pair.right.skill_texts.clone(),
                label: pair.label,
                split: split.to_string(),
            };
            serde_json::to_writer(&mut out, &record)
                .map_err(|e| SimulationError::MalformedLine {
                    line: 0,
                    message: e.to_string(),
                })?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads a dataset back from JSON Lines. `seed` and `k` are provenance
/// carried by the caller (they are not part of the line format).
pub fn read_jsonl(
    input: impl BufRead,
    seed: u64,
    k: usize,
) -> Result<PairDataset, SimulationError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord =
            serde_json::from_str(&line).map_err(|e| SimulationError::MalformedLine {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let pair = MatchPair {
            left: SkillProfile::new(&record.left_code, record.left_skills),
            right: SkillProfile::new(&record.right_code, record.right_skills),
            label: record.label,
        };
        match record.split.as_str() {
            "train" => train.push(pair),
            "test" => test.push(pair),
            other => {
                return Err(SimulationError::MalformedLine {
                    line: idx + 1,
                    message: format!("unknown split {other:?}"),
                })
            }
        }
    }
    Ok(PairDataset {
        train,
        test,
        seed,
        k,
    })
}
