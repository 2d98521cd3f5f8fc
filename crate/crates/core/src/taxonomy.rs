//! Occupation/skills taxonomy ingestion.
//!
//! Joins three flat CSV inputs (occupations, skill statements, optional
//! female-share labels) into one immutable in-memory taxonomy. The loader is
//! strict about data errors and loud about anything it drops: every ignored
//! or discarded row is counted in [`LoadWarnings`].

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file} line {line}: {message}")]
    MalformedRow {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}: duplicate occupation code {code:?}")]
    DuplicateCode { file: String, code: String },
    #[error("{file} line {line}: female_share {value} for {code:?} outside [0,1]")]
    FemaleShareOutOfRange {
        file: String,
        line: u64,
        code: String,
        value: f64,
    },
    #[error("taxonomy has {found} occupation(s) with skills; at least 2 required")]
    TooFewOccupations { found: usize },
    #[error("occupation {code:?} has an empty skill list")]
    EmptySkillList { code: String },
    #[error("invalid taxonomy json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One occupation with its skill statements and optional female share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub code: String,
    pub title: String,
    /// Distinct skill statements in canonical (lexicographic) order, so the
    /// taxonomy is independent of input row order.
    pub skills: Vec<String>,
    pub female_share: Option<f64>,
}

/// Immutable collection of occupations keyed by code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    provenance: String,
    occupations: BTreeMap<String, Occupation>,
}

/// Counts of rows the loader ignored or dropped. Nothing is lost silently.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarnings {
    /// gender.csv rows whose code is not in occupations.csv.
    pub gender_unknown_code: usize,
    /// skills.csv rows whose code is not in occupations.csv.
    pub skill_unknown_code: usize,
    /// skills.csv rows that repeat a statement already attached to the occupation.
    pub skill_duplicates: usize,
    /// skills.csv rows with an empty or whitespace-only statement.
    pub skill_empty: usize,
    /// occupations dropped because no skill rows were attached.
    pub zero_skill_occupations: usize,
}

impl LoadWarnings {
    pub fn total(&self) -> usize {
        self.gender_unknown_code
            + self.skill_unknown_code
            + self.skill_duplicates
            + self.skill_empty
            + self.zero_skill_occupations
    }
}

impl fmt::Display for LoadWarnings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gender_unknown_code={} skill_unknown_code={} skill_duplicates={} skill_empty={} zero_skill_occupations={}",
            self.gender_unknown_code,
            self.skill_unknown_code,
            self.skill_duplicates,
            self.skill_empty,
            self.zero_skill_occupations
        )
    }
}

/// A loaded taxonomy together with its load-time warnings.
#[derive(Debug, Clone)]
pub struct LoadedTaxonomy {
    pub taxonomy: Taxonomy,
    pub warnings: LoadWarnings,
}

impl Taxonomy {
    pub fn new(occupations: impl IntoIterator<Item = Occupation>, provenance: &str) -> Self {
        let occupations = occupations.into_iter().map(|o| (o.code.clone(), o)).collect();
        Taxonomy {
            provenance: provenance.to_string(),
            occupations,
        }
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.occupations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupations.is_empty()
    }

    pub fn get(&self, code: &str) -> Option<&Occupation> {
        self.occupations.get(code)
    }

    /// Occupations in ascending code order.
    pub fn iter(&self) -> impl Iterator<Item = &Occupation> {
        self.occupations.values()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.occupations.keys().map(String::as_str)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            provenance: &'a str,
            occupations: Vec<&'a Occupation>,
        }
        serde_json::to_string_pretty(&Doc {
            provenance: &self.provenance,
            occupations: self.occupations.values().collect(),
        })
        .expect("taxonomy serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        #[derive(Deserialize)]
        struct Doc {
            provenance: String,
            occupations: Vec<Occupation>,
        }
        let doc: Doc = serde_json::from_str(text)?;
        Ok(Taxonomy::new(doc.occupations, &doc.provenance))
    }

    pub fn write_json(&self, path: &Path) -> Result<(), TaxonomyError> {
        let mut f = File::create(path).map_err(|e| TaxonomyError::Io {
            file: path.display().to_string(),
            source: e,
        })?;
        f.write_all(self.to_json().as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| TaxonomyError::Io {
                file: path.display().to_string(),
                source: e,
            })
    }

    pub fn read_json(path: &Path) -> Result<Self, TaxonomyError> {
        let mut text = String::new();
        File::open(path)
            .and_then(|f| {
                let mut r = BufReader::new(f);
                r.read_to_string(&mut text)
            })
            .map_err(|e| TaxonomyError::Io {
                file: path.display().to_string(),
                source: e,
            })?;
        Taxonomy::from_json(&text)
    }
}

/// Concatenates an occupation's skill statements, space-separated, in stored
/// order.
pub fn occupation_skill_text(occ: &Occupation) -> Result<String, TaxonomyError> {
    if occ.skills.is_empty() {
        return Err(TaxonomyError::EmptySkillList {
            code: occ.code.clone(),
        });
    }
    Ok(occ.skills.join(" "))
}

/// Full skill text of every occupation, in code order. This is the corpus a
/// bag-of-words vocabulary is fitted on.
pub fn skill_text_corpus(taxonomy: &Taxonomy) -> Result<Vec<String>, TaxonomyError> {
    taxonomy.iter().map(occupation_skill_text).collect()
}

fn row_error(file: &str, line: u64, message: impl Into<String>) -> TaxonomyError {
    TaxonomyError::MalformedRow {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn read_rows(
    content: &str,
    file: &str,
    header: [&str; 2],
) -> Result<Vec<(u64, Vec<String>)>, TaxonomyError> {
    let want_fields = header.len();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(content.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| row_error(file, 1, e.to_string()))?;
    if found.len() != want_fields || found.iter().zip(header).any(|(f, h)| f.trim() != h) {
        return Err(row_error(
            file,
            1,
            format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(csv::Position::line)
                .unwrap_or_default();
            row_error(file, line, e.to_string())
        })?;
        let line = record.position().map(csv::Position::line).unwrap_or_default();
        if record.len() != want_fields {
            return Err(row_error(
                file,
                line,
                format!("expected {} fields, found {}", want_fields, record.len()),
            ));
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Loads and joins the three CSV inputs into a [`Taxonomy`].
///
/// Schemas: `occupations.csv` = `code,title`; `skills.csv` = `code,skill_text`
/// (one row per statement); `gender.csv` = `code,female_share` with the share
/// a decimal in [0,1]. Gender data is optional and never imputed.
pub fn load_taxonomy(
    occupations_file: &Path,
    skills_file: &Path,
    gender_file: Option<&Path>,
) -> Result<LoadedTaxonomy, TaxonomyError> {
    let read = |path: &Path| -> Result<String, TaxonomyError> {
        std::fs::read_to_string(path).map_err(|e| TaxonomyError::Io {
            file: path.display().to_string(),
            source: e,
        })
    };
    let occupations = read(occupations_file)?;
    let skills = read(skills_file)?;
    let gender = gender_file.map(read).transpose()?;
    parse_taxonomy(
        (&occupations, &file_name(occupations_file)),
        (&skills, &file_name(skills_file)),
        gender
            .as_deref()
            .map(|g| (g, file_name(gender_file.unwrap())))
            .as_ref()
            .map(|(g, n)| (*g, n.as_str())),
    )
}

/// [`load_taxonomy`] over in-memory CSV contents; each input is paired with
/// a display name used in error messages.
pub fn parse_taxonomy(
    occupations_csv: (&str, &str),
    skills_csv: (&str, &str),
    gender_csv: Option<(&str, &str)>,
) -> Result<LoadedTaxonomy, TaxonomyError> {
    let mut warnings = LoadWarnings::default();
    let (occupations_text, occupations_file) = occupations_csv;
    let (skills_text, skills_file) = skills_csv;

    let mut occupations: BTreeMap<String, Occupation> = BTreeMap::new();
    for (line, fields) in read_rows(occupations_text, occupations_file, ["code", "title"])? {
        let code = fields[0].trim().to_string();
        if code.is_empty() {
            return Err(row_error(occupations_file, line, "empty occupation code"));
        }
        match occupations.entry(code.clone()) {
            Entry::Occupied(_) => {
                return Err(TaxonomyError::DuplicateCode {
                    file: occupations_file.to_string(),
                    code,
                });
            }
            Entry::Vacant(slot) => {
                slot.insert(Occupation {
                    code,
                    title: fields[1].trim().to_string(),
                    skills: Vec::new(),
                    female_share: None,
                });
            }
        }
    }

    let skill_rows = read_rows(skills_text, skills_file, ["code", "skill_text"])?;
    let n_skill_rows = skill_rows.len();
    for (line, fields) in skill_rows {
        let code = fields[0].trim();
        if code.is_empty() {
            return Err(row_error(skills_file, line, "empty occupation code"));
        }
        let skill = fields[1].trim();
        let Some(occ) = occupations.get_mut(code) else {
            warnings.skill_unknown_code += 1;
            continue;
        };
        if skill.is_empty() {
            warnings.skill_empty += 1;
            continue;
        }
        if occ.skills.iter().any(|s| s == skill) {
            warnings.skill_duplicates += 1;
            continue;
        }
        occ.skills.push(skill.to_string());
    }

    if let Some((gender_text, gender_file)) = gender_csv {
        let mut seen: BTreeMap<String, u64> = BTreeMap::new();
        for (line, fields) in read_rows(gender_text, gender_file, ["code", "female_share"])? {
            let code = fields[0].trim().to_string();
            let share: f64 = fields[1].trim().parse().map_err(|_| {
                row_error(
                    gender_file,
                    line,
                    format!("cannot parse female_share {:?}", fields[1]),
                )
            })?;
            if !(0.0..=1.0).contains(&share) || !share.is_finite() {
                return Err(TaxonomyError::FemaleShareOutOfRange {
                    file: gender_file.to_string(),
                    line,
                    code,
                    value: share,
                });
            }
            if seen.insert(code.clone(), line).is_some() {
                return Err(TaxonomyError::DuplicateCode {
                    file: gender_file.to_string(),
                    code,
                });
            }
            match occupations.get_mut(&code) {
                Some(occ) => occ.female_share = Some(share),
                None => warnings.gender_unknown_code += 1,
            }
        }
    }

    // Canonical order makes the join independent of input row order.
    for occ in occupations.values_mut() {
        occ.skills.sort();
    }
    let before = occupations.len();
    occupations.retain(|_, occ| !occ.skills.is_empty());
    warnings.zero_skill_occupations = before - occupations.len();

    if occupations.len() < 2 {
        return Err(TaxonomyError::TooFewOccupations {
            found: occupations.len(),
        });
    }

    let provenance = format!(
        "{}({} occupations) {}({} skill rows){}",
        occupations_file,
        before,
        skills_file,
        n_skill_rows,
        gender_csv
            .map(|(_, name)| format!(" {name}"))
            .unwrap_or_default()
    );
    Ok(LoadedTaxonomy {
        taxonomy: Taxonomy {
            provenance,
            occupations,
        },
        warnings,
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
