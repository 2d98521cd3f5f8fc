//! 2-D PCA projection of occupation skill-text vectors.
//!
//! Each occupation's full skill text is vectorized and projected onto the
//! top two principal directions of the sample covariance, with female share
//! attached for coloring. Eigenvector signs are fixed deterministically
//! (largest-magnitude loading positive) so reruns are byte-identical.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::principal_axes;
use crate::taxonomy::{occupation_skill_text, Taxonomy, TaxonomyError};
use crate::vectorize::{AnyVectorizer, ProfileVector, VectorizeError};

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("projection needs at least 3 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("projection needs dimension >= 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("vectors have zero total variance; nothing to project")]
    ZeroVariance,
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
}

/// 2-D coordinates per key plus the top-2 covariance eigenvalues.
#[derive(Debug, Clone)]
pub struct Pca2 {
    pub coords: BTreeMap<String, (f64, f64)>,
    /// Descending; the variance captured by each principal direction.
    pub explained_variance: (f64, f64),
    /// The two orthonormal principal directions.
    pub axes: (Vec<f64>, Vec<f64>),
}

/// Projects the vectors onto their top two principal directions.
pub fn pca2(vectors: &BTreeMap<String, ProfileVector>) -> Result<Pca2, ProjectError> {
    if vectors.len() < 3 {
        return Err(ProjectError::TooFewVectors(vectors.len()));
    }
    let dim = vectors.values().next().map(ProfileVector::dim).unwrap_or(0);
    if dim < 2 {
        return Err(ProjectError::DimensionTooSmall(dim));
    }
    let keys: Vec<&String> = vectors.keys().collect();
    let points: Vec<Vec<f64>> = vectors.values().map(|v| v.values.clone()).collect();
    let axes = principal_axes(&points, 2).ok_or(ProjectError::ZeroVariance)?;
    let coords = keys
        .iter()
        .zip(&points)
        .map(|(key, p)| {
            let c = axes.project(p);
            ((*key).clone(), (c[0], c[1]))
        })
        .collect();
    Ok(Pca2 {
        coords,
        explained_variance: (axes.eigenvalues[0], axes.eigenvalues[1]),
        axes: (axes.axes[0].clone(), axes.axes[1].clone()),
    })
}

/// One plotted occupation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub code: String,
    pub title: String,
    pub x: f64,
    pub y: f64,
    pub female_share: Option<f64>,
}

/// Plot-ready projection of a whole taxonomy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Projection2D {
    pub rows: Vec<ProjectionRow>,
    pub explained_variance: (f64, f64),
}

/// Vectorizes every occupation's full skill text and projects to 2-D.
/// Occupations without gender data stay in the plot, flagged unlabeled.
pub fn emit_projection(
    taxonomy: &Taxonomy,
    vectorizer: &AnyVectorizer,
) -> Result<Projection2D, ProjectError> {
    let mut vectors = BTreeMap::new();
    for occ in taxonomy.iter() {
        let text = occupation_skill_text(occ)?;
        vectors.insert(occ.code.clone(), vectorizer.vector(&occ.code, &text)?);
    }
    let pca = pca2(&vectors)?;
    let rows = taxonomy
        .iter()
        .map(|occ| {
            let (x, y) = pca.coords[&occ.code];
            ProjectionRow {
                code: occ.code.clone(),
                title: occ.title.clone(),
                x,
                y,
                female_share: occ.female_share,
            }
        })
        .collect();
    Ok(Projection2D {
        rows,
        explained_variance: pca.explained_variance,
    })
}

/// Writes `code,title,x,y,female_share` rows; the share is empty when absent.
pub fn write_pca_csv(projection: &Projection2D, mut out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["code", "title", "x", "y", "female_share"])
        .map_err(std::io::Error::other)?;
    for row in &projection.rows {
        w.write_record([
            row.code.as_str(),
            row.title.as_str(),
            &row.x.to_string(),
            &row.y.to_string(),
            &row.female_share.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(std::io::Error::other)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    out.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Occupation;
    use crate::vectorize::{fit_bow, VectorizerKind};

    fn pv(values: &[f64]) -> ProfileVector {
        ProfileVector {
            values: values.to_vec(),
            source: VectorizerKind::Sentence,
        }
    }

    fn vec_map(entries: &[(&str, &[f64])]) -> BTreeMap<String, ProfileVector> {
        entries
            .iter()
            .map(|(k, v)| (k.to_string(), pv(v)))
            .collect()
    }

    #[test]
    fn collinear_points_have_flat_second_component() {
        let vectors = vec_map(&[
            ("a", &[0.0, 0.0]),
            ("b", &[1.0, 1.0]),
            ("c", &[2.0, 2.0]),
        ]);
        let p = pca2(&vectors).unwrap();
        for (_, y) in p.coords.values() {
            assert!(y.abs() < 1e-9, "y={y}");
        }
        assert!(p.explained_variance.1.abs() < 1e-12);
        assert!(p.explained_variance.0 > 0.0);
    }

    #[test]
    fn rank_two_data_preserves_pairwise_distances() {
        // 2-D data embedded in 5-D through a fixed rotation-like map.
        let base: Vec<(f64, f64)> = vec![
            (0.0, 0.0),
            (1.0, 0.2),
            (0.3, 1.5),
            (-1.1, 0.7),
            (2.0, -0.4),
            (-0.5, -1.0),
        ];
        let e1 = [0.6, 0.0, 0.8, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0, 0.0, 0.0];
        let vectors: BTreeMap<String, ProfileVector> = base
            .iter()
            .enumerate()
            .map(|(i, (u, v))| {
                let emb: Vec<f64> = (0..5).map(|j| u * e1[j] + v * e2[j] + 3.0).collect();
                (format!("p{i}"), pv(&emb))
            })
            .collect();
        let p = pca2(&vectors).unwrap();
        let coords: Vec<(f64, f64)> = vectors.keys().map(|k| p.coords[k]).collect();
        for i in 0..base.len() {
            for j in (i + 1)..base.len() {
                let orig = ((base[i].0 - base[j].0).powi(2) + (base[i].1 - base[j].1).powi(2)).sqrt();
                let proj = ((coords[i].0 - coords[j].0).powi(2)
                    + (coords[i].1 - coords[j].1).powi(2))
                .sqrt();
                assert!((orig - proj).abs() < 1e-8, "pair {i},{j}: {orig} vs {proj}");
            }
        }
    }

    #[test]
    fn one_hot_simplex_projects_symmetrically() {
        let vectors = vec_map(&[
            ("a", &[1.0, 0.0, 0.0]),
            ("b", &[0.0, 1.0, 0.0]),
            ("c", &[0.0, 0.0, 1.0]),
        ]);
        let p = pca2(&vectors).unwrap();
        let pts: Vec<(f64, f64)> = vectors.keys().map(|k| p.coords[k]).collect();
        let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let d01 = d(pts[0], pts[1]);
        let d02 = d(pts[0], pts[2]);
        let d12 = d(pts[1], pts[2]);
        // Equilateral triangle with the original sqrt(2) side lengths;
        // covariance eigenvalues are (1/2, 1/2) by direct computation.
        assert!((d01 - d02).abs() < 1e-9);
        assert!((d01 - d12).abs() < 1e-9);
        assert!((d01 - 2.0f64.sqrt()).abs() < 1e-9);
        assert!((p.explained_variance.0 - 0.5).abs() < 1e-9);
        assert!((p.explained_variance.1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pca_invariants_center_orthonormal_ordered() {
        use rand::Rng;
        let mut rng = crate::rng::substream(17, "pca-invariants");
        for _ in 0..20 {
            let n = rng.gen_range(3..25);
            let d = rng.gen_range(2..10);
            let vectors: BTreeMap<String, ProfileVector> = (0..n)
                .map(|i| {
                    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
                    (format!("k{i:02}"), pv(&v))
                })
                .collect();
            let p = pca2(&vectors).unwrap();
            let (sx, sy) = vectors
                .keys()
                .map(|k| p.coords[k])
                .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
            assert!(sx.abs() / (n as f64) < 1e-9);
            assert!(sy.abs() / (n as f64) < 1e-9);
            assert!(p.explained_variance.0 >= p.explained_variance.1);
            assert!(p.explained_variance.1 >= -1e-12);
            let (a1, a2) = (&p.axes.0, &p.axes.1);
            assert!((crate::linalg::norm(a1) - 1.0).abs() < 1e-9);
            assert!((crate::linalg::norm(a2) - 1.0).abs() < 1e-9);
            assert!(crate::linalg::dot(a1, a2).abs() < 1e-9);
        }
    }

    #[test]
    fn pca2_input_validation() {
        let two = vec_map(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert!(matches!(pca2(&two), Err(ProjectError::TooFewVectors(2))));
        let thin = vec_map(&[("a", &[1.0]), ("b", &[2.0]), ("c", &[3.0])]);
        assert!(matches!(pca2(&thin), Err(ProjectError::DimensionTooSmall(1))));
        let flat = vec_map(&[("a", &[1.0, 1.0]), ("b", &[1.0, 1.0]), ("c", &[1.0, 1.0])]);
        assert!(matches!(pca2(&flat), Err(ProjectError::ZeroVariance)));
    }

    fn small_taxonomy() -> Taxonomy {
        let occupations: Vec<Occupation> = (0..10)
            .map(|i| Occupation {
                code: format!("O{i:02}"),
                title: format!("Occupation {i}"),
                skills: (0..6)
                    .map(|j| format!("verb{} noun{} extra{}", (i * 3 + j) % 11, j, i % 4))
                    .collect(),
                female_share: if i == 9 { None } else { Some(i as f64 / 10.0) },
            })
            .collect();
        Taxonomy::new(occupations, "test")
    }

    #[test]
    fn emit_projection_covers_all_occupations() {
        let tax = small_taxonomy();
        let corpus = crate::taxonomy::skill_text_corpus(&tax).unwrap();
        let vectorizer = AnyVectorizer::Bow(fit_bow(&corpus).unwrap());
        let proj = emit_projection(&tax, &vectorizer).unwrap();
        assert_eq!(proj.rows.len(), 10);
        let unlabeled = proj.rows.iter().find(|r| r.code == "O09").unwrap();
        assert!(unlabeled.female_share.is_none());
        // Deterministic rerun.
        let again = emit_projection(&tax, &vectorizer).unwrap();
        assert_eq!(proj.rows, again.rows);
    }

    #[test]
    fn pca_csv_empty_share_for_unlabeled() {
        let proj = Projection2D {
            rows: vec![
                ProjectionRow {
                    code: "A".into(),
                    title: "Alpha".into(),
                    x: 1.5,
                    y: -0.5,
                    female_share: Some(0.25),
                },
                ProjectionRow {
                    code: "B".into(),
                    title: "Beta".into(),
                    x: -1.5,
                    y: 0.5,
                    female_share: None,
                },
            ],
            explained_variance: (1.0, 0.5),
        };
        let mut buf = Vec::new();
        write_pca_csv(&proj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "code,title,x,y,female_share\nA,Alpha,1.5,-0.5,0.25\nB,Beta,-1.5,0.5,\n"
        );
    }
}
