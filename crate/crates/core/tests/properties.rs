//! Property tests for the crate's cross-cutting invariants.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use skillmatch_core::evaluate::{auc, pearson, top_k_neighbors, ScoredPair};
use skillmatch_core::scoring::{
    cosine_score, euclidean_score, mahalanobis_score, MahalanobisMetric, MatchModel, MatchScore,
    PairScorer,
};
use skillmatch_core::simulation::{generate_pairs, MatchLabel, MatchPair, SkillProfile};
use skillmatch_core::taxonomy::{Occupation, Taxonomy};
use skillmatch_core::vectorize::{
    fit_bow, tokenize, transform_avg, transform_bow, ProfileVector, VectorizerKind,
};

fn pv(values: Vec<f64>) -> ProfileVector {
    ProfileVector {
        values,
        source: VectorizerKind::Sentence,
    }
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "repair", "install", "monitor", "teach", "assess", "clean", "operate", "plan",
        "records", "patients", "students", "engines", "pipes", "reports", "systems", "tools",
    ])
    .prop_map(str::to_string)
}

fn skill() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 1..5).prop_map(|ws| ws.join(" "))
}

fn taxonomy_strategy() -> impl Strategy<Value = Taxonomy> {
    prop::collection::vec(prop::collection::btree_set(skill(), 2..8), 2..7).prop_map(|occs| {
        let occupations: Vec<Occupation> = occs
            .into_iter()
            .enumerate()
            .map(|(i, skills)| Occupation {
                code: format!("OCC-{i:02}"),
                title: format!("Occupation {i}"),
                skills: skills.into_iter().collect(),
                female_share: Some((i % 10) as f64 / 10.0),
            })
            .collect();
        Taxonomy::new(occupations, "proptest")
    })
}

fn scored(good: bool, value: f64) -> ScoredPair {
    let p = SkillProfile {
        occupation_code: "A".into(),
        skill_texts: vec!["s".into()],
        text: "s".into(),
    };
    let q = SkillProfile {
        occupation_code: if good { "A" } else { "B" }.into(),
        skill_texts: vec!["s".into()],
        text: "s".into(),
    };
    ScoredPair {
        pair: MatchPair {
            left: p,
            right: q,
            label: if good { MatchLabel::Good } else { MatchLabel::Bad },
        },
        score: MatchScore {
            value,
            degenerate: false,
        },
    }
}

fn auc_brute(scored: &[ScoredPair]) -> f64 {
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
            total += if g > b {
                1.0
            } else if g == b {
                0.5
            } else {
                0.0
            };
        }
    }
    total / (goods.len() * bads.len()) as f64
}

/// Scores drawn from a small grid so ties are frequent.
fn scored_set() -> impl Strategy<Value = Vec<ScoredPair>> {
    prop::collection::vec((any::<bool>(), 0..12u8), 2..50).prop_map(|mut raw| {
        raw[0].0 = true;
        raw[1].0 = false;
        raw.into_iter()
            .map(|(good, v)| scored(good, v as f64 / 4.0))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taxonomy_json_round_trip(tax in taxonomy_strategy()) {
        let json = tax.to_json();
        let back = Taxonomy::from_json(&json).unwrap();
        prop_assert_eq!(back, tax);
    }

    #[test]
    fn dataset_balance_and_disjointness(tax in taxonomy_strategy(), seed in 0u64..1000, k in 1usize..6) {
        let n_pairs = 48;
        let (ds, split) = generate_pairs(&tax, k, n_pairs, seed).unwrap();
        prop_assert_eq!(ds.train.len(), n_pairs / 2);
        prop_assert_eq!(ds.test.len(), n_pairs / 2);
        for pairs in [&ds.train, &ds.test] {
            let good = pairs.iter().filter(|p| p.label == MatchLabel::Good).count();
            prop_assert_eq!(good * 2, pairs.len());
            for p in pairs.iter() {
                let same = p.left.occupation_code == p.right.occupation_code;
                prop_assert_eq!(same, p.label == MatchLabel::Good);
                prop_assert!(p.left.skill_texts.len() <= k);
                prop_assert_eq!(&p.left.text, &p.left.skill_texts.join(" "));
            }
        }
        // Per occupation: train-side skills never meet test-side skills.
        for (code, halves) in &split.halves {
            let train_used: BTreeSet<&String> = ds.train.iter()
                .flat_map(|p| [&p.left, &p.right])
                .filter(|prof| &prof.occupation_code == code)
                .flat_map(|prof| prof.skill_texts.iter())
                .collect();
            let test_used: BTreeSet<&String> = ds.test.iter()
                .flat_map(|p| [&p.left, &p.right])
                .filter(|prof| &prof.occupation_code == code)
                .flat_map(|prof| prof.skill_texts.iter())
                .collect();
            prop_assert!(train_used.is_disjoint(&test_used));
            prop_assert!(train_used.iter().all(|s| halves.train_half.contains(s)));
            prop_assert!(test_used.iter().all(|s| halves.test_half.contains(s)));
        }
    }

    #[test]
    fn dataset_seed_determinism(tax in taxonomy_strategy(), seed in 0u64..1000) {
        let (a, _) = generate_pairs(&tax, 3, 16, seed).unwrap();
        let (b, _) = generate_pairs(&tax, 3, 16, seed).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        skillmatch_core::simulation::write_jsonl(&a, &mut buf_a).unwrap();
        skillmatch_core::simulation::write_jsonl(&b, &mut buf_b).unwrap();
        prop_assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn bow_concat_dominates_parts_on_unigrams(s1 in skill(), s2 in skill()) {
        let vocab = fit_bow(&[s1.clone(), s2.clone()]).unwrap();
        let joined = transform_bow(&vocab, &format!("{s1} {s2}"));
        let a = transform_bow(&vocab, &s1);
        let b = transform_bow(&vocab, &s2);
        for (gram, idx) in vocab.ngrams().zip(0..) {
            if gram.contains(' ') {
                continue; // bigrams may bridge the boundary
            }
            let max = a.values[idx].max(b.values[idx]);
            prop_assert!(joined.values[idx] >= max, "gram {gram}: {} < {max}", joined.values[idx]);
        }
    }

    #[test]
    fn avg_stays_in_coordinate_hull(words in prop::collection::vec(word(), 1..10)) {
        // Table over the fixed word list with deterministic vectors.
        let entries: Vec<(String, Vec<f64>)> = ["repair", "install", "monitor", "teach",
            "assess", "clean", "operate", "plan", "records", "patients", "students", "engines",
            "pipes", "reports", "systems", "tools"]
            .iter()
            .enumerate()
            .map(|(i, w)| {
                (w.to_string(), vec![i as f64, (i * i) as f64 % 7.0, -(i as f64) / 2.0])
            })
            .collect();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        use std::io::Write as _;
        for (w, v) in &entries {
            writeln!(f, "{} {} {} {}", w, v[0], v[1], v[2]).unwrap();
        }
        f.flush().unwrap();
        let table = skillmatch_core::vectorize::load_embeddings(f.path()).unwrap().table;
        let text = words.join(" ");
        let (avg, covered) = transform_avg(&table, &text);
        prop_assert_eq!(covered, tokenize(&text).len());
        let used: Vec<&Vec<f64>> = words.iter()
            .map(|w| entries.iter().find(|(e, _)| e == w).map(|(_, v)| v).unwrap())
            .collect();
        for dim in 0..3 {
            let lo = used.iter().map(|v| v[dim]).fold(f64::INFINITY, f64::min);
            let hi = used.iter().map(|v| v[dim]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(avg.values[dim] >= lo - 1e-9 && avg.values[dim] <= hi + 1e-9);
        }
    }

    #[test]
    fn score_symmetry(a in prop::collection::vec(-5.0..5.0f64, 1..8), bvals in prop::collection::vec(-5.0..5.0f64, 1..8)) {
        let n = a.len().min(bvals.len());
        let x = pv(a[..n].to_vec());
        let y = pv(bvals[..n].to_vec());
        let c1 = cosine_score(&x, &y).unwrap().value;
        let c2 = cosine_score(&y, &x).unwrap().value;
        prop_assert!((c1 - c2).abs() < 1e-12);
        let e1 = euclidean_score(&x, &y).unwrap().value;
        let e2 = euclidean_score(&y, &x).unwrap().value;
        prop_assert!((e1 - e2).abs() < 1e-12);
        let m = MahalanobisMetric::identity(n);
        let m1 = mahalanobis_score(&m, &x, &y).unwrap().value;
        let m2 = mahalanobis_score(&m, &y, &x).unwrap().value;
        prop_assert!((m1 - m2).abs() < 1e-12);
    }

    #[test]
    fn score_self_maximality(a in prop::collection::vec(-5.0..5.0f64, 1..8), bvals in prop::collection::vec(-5.0..5.0f64, 1..8)) {
        let n = a.len().min(bvals.len());
        let x = pv(a[..n].to_vec());
        let y = pv(bvals[..n].to_vec());
        let self_e = euclidean_score(&x, &x).unwrap().value;
        prop_assert!(self_e >= euclidean_score(&x, &y).unwrap().value);
        let m = MahalanobisMetric::identity(n);
        prop_assert!(mahalanobis_score(&m, &x, &x).unwrap().value >= mahalanobis_score(&m, &x, &y).unwrap().value);
        let sx = cosine_score(&x, &x).unwrap();
        let sy = cosine_score(&x, &y).unwrap();
        if !sx.degenerate && !sy.degenerate {
            prop_assert!(sx.value >= sy.value - 1e-12);
        }
    }

    #[test]
    fn auc_rank_equals_brute_force(set in scored_set()) {
        let fast = auc(&set).unwrap();
        let slow = auc_brute(&set);
        prop_assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn auc_invariant_under_monotone_transforms(set in scored_set()) {
        let base = auc(&set).unwrap();
        for f in [|x: f64| 2.0 * x + 7.0, |x: f64| x * x * x] {
            let mapped: Vec<ScoredPair> = set.iter().map(|s| {
                let mut t = s.clone();
                t.score.value = f(s.score.value);
                t
            }).collect();
            prop_assert!((auc(&mapped).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_label_swap_complement(set in scored_set()) {
        let swapped: Vec<ScoredPair> = set.iter().map(|s| {
            let mut t = s.clone();
            t.pair.label = match s.pair.label {
                MatchLabel::Good => MatchLabel::Bad,
                MatchLabel::Bad => MatchLabel::Good,
            };
            t
        }).collect();
        prop_assert!((auc(&set).unwrap() + auc(&swapped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_affine_invariance(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..20),
        a in 0.1..5.0f64,
        b in -10.0..10.0f64,
        c in 0.1..5.0f64,
        d in -10.0..10.0f64,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let base = match pearson(&x, &y) {
            Ok(r) => r,
            Err(_) => return Ok(()), // degenerate draw
        };
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let t = pearson(&xt, &yt).unwrap();
        prop_assert!((base - t).abs() < 1e-12, "{base} vs {t}");
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn top_k_matches_exhaustive_sort(
        raw in prop::collection::vec(prop::collection::vec(0..5i8, 3), 2..25),
        k in 1usize..12,
    ) {
        let profiles: BTreeMap<String, ProfileVector> = raw.iter().enumerate()
            .map(|(i, v)| (format!("c{i:02}"), pv(v.iter().map(|&x| x as f64).collect())))
            .collect();
        let scorer = MatchModel::Euclidean;
        let fast = top_k_neighbors("c00", &profiles, &scorer, k).unwrap();
        let query = &profiles["c00"];
        let mut all: Vec<(f64, String)> = profiles.iter()
            .filter(|(c, _)| c.as_str() != "c00")
            .map(|(c, v)| (scorer.score_pair(query, v).unwrap().value, c.clone()))
            .collect();
        all.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
        let slow: Vec<String> = all.into_iter().take(k).map(|(_, c)| c).collect();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn vectorizer_dimension_contract(texts in prop::collection::vec(skill(), 2..8)) {
        let vocab = fit_bow(&texts).unwrap();
        let dims: BTreeSet<usize> = texts.iter().map(|t| transform_bow(&vocab, t).dim()).collect();
        prop_assert_eq!(dims.len(), 1);
        prop_assert_eq!(dims.into_iter().next().unwrap(), vocab.len());
    }
}
