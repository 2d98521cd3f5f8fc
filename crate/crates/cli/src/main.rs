//! `skillmatch`: simulate skills-based matching data from an occupation
//! taxonomy and audit matching models for AUC and gender segregation risk.

mod config;
mod meta;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use skillmatch_core::evaluate::{
    self, audit_profiles, evaluate_all, pair_side_key, EvalConfig, EvalResources,
};
use skillmatch_core::project::{emit_projection, write_pca_csv};
use skillmatch_core::simulation::{generate_pairs, read_jsonl, write_jsonl, PairDataset};
use skillmatch_core::taxonomy::{load_taxonomy, occupation_skill_text, skill_text_corpus, Taxonomy};
use skillmatch_core::vectorize::{fit_bow, load_embeddings, load_precomputed, AnyVectorizer, VectorizerKind};

use config::{parse_list, RunConfig};
use meta::Fingerprint;

#[derive(Parser)]
#[command(name = "skillmatch", version, about = "Skills-based matching simulation and gender-segregation audit")]
struct Cli {
    /// Flat TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and join the taxonomy CSVs into taxonomy.json.
    Ingest(CommonArgs),
    /// Generate the balanced, skill-disjoint pair dataset (pairs.jsonl).
    Simulate(CommonArgs),
    /// Evaluate every enabled vectorizer x metric combination
    /// (report.json, audit_detail.csv).
    Evaluate(CommonArgs),
    /// Project occupation vectors to 2-D with PCA (pca.csv).
    Project(CommonArgs),
}

/// Flags mirror the RunConfig fields; unset flags fall back to the config
/// file, then to defaults.
#[derive(Args, Default)]
struct CommonArgs {
    #[arg(long)]
    occupations: Option<PathBuf>,
    #[arg(long)]
    skills: Option<PathBuf>,
    #[arg(long)]
    gender: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    sentence_pairs: Option<PathBuf>,
    #[arg(long)]
    sentence_audit: Option<PathBuf>,
    #[arg(long)]
    sentence_occupations: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Directory for the texts a sentence encoder must embed offline.
    #[arg(long)]
    texts_out: Option<PathBuf>,
    /// Skills per sampled profile.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    audit_repeats: Option<usize>,
    /// Comma-separated: bow,wordvec,sentence.
    #[arg(long)]
    vectorizers: Option<String>,
    /// Comma-separated: cosine,euclidean,learned.
    #[arg(long, alias = "metric")]
    metrics: Option<String>,
    /// Single vectorizer for `project`.
    #[arg(long)]
    vectorizer: Option<String>,
    /// Which combination fills audit_detail.csv, e.g. "bow,cosine".
    #[arg(long)]
    audit_detail: Option<String>,
    #[arg(long)]
    itml_gamma: Option<f64>,
    #[arg(long)]
    itml_max_iter: Option<usize>,
    #[arg(long)]
    itml_conv_tol: Option<f64>,
    #[arg(long)]
    itml_percentile_low: Option<f64>,
    #[arg(long)]
    itml_percentile_high: Option<f64>,
    /// Reduce vectors to this many principal dims before ITML (tractability
    /// aid for high-dimensional bag-of-words inputs).
    #[arg(long)]
    itml_pca_reduce: Option<usize>,
}

impl CommonArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            occupations: self.occupations,
            skills: self.skills,
            gender: self.gender,
            taxonomy: self.taxonomy,
            pairs: self.pairs,
            embeddings: self.embeddings,
            sentence_pairs: self.sentence_pairs,
            sentence_audit: self.sentence_audit,
            sentence_occupations: self.sentence_occupations,
            out_dir: self.out_dir,
            texts_out: self.texts_out,
            k: self.k,
            n_pairs: self.n_pairs,
            top_k: self.top_k,
            seed: self.seed,
            audit_repeats: self.audit_repeats,
            vectorizers: self.vectorizers.as_deref().map(parse_list),
            metrics: self.metrics.as_deref().map(parse_list),
            vectorizer: self.vectorizer,
            audit_detail: self.audit_detail,
            itml_gamma: self.itml_gamma,
            itml_max_iter: self.itml_max_iter,
            itml_conv_tol: self.itml_conv_tol,
            itml_percentile_low: self.itml_percentile_low,
            itml_percentile_high: self.itml_percentile_high,
            itml_pca_reduce: self.itml_pca_reduce,
        }
    }
}

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_DATA: i32 = 2;
const EXIT_PARTIAL: i32 = 3;

/// A failure that knows its exit code.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error,
    }
}

fn data(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_DATA,
        error,
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let file_config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return EXIT_USAGE;
            }
        },
        None => RunConfig::default(),
    };
    let (command, args) = match cli.command {
        Command::Ingest(a) => (cmd_ingest as fn(&RunConfig) -> Result<i32, Failure>, a),
        Command::Simulate(a) => (cmd_simulate as _, a),
        Command::Evaluate(a) => (cmd_evaluate as _, a),
        Command::Project(a) => (cmd_project as _, a),
    };
    let cfg = file_config.merged_with(args.into_config());
    match command(&cfg) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.out_dir().map_err(usage)?.to_path_buf();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create out dir {}", dir.display()))
        .map_err(data)?;
    Ok(dir)
}

fn read_taxonomy(cfg: &RunConfig) -> Result<(PathBuf, Taxonomy), Failure> {
    let path = cfg
        .require(cfg.taxonomy.as_ref(), "taxonomy")
        .map_err(usage)?
        .to_path_buf();
    let taxonomy = Taxonomy::read_json(&path)
        .map_err(|e| data(anyhow!(e).context("cannot load taxonomy")))?;
    Ok((path, taxonomy))
}

fn cmd_ingest(cfg: &RunConfig) -> Result<i32, Failure> {
    let occupations = cfg
        .require(cfg.occupations.as_ref(), "occupations")
        .map_err(usage)?
        .to_path_buf();
    let skills = cfg
        .require(cfg.skills.as_ref(), "skills")
        .map_err(usage)?
        .to_path_buf();
    let gender = cfg.gender.clone();
    let out_dir = ensure_out_dir(cfg)?;

    let loaded = load_taxonomy(&occupations, &skills, gender.as_deref())
        .map_err(|e| data(anyhow!(e)))?;
    let tax = &loaded.taxonomy;
    let out_path = out_dir.join("taxonomy.json");
    tax.write_json(&out_path).map_err(|e| data(anyhow!(e)))?;

    let mut fp = Fingerprint::new("ingest", cfg.seed(), cfg.k())
        .with_input("occupations", &occupations)
        .and_then(|f| f.with_input("skills", &skills))
        .map_err(data)?;
    if let Some(g) = &gender {
        fp = fp.with_input("gender", g).map_err(data)?;
    }
    fp.write_for(&out_path).map_err(data)?;

    let n_skills: usize = tax.iter().map(|o| o.skills.len()).sum();
    let labeled = tax.iter().filter(|o| o.female_share.is_some()).count();
    if gender.is_none() {
        eprintln!("warning: no gender file supplied; taxonomy has no female_share labels");
    }
    if loaded.warnings.total() > 0 {
        eprintln!("warning: {}", loaded.warnings);
    }
    println!(
        "occupations={} skills={} labeled={} out={}",
        tax.len(),
        n_skills,
        labeled,
        out_path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32, Failure> {
    let (tax_path, taxonomy) = read_taxonomy(cfg)?;
    let out_dir = ensure_out_dir(cfg)?;
    let (dataset, split) = generate_pairs(&taxonomy, cfg.k(), cfg.n_pairs(), cfg.seed())
        .map_err(|e| match e {
            skillmatch_core::simulation::SimulationError::InvalidPairCount(_)
            | skillmatch_core::simulation::SimulationError::InvalidSubsetSize => usage(anyhow!(e)),
            other => data(anyhow!(other)),
        })?;
    let out_path = out_dir.join("pairs.jsonl");
    let file = File::create(&out_path)
        .with_context(|| format!("cannot write {}", out_path.display()))
        .map_err(data)?;
    let mut w = BufWriter::new(file);
    write_jsonl(&dataset, &mut w).map_err(|e| data(anyhow!(e)))?;
    w.flush().map_err(|e| data(anyhow!(e)))?;

    let mut fp = Fingerprint::new("simulate", cfg.seed(), cfg.k());
    fp.n_pairs = Some(cfg.n_pairs());
    let fp = fp.with_input("taxonomy", &tax_path).map_err(data)?;
    fp.write_for(&out_path).map_err(data)?;

    if split.excluded > 0 {
        eprintln!(
            "warning: {} occupation(s) excluded (fewer than 2 skills)",
            split.excluded
        );
    }
    println!(
        "pairs={} train={} test={} good_per_split={} out={}",
        dataset.train.len() + dataset.test.len(),
        dataset.train.len(),
        dataset.test.len(),
        dataset.train.len() / 2,
        out_path.display()
    );
    Ok(EXIT_OK)
}

fn load_pairs(cfg: &RunConfig) -> Result<(PathBuf, PairDataset), Failure> {
    let path = cfg
        .require(cfg.pairs.as_ref(), "pairs")
        .map_err(usage)?
        .to_path_buf();
    let file = File::open(&path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(data)?;
    let dataset = read_jsonl(BufReader::new(file), cfg.seed(), cfg.k())
        .map_err(|e| data(anyhow!(e).context("cannot parse pairs")))?;
    Ok((path, dataset))
}

fn write_texts_out(
    dir: &Path,
    taxonomy: &Taxonomy,
    dataset: &PairDataset,
    cfg: &RunConfig,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    #[derive(serde::Serialize)]
    struct Row<'a> {
        key: String,
        text: &'a str,
    }
    let write_rows = |name: &str, rows: Vec<(String, &str)>| -> Result<()> {
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        for (key, text) in rows {
            serde_json::to_writer(&mut w, &Row { key, text })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    };
    let mut pair_rows = Vec::new();
    for (split, pairs) in [("train", &dataset.train), ("test", &dataset.test)] {
        for (i, pair) in pairs.iter().enumerate() {
            pair_rows.push((pair_side_key(split, i, "left"), pair.left.text.as_str()));
            pair_rows.push((pair_side_key(split, i, "right"), pair.right.text.as_str()));
        }
    }
    write_rows("pair_texts.jsonl", pair_rows)?;

    let profiles = audit_profiles(taxonomy, cfg.k(), cfg.seed())
        .map_err(|e| anyhow!("cannot build audit texts: {e}"))?;
    let audit_rows = profiles
        .iter()
        .map(|(code, p)| (code.clone(), p.text.as_str()))
        .collect();
    write_rows("audit_texts.jsonl", audit_rows)?;

    let occ_texts: Vec<(String, String)> = taxonomy
        .iter()
        .map(|o| Ok((o.code.clone(), occupation_skill_text(o)?)))
        .collect::<Result<_>>()?;
    write_rows(
        "occupation_texts.jsonl",
        occ_texts.iter().map(|(c, t)| (c.clone(), t.as_str())).collect(),
    )?;
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<i32, Failure> {
    let vectorizers = cfg.vectorizer_kinds().map_err(usage)?;
    let metrics = cfg.metric_kinds().map_err(usage)?;
    let detail_combo = cfg.audit_detail_combo().map_err(usage)?;
    let itml = cfg.itml().map_err(usage)?;
    if cfg.top_k() == 0 || cfg.k() == 0 {
        return Err(usage(anyhow!("k and top_k must be >= 1")));
    }
    let (tax_path, taxonomy) = read_taxonomy(cfg)?;
    let (pairs_path, dataset) = load_pairs(cfg)?;
    let out_dir = ensure_out_dir(cfg)?;

    if let Some(texts_dir) = &cfg.texts_out {
        write_texts_out(texts_dir, &taxonomy, &dataset, cfg).map_err(data)?;
        println!("texts for offline embedding written to {}", texts_dir.display());
    }

    // Resource loading failures surface in the affected rows, not as a
    // whole-run abort: the other combinations still evaluate.
    let mut resources = EvalResources::default();
    if vectorizers.contains(&VectorizerKind::WordVec) {
        if let Some(path) = &cfg.embeddings {
            match load_embeddings(path) {
                Ok(loaded) => resources.embeddings = Some(loaded),
                Err(e) => eprintln!("warning: cannot load embeddings: {e}"),
            }
        }
    }
    if vectorizers.contains(&VectorizerKind::Sentence) {
        if let Some(path) = &cfg.sentence_pairs {
            match load_precomputed(path) {
                Ok(v) => resources.sentence_pairs = Some(v),
                Err(e) => eprintln!("warning: cannot load sentence pair vectors: {e}"),
            }
        }
        if let Some(path) = &cfg.sentence_audit {
            match load_precomputed(path) {
                Ok(v) => resources.sentence_audit = Some(v),
                Err(e) => eprintln!("warning: cannot load sentence audit vectors: {e}"),
            }
        }
    }

    let eval_cfg = EvalConfig {
        vectorizers,
        metrics,
        itml,
        itml_pca_reduce: cfg.itml_pca_reduce,
        top_k: cfg.top_k(),
        subset_k: cfg.k(),
        seed: cfg.seed(),
        audit_repeats: cfg.audit_repeats(),
    };
    let output = evaluate_all(&taxonomy, &dataset, &resources, &eval_cfg);

    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, output.report.to_json() + "\n")
        .with_context(|| format!("cannot write {}", report_path.display()))
        .map_err(data)?;

    let mut fp = Fingerprint::new("evaluate", cfg.seed(), cfg.k());
    fp.n_pairs = Some(cfg.n_pairs());
    fp.top_k = Some(cfg.top_k());
    let mut fp = fp
        .with_input("taxonomy", &tax_path)
        .and_then(|f| f.with_input("pairs", &pairs_path))
        .map_err(data)?;
    for (role, path) in [
        ("embeddings", &cfg.embeddings),
        ("sentence_pairs", &cfg.sentence_pairs),
        ("sentence_audit", &cfg.sentence_audit),
    ] {
        if let Some(path) = path {
            if path.exists() {
                fp = fp.with_input(role, path).map_err(data)?;
            }
        }
    }
    fp.write_for(&report_path).map_err(data)?;

    // Audit detail for the featured combination; fall back to the first
    // successful row so the artifact exists whenever anything succeeded.
    let detail = output
        .details
        .get(&detail_combo)
        .or_else(|| output.details.values().next());
    if let Some(audit) = detail {
        let detail_path = out_dir.join("audit_detail.csv");
        let file = File::create(&detail_path)
            .with_context(|| format!("cannot write {}", detail_path.display()))
            .map_err(data)?;
        evaluate::write_audit_detail_csv(audit, BufWriter::new(file))
            .map_err(|e| data(anyhow!(e)))?;
        fp.write_for(&detail_path).map_err(data)?;
    }

    for row in &output.report.rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{}/{} auc={} gsr={} n_test_pairs={} n_occupations={} warnings={}",
            row.vectorizer,
            row.metric,
            fmt(row.auc),
            fmt(row.gsr),
            row.n_test_pairs,
            row.n_occupations,
            row.warnings.len()
        );
    }
    println!("report={}", report_path.display());
    Ok(if output.report.has_failures() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

fn cmd_project(cfg: &RunConfig) -> Result<i32, Failure> {
    let name = cfg.vectorizer.as_deref().unwrap_or("bow");
    let kind = VectorizerKind::parse(name)
        .ok_or_else(|| usage(anyhow!("unknown vectorizer {name:?} (bow|wordvec|sentence)")))?;
    let (tax_path, taxonomy) = read_taxonomy(cfg)?;
    let out_dir = ensure_out_dir(cfg)?;

    let mut input_roles: Vec<(&str, PathBuf)> = vec![("taxonomy", tax_path)];
    let vectorizer = match kind {
        VectorizerKind::Bow => {
            let corpus = skill_text_corpus(&taxonomy).map_err(|e| data(anyhow!(e)))?;
            AnyVectorizer::Bow(fit_bow(&corpus).map_err(|e| data(anyhow!(e)))?)
        }
        VectorizerKind::WordVec => {
            let path = cfg
                .require(cfg.embeddings.as_ref(), "embeddings")
                .map_err(usage)?
                .to_path_buf();
            let loaded = load_embeddings(&path).map_err(|e| data(anyhow!(e)))?;
            if loaded.duplicate_tokens > 0 {
                eprintln!(
                    "warning: {} duplicate embedding tokens (last occurrence kept)",
                    loaded.duplicate_tokens
                );
            }
            input_roles.push(("embeddings", path));
            AnyVectorizer::WordVec(loaded.table)
        }
        VectorizerKind::Sentence => {
            let path = cfg
                .require(cfg.sentence_occupations.as_ref(), "sentence-occupations")
                .map_err(usage)?
                .to_path_buf();
            let vectors = load_precomputed(&path).map_err(|e| data(anyhow!(e)))?;
            input_roles.push(("sentence_occupations", path));
            AnyVectorizer::Sentence(vectors)
        }
    };

    let projection = emit_projection(&taxonomy, &vectorizer).map_err(|e| data(anyhow!(e)))?;
    let out_path = out_dir.join("pca.csv");
    let file = File::create(&out_path)
        .with_context(|| format!("cannot write {}", out_path.display()))
        .map_err(data)?;
    write_pca_csv(&projection, BufWriter::new(file)).map_err(|e| data(anyhow!(e)))?;

    let mut fp = Fingerprint::new("project", cfg.seed(), cfg.k());
    for (role, path) in &input_roles {
        fp = fp.with_input(role, path).map_err(data)?;
    }
    fp.write_for(&out_path).map_err(data)?;

    println!(
        "occupations={} explained_variance=({:.6},{:.6}) out={}",
        projection.rows.len(),
        projection.explained_variance.0,
        projection.explained_variance.1,
        out_path.display()
    );
    Ok(EXIT_OK)
}
