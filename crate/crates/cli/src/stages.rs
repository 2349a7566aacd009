use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use offense_core::analytics::{
    analyze, emit_report, AnalyticsReport, ClassifiedComment, ReportManifest, SpillAnalyzer,
};
use offense_core::classifier::{
    derive_seed, evaluate, featurize, filter_by_confidence, grid_search, holdout_split, kfold_cv,
    load_labeled_dataset, sweep_holdout_and_confidence, train_baselines, train_forest, Classifier,
    ForestConfig, ForestModel, LabeledSample, LoadReport, MeanMetrics, Metrics,
};
use offense_core::corpus::{parse_comment_line, Funnel, FunnelStats, RawComment, Verdict};
use offense_core::embedding::{sidecar_path, train, EmbeddingModel};
use offense_core::hatemodel::{
    build_hate_vector, read_scores, HateVector, OffensiveLexicon, ScoreFormat, ScoreWriter,
    ScoredComment, Scorer,
};
use offense_core::textnorm::{normalize, NormalizerConfig};
use offense_core::{fingerprint, hex_hash, SubredditTaxonomy};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{stage_seed, LexiconSource};
use crate::output::{hash_file, write_file, write_json, RunManifest, Staged, StageRecord};
use crate::{CliError, Result, RunConfig};

pub const COMMENTS_FILE: &str = "comments.jsonl";
pub const INGEST_STATS_FILE: &str = "ingest_stats.json";
pub const EMBEDDING_FILE: &str = "embedding.bin";
pub const HATEVECTOR_FILE: &str = "hatevector.json";
pub const FOREST_FILE: &str = "forest.bin";
pub const FOREST_PROVENANCE_FILE: &str = "forest.provenance.json";
pub const CLASSIFIER_REPORT_FILE: &str = "classifier_report.json";
pub const EVAL_DIR: &str = "eval";
pub const REPORT_DIR: &str = "report";
const SPILL_DIR: &str = "spill";

/// Lines handed to the worker pool at a time.
const CHUNK_LINES: usize = 16_384;

/// Runs `f` on a pool of exactly `workers` threads.
pub fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(CliError::data)?
        .install(f)
}

pub fn normalizer() -> NormalizerConfig {
    NormalizerConfig::english()
}

fn record(cfg: &RunConfig, stage: &str, inputs: &[&Path], outputs: &[&Path], summary: impl Serialize) -> Result<()> {
    let mut rec = StageRecord::new(cfg)?;
    for p in inputs {
        rec.input(p)?;
    }
    for p in outputs {
        rec.output(p)?;
    }
    rec.summary = serde_json::to_value(summary)?;
    RunManifest::record(&cfg.out_dir, stage, rec)
}

/// Reads `path` in chunks of lines; a line that is not UTF-8 arrives as `None`.
fn for_each_chunk(path: &Path, mut f: impl FnMut(Vec<Option<String>>) -> Result<()>) -> Result<()> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rdr = BufReader::with_capacity(1 << 20, file);
    let mut buf = Vec::new();
    let mut chunk = Vec::with_capacity(CHUNK_LINES);
    loop {
        buf.clear();
        if rdr.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        while matches!(buf.last(), Some(b'\n' | b'\r')) {
            buf.pop();
        }
        chunk.push(String::from_utf8(std::mem::take(&mut buf)).ok());
        if chunk.len() == CHUNK_LINES {
            f(std::mem::take(&mut chunk))?;
        }
    }
    if !chunk.is_empty() {
        f(chunk)?;
    }
    Ok(())
}

fn read_comments(path: &Path) -> Result<Vec<RawComment>> {
    let mut out = Vec::new();
    let mut line_no = 0usize;
    for_each_chunk(path, |chunk| {
        for line in chunk {
            line_no += 1;
            let c = line
                .ok_or_else(|| CliError::Data(format!("{}:{line_no}: not UTF-8", path.display())))
                .and_then(|l| {
                    parse_comment_line(&l)
                        .map_err(|e| CliError::Data(format!("{}:{line_no}: {e}", path.display())))
                })?;
            out.push(c);
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn cmd_ingest(cfg: &RunConfig, input: &Path) -> Result<FunnelStats> {
    let funnel = Funnel::new(cfg.ingest.filter.clone(), cfg.ingest.window)?;
    let target = cfg.out(COMMENTS_FILE);
    let mut staged = Staged::create(&target)?;
    let mut stats = FunnelStats::default();
    for_each_chunk(input, |chunk| {
        let verdicts: Vec<Verdict> = chunk
            .par_iter()
            .map(|l| l.as_deref().map_or(Verdict::Malformed, |l| funnel.admit(l)))
            .collect();
        for v in verdicts {
            stats.record(&v);
            if let Verdict::Accepted(c) = v {
                serde_json::to_writer(&mut *staged.writer(), &c)?;
                staged.writer().write_all(b"\n")?;
            }
        }
        Ok(())
    })?;
    staged.commit()?;
    let stats_path = write_json(&cfg.out(INGEST_STATS_FILE), &stats)?;
    record(cfg, "ingest", &[input], &[&target, &stats_path], stats)?;
    Ok(stats)
}

/// Normalized token sequences of every comment body.
pub fn normalize_corpus(comments: &[RawComment], norm: &NormalizerConfig) -> Vec<Vec<String>> {
    comments
        .par_iter()
        .map(|c| normalize(&c.body, norm).into_inner())
        .collect()
}

/// Saves the model and its sidecar under temporary names, then renames both.
fn save_embedding(model: &EmbeddingModel, target: &Path) -> Result<()> {
    let mut name = target.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    let tmp = target.with_file_name(name);
    let result = model
        .save(&tmp)
        .map_err(CliError::from)
        .and_then(|_| Ok(std::fs::rename(sidecar_path(&tmp), sidecar_path(target))?))
        .and_then(|_| Ok(std::fs::rename(&tmp, target)?));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
        let _ = std::fs::remove_file(sidecar_path(&tmp));
    }
    result
}

pub fn cmd_train_embedding(cfg: &RunConfig, input: Option<&Path>) -> Result<EmbeddingModel> {
    let input = input.map_or_else(|| cfg.out(COMMENTS_FILE), Path::to_path_buf);
    let comments = read_comments(&input)?;
    let corpus = normalize_corpus(&comments, &normalizer());
    let model = train(&corpus, &cfg.embedding)?;
    let target = cfg.out(EMBEDDING_FILE);
    std::fs::create_dir_all(&cfg.out_dir)?;
    save_embedding(&model, &target)?;
    record(
        cfg,
        "train-embedding",
        &[&input],
        &[&target, &sidecar_path(&target)],
        serde_json::json!({
            "comments": comments.len(),
            "vocabulary": model.vocab().len(),
            "checksum": hex_hash(model.content_hash()),
        }),
    )?;
    Ok(model)
}

pub fn cmd_build_hatevector(cfg: &RunConfig, lexicons: &[LexiconSource]) -> Result<HateVector> {
    if lexicons.is_empty() {
        return Err(CliError::Usage("at least one --lexicon TAG=PATH is required".into()));
    }
    let norm = normalizer();
    let embedding_path = cfg.out(EMBEDDING_FILE);
    let model = EmbeddingModel::load(&embedding_path)?;
    let sources: Vec<(&str, &Path)> = lexicons
        .iter()
        .map(|l| (l.tag.as_str(), l.path.as_path()))
        .collect();
    let lexicon = OffensiveLexicon::load(&sources, &norm)?;
    let hv = build_hate_vector(&lexicon, &model, &norm)?;
    let target = write_json(&cfg.out(HATEVECTOR_FILE), &hv)?;
    let mut inputs: Vec<&Path> = vec![&embedding_path];
    inputs.extend(sources.iter().map(|&(_, p)| p));
    record(
        cfg,
        "build-hatevector",
        &inputs,
        &[&target],
        serde_json::json!({
            "lexicon_words": lexicon.len(),
            "contributing": hv.contributing_count,
            "missing": hv.missing_count,
        }),
    )?;
    Ok(hv)
}

/// Hashes tying a trained forest to the feature pipeline it was fitted on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestProvenance {
    pub forest: String,
    pub embedding: String,
    pub hatevector: String,
    pub normalizer: String,
}

impl ForestProvenance {
    /// Field-by-field differences against `actual`.
    pub fn diff(&self, actual: &ForestProvenance) -> Vec<String> {
        let pairs = [
            ("forest", &self.forest, &actual.forest),
            ("embedding", &self.embedding, &actual.embedding),
            ("hatevector", &self.hatevector, &actual.hatevector),
            ("normalizer", &self.normalizer, &actual.normalizer),
        ];
        pairs
            .iter()
            .filter(|(_, e, a)| e != a)
            .map(|(k, e, a)| format!("{k}: expected {e}, found {a}"))
            .collect()
    }
}

/// Embedding, hate vector and optionally forest, loaded and cross-checked.
pub struct LoadedModels {
    pub embedding: EmbeddingModel,
    pub hate: HateVector,
    pub normalizer: NormalizerConfig,
    pub hatevector_hash: String,
    pub forest: Option<ForestModel>,
}

impl LoadedModels {
    /// Loads the embedding and hate vector from `dir`, failing with a
    /// provenance error when they were not built together.
    pub fn load(dir: &Path) -> Result<Self> {
        let embedding = EmbeddingModel::load(&dir.join(EMBEDDING_FILE))?;
        let hv_path = dir.join(HATEVECTOR_FILE);
        let hate = HateVector::load(&hv_path)?;
        let models = Self {
            embedding,
            hate,
            normalizer: normalizer(),
            hatevector_hash: hash_file(&hv_path)?,
            forest: None,
        };
        models.scorer()?;
        Ok(models)
    }

    /// Also loads the forest and checks it against its provenance record.
    pub fn load_with_forest(dir: &Path) -> Result<Self> {
        let mut models = Self::load(dir)?;
        let forest_path = dir.join(FOREST_FILE);
        let forest = ForestModel::load(&forest_path)?;
        let recorded: ForestProvenance =
            serde_json::from_slice(&std::fs::read(dir.join(FOREST_PROVENANCE_FILE))?)?;
        let actual = models.provenance(&hash_file(&forest_path)?);
        let diff = recorded.diff(&actual);
        if !diff.is_empty() {
            return Err(CliError::Provenance(diff.join("; ")));
        }
        models.forest = Some(forest);
        Ok(models)
    }

    pub fn scorer(&self) -> Result<Scorer<'_>> {
        Ok(Scorer::new(&self.embedding, &self.hate, &self.normalizer)?)
    }

    pub fn provenance(&self, forest_hash: &str) -> ForestProvenance {
        ForestProvenance {
            forest: forest_hash.to_string(),
            embedding: hex_hash(self.embedding.content_hash()),
            hatevector: self.hatevector_hash.clone(),
            normalizer: hex_hash(self.normalizer.fingerprint()),
        }
    }
}

/// Featurized labeled data plus loader counts.
pub struct Featurized {
    pub samples: Vec<LabeledSample>,
    pub load: LoadReport,
    pub dataset: PathBuf,
}

fn featurize_dataset(cfg: &RunConfig, dataset: Option<&Path>, models: &LoadedModels) -> Result<Featurized> {
    let dataset = dataset
        .map(Path::to_path_buf)
        .or_else(|| cfg.classifier.dataset.clone())
        .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
    let (texts, load) = load_labeled_dataset(&dataset, &cfg.classifier.format)?;
    let samples = featurize(&texts, &models.scorer()?);
    Ok(Featurized {
        samples,
        load,
        dataset,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub load: LoadReport,
    pub samples: usize,
    pub after_confidence_filter: usize,
    pub train_size: usize,
    pub holdout_size: usize,
    pub folds: usize,
    pub best: ForestConfig,
    pub best_cv: MeanMetrics,
    pub grid: Vec<(ForestConfig, MeanMetrics)>,
    pub holdout: Metrics,
}

/// Confidence filter, holdout split, grid search with k-fold CV on the
/// training side, refit of the best configuration, holdout evaluation.
pub fn cmd_train_classifier(cfg: &RunConfig, dataset: Option<&Path>) -> Result<ClassifierReport> {
    let models = LoadedModels::load(&cfg.out_dir)?;
    let data = featurize_dataset(cfg, dataset, &models)?;
    let cc = &cfg.classifier;
    let kept = filter_by_confidence(&data.samples, cc.confidence_threshold);
    let seed = stage_seed(cfg.seed, "classifier");
    let (train_set, holdout_set) = holdout_split(&kept, cc.holdout_fraction, derive_seed(seed, 1))?;
    let grid = grid_search(&train_set, &cc.grid, cc.folds, derive_seed(seed, 2))?;
    let forest = train_forest(&train_set, &grid.best, derive_seed(seed, 3))?;
    let holdout = evaluate(&forest, &holdout_set)?;

    let forest_path = write_file(&cfg.out(FOREST_FILE), &forest.to_bytes())?;
    let prov = models.provenance(&hash_file(&forest_path)?);
    let prov_path = write_json(&cfg.out(FOREST_PROVENANCE_FILE), &prov)?;
    let report = ClassifierReport {
        load: data.load,
        samples: data.samples.len(),
        after_confidence_filter: kept.len(),
        train_size: train_set.len(),
        holdout_size: holdout_set.len(),
        folds: cc.folds,
        best_cv: grid.table[grid.best_index].1,
        best: grid.best,
        grid: grid.table,
        holdout,
    };
    let report_path = write_json(&cfg.out(CLASSIFIER_REPORT_FILE), &report)?;
    record(
        cfg,
        "train-classifier",
        &[
            &data.dataset,
            &cfg.out(EMBEDDING_FILE),
            &cfg.out(HATEVECTOR_FILE),
        ],
        &[&forest_path, &prov_path, &report_path],
        serde_json::json!({
            "best": &report.best,
            "best_cv_accuracy": report.best_cv.accuracy,
            "holdout_accuracy": report.holdout.accuracy,
        }),
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalFlags {
    pub kfold: bool,
    pub holdout: bool,
    pub sweep: bool,
    pub baselines: bool,
}

impl EvalFlags {
    pub fn any(&self) -> bool {
        self.kfold || self.holdout || self.sweep || self.baselines
    }
}

/// Evaluation protocols on the labeled data, written under `eval/`.
/// Returns the files written.
pub fn cmd_evaluate(cfg: &RunConfig, dataset: Option<&Path>, flags: EvalFlags) -> Result<Vec<PathBuf>> {
    if !flags.any() {
        return Err(CliError::Usage(
            "choose at least one of --kfold, --holdout, --sweep, --baselines".into(),
        ));
    }
    let models = LoadedModels::load(&cfg.out_dir)?;
    let data = featurize_dataset(cfg, dataset, &models)?;
    let cc = &cfg.classifier;
    let kept = filter_by_confidence(&data.samples, cc.confidence_threshold);
    let seed = stage_seed(cfg.seed, "evaluate");
    let dir = cfg.out(EVAL_DIR);
    let mut written = Vec::new();
    let mut summary = serde_json::Map::new();

    if flags.kfold {
        let cv = kfold_cv(&kept, cc.folds, &cc.forest, derive_seed(seed, 1))?;
        summary.insert("kfold_accuracy".into(), cv.mean.accuracy.into());
        written.push(write_json(&dir.join("kfold.json"), &cv)?);
    }
    if flags.holdout {
        let (tr, ho) = holdout_split(&kept, cc.holdout_fraction, derive_seed(seed, 2))?;
        let forest = train_forest(&tr, &cc.forest, derive_seed(seed, 3))?;
        let m = evaluate(&forest, &ho)?;
        summary.insert("holdout_accuracy".into(), m.accuracy.into());
        written.push(write_json(
            &dir.join("holdout.json"),
            &serde_json::json!({"train_size": tr.len(), "holdout_size": ho.len(), "metrics": m}),
        )?);
    }
    if flags.sweep {
        let sweep = sweep_holdout_and_confidence(
            &data.samples,
            &cc.sweep_fractions,
            &cc.sweep_thresholds,
            &cc.forest,
            derive_seed(seed, 4),
        );
        let mut csv = Vec::new();
        sweep.write_csv(&mut csv)?;
        summary.insert("sweep_cells".into(), sweep.rows.len().into());
        written.push(write_file(&dir.join("sweep.csv"), &csv)?);
        written.push(write_json(&dir.join("sweep_skipped.json"), &sweep.skipped)?);
    }
    if flags.baselines {
        let rows = train_baselines(&kept, &cc.forest, derive_seed(seed, 5))?;
        let mut csv = String::from("model,accuracy,f1\n");
        for r in &rows {
            csv.push_str(&format!("{},{:.4},{:.4}\n", r.name, r.mean.accuracy, r.mean.f1));
        }
        written.push(write_file(&dir.join("baselines.csv"), csv.as_bytes())?);
        written.push(write_json(&dir.join("baselines.json"), &rows)?);
    }

    let outputs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    record(
        cfg,
        "evaluate",
        &[
            &data.dataset,
            &cfg.out(EMBEDDING_FILE),
            &cfg.out(HATEVECTOR_FILE),
        ],
        &outputs,
        summary,
    )?;
    Ok(written)
}

/// Normalize, transform and vote on a batch, in input order.
pub fn classify_batch(
    comments: &[RawComment],
    scorer: &Scorer<'_>,
    forest: &ForestModel,
) -> Vec<ScoredComment> {
    comments
        .par_iter()
        .map(|c| {
            let s = scorer.score(&c.body);
            let mut out = ScoredComment::new(c, s);
            out.offensive = Some(forest.predict(&[s.value()]).label.is_offensive());
            out
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifyStats {
    pub comments: u64,
    pub offensive: u64,
}

pub fn classified_path(cfg: &RunConfig, format: ScoreFormat) -> PathBuf {
    cfg.out(match format {
        ScoreFormat::Csv => "classified.csv",
        ScoreFormat::JsonLines => "classified.jsonl",
    })
}

pub fn cmd_classify(cfg: &RunConfig, input: Option<&Path>, format: ScoreFormat) -> Result<ClassifyStats> {
    let models = LoadedModels::load_with_forest(&cfg.out_dir)?;
    let scorer = models.scorer()?;
    let forest = models.forest.as_ref().expect("loaded with forest");
    let input = input.map_or_else(|| cfg.out(COMMENTS_FILE), Path::to_path_buf);
    let target = classified_path(cfg, format);
    let mut staged = Staged::create(&target)?;
    let mut stats = ClassifyStats::default();
    {
        let mut w = ScoreWriter::new(staged.writer(), format)?;
        let mut line_no = 0usize;
        for_each_chunk(&input, |chunk| {
            let mut batch = Vec::with_capacity(chunk.len());
            for line in chunk {
                line_no += 1;
                let l = line.ok_or_else(|| CliError::Data(format!("{}:{line_no}: not UTF-8", input.display())))?;
                batch.push(
                    parse_comment_line(&l)
                        .map_err(|e| CliError::Data(format!("{}:{line_no}: {e}", input.display())))?,
                );
            }
            for s in classify_batch(&batch, &scorer, forest) {
                stats.comments += 1;
                stats.offensive += u64::from(s.offensive == Some(true));
                w.write(&s)?;
            }
            Ok(())
        })?;
        w.finish()?;
    }
    staged.commit()?;
    record(
        cfg,
        "classify",
        &[
            &input,
            &cfg.out(EMBEDDING_FILE),
            &cfg.out(HATEVECTOR_FILE),
            &cfg.out(FOREST_FILE),
        ],
        &[&target],
        stats,
    )?;
    Ok(stats)
}

pub fn load_taxonomy(cfg: &RunConfig) -> Result<SubredditTaxonomy> {
    match &cfg.taxonomy {
        Some(p) => Ok(SubredditTaxonomy::load(p)?),
        None => Ok(SubredditTaxonomy::reference()),
    }
}

pub fn cmd_analyze(cfg: &RunConfig, input: Option<&Path>) -> Result<(AnalyticsReport, ReportManifest)> {
    let input = match input {
        Some(p) => p.to_path_buf(),
        None => {
            let jsonl = classified_path(cfg, ScoreFormat::JsonLines);
            if jsonl.exists() {
                jsonl
            } else {
                classified_path(cfg, ScoreFormat::Csv)
            }
        }
    };
    let taxonomy = load_taxonomy(cfg)?;
    let anchor = cfg.analytics.anchor;
    let scored = read_scores(&input)?;
    let comments: Vec<ClassifiedComment> = scored
        .par_iter()
        .map(|s| ClassifiedComment::from_scored(s, &taxonomy, anchor))
        .collect::<std::result::Result<_, _>>()?;

    let report = match cfg.spill_partitions {
        Some(parts) => {
            let dir = cfg.out(SPILL_DIR);
            let mut spill = SpillAnalyzer::new(&dir, parts, &cfg.analytics)?;
            for c in &comments {
                spill.add(c)?;
            }
            let r = spill.finish()?;
            let _ = std::fs::remove_dir_all(&dir);
            r
        }
        None => analyze(&comments, &cfg.analytics, cfg.workers),
    };

    let mut inputs: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    inputs.insert("classified".into(), hash_file(&input)?.into());
    inputs.insert("taxonomy".into(), hex_hash(fingerprint(taxonomy.to_json().as_bytes())).into());
    let dir = cfg.out(REPORT_DIR);
    let manifest = emit_report(&report, &cfg.analytics, &inputs, &dir)?;
    let outputs: Vec<PathBuf> = offense_core::analytics::REPORT_FILES
        .iter()
        .map(|f| dir.join(f))
        .collect();
    let outputs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    record(
        cfg,
        "analyze",
        &[&input],
        &outputs,
        serde_json::json!({"comments": report.comments}),
    )?;
    Ok((report, manifest))
}
