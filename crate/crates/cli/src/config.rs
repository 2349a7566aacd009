use std::path::{Path, PathBuf};

use offense_core::analytics::AnalyticsConfig;
use offense_core::classifier::{default_forest_grid, default_sweep_fractions, DatasetFormat, ForestConfig};
use offense_core::corpus::{FilterConfig, StudyWindow};
use offense_core::embedding::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// Fully resolved run configuration. Loaded from an optional JSON file, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub ingest: IngestSettings,
    pub embedding: TrainConfig,
    pub lexicons: Vec<LexiconSource>,
    pub classifier: ClassifierSettings,
    pub analytics: AnalyticsConfig,
    /// JSON file with `political` and `default` lists; the bundled list
    /// when absent.
    pub taxonomy: Option<PathBuf>,
    /// Hash partitions for author-keyed state; in memory when absent.
    pub spill_partitions: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 1,
            out_dir: PathBuf::from("out"),
            ingest: IngestSettings::default(),
            embedding: TrainConfig::default(),
            lexicons: Vec::new(),
            classifier: ClassifierSettings::default(),
            analytics: AnalyticsConfig::default(),
            taxonomy: None,
            spill_partitions: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub filter: FilterConfig,
    pub window: Option<StudyWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconSource {
    pub tag: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub dataset: Option<PathBuf>,
    pub format: DatasetFormat,
    pub holdout_fraction: f64,
    pub confidence_threshold: f64,
    pub folds: usize,
    pub grid: Vec<ForestConfig>,
    /// Model used by `evaluate` when no grid search is run.
    pub forest: ForestConfig,
    pub sweep_fractions: Vec<f64>,
    pub sweep_thresholds: Vec<f64>,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            dataset: None,
            format: DatasetFormat::default(),
            holdout_fraction: 0.25,
            confidence_threshold: 0.0,
            folds: 10,
            grid: default_forest_grid(),
            forest: ForestConfig::default(),
            sweep_fractions: default_sweep_fractions(),
            sweep_thresholds: vec![0.0, 0.35, 0.70],
        }
    }
}

/// Stage names used for seed derivation.
pub const STAGES: [&str; 5] = ["ingest", "embedding", "classifier", "evaluate", "analyze"];

/// `xxh64(stage name, seed = run seed)`: every stage gets an independent
/// stream from the single run seed.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    offense_core::fingerprint_seeded(stage.as_bytes(), seed)
}

impl RunConfig {
    /// Reads a config file. Relative input paths inside it are taken
    /// relative to the file's directory; `out_dir` stays relative to the
    /// working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.lexicons.iter_mut().for_each(|l| rebase(&mut l.path));
        cfg.classifier.dataset.as_mut().map(rebase);
        cfg.taxonomy.as_mut().map(rebase);
        Ok(cfg)
    }

    /// Pushes the run seed into the stage settings. Embedding training keeps
    /// its own worker count since more than one worker is not reproducible.
    pub fn resolve(mut self) -> Result<Self> {
        if self.workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        self.ingest.filter.sample_seed = stage_seed(self.seed, "ingest");
        self.embedding.seed = stage_seed(self.seed, "embedding");
        self.ingest
            .filter
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.embedding
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(self)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
