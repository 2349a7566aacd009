//! Offensive/NotOffensive classification on the transformed score, plus the
//! evaluation protocol: k-fold cross-validation, grid search, holdout splits,
//! confidence/holdout sweeps and the baseline comparison.

mod baselines;
mod dataset;
mod eval;
mod forest;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{
    train_baselines, BaselineRow, GaussianNaiveBayes, LogisticSgd, LogisticSgdModel, NaiveBayesModel,
};
pub use dataset::{
    featurize, filter_by_confidence, load_labeled_dataset, parse_class_label, DatasetFormat,
    LabeledText, LoadReport,
};
pub use eval::{
    default_forest_grid, default_sweep_fractions, evaluate, grid_search, holdout_split, kfold_cv,
    sweep_holdout_and_confidence, CvReport, FoldReport, GridResult, MeanMetrics, Metrics,
    SkippedCell, SweepReport, SweepRow, SWEEP_CSV_HEADER,
};
pub use forest::{train_forest, ForestConfig, ForestModel, FOREST_MAGIC};
pub use tree::{entropy, train_tree, DecisionTree, Node, TreeConfig};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("{samples} samples cannot fill {k} folds")]
    TooFewSamples { samples: usize, k: usize },
    #[error("holdout fraction {fraction} leaves an empty side of {samples} samples")]
    DegenerateSplit { fraction: f64, samples: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("row {row}: {msg}")]
    MalformedRow { row: usize, msg: String },
    #[error("unknown class label {0:?}")]
    UnknownClassLabel(String),
    #[error("samples disagree on feature count")]
    FeatureMismatch,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NotOffensive,
    Offensive,
}

impl Label {
    pub fn is_offensive(self) -> bool {
        self == Label::Offensive
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// One training or evaluation row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
    pub confidence: f64,
}

impl LabeledSample {
    pub fn scalar(feature: f64, label: Label, confidence: f64) -> Self {
        Self {
            features: vec![feature],
            label,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Share of the ensemble (or probability mass) voting Offensive.
    pub vote_fraction: f64,
}

pub trait Classifier: Send + Sync {
    fn predict(&self, features: &[f64]) -> Prediction;
}

/// Something that can be fitted on samples.
pub trait Learner: Sync {
    type Model: Classifier;
    fn fit(&self, samples: &[LabeledSample], seed: u64) -> Result<Self::Model, ClassifierError>;
}

pub(crate) fn feature_count(samples: &[LabeledSample]) -> Result<usize, ClassifierError> {
    let first = samples.first().ok_or(ClassifierError::EmptyTrainingSet)?;
    let d = first.features.len();
    if d == 0 || samples.iter().any(|s| s.features.len() != d) {
        return Err(ClassifierError::FeatureMismatch);
    }
    Ok(d)
}

/// An independent seed for numbered sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}
