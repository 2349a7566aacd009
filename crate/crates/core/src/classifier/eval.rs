use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, filter_by_confidence, Classifier, ClassifierError, ForestConfig, LabeledSample,
    Learner, TreeConfig,
};

/// Confusion counts and derived scores; Offensive is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// Set when a zero denominator forced precision (or recall) to 0.
    pub degenerate: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let n = tp + fp + tn + fn_;
        let mut degenerate = false;
        let mut ratio = |num: usize, den: usize| {
            if den == 0 {
                degenerate = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let accuracy = if n == 0 {
            0.0
        } else {
            (tp + tn) as f64 / n as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            accuracy,
            precision,
            recall,
            f1,
            tp,
            fp,
            tn,
            fn_,
            degenerate,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn evaluate<C: Classifier + ?Sized>(
    model: &C,
    samples: &[LabeledSample],
) -> Result<Metrics, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyEvaluationSet);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for s in samples {
        match (model.predict(&s.features).label.is_offensive(), s.label.is_offensive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MeanMetrics {
    fn of(ms: &[Metrics]) -> Self {
        let n = ms.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| ms.iter().map(f).sum::<f64>() / n;
        Self {
            accuracy: mean(|m| m.accuracy),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub metrics: Metrics,
    pub n_train: usize,
    pub n_validation: usize,
    pub train_offensive: usize,
    pub validation_offensive: usize,
    /// Indices (into the input) of the validation samples.
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean: MeanMetrics,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

fn offensive(samples: &[LabeledSample]) -> usize {
    samples.iter().filter(|s| s.label.is_offensive()).count()
}

/// Seeded shuffle, then `k` contiguous folds whose sizes differ by at most one.
pub fn kfold_cv<L: Learner>(
    samples: &[LabeledSample],
    k: usize,
    learner: &L,
    seed: u64,
) -> Result<CvReport, ClassifierError> {
    if k < 2 || samples.len() < k {
        return Err(ClassifierError::TooFewSamples {
            samples: samples.len(),
            k,
        });
    }
    let n = samples.len();
    let order = shuffled(n, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let len = base + usize::from(fold < extra);
        let val_idx: Vec<usize> = order[start..start + len].to_vec();
        let validation: Vec<LabeledSample> = val_idx.iter().map(|&i| samples[i].clone()).collect();
        let train: Vec<LabeledSample> = order[..start]
            .iter()
            .chain(&order[start + len..])
            .map(|&i| samples[i].clone())
            .collect();
        let model = learner.fit(&train, derive_seed(seed, fold as u64 + 1))?;
        folds.push(FoldReport {
            fold,
            metrics: evaluate(&model, &validation)?,
            n_train: train.len(),
            n_validation: validation.len(),
            train_offensive: offensive(&train),
            validation_offensive: offensive(&validation),
            validation: val_idx,
        });
        start += len;
    }
    let mean = MeanMetrics::of(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>());
    Ok(CvReport { folds, mean })
}

/// `n_estimators {10, 50, 100, 200} x max_depth {2, 4, 8, unlimited} x
/// min_samples_leaf {1, 5, 20}`.
pub fn default_forest_grid() -> Vec<ForestConfig> {
    let mut grid = Vec::new();
    for n in [10, 50, 100, 200] {
        for depth in [Some(2), Some(4), Some(8), None] {
            for leaf in [1, 5, 20] {
                grid.push(ForestConfig {
                    n_estimators: n,
                    tree: TreeConfig {
                        max_depth: depth,
                        min_samples_leaf: leaf,
                        max_features: None,
                    },
                    bootstrap: true,
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: ForestConfig,
    pub best_index: usize,
    pub table: Vec<(ForestConfig, MeanMetrics)>,
}

/// Cross-validates every config on the same folds. Best is the highest mean
/// F1; ties prefer fewer estimators, then a shallower depth limit.
pub fn grid_search(
    samples: &[LabeledSample],
    grid: &[ForestConfig],
    k: usize,
    seed: u64,
) -> Result<GridResult, ClassifierError> {
    if grid.is_empty() {
        return Err(ClassifierError::EmptyGrid);
    }
    let mut table = Vec::with_capacity(grid.len());
    for cfg in grid {
        let report = kfold_cv(samples, k, cfg, seed)?;
        table.push((cfg.clone(), report.mean));
    }
    let depth_key = |c: &ForestConfig| c.tree.max_depth.unwrap_or(usize::MAX);
    let mut best_index = 0;
    for (i, (cfg, m)) in table.iter().enumerate().skip(1) {
        let (bc, bm) = &table[best_index];
        let better = m.f1 > bm.f1
            || (m.f1 == bm.f1
                && (cfg.n_estimators, depth_key(cfg)) < (bc.n_estimators, depth_key(bc)));
        if better {
            best_index = i;
        }
    }
    Ok(GridResult {
        best: table[best_index].0.clone(),
        best_index,
        table,
    })
}

/// Seeded, unstratified split into `round(n * (1 - f))` training samples and
/// the remaining holdout.
pub fn holdout_split(
    samples: &[LabeledSample],
    holdout_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>), ClassifierError> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(ClassifierError::InvalidParameter(format!(
            "holdout fraction {holdout_fraction} outside (0, 1)"
        )));
    }
    let n = samples.len();
    let n_train = (n as f64 * (1.0 - holdout_fraction)).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(ClassifierError::DegenerateSplit {
            fraction: holdout_fraction,
            samples: n,
        });
    }
    let order = shuffled(n, seed);
    let train = order[..n_train].iter().map(|&i| samples[i].clone()).collect();
    let hold = order[n_train..].iter().map(|&i| samples[i].clone()).collect();
    Ok((train, hold))
}

pub const SWEEP_CSV_HEADER: &str =
    "holdout_frac,conf_threshold,accuracy,precision,recall,f1,n_train,n_holdout";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub holdout_frac: f64,
    pub conf_threshold: f64,
    pub metrics: Metrics,
    pub n_train: usize,
    pub n_holdout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub holdout_frac: f64,
    pub conf_threshold: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedCell>,
}

impl SweepReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ClassifierError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_CSV_HEADER.split(','))?;
        for r in &self.rows {
            w.write_record([
                r.holdout_frac.to_string(),
                r.conf_threshold.to_string(),
                r.metrics.accuracy.to_string(),
                r.metrics.precision.to_string(),
                r.metrics.recall.to_string(),
                r.metrics.f1.to_string(),
                r.n_train.to_string(),
                r.n_holdout.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 5%, 10%, ..., 95%.
pub fn default_sweep_fractions() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// Holdout metrics for every (confidence threshold, holdout fraction) cell.
/// Cells that cannot be split or trained are skipped and listed.
pub fn sweep_holdout_and_confidence(
    samples: &[LabeledSample],
    fractions: &[f64],
    thresholds: &[f64],
    cfg: &ForestConfig,
    seed: u64,
) -> SweepReport {
    let mut report = SweepReport::default();
    for &t in thresholds {
        let kept = filter_by_confidence(samples, t);
        for &f in fractions {
            let cell = holdout_split(&kept, f, derive_seed(seed, 1)).and_then(|(train, hold)| {
                let model = super::train_forest(&train, cfg, derive_seed(seed, 2))?;
                Ok(SweepRow {
                    holdout_frac: f,
                    conf_threshold: t,
                    metrics: evaluate(&model, &hold)?,
                    n_train: train.len(),
                    n_holdout: hold.len(),
                })
            });
            match cell {
                Ok(row) => report.rows.push(row),
                Err(e) => report.skipped.push(SkippedCell {
                    holdout_frac: f,
                    conf_threshold: t,
                    reason: e.to_string(),
                }),
            }
        }
    }
    report
}
