use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    feature_count, kfold_cv, Classifier, ClassifierError, ForestConfig, Label, LabeledSample,
    Learner, MeanMetrics, Prediction, TreeConfig,
};

/// Gaussian naive Bayes with per-class feature means and variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    /// Added to every variance, scaled by the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for GaussianNaiveBayes {
    fn default() -> Self {
        Self {
            var_smoothing: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Indexed by label slot.
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl NaiveBayesModel {
    fn log_likelihood(&self, slot: usize, x: &[f64]) -> f64 {
        let mut ll = self.log_prior[slot];
        for ((&xi, &m), &v) in x.iter().zip(&self.mean[slot]).zip(&self.var[slot]) {
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (xi - m).powi(2) / v);
        }
        ll
    }

    /// Posterior probability of the Offensive class.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        let a = self.log_likelihood(Label::NotOffensive.slot(), x);
        let b = self.log_likelihood(Label::Offensive.slot(), x);
        if b == f64::NEG_INFINITY {
            return 0.0;
        }
        if a == f64::NEG_INFINITY {
            return 1.0;
        }
        1.0 / (1.0 + (a - b).exp())
    }
}

impl Classifier for NaiveBayesModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        let p = self.posterior(x);
        Prediction {
            label: if p > 0.5 {
                Label::Offensive
            } else {
                Label::NotOffensive
            },
            vote_fraction: p,
        }
    }
}

impl Learner for GaussianNaiveBayes {
    type Model = NaiveBayesModel;

    fn fit(&self, samples: &[LabeledSample], _seed: u64) -> Result<NaiveBayesModel, ClassifierError> {
        let d = feature_count(samples)?;
        let mut n = [0usize; 2];
        let mut sum = [vec![0.0; d], vec![0.0; d]];
        for s in samples {
            let c = s.label.slot();
            n[c] += 1;
            for (acc, x) in sum[c].iter_mut().zip(&s.features) {
                *acc += x;
            }
        }
        let mean: [Vec<f64>; 2] = std::array::from_fn(|c| {
            sum[c].iter().map(|s| s / n[c].max(1) as f64).collect()
        });
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for s in samples {
            let c = s.label.slot();
            for j in 0..d {
                var[c][j] += (s.features[j] - mean[c][j]).powi(2);
            }
        }
        let total = samples.len() as f64;
        let overall_var = (0..d)
            .map(|j| {
                let m = samples.iter().map(|s| s.features[j]).sum::<f64>() / total;
                samples.iter().map(|s| (s.features[j] - m).powi(2)).sum::<f64>() / total
            })
            .fold(0.0, f64::max);
        let eps = self.var_smoothing * overall_var.max(f64::MIN_POSITIVE);
        for c in 0..2 {
            for v in var[c].iter_mut() {
                *v = *v / n[c].max(1) as f64 + eps;
            }
        }
        let log_prior = std::array::from_fn(|c| {
            if n[c] == 0 {
                f64::NEG_INFINITY
            } else {
                (n[c] as f64 / total).ln()
            }
        });
        Ok(NaiveBayesModel {
            log_prior,
            mean,
            var,
        })
    }
}

/// Logistic regression trained by per-sample SGD on standardized features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticSgd {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for LogisticSgd {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 0.1,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSgdModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticSgdModel {
    fn margin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .zip(&self.weights)
            .map(|(((&xi, m), s), w)| w * (xi - m) / s)
            .sum::<f64>()
            + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.margin(x)).exp())
    }
}

impl Classifier for LogisticSgdModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        let p = self.probability(x);
        Prediction {
            label: if p > 0.5 {
                Label::Offensive
            } else {
                Label::NotOffensive
            },
            vote_fraction: p,
        }
    }
}

impl Learner for LogisticSgd {
    type Model = LogisticSgdModel;

    fn fit(&self, samples: &[LabeledSample], seed: u64) -> Result<LogisticSgdModel, ClassifierError> {
        let d = feature_count(samples)?;
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.l2.is_nan() || self.l2 < 0.0 {
            return Err(ClassifierError::InvalidParameter(
                "learning rate must be positive and l2 non-negative".into(),
            ));
        }
        let n = samples.len() as f64;
        let mean: Vec<f64> = (0..d)
            .map(|j| samples.iter().map(|s| s.features[j]).sum::<f64>() / n)
            .collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let v = samples.iter().map(|s| (s.features[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 { v.sqrt() } else { 1.0 }
            })
            .collect();
        let mut model = LogisticSgdModel {
            mean,
            scale,
            weights: vec![0.0; d],
            bias: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut z = vec![0.0; d];
        for _ in 0..self.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let s = &samples[i];
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj = (s.features[j] - model.mean[j]) / model.scale[j];
                }
                let p = model.probability(&s.features);
                let y = if s.label.is_offensive() { 1.0 } else { 0.0 };
                let g = p - y;
                for (w, &zj) in model.weights.iter_mut().zip(&z) {
                    *w -= self.learning_rate * (g * zj + self.l2 * *w);
                }
                model.bias -= self.learning_rate * g;
            }
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub name: String,
    pub mean: MeanMetrics,
}

/// Number of folds used by [`train_baselines`].
pub const BASELINE_FOLDS: usize = 10;

/// Cross-validates the four model families on identical folds.
pub fn train_baselines(
    samples: &[LabeledSample],
    forest: &ForestConfig,
    seed: u64,
) -> Result<Vec<BaselineRow>, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let k = BASELINE_FOLDS.min(samples.len());
    let row = |name: &str, mean| BaselineRow {
        name: name.to_string(),
        mean,
    };
    Ok(vec![
        row("SGD (logistic)", kfold_cv(samples, k, &LogisticSgd::default(), seed)?.mean),
        row("Naive Bayes", kfold_cv(samples, k, &GaussianNaiveBayes::default(), seed)?.mean),
        row("Decision Tree", kfold_cv(samples, k, &TreeConfig::default(), seed)?.mean),
        row("Random Forest", kfold_cv(samples, k, forest, seed)?.mean),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    LabeledSample::scalar(rng.random_range(0.0..0.4), Label::NotOffensive, 1.0)
                } else {
                    LabeledSample::scalar(rng.random_range(0.6..1.0), Label::Offensive, 1.0)
                }
            })
            .collect()
    }

    #[test]
    fn all_four_separate_a_gap() {
        let data = separable(200, 4);
        let forest = ForestConfig {
            n_estimators: 15,
            ..ForestConfig::default()
        };
        let rows = train_baselines(&data, &forest, 8).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.mean.accuracy >= 0.95, "{} {}", r.name, r.mean.accuracy);
            assert!(r.mean.f1 >= 0.95, "{} {}", r.name, r.mean.f1);
        }
    }

    #[test]
    fn naive_bayes_symmetric_crossing() {
        // mirror-image classes: posterior crosses 0.5 at the midpoint
        let mut data = Vec::new();
        for x in [0.1, 0.2, 0.3, 0.25, 0.15] {
            data.push(LabeledSample::scalar(x, Label::NotOffensive, 1.0));
            data.push(LabeledSample::scalar(1.0 - x, Label::Offensive, 1.0));
        }
        let m = GaussianNaiveBayes::default().fit(&data, 0).unwrap();
        assert!((m.posterior(&[0.5]) - 0.5).abs() < 1e-12);
        assert!(m.posterior(&[0.49]) < 0.5);
        assert!(m.posterior(&[0.51]) > 0.5);
    }

    #[test]
    fn single_class_training() {
        let data: Vec<_> = (0..5)
            .map(|i| LabeledSample::scalar(i as f64, Label::Offensive, 1.0))
            .collect();
        let nb = GaussianNaiveBayes::default().fit(&data, 0).unwrap();
        assert_eq!(nb.predict(&[-100.0]).label, Label::Offensive);
        let lr = LogisticSgd::default().fit(&data, 0).unwrap();
        assert_eq!(lr.predict(&[2.0]).label, Label::Offensive);
    }

    #[test]
    fn logistic_is_seeded() {
        let data = separable(100, 1);
        let a = LogisticSgd::default().fit(&data, 3).unwrap();
        let b = LogisticSgd::default().fit(&data, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.weights[0] > 0.0);
        assert!(LogisticSgd::default().fit(&[], 0).is_err());
    }
}
