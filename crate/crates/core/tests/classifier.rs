mod oracles;

use offense_core::classifier::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn two_gaussians(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = Normal::new(0.2, 0.1).unwrap();
    let hi = Normal::new(0.8, 0.1).unwrap();
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                LabeledSample::scalar(lo.sample(&mut rng), Label::NotOffensive, 1.0)
            } else {
                LabeledSample::scalar(hi.sample(&mut rng), Label::Offensive, 1.0)
            }
        })
        .collect()
}

#[test]
fn root_split_is_the_brute_force_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let data: Vec<LabeledSample> = (0..200)
            .map(|_| {
                let x: f64 = rng.random();
                let p = if x > 0.5 { 0.8 } else { 0.3 };
                let label = if rng.random_bool(p) { Label::Offensive } else { Label::NotOffensive };
                LabeledSample::scalar((x * 1000.0).round() / 1000.0, label, 1.0)
            })
            .collect();
        let tree = train_tree(&data, &TreeConfig::default(), 0).unwrap();
        let (gain, threshold) = oracles::best_split(&data).unwrap();
        match tree.root() {
            Node::Split { gain: g, threshold: t, .. } => {
                assert!((g - gain).abs() <= 1e-12, "{g} vs {gain}");
                let left = |th: f64| data.iter().filter(|s| s.features[0] <= th).count();
                assert_eq!(left(*t), left(threshold));
            }
            Node::Leaf { .. } => assert!(gain <= 1e-12),
        }
    }
}

#[test]
fn forest_separates_two_gaussians() {
    let data = two_gaussians(2000, 5);
    let (train, hold) = holdout_split(&data, 0.25, 1).unwrap();
    let forest = train_forest(&train, &ForestConfig::default(), 2).unwrap();
    let m = evaluate(&forest, &hold).unwrap();
    assert!(m.accuracy >= 0.95, "{}", m.accuracy);
    assert_eq!(forest.trees.len(), 100);
}

/// Offensive exactly when the feature is positive.
struct SignStub;

impl Classifier for SignStub {
    fn predict(&self, x: &[f64]) -> Prediction {
        let off = x[0] > 0.0;
        Prediction {
            label: if off { Label::Offensive } else { Label::NotOffensive },
            vote_fraction: if off { 1.0 } else { 0.0 },
        }
    }
}

struct SignLearner;

impl Learner for SignLearner {
    type Model = SignStub;
    fn fit(&self, _: &[LabeledSample], _: u64) -> Result<SignStub, ClassifierError> {
        Ok(SignStub)
    }
}

fn hand_tally(samples: &[&LabeledSample]) -> (usize, usize, usize, usize) {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for s in samples {
        let pred = s.features[0] > 0.0;
        let truth = s.label == Label::Offensive;
        if pred && truth {
            tp += 1;
        } else if pred {
            fp += 1;
        } else if truth {
            fn_ += 1;
        } else {
            tn += 1;
        }
    }
    (tp, fp, tn, fn_)
}

fn mixed(n: usize, seed: u64) -> Vec<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let label = if rng.random_bool(0.4) { Label::Offensive } else { Label::NotOffensive };
            LabeledSample::scalar(x, label, 1.0)
        })
        .collect()
}

#[test]
fn cv_and_holdout_match_hand_tallies() {
    let data = mixed(137, 8);
    let report = kfold_cv(&data, 10, &SignLearner, 4).unwrap();
    let mut acc_sum = 0.0;
    for fold in &report.folds {
        let val: Vec<&LabeledSample> = fold.validation.iter().map(|&i| &data[i]).collect();
        let (tp, fp, tn, fn_) = hand_tally(&val);
        let m = fold.metrics;
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (tp, fp, tn, fn_));
        assert_eq!(m.accuracy, (tp + tn) as f64 / val.len() as f64);
        acc_sum += m.accuracy;
    }
    assert_eq!(report.mean.accuracy, acc_sum / 10.0);

    let (_, hold) = holdout_split(&data, 0.25, 3).unwrap();
    let m = evaluate(&SignStub, &hold).unwrap();
    let refs: Vec<&LabeledSample> = hold.iter().collect();
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), hand_tally(&refs));
}

#[test]
fn confidence_thresholds_shrink_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data: Vec<LabeledSample> = (0..1000)
        .map(|_| LabeledSample::scalar(0.0, Label::Offensive, rng.random_range(0.01..=1.0)))
        .collect();
    let sizes: Vec<usize> = [0.0, 0.35, 0.70]
        .iter()
        .map(|&t| filter_by_confidence(&data, t).len())
        .collect();
    assert_eq!(sizes[0], 1000);
    assert!(sizes[0] >= sizes[1] && sizes[1] >= sizes[2]);
    let direct = data.iter().filter(|s| s.confidence >= 0.70).count();
    assert_eq!(sizes[2], direct);
}

#[test]
fn grid_search_returns_a_dominating_config() {
    // offensive only inside an interval: one split cannot capture it
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data: Vec<LabeledSample> = (0..300)
        .map(|_| {
            let x: f64 = rng.random();
            let label = if (0.35..0.65).contains(&x) { Label::Offensive } else { Label::NotOffensive };
            LabeledSample::scalar(x, label, 1.0)
        })
        .collect();
    let cfg = |depth| ForestConfig {
        n_estimators: 5,
        tree: TreeConfig {
            max_depth: depth,
            ..TreeConfig::default()
        },
        bootstrap: true,
    };
    let grid = vec![cfg(Some(1)), cfg(None)];
    let r = grid_search(&data, &grid, 5, 0).unwrap();
    assert_eq!(r.best.tree.max_depth, None);
    assert_eq!(r.table.len(), 2);
    let single = grid_search(&data, &grid[..1], 5, 0).unwrap();
    assert_eq!(single.best, grid[0]);
}

#[test]
fn confident_subset_scores_higher() {
    // low-confidence rows carry heavy label noise
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut data = two_gaussians(1200, 6);
    for s in &mut data {
        s.confidence = [0.4, 0.5, 0.8, 1.0][rng.random_range(0..4)];
        if s.confidence < 0.7 && rng.random_bool(0.35) {
            s.label = if s.label.is_offensive() { Label::NotOffensive } else { Label::Offensive };
        }
    }
    let cfg = ForestConfig {
        n_estimators: 15,
        ..ForestConfig::default()
    };
    let fractions = [0.1, 0.25, 0.5, 0.75];
    let r = sweep_holdout_and_confidence(&data, &fractions, &[0.0, 0.70], &cfg, 9);
    assert!(r.skipped.is_empty());
    for f in fractions {
        let acc = |t: f64| {
            r.rows
                .iter()
                .find(|row| row.holdout_frac == f && row.conf_threshold == t)
                .unwrap()
                .metrics
                .accuracy
        };
        assert!(acc(0.70) >= acc(0.0), "fraction {f}: {} < {}", acc(0.70), acc(0.0));
    }
}
