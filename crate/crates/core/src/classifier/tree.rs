use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{feature_count, Classifier, ClassifierError, LabeledSample, Label, Learner, Prediction};

/// Minimum information gain for a split to be kept.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per node; `None` tries all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// Shannon entropy in bits of a two-class count.
pub fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Indexed by [`Label`]: `[not_offensive, offensive]`.
        counts: [u32; 2],
    },
    Split {
        feature: u32,
        /// Samples with `x <= threshold` go left.
        threshold: f64,
        gain: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) n_features: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self, features: &[f64]) -> [u32; 2] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if features[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    /// Majority label at the reached leaf; ties go to NotOffensive.
    pub fn vote(&self, features: &[f64]) -> Label {
        let c = self.leaf_counts(features);
        if c[Label::Offensive.slot()] > c[Label::NotOffensive.slot()] {
            Label::Offensive
        } else {
            Label::NotOffensive
        }
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, features: &[f64]) -> Prediction {
        let label = self.vote(features);
        Prediction {
            label,
            vote_fraction: if label.is_offensive() { 1.0 } else { 0.0 },
        }
    }
}

impl Learner for TreeConfig {
    type Model = DecisionTree;

    fn fit(&self, samples: &[LabeledSample], seed: u64) -> Result<DecisionTree, ClassifierError> {
        train_tree(samples, self, seed)
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    samples: &'a [LabeledSample],
    cfg: &'a TreeConfig,
    n_features: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &i in idx {
            c[self.samples[i].label.slot()] += 1;
        }
        c
    }

    fn sort_by_feature(&self, idx: &mut [usize], f: usize) {
        idx.sort_unstable_by(|&a, &b| {
            self.samples[a].features[f].total_cmp(&self.samples[b].features[f])
        });
    }

    fn best_split(&mut self, idx: &mut [usize], parent: [usize; 2]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let parent_h = entropy(parent);
        if parent_h == 0.0 {
            return None;
        }
        let features: Vec<usize> = match self.cfg.max_features {
            Some(m) if m < self.n_features => {
                let mut f = sample_indices(&mut self.rng, self.n_features, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        };

        let mut best: Option<BestSplit> = None;
        for f in features {
            self.sort_by_feature(idx, f);
            let mut left = [0usize; 2];
            for i in 0..n - 1 {
                let s = &self.samples[idx[i]];
                left[s.label.slot()] += 1;
                let (lo, hi) = (s.features[f], self.samples[idx[i + 1]].features[f]);
                let nl = i + 1;
                let nr = n - nl;
                if lo == hi || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right = [parent[0] - left[0], parent[1] - left[1]];
                let gain = parent_h
                    - (nl as f64 / n as f64) * entropy(left)
                    - (nr as f64 / n as f64) * entropy(right);
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > MIN_GAIN)
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let counts = self.counts(idx);
        self.nodes.push(Node::Leaf {
            counts: [counts[0] as u32, counts[1] as u32],
        });
        if self.cfg.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(split) = self.best_split(idx, counts) else {
            return id;
        };
        self.sort_by_feature(idx, split.feature);
        let cut = idx.partition_point(|&i| self.samples[i].features[split.feature] <= split.threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
        };
        id
    }
}

/// Grows an entropy-split tree on every sample.
pub fn train_tree(
    samples: &[LabeledSample],
    cfg: &TreeConfig,
    seed: u64,
) -> Result<DecisionTree, ClassifierError> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    train_tree_on(samples, &mut idx, cfg, seed)
}

/// Grows a tree on `samples[idx]`; `idx` may repeat entries (bootstrap).
pub(crate) fn train_tree_on(
    samples: &[LabeledSample],
    idx: &mut [usize],
    cfg: &TreeConfig,
    seed: u64,
) -> Result<DecisionTree, ClassifierError> {
    if samples.is_empty() || idx.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let n_features = feature_count(samples)?;
    let mut b = Builder {
        samples,
        cfg,
        n_features,
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    b.grow(idx, 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        n_features,
    })
}
