use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::train_tree_on;
use super::{
    derive_seed, Classifier, ClassifierError, DecisionTree, LabeledSample, Label, Learner, Node,
    Prediction, TreeConfig,
};
use crate::fingerprint;

pub const FOREST_MAGIC: &[u8; 7] = b"OFFRF1\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub tree: TreeConfig,
    /// Resample each tree's training set with replacement.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            tree: TreeConfig::default(),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub seed: u64,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn offensive_votes(&self, features: &[f64]) -> usize {
        self.trees
            .iter()
            .filter(|t| t.vote(features).is_offensive())
            .count()
    }
}

impl Classifier for ForestModel {
    /// Majority vote; an exact tie is NotOffensive.
    fn predict(&self, features: &[f64]) -> Prediction {
        let votes = self.offensive_votes(features);
        let n = self.trees.len();
        Prediction {
            label: if 2 * votes > n {
                Label::Offensive
            } else {
                Label::NotOffensive
            },
            vote_fraction: votes as f64 / n as f64,
        }
    }
}

impl Learner for ForestConfig {
    type Model = ForestModel;

    fn fit(&self, samples: &[LabeledSample], seed: u64) -> Result<ForestModel, ClassifierError> {
        train_forest(samples, self, seed)
    }
}

/// Trains `n_estimators` trees; tree `i` uses a seed derived from `(seed, i)`
/// so the result does not depend on thread scheduling.
pub fn train_forest(
    samples: &[LabeledSample],
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, ClassifierError> {
    if samples.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    if cfg.n_estimators == 0 {
        return Err(ClassifierError::InvalidParameter("n_estimators must be positive".into()));
    }
    let tree_seeds: Vec<u64> = (0..cfg.n_estimators as u64)
        .map(|i| derive_seed(seed, i + 1))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&ts| {
            let mut rng = ChaCha8Rng::seed_from_u64(ts);
            let n = samples.len();
            let mut idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree_on(samples, &mut idx, &cfg.tree, rng.random())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel {
        config: cfg.clone(),
        seed,
        tree_seeds,
        trees,
    })
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn opt(v: Option<usize>) -> u32 {
    v.map_or(u32::MAX, |v| v as u32)
}

impl ForestModel {
    /// Binary form: magic, version, config, then every tree's node array,
    /// closed by an xxh64 checksum of all prior bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(FOREST_MAGIC);
        put_u32(&mut b, FORMAT_VERSION);
        put_u32(&mut b, self.config.n_estimators as u32);
        put_u32(&mut b, opt(self.config.tree.max_depth));
        put_u32(&mut b, self.config.tree.min_samples_leaf as u32);
        put_u32(&mut b, opt(self.config.tree.max_features));
        b.push(self.config.bootstrap as u8);
        put_u64(&mut b, self.seed);
        put_u32(&mut b, self.trees.len() as u32);
        for (tree, &ts) in self.trees.iter().zip(&self.tree_seeds) {
            put_u64(&mut b, ts);
            put_u32(&mut b, tree.n_features as u32);
            put_u32(&mut b, tree.nodes.len() as u32);
            for node in &tree.nodes {
                match node {
                    Node::Leaf { counts } => {
                        b.push(0);
                        put_u32(&mut b, counts[0]);
                        put_u32(&mut b, counts[1]);
                    }
                    Node::Split {
                        feature,
                        threshold,
                        gain,
                        left,
                        right,
                    } => {
                        b.push(1);
                        put_u32(&mut b, *feature);
                        put_u64(&mut b, threshold.to_bits());
                        put_u64(&mut b, gain.to_bits());
                        put_u32(&mut b, *left);
                        put_u32(&mut b, *right);
                    }
                }
            }
        }
        let sum = fingerprint(&b);
        put_u64(&mut b, sum);
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let bad = |m: &str| ClassifierError::Format(m.to_string());
        if bytes.len() < FOREST_MAGIC.len() + 8 {
            return Err(bad("truncated"));
        }
        if &bytes[..FOREST_MAGIC.len()] != FOREST_MAGIC {
            return Err(bad("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if fingerprint(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(bad("checksum mismatch"));
        }
        let mut pos = FOREST_MAGIC.len();
        let mut take = |n: usize| -> Result<&[u8], ClassifierError> {
            let s = body.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        macro_rules! u32_ {
            () => {
                u32::from_le_bytes(take(4)?.try_into().unwrap())
            };
        }
        macro_rules! u64_ {
            () => {
                u64::from_le_bytes(take(8)?.try_into().unwrap())
            };
        }
        let version = u32_!();
        if version != FORMAT_VERSION {
            return Err(ClassifierError::Format(format!("unsupported version {version}")));
        }
        let unopt = |v: u32| (v != u32::MAX).then_some(v as usize);
        let n_estimators = u32_!() as usize;
        let max_depth = unopt(u32_!());
        let min_samples_leaf = u32_!() as usize;
        let max_features = unopt(u32_!());
        let bootstrap = take(1)?[0] != 0;
        let seed = u64_!();
        let n_trees = u32_!() as usize;
        if n_trees != n_estimators || n_trees == 0 {
            return Err(bad("tree count disagrees with config"));
        }
        let mut trees = Vec::with_capacity(n_trees);
        let mut tree_seeds = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            tree_seeds.push(u64_!());
            let n_features = u32_!() as usize;
            let n_nodes = u32_!() as usize;
            if n_nodes == 0 || n_nodes > body.len() {
                return Err(bad("bad node count"));
            }
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let tag = take(1)?[0];
                nodes.push(match tag {
                    0 => Node::Leaf {
                        counts: [u32_!(), u32_!()],
                    },
                    1 => Node::Split {
                        feature: u32_!(),
                        threshold: f64::from_bits(u64_!()),
                        gain: f64::from_bits(u64_!()),
                        left: u32_!(),
                        right: u32_!(),
                    },
                    _ => return Err(bad("bad node tag")),
                });
            }
            for n in &nodes {
                if let Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } = n
                {
                    if *feature as usize >= n_features
                        || *left as usize >= n_nodes
                        || *right as usize >= n_nodes
                    {
                        return Err(bad("node reference out of range"));
                    }
                }
            }
            trees.push(DecisionTree { nodes, n_features });
        }
        if pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            config: ForestConfig {
                n_estimators,
                tree: TreeConfig {
                    max_depth,
                    min_samples_leaf,
                    max_features,
                },
                bootstrap,
            },
            seed,
            tree_seeds,
            trees,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
