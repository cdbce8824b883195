//! Bagged ensemble of CART trees with per-split feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::Result;

use super::tree::{grow_tree, FeaturePool, Node, TrainingData, TreeParams};

/// How many candidate features each split draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSubsample {
    /// ceil(sqrt(feature count)) — the classification default.
    Sqrt,
    /// Every feature at every split.
    All,
    /// A fixed number of features.
    Count(usize),
}

impl FeatureSubsample {
    fn mtry(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            FeatureSubsample::All => n_features,
            FeatureSubsample::Count(k) => k.clamp(1, n_features),
        }
    }
}

/// Random-forest hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    /// Number of trees.
    pub m: usize,
    /// Train each tree on a size-N bootstrap sample (with replacement).
    pub bootstrap: bool,
    pub feature_subsample: FeatureSubsample,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            m: 10,
            bootstrap: true,
            feature_subsample: FeatureSubsample::Sqrt,
            tree: TreeParams::default(),
        }
    }
}

/// A trained forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub schema: Vec<String>,
    pub classes: Vec<String>,
    pub params: ForestParams,
    pub seed: u64,
    /// One node arena per tree; each root is node 0.
    pub trees: Vec<Vec<Node>>,
}

/// Training byproducts used for importance computations and their oracles.
pub struct ForestTrainDetail {
    /// Per tree: the row indices (with repetition) it was trained on.
    pub tree_samples: Vec<Vec<usize>>,
    /// Per tree: per-feature weighted impurity-decrease tally.
    pub tree_tallies: Vec<Vec<f64>>,
}

impl ForestModel {
    pub fn predict(&self, sample: &[f64]) -> Result<&str> {
        if sample.len() != self.schema.len() {
            return Err(Error::contract(format!(
                "sample has {} values, model expects {}",
                sample.len(),
                self.schema.len()
            )));
        }
        Ok(&self.classes[self.predict_idx(sample)])
    }

    /// Majority vote over the trees; ties go to the earliest class.
    pub fn predict_idx(&self, sample: &[f64]) -> usize {
        let votes = self.vote_counts(sample);
        argmax_first(&votes)
    }

    /// Per-class vote tally for one sample.
    pub fn vote_counts(&self, sample: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.classes.len()];
        for nodes in &self.trees {
            votes[predict_nodes(nodes, sample)] += 1;
        }
        votes
    }
}

pub(crate) fn predict_nodes(nodes: &[Node], sample: &[f64]) -> usize {
    let mut at = 0;
    loop {
        match &nodes[at] {
            Node::Leaf { class, .. } => return *class,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if sample[*feature] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

fn argmax_first(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Train a forest; per-tree sub-seeds derive deterministically from `seed`.
pub fn train_forest(dataset: &Dataset, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let (model, _) = train_forest_detailed(dataset, params, seed)?;
    Ok(model)
}

/// Train a forest and keep the per-tree bootstrap samples and importance
/// tallies.
pub fn train_forest_detailed(
    dataset: &Dataset,
    params: &ForestParams,
    seed: u64,
) -> Result<(ForestModel, ForestTrainDetail)> {
    if params.m < 1 {
        return Err(Error::param("forest needs at least one tree"));
    }
    let data = TrainingData::from_dataset(dataset)?;
    let n = data.rows.len();
    let mtry = params.feature_subsample.mtry(data.n_features);

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.m);
    let mut tree_samples = Vec::with_capacity(params.m);
    let mut tree_tallies = Vec::with_capacity(params.m);

    for _ in 0..params.m {
        let tree_seed: u64 = master.random();
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let pool = if mtry >= data.n_features {
            FeaturePool::All
        } else {
            FeaturePool::Sampled {
                rng: &mut rng,
                mtry,
            }
        };
        let mut tally = vec![0.0; data.n_features];
        let nodes = grow_tree(&data, indices.clone(), &params.tree, pool, Some(&mut tally));
        trees.push(nodes);
        tree_samples.push(indices);
        tree_tallies.push(tally);
    }

    Ok((
        ForestModel {
            schema: dataset.schema().to_vec(),
            classes: dataset.classes().to_vec(),
            params: params.clone(),
            seed,
            trees,
        },
        ForestTrainDetail {
            tree_samples,
            tree_tallies,
        },
    ))
}
