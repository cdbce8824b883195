//! From-scratch CART decision tree with the Gini criterion.
//!
//! Splits are axis-aligned `value <= threshold` tests at midpoints between
//! consecutive distinct sorted values. At each node every candidate feature
//! and threshold is scored by the size-weighted impurity decrease; ties are
//! broken by (lower feature index, lower threshold). An impure node is split
//! as long as any threshold exists, so an unlimited-depth tree reaches 100%
//! training accuracy whenever the data has no contradictory duplicates.

use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Error;
use crate::Result;

/// Decision-tree hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// Depth limit; `None` grows until purity.
    pub max_depth: Option<usize>,
    /// Nodes smaller than this become leaves.
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

/// One node in the flattened tree arena; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        /// Index into the model's class list: argmax of `counts`, earliest
        /// class on ties.
        class: usize,
        /// Training class counts at this leaf, indexed by class.
        counts: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A trained decision tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub schema: Vec<String>,
    pub classes: Vec<String>,
    pub params: TreeParams,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    /// Classify one sample.
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

    /// Class index for a sample whose length is already known to match.
    pub fn predict_idx(&self, sample: &[f64]) -> usize {
        debug_assert_eq!(sample.len(), self.schema.len());
        let mut at = 0;
        loop {
            match &self.nodes[at] {
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

    pub fn depth(&self) -> usize {
        // Iterative depth walk; the arena can be deeper than the stack allows.
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                depth[*left] = depth[i] + 1;
                depth[*right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }
}

/// Borrowed training view: rows as class-indexed labels.
pub(crate) struct TrainingData<'a> {
    pub rows: Vec<&'a [f64]>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub n_features: usize,
}

impl<'a> TrainingData<'a> {
    pub fn from_dataset(dataset: &'a Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::contract("cannot train on an empty dataset"));
        }
        let labels = dataset
            .samples()
            .iter()
            .map(|s| dataset.class_index(&s.label).unwrap())
            .collect();
        Ok(TrainingData {
            rows: dataset
                .samples()
                .iter()
                .map(|s| s.values.as_slice())
                .collect(),
            labels,
            n_classes: dataset.classes().len(),
            n_features: dataset.schema().len(),
        })
    }
}

fn gini_of_counts(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    let mut sum_sq = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        sum_sq += p * p;
    }
    1.0 - sum_sq
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Per-split candidate feature source.
pub(crate) enum FeaturePool<'r> {
    All,
    /// Draw `mtry` distinct features per node from the RNG.
    Sampled {
        rng: &'r mut ChaCha8Rng,
        mtry: usize,
    },
}

/// Grow a tree over `indices` (duplicates allowed, e.g. bootstrap samples).
///
/// When `tally` is given, each split adds `(node_size / root_size) * decrease`
/// to its feature's slot: the mean-decrease-in-impurity contribution of this
/// tree before across-tree averaging.
pub(crate) fn grow_tree(
    data: &TrainingData,
    indices: Vec<usize>,
    params: &TreeParams,
    mut pool: FeaturePool,
    mut tally: Option<&mut [f64]>,
) -> Vec<Node> {
    let root_size = indices.len() as f64;
    let mut nodes: Vec<Node> = vec![placeholder()];
    // LIFO jobs; explicit stack keeps unlimited-depth trees off the call stack.
    let mut jobs: Vec<(Vec<usize>, usize, usize)> = vec![(indices, 0, 0)];
    let mut scratch: Vec<usize> = Vec::new();

    while let Some((node_indices, depth, slot)) = jobs.pop() {
        let mut counts = vec![0usize; data.n_classes];
        for &i in &node_indices {
            counts[data.labels[i]] += 1;
        }
        let n = node_indices.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < params.min_samples_split {
            nodes[slot] = leaf(counts);
            continue;
        }

        scratch.clear();
        let candidates: &[usize] = match &mut pool {
            FeaturePool::All => {
                scratch.extend(0..data.n_features);
                &scratch
            }
            FeaturePool::Sampled { rng, mtry } => {
                let mtry = (*mtry).min(data.n_features);
                let mut picked = rand::seq::index::sample(rng, data.n_features, mtry).into_vec();
                picked.sort_unstable();
                scratch.extend(picked);
                &scratch
            }
        };

        match best_split(data, &node_indices, &counts, candidates) {
            None => nodes[slot] = leaf(counts),
            Some(best) => {
                if let Some(tally) = tally.as_deref_mut() {
                    tally[best.feature] += (n as f64 / root_size) * best.decrease;
                }
                let (left_ix, right_ix): (Vec<usize>, Vec<usize>) = node_indices
                    .into_iter()
                    .partition(|&i| data.rows[i][best.feature] <= best.threshold);
                let left = nodes.len();
                nodes.push(placeholder());
                let right = nodes.len();
                nodes.push(placeholder());
                nodes[slot] = Node::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right,
                };
                jobs.push((right_ix, depth + 1, right));
                jobs.push((left_ix, depth + 1, left));
            }
        }
    }
    nodes
}

fn placeholder() -> Node {
    Node::Leaf {
        class: 0,
        counts: Vec::new(),
    }
}

fn leaf(counts: Vec<usize>) -> Node {
    let class = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Node::Leaf { class, counts }
}

/// Exhaustive best split over the candidate features: every midpoint between
/// consecutive distinct sorted values, scored by parent impurity minus the
/// size-weighted child impurity. First maximum wins, so ascending feature and
/// threshold order realizes the documented tie rule.
fn best_split(
    data: &TrainingData,
    indices: &[usize],
    parent_counts: &[usize],
    candidates: &[usize],
) -> Option<BestSplit> {
    let n = indices.len();
    let parent = gini_of_counts(parent_counts, n);
    let mut best: Option<BestSplit> = None;
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; data.n_classes];

    for &feature in candidates {
        pairs.clear();
        pairs.extend(
            indices
                .iter()
                .map(|&i| (data.rows[i][feature], data.labels[i])),
        );
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        let mut right: Vec<usize> = parent_counts.to_vec();
        for i in 0..n - 1 {
            let (value, class) = pairs[i];
            left[class] += 1;
            right[class] -= 1;
            let next = pairs[i + 1].0;
            if next <= value {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            let weighted = (n_left as f64 / n as f64) * gini_of_counts(&left, n_left)
                + (n_right as f64 / n as f64) * gini_of_counts(&right, n_right);
            let decrease = (parent - weighted).max(0.0);
            if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                best = Some(BestSplit {
                    feature,
                    threshold: value + (next - value) / 2.0,
                    decrease,
                });
            }
        }
    }
    best
}

/// Train a CART tree on the whole dataset.
pub fn train_tree(dataset: &Dataset, params: &TreeParams) -> Result<TreeModel> {
    let (model, _) = train_tree_tracked(dataset, params)?;
    Ok(model)
}

/// Train a tree and also return its per-feature weighted impurity-decrease
/// tally (the single-tree Gini Importance contributions, unnormalized).
pub fn train_tree_tracked(dataset: &Dataset, params: &TreeParams) -> Result<(TreeModel, Vec<f64>)> {
    let data = TrainingData::from_dataset(dataset)?;
    let mut tally = vec![0.0; data.n_features];
    let indices: Vec<usize> = (0..data.rows.len()).collect();
    let nodes = grow_tree(&data, indices, params, FeaturePool::All, Some(&mut tally));
    Ok((
        TreeModel {
            schema: dataset.schema().to_vec(),
            classes: dataset.classes().to_vec(),
            params: params.clone(),
            nodes,
        },
        tally,
    ))
}
