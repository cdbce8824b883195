//! Exact k-nearest-neighbors classifier on raw (unscaled) feature values.

use crate::dataset::Dataset;
use crate::error::Error;
use crate::Result;

/// k-NN model embedding its training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub schema: Vec<String>,
    pub classes: Vec<String>,
    pub points: Vec<Vec<f64>>,
    /// Class index per training point.
    pub labels: Vec<usize>,
}

/// Store the training samples for exact Euclidean search.
pub fn build_knn(dataset: &Dataset, k: usize) -> Result<KnnModel> {
    if dataset.is_empty() {
        return Err(Error::contract("cannot build k-NN from an empty dataset"));
    }
    if k < 1 || k > dataset.len() {
        return Err(Error::param(format!(
            "k must be in [1, {}], got {k}",
            dataset.len()
        )));
    }
    Ok(KnnModel {
        k,
        schema: dataset.schema().to_vec(),
        classes: dataset.classes().to_vec(),
        points: dataset.samples().iter().map(|s| s.values.clone()).collect(),
        labels: dataset
            .samples()
            .iter()
            .map(|s| dataset.class_index(&s.label).unwrap())
            .collect(),
    })
}

impl KnnModel {
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

    /// Majority vote among the k nearest points. Distance ties prefer the
    /// lower training index; vote ties go to the nearest tied member's class.
    pub fn predict_idx(&self, sample: &[f64]) -> usize {
        debug_assert_eq!(sample.len(), self.schema.len());
        let mut neighbors: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, sample), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < neighbors.len() {
            neighbors.select_nth_unstable_by(self.k - 1, order);
            neighbors.truncate(self.k);
        }
        neighbors.sort_unstable_by(order);

        let mut votes = vec![0usize; self.classes.len()];
        for &(_, idx) in &neighbors {
            votes[self.labels[idx]] += 1;
        }
        let top = *votes.iter().max().unwrap();
        // nearest member whose class has the top vote count
        for &(_, idx) in &neighbors {
            if votes[self.labels[idx]] == top {
                return self.labels[idx];
            }
        }
        unreachable!("k >= 1 guarantees at least one neighbor");
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}
