use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Stored training set for exhaustive L1 k-nearest-neighbour voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub dim: usize,
    /// Training rows, flattened row-major.
    pub features: Vec<f64>,
    /// Class index (into the model's class list) per training row.
    pub targets: Vec<usize>,
}

impl KnnParams {
    pub(crate) fn fit(k: usize, features: &[Vec<f64>], class_index: &[usize]) -> Self {
        let dim = features[0].len();
        KnnParams { k, dim, features: features.concat(), targets: class_index.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// `(distance, training index)` ordered lexicographically, so the heap's maximum
/// is the neighbour that loses ties.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Majority vote among the `k` nearest rows (L1). Equal distances prefer the lower
/// training index; equal vote counts prefer the smaller class.
///
/// The scan abandons a row once its partial distance exceeds the current k-th
/// best. Distances are summed in feature order either way, so results equal a
/// full exhaustive sort.
pub fn knn_predict_one(p: &KnnParams, query: &[f64], n_classes: usize) -> usize {
    let k = p.k.min(p.len());
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    'rows: for (idx, row) in p.features.chunks_exact(p.dim).enumerate() {
        let bound = if heap.len() == k { heap.peek().map(|c| c.0) } else { None };
        let mut dist = 0.0;
        for (a, b) in row.iter().zip(query) {
            dist += (a - b).abs();
            if let Some(worst) = bound {
                if dist > worst {
                    continue 'rows;
                }
            }
        }
        let cand = Candidate(dist, idx);
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
    }
    let mut votes = vec![0usize; n_classes];
    for c in heap {
        votes[p.targets[c.1]] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}
