//! Greedy binary classification tree on axis-aligned thresholds, grown by
//! maximum information gain (Shannon entropy).

use serde::{Deserialize, Serialize};

/// Shannon entropy in bits of a class-count histogram.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy reduction (bits) from splitting `parent` into `left` and `right`.
pub fn information_gain(parent: &[usize], left: &[usize], right: &[usize]) -> f64 {
    let n: usize = parent.iter().sum();
    let nl: usize = left.iter().sum();
    let nr: usize = right.iter().sum();
    if n == 0 {
        return 0.0;
    }
    entropy(parent) - (nl as f64 / n as f64) * entropy(left) - (nr as f64 / n as f64) * entropy(right)
}

#[inline]
fn xlnx(x: usize) -> f64 {
    if x == 0 {
        0.0
    } else {
        let x = x as f64;
        x * x.ln()
    }
}

/// Minimum gain (bits) for a split to be taken, and the margin a later candidate
/// must beat an earlier one by.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    features: &'a [Vec<f64>],
    targets: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.targets[i]] += 1;
        }
        c
    }

    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let dim = self.features[0].len();
        let parent = xlnx(n) - counts.iter().map(|&c| xlnx(c)).sum::<f64>();
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();
        let mut left = vec![0usize; self.n_classes];
        let mut right = vec![0usize; self.n_classes];
        for f in 0..dim {
            order.sort_by(|&a, &b| self.features[a][f].total_cmp(&self.features[b][f]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            let mut left_sum = 0.0;
            let mut right_sum: f64 = counts.iter().map(|&c| xlnx(c)).sum();
            for p in 0..n - 1 {
                let c = self.targets[order[p]];
                left_sum += xlnx(left[c] + 1) - xlnx(left[c]);
                right_sum += xlnx(right[c] - 1) - xlnx(right[c]);
                left[c] += 1;
                right[c] -= 1;
                let lo = self.features[order[p]][f];
                let hi = self.features[order[p + 1]][f];
                if !(lo < hi) {
                    continue;
                }
                let nl = p + 1;
                let child = (xlnx(nl) - left_sum) + (xlnx(n - nl) - right_sum);
                let gain = (parent - child) / n as f64 / std::f64::consts::LN_2;
                let better = match &best {
                    None => gain > GAIN_EPS,
                    Some(b) => gain > b.gain + GAIN_EPS,
                };
                if better {
                    let mid = 0.5 * (lo + hi);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { gain, feature: f, threshold });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let majority = super::argmax_first(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority });
        if pure || depth >= self.max_depth || idx.len() < self.min_samples_split.max(2) {
            return slot;
        }
        let Some(split) = self.best_split(&idx, &counts) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.features[i][split.feature] <= split.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        slot
    }
}

impl TreeParams {
    pub(crate) fn fit(
        features: &[Vec<f64>],
        class_index: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_samples_split: usize,
    ) -> Self {
        let mut b =
            Builder { features, targets: class_index, n_classes, max_depth, min_samples_split, nodes: Vec::new() };
        b.build((0..features.len()).collect(), 0);
        TreeParams { nodes: b.nodes }
    }

    pub fn predict_one(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
