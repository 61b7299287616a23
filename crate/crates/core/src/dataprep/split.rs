use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Dataset;

/// Train/test/validation fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train: 0.5, test: 0.3, validation: 0.2, seed: 0 }
    }
}

impl SplitSpec {
    pub fn new(train: f64, test: f64, validation: f64, seed: u64) -> Result<Self> {
        let s = SplitSpec { train, test, validation, seed };
        s.validate()?;
        Ok(s)
    }

    /// Zero-sized parts are allowed; each fraction must lie in `[0, 1]` and the
    /// three must sum to 1 within 1e-9.
    pub fn validate(&self) -> Result<()> {
        let f = self.fractions();
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("split fractions must lie in [0, 1]"));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.train, self.test, self.validation]
    }
}

/// Hamilton (largest-remainder) apportionment of `n` items. Remainder ties go to
/// the earlier part.
pub fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let quotas = fractions.map(|f| f * n as f64);
    // guard against 0.3 · 10 = 2.9999…
    let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
    let mut assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    let rem = |k: usize| quotas[k] - counts[k] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut k = 0;
    while assigned < n {
        counts[order[k % 3]] += 1;
        assigned += 1;
        k += 1;
    }
    counts
}

/// Label-stratified seeded split. Within each part records keep dataset order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records.iter().enumerate() {
        by_label.entry(r.prepared_label).or_default().push(i);
    }
    let mut part_of = vec![0u8; dataset.records.len()];
    for (&label, idx) in &by_label {
        if idx.len() < 3 {
            return Err(Error::Coverage(format!("label {label} has {} shots; splitting needs at least 3", idx.len())));
        }
        let mut shuffled = idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ (label as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        shuffled.shuffle(&mut rng);
        let [n_train, n_test, _] = largest_remainder(idx.len(), spec.fractions());
        for (pos, &i) in shuffled.iter().enumerate() {
            part_of[i] = if pos < n_train {
                0
            } else if pos < n_train + n_test {
                1
            } else {
                2
            };
        }
    }
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    for (r, &p) in dataset.records.iter().zip(&part_of) {
        parts[p as usize].push(r.clone());
    }
    let [train, test, validation] = parts;
    Ok((dataset.with_records(train), dataset.with_records(test), dataset.with_records(validation)))
}
