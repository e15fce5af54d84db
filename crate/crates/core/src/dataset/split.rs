use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, DatasetManifest};

/// Validated split proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFractions(Vec<f64>);

impl SplitFractions {
    /// 90 % train / 10 % validation.
    pub fn train_val() -> Self {
        Self(vec![0.9, 0.1])
    }

    /// 60 / 20 / 20 train / validation / test.
    pub fn train_val_test() -> Self {
        Self(vec![0.6, 0.2, 0.2])
    }

    /// Positive fractions summing to 1 within 1e-9.
    pub fn new(fractions: Vec<f64>) -> Result<Self, DatasetError> {
        if fractions.is_empty() {
            return Err(DatasetError::Config("no split fractions given".into()));
        }
        if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(DatasetError::Config(alloc::format!("split fractions must be positive: {fractions:?}")));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::Config(alloc::format!("split fractions sum to {sum}, not 1")));
        }
        Ok(Self(fractions))
    }

    /// The fractions.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Number of splits.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Never true for a validated value.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Largest-remainder apportionment of `n` items over `fractions`.
///
/// Floors of `f·n` are handed out first; leftover items go to the largest
/// fractional remainders, ties to the lower split index. When `n` is at
/// least the number of splits, any empty split then takes one item from the
/// split furthest above its quota, so every count stays within one of
/// `f·n`.
pub fn allocate_largest_remainder(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| crate::math::floor(*q) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    if n >= fractions.len() {
        while let Some(empty) = counts.iter().position(|&c| c == 0) {
            let donor = (0..counts.len())
                .filter(|&i| counts[i] >= 2)
                .max_by(|&a, &b| {
                    let sa = counts[a] as f64 - quotas[a];
                    let sb = counts[b] as f64 - quotas[b];
                    sa.total_cmp(&sb).then(b.cmp(&a))
                })
                .expect("n >= splits leaves a donor");
            counts[donor] -= 1;
            counts[empty] += 1;
        }
    }
    counts
}

/// Per-class stratified split.
///
/// Each class's records are shuffled with a seeded RNG and dealt out by
/// [`allocate_largest_remainder`]. Every split keeps the full catalog and
/// lists its records in input manifest order.
pub fn stratified_split(
    manifest: &DatasetManifest,
    fractions: &SplitFractions,
    rng_seed: u64,
) -> Result<Vec<DatasetManifest>, DatasetError> {
    let k = fractions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut assignment = vec![0usize; manifest.len()];
    for mut group in manifest.indices_by_class() {
        group.shuffle(&mut rng);
        let counts = allocate_largest_remainder(group.len(), fractions.as_slice());
        let mut it = group.into_iter();
        for (split, &count) in counts.iter().enumerate() {
            for idx in it.by_ref().take(count) {
                assignment[idx] = split;
            }
        }
    }
    let mut splits = vec![Vec::new(); k];
    for (rec, &split) in manifest.records().iter().zip(&assignment) {
        splits[split].push(rec.clone());
    }
    Ok(splits.into_iter().map(|records| DatasetManifest::from_parts_unchecked(records, manifest.catalog().to_vec())).collect())
}
