use alloc::string::String;
use alloc::vec::Vec;

use super::{DatasetError, DatasetManifest};

/// Inverse-frequency loss weights aligned with the species catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    /// Species names, catalog order.
    pub species: Vec<String>,
    /// `w_c = N / (C · n_c)`.
    pub weights: Vec<f64>,
}

impl ClassWeights {
    /// Weight of class `c`.
    pub fn get(&self, c: usize) -> f64 {
        self.weights[c]
    }
}

/// Computes `w_c = N / (C · n_c)` with `N` the record count and `C` the
/// catalog length.
pub fn class_weights(manifest: &DatasetManifest) -> Result<ClassWeights, DatasetError> {
    let counts = manifest.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(DatasetError::EmptyClass(manifest.catalog()[c].clone()));
    }
    let total = manifest.len() as f64;
    let classes = counts.len() as f64;
    Ok(ClassWeights { species: manifest.catalog().to_vec(), weights: counts.iter().map(|&n| total / (classes * n as f64)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Quality, SampleRecord};
    use crate::detection::Modality;
    use alloc::format;

    fn manifest(counts: &[usize]) -> DatasetManifest {
        let mut records = Vec::new();
        let catalog: Vec<String> = (0..counts.len()).map(|c| format!("s{c}")).collect();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                records.push(SampleRecord {
                    id: format!("{c}-{i}"),
                    species: catalog[c].clone(),
                    quality: Quality::A,
                    modality: Modality::Audio,
                    media_path: String::new(),
                    license: String::new(),
                    origin_split: None,
                });
            }
        }
        DatasetManifest::new(records, catalog).unwrap()
    }

    #[test]
    fn hand_example() {
        let w = class_weights(&manifest(&[150, 100, 50])).unwrap();
        assert!((w.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(w.get(1), 1.0);
        assert_eq!(w.get(2), 2.0);
    }

    #[test]
    fn balanced_is_all_ones() {
        let w = class_weights(&manifest(&[7, 7, 7, 7])).unwrap();
        assert!(w.weights.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn empty_class_is_an_error() {
        let m = manifest(&[3, 0]);
        assert_eq!(class_weights(&m), Err(DatasetError::EmptyClass("s1".into())));
    }

    #[test]
    fn weighted_counts_sum_to_total() {
        let counts = [1, 2, 3, 50, 999];
        let m = manifest(&counts);
        let w = class_weights(&m).unwrap();
        let sum: f64 = counts.iter().zip(&w.weights).map(|(&n, &w)| n as f64 * w).sum();
        assert!((sum - m.len() as f64).abs() <= 1e-9 * m.len() as f64);
    }
}
