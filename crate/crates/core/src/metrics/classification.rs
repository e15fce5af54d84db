use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{average_precision, MetricError};

/// Per-class scores of one sample and its true class.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    /// One score per catalog class.
    pub scores: Vec<f64>,
    /// Ground-truth class id.
    pub true_class: usize,
}

impl EvalSample {
    /// New sample.
    pub fn new(scores: Vec<f64>, true_class: usize) -> Self {
        Self { scores, true_class }
    }
}

/// 0-based rank of class `c`: classes with a higher score, or an equal
/// score and a lower id, come first.
pub fn rank_of(scores: &[f64], c: usize) -> usize {
    let s = scores[c];
    scores.iter().enumerate().filter(|&(j, &v)| v > s || (v == s && j < c)).count()
}

/// Highest-scoring class, lowest id on ties. `None` for empty scores.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

fn validate(samples: &[EvalSample]) -> Result<usize, MetricError> {
    let first = samples.first().ok_or_else(|| MetricError::Undefined("empty sample set".into()))?;
    let n_classes = first.scores.len();
    if n_classes == 0 {
        return Err(MetricError::BadSample { index: 0, reason: "empty score vector".into() });
    }
    for (index, s) in samples.iter().enumerate() {
        if s.scores.len() != n_classes {
            return Err(MetricError::BadSample { index, reason: format!("{} scores, expected {n_classes}", s.scores.len()) });
        }
        if s.true_class >= n_classes {
            return Err(MetricError::BadSample { index, reason: format!("class {} out of range", s.true_class) });
        }
        if s.scores.iter().any(|v| v.is_nan()) {
            return Err(MetricError::BadSample { index, reason: "NaN score".into() });
        }
    }
    Ok(n_classes)
}

/// Fraction of samples whose true class ranks within the top `k`.
pub fn top_k_accuracy(samples: &[EvalSample], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::Config("k must be at least 1".into()));
    }
    validate(samples)?;
    let hits = samples.iter().filter(|s| rank_of(&s.scores, s.true_class) < k).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Mean per-class recall at argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedAccuracy {
    /// Unweighted mean over classes with support.
    pub value: f64,
    /// Recall per class id; `None` for classes absent from the ground truth.
    pub per_class_recall: Vec<Option<f64>>,
    /// Class ids excluded for lack of support.
    pub excluded: Vec<usize>,
}

/// Unweighted mean of per-class recall; unsupported classes are excluded.
pub fn balanced_accuracy(samples: &[EvalSample]) -> Result<BalancedAccuracy, MetricError> {
    let n_classes = validate(samples)?;
    let mut support = vec![0usize; n_classes];
    let mut correct = vec![0usize; n_classes];
    for s in samples {
        support[s.true_class] += 1;
        if argmax(&s.scores) == Some(s.true_class) {
            correct[s.true_class] += 1;
        }
    }
    let per_class_recall: Vec<Option<f64>> = support.iter().zip(&correct).map(|(&n, &c)| (n > 0).then(|| c as f64 / n as f64)).collect();
    let present: Vec<f64> = per_class_recall.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(MetricError::Undefined("no class present in ground truth".into()));
    }
    let excluded = (0..n_classes).filter(|&c| support[c] == 0).collect();
    Ok(BalancedAccuracy { value: present.iter().sum::<f64>() / present.len() as f64, per_class_recall, excluded })
}

/// Class-mean one-vs-rest average precision.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMeanAp {
    /// Unweighted mean over classes with at least one positive.
    pub value: f64,
    /// AP per class id; `None` for classes without positives.
    pub per_class: Vec<Option<f64>>,
    /// Class ids excluded for lack of positives.
    pub excluded: Vec<usize>,
}

/// Per-class AP over the full ranking of samples by that class's score
/// (ties by lower sample index), averaged over classes with positives.
pub fn class_mean_average_precision(samples: &[EvalSample]) -> Result<ClassMeanAp, MetricError> {
    let n_classes = validate(samples)?;
    let mut per_class = Vec::with_capacity(n_classes);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for c in 0..n_classes {
        let positives = samples.iter().filter(|s| s.true_class == c).count();
        if positives == 0 {
            per_class.push(None);
            continue;
        }
        order.sort_by(|&a, &b| samples[b].scores[c].total_cmp(&samples[a].scores[c]).then(a.cmp(&b)));
        let relevance: Vec<bool> = order.iter().map(|&i| samples[i].true_class == c).collect();
        per_class.push(Some(average_precision(&relevance, positives)));
    }
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(MetricError::Undefined("no class has positives".into()));
    }
    let excluded = (0..n_classes).filter(|&c| per_class[c].is_none()).collect();
    Ok(ClassMeanAp { value: present.iter().sum::<f64>() / present.len() as f64, per_class, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(scores: &[f64], t: usize) -> EvalSample {
        EvalSample::new(scores.to_vec(), t)
    }

    #[test]
    fn perfect_and_full_k() {
        let s = [sample(&[0.9, 0.1, 0.0], 0), sample(&[0.2, 0.7, 0.1], 1)];
        assert_eq!(top_k_accuracy(&s, 1).unwrap(), 1.0);
        let wrong = [sample(&[0.9, 0.1, 0.0], 2)];
        assert_eq!(top_k_accuracy(&wrong, 3).unwrap(), 1.0);
        assert_eq!(top_k_accuracy(&wrong, 2).unwrap(), 0.0);
    }

    #[test]
    fn ranks_one_three_six() {
        // true class at rank 1, 3 and 6 of 8 classes
        let scores = [0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        let s = [sample(&scores, 0), sample(&scores, 2), sample(&scores, 5)];
        assert!((top_k_accuracy(&s, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((top_k_accuracy(&s, 5).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_id() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), Some(0));
        assert_eq!(rank_of(&[0.4, 0.4, 0.2], 1), 1);
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn balanced_hand_case() {
        let s = [sample(&[1.0, 0.0], 0), sample(&[1.0, 0.0], 0), sample(&[0.0, 1.0], 1), sample(&[1.0, 0.0], 1)];
        let b = balanced_accuracy(&s).unwrap();
        assert_eq!(b.value, 0.75);
        assert!(b.excluded.is_empty());
    }

    #[test]
    fn balanced_excludes_unsupported() {
        let s = [sample(&[1.0, 0.0, 0.0], 0)];
        let b = balanced_accuracy(&s).unwrap();
        assert_eq!(b.value, 1.0);
        assert_eq!(b.excluded, vec![1, 2]);
    }

    #[test]
    fn cmap_hand_case() {
        // class 0 ranked relevance (1, 0, 1)
        let s = [sample(&[0.9, 0.1], 0), sample(&[0.8, 0.2], 1), sample(&[0.7, 0.3], 0)];
        let m = class_mean_average_precision(&s).unwrap();
        assert!((m.per_class[0].unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn empty_and_ragged_inputs() {
        assert!(matches!(top_k_accuracy(&[], 1), Err(MetricError::Undefined(_))));
        assert!(matches!(top_k_accuracy(&[sample(&[1.0], 0)], 0), Err(MetricError::Config(_))));
        let ragged = [sample(&[1.0, 0.0], 0), sample(&[1.0], 0)];
        assert!(matches!(balanced_accuracy(&ragged), Err(MetricError::BadSample { index: 1, .. })));
    }
}
