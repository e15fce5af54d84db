//! Classification and detection metrics.
//!
//! Every ranking breaks score ties by the lower index (class id, sample
//! index or prediction order) so all metrics are deterministic. Average
//! precision uses all-points interpolation: the precision envelope
//! `max_{j ≥ i} p_j` integrated over each recall step.

mod classification;
mod detection;

pub use classification::{
    argmax, balanced_accuracy, class_mean_average_precision, rank_of, top_k_accuracy, BalancedAccuracy, ClassMeanAp, EvalSample,
};
pub use detection::{coco_thresholds, detection_map, DetectionEvalPair, DetectionMap, GroundTruthBox, PredictedBox, ThresholdMap};

use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by metric computations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    /// No samples, or no class with support.
    #[error("metric undefined: {0}")]
    Undefined(String),
    /// Score vectors of inconsistent length or an out-of-range label.
    #[error("sample {index}: {reason}")]
    BadSample {
        /// Sample index.
        index: usize,
        /// What is wrong.
        reason: String,
    },
    /// Invalid parameter.
    #[error("configuration error: {0}")]
    Config(String),
}

/// All-points interpolated AP of a ranked relevance list with `n_positive`
/// relevant items in total (items never retrieved count as misses).
pub fn average_precision(ranked_relevance: &[bool], n_positive: usize) -> f64 {
    if n_positive == 0 {
        return 0.0;
    }
    let mut precisions = Vec::with_capacity(ranked_relevance.len());
    let mut hits = 0usize;
    for (i, &rel) in ranked_relevance.iter().enumerate() {
        if rel {
            hits += 1;
        }
        precisions.push(hits as f64 / (i + 1) as f64);
    }
    // envelope from the right
    for i in (0..precisions.len().saturating_sub(1)).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let hits: Vec<(usize, f64)> =
        ranked_relevance.iter().zip(&precisions).enumerate().filter(|(_, (rel, _))| **rel).map(|(i, (_, p))| (i, *p)).collect();
    if let Some(exact) = exact_mean(&hits, ranked_relevance, n_positive) {
        return exact;
    }
    hits.iter().map(|(_, p)| p).sum::<f64>() / n_positive as f64
}

// Sums the envelope precisions as fractions so that small cases come out
// correctly rounded (e.g. 5/6); `None` once the integers get too large.
fn exact_mean(hits: &[(usize, f64)], ranked_relevance: &[bool], n_positive: usize) -> Option<f64> {
    const LIMIT: u128 = 1 << 53;
    if ranked_relevance.len() > 256 {
        return None;
    }
    let mut prefix = Vec::with_capacity(ranked_relevance.len());
    let mut h = 0u128;
    for &rel in ranked_relevance {
        h += u128::from(rel);
        prefix.push(h);
    }
    let (mut num, mut den) = (0u128, 1u128);
    for &(i, _) in hits {
        // the envelope value at i is the best hits/rank at or after i
        let (mut bh, mut br) = (prefix[i], i as u128 + 1);
        for (j, &hj) in prefix.iter().enumerate().skip(i + 1) {
            let rj = j as u128 + 1;
            if hj * br > bh * rj {
                (bh, br) = (hj, rj);
            }
        }
        num = num.checked_mul(br)?.checked_add(bh.checked_mul(den)?)?;
        den = den.checked_mul(br)?;
        let g = gcd(num, den);
        num /= g;
        den /= g;
    }
    den = den.checked_mul(n_positive as u128)?;
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    (num < LIMIT && den < LIMIT).then(|| num as f64 / den as f64)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a.max(1)
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_hand_cases() {
        assert_eq!(average_precision(&[true, false, true], 2), 5.0 / 6.0);
        assert_eq!(average_precision(&[true, true, false, false], 2), 1.0);
        assert!((average_precision(&[false, false, false, true], 1) - 0.25).abs() < 1e-15);
        // interpolation lifts the second hit to the later, higher precision
        let ap = average_precision(&[true, false, false, true, true], 3);
        assert!((ap - (1.0 + 0.6 + 0.6) / 3.0).abs() < 1e-15);
        // unretrieved positives count as zero
        assert_eq!(average_precision(&[true], 2), 0.5);
    }
}
