use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{average_precision, MetricError};
use crate::geometry::{iou, BoundingBox};

/// A predicted box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedBox {
    /// Box in pixels.
    pub bbox: BoundingBox,
    /// Predicted class.
    pub class: u32,
    /// Confidence in `[0, 1]`.
    pub confidence: f64,
}

/// A ground-truth box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthBox {
    /// Box in pixels.
    pub bbox: BoundingBox,
    /// True class.
    pub class: u32,
}

/// Predictions and ground truth of one image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionEvalPair {
    /// Predicted boxes.
    pub predictions: Vec<PredictedBox>,
    /// Ground-truth boxes.
    pub ground_truth: Vec<GroundTruthBox>,
}

/// mAP at a single IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMap {
    /// IoU threshold.
    pub iou_threshold: f64,
    /// Mean AP over classes with ground truth.
    pub map: f64,
    /// `(class, AP)` for every class with ground truth, ascending.
    pub per_class: Vec<(u32, f64)>,
}

/// Detection mAP across thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    /// One entry per requested threshold, in request order.
    pub per_threshold: Vec<ThresholdMap>,
    /// Mean of the per-threshold mAPs.
    pub mean: f64,
    /// Predicted classes that never appear in the ground truth.
    pub excluded_classes: Vec<u32>,
}

/// The ten-value grid 0.50, 0.55, …, 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

/// Per-class AP with greedy one-to-one matching, averaged over classes and
/// then over `iou_thresholds`.
///
/// Predictions of a class are visited by descending confidence (ties by
/// image, then prediction order). Each claims the unmatched same-class
/// ground-truth box of its image with the highest IoU, provided that IoU is
/// at least the threshold; otherwise it is a false positive.
pub fn detection_map(pairs: &[DetectionEvalPair], iou_thresholds: &[f64]) -> Result<DetectionMap, MetricError> {
    if iou_thresholds.is_empty() {
        return Err(MetricError::Config("no IoU thresholds".into()));
    }
    if let Some(t) = iou_thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(MetricError::Config(format!("IoU threshold {t} outside (0, 1]")));
    }
    let mut gt_count: BTreeMap<u32, usize> = BTreeMap::new();
    for p in pairs {
        for g in &p.ground_truth {
            *gt_count.entry(g.class).or_default() += 1;
        }
    }
    let mut excluded_classes: Vec<u32> =
        pairs.iter().flat_map(|p| p.predictions.iter().map(|d| d.class)).filter(|c| !gt_count.contains_key(c)).collect();
    excluded_classes.sort_unstable();
    excluded_classes.dedup();

    // (image, prediction) references per class, in visiting order
    let mut by_class: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for (img, p) in pairs.iter().enumerate() {
        for (k, d) in p.predictions.iter().enumerate() {
            if gt_count.contains_key(&d.class) {
                by_class.entry(d.class).or_default().push((img, k));
            }
        }
    }
    for refs in by_class.values_mut() {
        refs.sort_by(|a, b| {
            let ca = pairs[a.0].predictions[a.1].confidence;
            let cb = pairs[b.0].predictions[b.1].confidence;
            cb.total_cmp(&ca).then(a.cmp(b))
        });
    }

    let mut per_threshold = Vec::with_capacity(iou_thresholds.len());
    for &thr in iou_thresholds {
        let mut per_class = Vec::with_capacity(gt_count.len());
        for (&class, &n_gt) in &gt_count {
            let refs = by_class.get(&class).map(Vec::as_slice).unwrap_or(&[]);
            let mut claimed: Vec<Vec<bool>> = pairs.iter().map(|p| vec![false; p.ground_truth.len()]).collect();
            let relevance: Vec<bool> = refs
                .iter()
                .map(|&(img, k)| {
                    let pred = &pairs[img].predictions[k];
                    let mut best: Option<(usize, f64)> = None;
                    for (g, gt) in pairs[img].ground_truth.iter().enumerate() {
                        if gt.class != class || claimed[img][g] {
                            continue;
                        }
                        let o = iou(&pred.bbox, &gt.bbox);
                        if o >= thr && best.map_or(true, |(_, b)| o > b) {
                            best = Some((g, o));
                        }
                    }
                    if let Some((g, _)) = best {
                        claimed[img][g] = true;
                        true
                    } else {
                        false
                    }
                })
                .collect();
            per_class.push((class, average_precision(&relevance, n_gt)));
        }
        let map = if per_class.is_empty() { 0.0 } else { per_class.iter().map(|(_, ap)| ap).sum::<f64>() / per_class.len() as f64 };
        per_threshold.push(ThresholdMap { iou_threshold: thr, map, per_class });
    }
    let mean = per_threshold.iter().map(|t| t.map).sum::<f64>() / per_threshold.len() as f64;
    Ok(DetectionMap { per_threshold, mean, excluded_classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(x: f64, y: f64, w: f64, h: f64, class: u32) -> GroundTruthBox {
        GroundTruthBox { bbox: BoundingBox::new(x, y, w, h), class }
    }

    fn pred(x: f64, y: f64, w: f64, h: f64, class: u32, confidence: f64) -> PredictedBox {
        PredictedBox { bbox: BoundingBox::new(x, y, w, h), class, confidence }
    }

    #[test]
    fn perfect_predictions() {
        let pair = DetectionEvalPair {
            predictions: vec![pred(0., 0., 10., 10., 1, 1.0), pred(20., 20., 5., 5., 2, 1.0)],
            ground_truth: vec![gt(0., 0., 10., 10., 1), gt(20., 20., 5., 5., 2)],
        };
        let m = detection_map(&[pair], &coco_thresholds()).unwrap();
        assert!(m.per_threshold.iter().all(|t| t.map == 1.0));
        assert_eq!(m.mean, 1.0);
    }

    #[test]
    fn one_third_overlap_is_unmatched() {
        let pair = DetectionEvalPair { predictions: vec![pred(5., 0., 10., 10., 0, 0.9)], ground_truth: vec![gt(0., 0., 10., 10., 0)] };
        let m = detection_map(core::slice::from_ref(&pair), &[0.5]).unwrap();
        assert_eq!(m.per_threshold[0].map, 0.0);
        let m = detection_map(&[pair], &[0.3]).unwrap();
        assert_eq!(m.per_threshold[0].map, 1.0);
    }

    #[test]
    fn duplicate_is_false_positive() {
        let pair = DetectionEvalPair {
            predictions: vec![pred(0., 0., 10., 10., 0, 0.9), pred(0., 0., 10., 10., 0, 0.8)],
            ground_truth: vec![gt(0., 0., 10., 10., 0), gt(50., 50., 10., 10., 0)],
        };
        // hit, miss; second GT never found -> AP = 1/2
        let m = detection_map(&[pair], &[0.5]).unwrap();
        assert_eq!(m.per_threshold[0].map, 0.5);
    }

    #[test]
    fn grid_and_validation() {
        let g = coco_thresholds();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[9], 0.95);
        assert!(detection_map(&[], &[0.0]).is_err());
        assert!(detection_map(&[], &[]).is_err());
        assert_eq!(detection_map(&[], &[0.5]).unwrap().mean, 0.0);
    }

    #[test]
    fn predicted_class_without_ground_truth_is_reported() {
        let pair = DetectionEvalPair { predictions: vec![pred(0., 0., 10., 10., 7, 0.9)], ground_truth: vec![gt(0., 0., 10., 10., 0)] };
        let m = detection_map(&[pair], &[0.5]).unwrap();
        assert_eq!(m.excluded_classes, vec![7]);
        assert_eq!(m.per_threshold[0].map, 0.0);
    }
}
