use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{iou, BoundingBox, ImageDims};
use crate::math;

/// COCO class index of "bird".
pub const COCO_BIRD_CLASS: u32 = 14;

/// A detector candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    /// Box in pixels.
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub bbox: BoundingBox,
    /// Detector confidence in `[0, 1]`.
    pub confidence: f64,
    /// Detector class index.
    pub class_id: u32,
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited by descending confidence (ties by input order); a box
/// is dropped when its IoU with an already kept box exceeds `iou_threshold`.
/// Survivors are returned in visiting order.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].confidence.total_cmp(&detections[a].confidence).then(a.cmp(&b)));
    let mut kept: Vec<Detection> = Vec::new();
    for i in order {
        let d = detections[i];
        if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Thresholds of the bird crop selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRules {
    /// Minimum confidence; lower boxes are dropped.
    pub conf_min: f64,
    /// Minimum box area as a fraction of the image area.
    pub area_min_fraction: f64,
    /// Detector class kept.
    pub bird_class: u32,
    /// NMS IoU threshold.
    pub nms_iou: f64,
}

impl Default for CropRules {
    fn default() -> Self {
        Self { conf_min: 0.1, area_min_fraction: 0.005, bird_class: COCO_BIRD_CLASS, nms_iou: 0.5 }
    }
}

/// Picks the single bird box used for a weak label.
///
/// Keeps the bird class, applies NMS, drops boxes below the confidence or
/// area floor and returns the most confident survivor.
pub fn select_bird_crop(detections: &[Detection], image: ImageDims, rules: &CropRules) -> Option<Detection> {
    let birds: Vec<Detection> = detections.iter().copied().filter(|d| d.class_id == rules.bird_class).collect();
    let image_area = image.area();
    nms(&birds, rules.nms_iou).into_iter().find(|d| {
        d.confidence >= rules.conf_min && image_area > 0.0 && d.bbox.clamp_to(image).area() / image_area >= rules.area_min_fraction
    })
}

/// Grows a box by `pad_fraction` of its width and height (half per side),
/// clamps it to the image and rounds outward to whole pixels.
pub fn pad_bbox(bbox: &BoundingBox, pad_fraction: f64, image: ImageDims) -> BoundingBox {
    let pad = pad_fraction.max(0.0);
    let dx = bbox.w * pad / 2.0;
    let dy = bbox.h * pad / 2.0;
    let grown = BoundingBox::from_corners(bbox.x0 - dx, bbox.y0 - dy, bbox.x1() + dx, bbox.y1() + dy);
    let c = grown.clamp_to(image);
    BoundingBox::from_corners(math::floor(c.x0), math::floor(c.y0), math::ceil(c.x1()), math::ceil(c.y1())).clamp_to(image)
}

/// Normalized center/size box label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YoloLabel {
    /// Species class index.
    pub class_index: usize,
    /// Center x / image width.
    pub cx: f64,
    /// Center y / image height.
    pub cy: f64,
    /// Width / image width.
    pub bw: f64,
    /// Height / image height.
    pub bh: f64,
}

impl YoloLabel {
    /// Back to a pixel box.
    pub fn to_pixels(&self, image: ImageDims) -> BoundingBox {
        let (w, h) = (f64::from(image.width), f64::from(image.height));
        BoundingBox::new((self.cx - self.bw / 2.0) * w, (self.cy - self.bh / 2.0) * h, self.bw * w, self.bh * h)
    }
}

impl fmt::Display for YoloLabel {
    /// `class cx cy bw bh`, six decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:.6} {:.6} {:.6} {:.6}", self.class_index, self.cx, self.cy, self.bw, self.bh)
    }
}

/// Converts a pixel box (clamped to the image) to a YOLO label.
pub fn emit_yolo_label(bbox: &BoundingBox, class_index: usize, image: ImageDims) -> YoloLabel {
    let b = bbox.clamp_to(image);
    let (w, h) = (f64::from(image.width), f64::from(image.height));
    YoloLabel {
        class_index,
        cx: ((b.x0 + b.w / 2.0) / w).clamp(0.0, 1.0),
        cy: ((b.y0 + b.h / 2.0) / h).clamp(0.0, 1.0),
        bw: (b.w / w).clamp(0.0, 1.0),
        bh: (b.h / h).clamp(0.0, 1.0),
    }
}

/// Where to cut a training crop from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CropSpec {
    /// Image the crop comes from.
    pub source_image: String,
    /// Padded pixel box.
    pub padded_box: BoundingBox,
    /// Optional cap on the longer side of the written crop.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub max_side: Option<u32>,
}
