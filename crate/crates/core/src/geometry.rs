//! Axis-aligned boxes in pixel coordinates.

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImageDims {
    /// Width in pixels.
    pub width: u32,
    /// Height in pixels.
    pub height: u32,
}

impl ImageDims {
    /// New dimensions.
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    /// Pixel area.
    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }
}

/// Box with top-left corner `(x0, y0)` and size `w × h`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundingBox {
    /// Left edge.
    pub x0: f64,
    /// Top edge.
    pub y0: f64,
    /// Width.
    pub w: f64,
    /// Height.
    pub h: f64,
}

impl BoundingBox {
    /// New box from corner and size.
    pub const fn new(x0: f64, y0: f64, w: f64, h: f64) -> Self {
        Self { x0, y0, w, h }
    }

    /// Box covering the corners `(x0, y0)`–`(x1, y1)`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, w: x1 - x0, h: y1 - y0 }
    }

    /// Right edge.
    pub fn x1(&self) -> f64 {
        self.x0 + self.w
    }

    /// Bottom edge.
    pub fn y1(&self) -> f64 {
        self.y0 + self.h
    }

    /// Area, zero for degenerate boxes.
    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// True when `other` lies entirely inside `self`.
    pub fn contains(&self, other: &BoundingBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1() >= other.x1() && self.y1() >= other.y1()
    }

    /// Intersection with the image rectangle.
    pub fn clamp_to(&self, dims: ImageDims) -> BoundingBox {
        let x0 = self.x0.clamp(0.0, f64::from(dims.width));
        let y0 = self.y0.clamp(0.0, f64::from(dims.height));
        let x1 = self.x1().clamp(0.0, f64::from(dims.width));
        let y1 = self.y1().clamp(0.0, f64::from(dims.height));
        BoundingBox::from_corners(x0, y0, x1, y1)
    }

    /// Area of the overlap with `other`.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x1().min(other.x1()) - self.x0.max(other.x0);
        let h = self.y1().min(other.y1()) - self.y0.max(other.y0);
        w.max(0.0) * h.max(0.0)
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_cases() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BoundingBox::new(5.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b), 50.0 / 150.0);
        assert_eq!(iou(&a, &BoundingBox::new(20.0, 20.0, 5.0, 5.0)), 0.0);
    }

    fn boxes() -> impl Strategy<Value = BoundingBox> {
        (0.0..100.0f64, 0.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in boxes(), b in boxes()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }
    }
}
