//! Source rectangles for the 224×224 classifier inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{BoundingBox, ImageDims};
use crate::math;

/// Integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CropRect {
    /// Left edge.
    pub x: u32,
    /// Top edge.
    pub y: u32,
    /// Width.
    pub w: u32,
    /// Height.
    pub h: u32,
}

impl CropRect {
    /// Area in pixels.
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// True when the rectangle lies inside `dims`.
    pub fn fits(&self, dims: ImageDims) -> bool {
        self.w > 0 && self.h > 0 && self.x + self.w <= dims.width && self.y + self.h <= dims.height
    }
}

/// Random-resized-crop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainCropParams {
    /// Side length the caller resizes the rectangle to.
    pub out_side: u32,
    /// Range of the area fraction.
    pub area_range: (f64, f64),
    /// Range of the aspect ratio `w / h`, sampled log-uniformly.
    pub aspect_range: (f64, f64),
}

impl Default for TrainCropParams {
    fn default() -> Self {
        Self { out_side: 224, area_range: (0.4, 1.0), aspect_range: (3.0 / 4.0, 4.0 / 3.0) }
    }
}

const ATTEMPTS: usize = 10;

/// Samples a training crop rectangle.
///
/// Up to ten draws of an area fraction (uniform) and aspect ratio
/// (log-uniform); a draw is accepted when the rounded rectangle fits and its
/// realised area fraction stays inside `area_range`. Otherwise the centered
/// square of side `min(w, h)` is returned.
pub fn train_crop_geometry(dims: ImageDims, rng_seed: u64, params: &TrainCropParams) -> CropRect {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let total = dims.area();
    let (a0, a1) = params.area_range;
    let (log_r0, log_r1) = (math::ln(params.aspect_range.0), math::ln(params.aspect_range.1));
    for _ in 0..ATTEMPTS {
        let frac = if a1 > a0 { rng.gen_range(a0..=a1) } else { a0 };
        let log_ratio = if log_r1 > log_r0 { rng.gen_range(log_r0..=log_r1) } else { log_r0 };
        let aspect = math::exp(log_ratio);
        let target = frac * total;
        let w = math::round_half_away(math::sqrt(target * aspect));
        let h = math::round_half_away(math::sqrt(target / aspect));
        if w < 1.0 || h < 1.0 || w > f64::from(dims.width) || h > f64::from(dims.height) {
            continue;
        }
        let realised = w * h / total;
        if realised < a0 - 1e-12 || realised > a1 + 1e-12 {
            continue;
        }
        let (w, h) = (w as u32, h as u32);
        let x = rng.gen_range(0..=dims.width - w);
        let y = rng.gen_range(0..=dims.height - h);
        return CropRect { x, y, w, h };
    }
    let side = dims.width.min(dims.height);
    CropRect { x: (dims.width - side) / 2, y: (dims.height - side) / 2, w: side, h: side }
}

/// Resize-then-center-crop geometry for validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValCrop {
    /// Factor applied to the source image.
    pub scale: f64,
    /// Size after resizing.
    pub resized: ImageDims,
    /// The `out_side`² window in resized coordinates.
    pub window: CropRect,
    /// The same window in source pixel coordinates.
    pub source: BoundingBox,
}

/// Scales the shorter side to `resize_short` and centers an
/// `out_side × out_side` window (offsets floored).
pub fn val_crop_geometry(dims: ImageDims, resize_short: u32, out_side: u32) -> ValCrop {
    let short = dims.width.min(dims.height).max(1);
    let scale = f64::from(resize_short) / f64::from(short);
    let scaled = |side: u32| math::round_half_away(f64::from(side) * scale) as u32;
    let (rw, rh) = if dims.width <= dims.height { (resize_short, scaled(dims.height)) } else { (scaled(dims.width), resize_short) };
    let rw = rw.max(out_side);
    let rh = rh.max(out_side);
    let window = CropRect { x: (rw - out_side) / 2, y: (rh - out_side) / 2, w: out_side, h: out_side };
    let source = BoundingBox::new(
        f64::from(window.x) / scale,
        f64::from(window.y) / scale,
        f64::from(out_side) / scale,
        f64::from(out_side) / scale,
    );
    ValCrop { scale, resized: ImageDims::new(rw, rh), window, source }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_full_image() {
        let p = TrainCropParams { out_side: 224, area_range: (1.0, 1.0), aspect_range: (1.0, 1.0) };
        assert_eq!(train_crop_geometry(ImageDims::new(300, 300), 5, &p), CropRect { x: 0, y: 0, w: 300, h: 300 });
    }

    #[test]
    fn deterministic() {
        let d = ImageDims::new(640, 480);
        let p = TrainCropParams::default();
        assert_eq!(train_crop_geometry(d, 11, &p), train_crop_geometry(d, 11, &p));
    }

    #[test]
    fn ten_thousand_draws_in_bounds() {
        let d = ImageDims::new(500, 300);
        let p = TrainCropParams::default();
        for seed in 0..10_000 {
            let r = train_crop_geometry(d, seed, &p);
            assert!(r.fits(d), "{r:?}");
            let frac = r.area() as f64 / d.area();
            assert!((0.4..=1.0).contains(&frac), "seed {seed}: {frac}");
        }
    }

    #[test]
    fn val_geometry() {
        let v = val_crop_geometry(ImageDims::new(255, 255), 255, 224);
        assert_eq!(v.scale, 1.0);
        assert_eq!(v.window, CropRect { x: 15, y: 15, w: 224, h: 224 });
        let v = val_crop_geometry(ImageDims::new(510, 1020), 255, 224);
        assert_eq!(v.scale, 0.5);
        assert_eq!(v.resized, ImageDims::new(255, 510));
        assert_eq!(v.window.w, 224);
        assert_eq!(v.window.h, 224);
        let v = val_crop_geometry(ImageDims::new(29, 40), 255, 224);
        assert_eq!(v.resized.width, 255);
        assert_eq!((v.window.w, v.window.h), (224, 224));
    }
}
