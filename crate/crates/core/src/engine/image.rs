use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::backend::check_shape;
use super::gate::{above, top_class};
use super::{validate_probabilities, BackendError, Clock, ModelBackend, ModelInput, ObjectDetector, PipelineConfig, PipelineError};
use crate::dataset::{pad_bbox, select_bird_crop, val_crop_geometry};
use crate::detection::{Modality, Sighting};
use crate::geometry::{BoundingBox, ImageDims};

/// Per-channel mean used to normalize classifier input.
pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
/// Per-channel standard deviation used to normalize classifier input.
pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

const RESIZE_SHORT: u32 = 255;
const OUT_SIDE: u32 = 224;

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    /// Wraps `width × height × 3` bytes, row-major.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, PipelineError> {
        if width == 0 || height == 0 {
            return Err(PipelineError::Input(format!("empty image {width}x{height}")));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(PipelineError::Input(format!("{} bytes for {width}x{height} RGB, expected {expected}", data.len())));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled by `f(x, y)`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Width in pixels.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Height in pixels.
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Dimensions.
    pub fn dims(&self) -> ImageDims {
        ImageDims::new(self.width, self.height)
    }

    /// Raw bytes.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    /// Pixel at `(x, y)`.
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Bilinear resample of the region `src` (pixel coordinates) to
    /// `out_w × out_h`, sampling at pixel centers with edge clamping.
    pub fn crop_resize(&self, src: &BoundingBox, out_w: u32, out_h: u32) -> RgbImage {
        let sx = src.w / f64::from(out_w);
        let sy = src.h / f64::from(out_h);
        let max_x = f64::from(self.width - 1);
        let max_y = f64::from(self.height - 1);
        RgbImage::from_fn(out_w, out_h, |ox, oy| {
            let fx = (src.x0 + (f64::from(ox) + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let fy = (src.y0 + (f64::from(oy) + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let (x0, y0) = (fx as u32, fy as u32);
            let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
            let (ax, ay) = (fx - f64::from(x0), fy - f64::from(y0));
            let (p00, p10, p01, p11) = (self.pixel(x0, y0), self.pixel(x1, y0), self.pixel(x0, y1), self.pixel(x1, y1));
            let mut out = [0u8; 3];
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - ax) + f64::from(p10[c]) * ax;
                let bottom = f64::from(p01[c]) * (1.0 - ax) + f64::from(p11[c]) * ax;
                out[c] = crate::math::round_half_away(top * (1.0 - ay) + bottom * ay).clamp(0.0, 255.0) as u8;
            }
            out
        })
    }
}

/// Channel-major `3 × h × w` tensor, scaled to `[0, 1]` and normalized
/// with [`IMAGENET_MEAN`] / [`IMAGENET_STD`].
pub fn image_tensor(image: &RgbImage) -> Vec<f32> {
    let plane = image.width as usize * image.height as usize;
    let mut out = vec![0.0f32; 3 * plane];
    for (i, px) in image.data.chunks_exact(3).enumerate() {
        for c in 0..3 {
            out[c * plane + i] = (f32::from(px[c]) / 255.0 - IMAGENET_MEAN[c]) / IMAGENET_STD[c];
        }
    }
    out
}

/// Detector → bird crop → padded box → validation crop → classifier.
///
/// Returns `Ok(None)` when no usable bird box exists or the top probability
/// does not exceed the image report threshold.
pub fn run_image_pipeline<D, C>(
    image: &RgbImage,
    detector: &mut D,
    classifier: &mut C,
    catalog: &[String],
    cfg: &PipelineConfig,
    clock: &dyn Clock,
    media_ref: Option<String>,
) -> Result<Option<Sighting>, PipelineError>
where
    D: ObjectDetector + ?Sized,
    C: ModelBackend + ?Sized,
{
    let dims = image.dims();
    let detections = detector.detect(image)?;
    let Some(bird) = select_bird_crop(&detections, dims, &cfg.crop_rules) else { return Ok(None) };
    let padded = pad_bbox(&bird.bbox, cfg.pad_fraction, dims);
    if padded.w < 1.0 || padded.h < 1.0 {
        return Ok(None);
    }
    let crop_dims = ImageDims::new(padded.w as u32, padded.h as u32);
    let v = val_crop_geometry(crop_dims, RESIZE_SHORT, OUT_SIDE);
    let src = BoundingBox::new(padded.x0 + v.source.x0, padded.y0 + v.source.y0, v.source.w, v.source.h);
    let patch = image.crop_resize(&src, OUT_SIDE, OUT_SIDE);
    let tensor = image_tensor(&patch);
    let shape = [3, OUT_SIDE as usize, OUT_SIDE as usize];
    check_shape(classifier.input_shape(), &shape)?;
    let p = classifier.infer(&ModelInput { tensor: &tensor, shape: &shape, waveform: None })?;
    if p.len() != catalog.len() {
        return Err(BackendError::BadOutput(format!("{} probabilities for {} classes", p.len(), catalog.len())).into());
    }
    validate_probabilities(&p)?;
    let Some((k, pk)) = top_class(&p) else { return Ok(None) };
    if !above(pk, cfg.image_report_threshold) {
        return Ok(None);
    }
    Ok(Some(Sighting {
        species: catalog[k].clone(),
        confidence: f64::from(pk),
        timestamp_ms: clock.now_ms(),
        modality: Modality::Image,
        media_ref,
    }))
}
