//! Dataset curation for both modalities.
//!
//! Audio: quality filtering, top-`C` class cutoff, oversampling to a
//! per-class floor, inverse-frequency class weights and stratified splits.
//! Images: weak-label box rules on generic detector output (bird class,
//! NMS, confidence and area floors, most confident survivor), padding,
//! YOLO label emission and the train/val crop geometry.

mod boxes;
mod crop;
mod records;
mod split;
mod weights;

pub use boxes::{emit_yolo_label, nms, pad_bbox, select_bird_crop, CropRules, CropSpec, Detection, YoloLabel, COCO_BIRD_CLASS};
pub use crop::{train_crop_geometry, val_crop_geometry, CropRect, TrainCropParams, ValCrop};
pub use records::{
    ingest, oversample, select_top_classes, DatasetManifest, IngestOptions, Ingested, Quality, Rejection, SampleRecord, SplitName,
};
pub use split::{allocate_largest_remainder, stratified_split, SplitFractions};
pub use weights::{class_weights, ClassWeights};

use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by dataset operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    /// Record ids that occur more than once.
    #[error("duplicate record ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),
    /// A catalog class without records where at least one is required.
    #[error("class {0:?} has no records")]
    EmptyClass(String),
    /// A record whose species is missing from the catalog.
    #[error("record {id:?} has species {species:?} outside the catalog")]
    UnknownSpecies {
        /// Record id.
        id: String,
        /// Offending species.
        species: String,
    },
    /// Invalid split fractions or other configuration.
    #[error("configuration error: {0}")]
    Config(String),
}
