use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use zwitscher_core::audio::{SpeciesFrontend, SPECIES_FRAMES};
use zwitscher_core::dataset::{
    class_weights, emit_yolo_label, ingest, oversample, pad_bbox, select_bird_crop, select_top_classes, stratified_split, CropRules,
    CropSpec, DatasetManifest, Detection, IngestOptions, Quality, SplitFractions, SplitName,
};
use zwitscher_core::{BoundingBox, ImageDims, Modality};

use super::{require_dir, require_file, write_summary, Outcome};
use crate::{formats, media, wav, zwsp};

const AUDIO_EXTENSIONS: [&str; 6] = ["wav", "flac", "mp3", "ogg", "opus", "m4a"];

#[derive(Debug, Clone, Args)]
pub struct PrepAudioArgs {
    /// Directory of recordings (WAV; other codecs need ffmpeg).
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving one .zwsp file per recording.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Serialize)]
struct ItemFailure {
    item: String,
    error: String,
}

#[derive(Debug, Serialize)]
struct PrepAudioSummary {
    processed: usize,
    failed: usize,
    n_frames: usize,
    outputs: Vec<String>,
    failures: Vec<ItemFailure>,
}

fn sorted_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && keep(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn is_audio(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()).is_some_and(|e| AUDIO_EXTENSIONS.iter().any(|a| a.eq_ignore_ascii_case(e)))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn prep_audio(args: &PrepAudioArgs) -> anyhow::Result<Outcome> {
    require_dir(&args.input, "input")?;
    std::fs::create_dir_all(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let front = SpeciesFrontend::default();
    let mut summary = PrepAudioSummary { processed: 0, failed: 0, n_frames: SPECIES_FRAMES, outputs: Vec::new(), failures: Vec::new() };
    for path in sorted_files(&args.input, is_audio)? {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let out = args.output.join(format!("{}.zwsp", stem(&path)));
        let result = (|| -> anyhow::Result<()> {
            let clip = wav::read_audio(&path)?;
            let q = front.quantized(&clip)?.standardize_length(SPECIES_FRAMES)?;
            std::fs::write(&out, zwsp::encode(&q)?)?;
            Ok(())
        })();
        match result {
            Ok(()) => {
                summary.processed += 1;
                summary.outputs.push(out.file_name().unwrap_or_default().to_string_lossy().into_owned());
            }
            Err(e) => {
                log::error!("{name}: {e:#}");
                summary.failed += 1;
                summary.failures.push(ItemFailure { item: name, error: format!("{e:#}") });
            }
        }
    }
    write_summary(&args.output.join("prep-audio.json"), &summary)?;
    println!("processed {} failed {}", summary.processed, summary.failed);
    Ok(Outcome { failures: summary.failed })
}

#[derive(Debug, Clone, Args)]
pub struct PrepDatasetArgs {
    /// Input manifest, one JSON record per line.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Oversampling floor per class for audio manifests (0 disables).
    #[arg(long, default_value_t = 500)]
    pub min_per_class: usize,
    /// Keep the most frequent N classes.
    #[arg(long, default_value_t = 256)]
    pub classes: usize,
    /// Split fractions, e.g. 0.9,0.1 or 0.6,0.2,0.2 [default: 0.9,0.1 for audio, 0.6,0.2,0.2 for images].
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    /// Seed of the split shuffle; oversampling uses seed + 1.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quality grades kept.
    #[arg(long, value_delimiter = ',', default_value = "A,B,C")]
    pub qualities: Vec<Quality>,
    /// File of species names to drop, one per line.
    #[arg(long)]
    pub exclude_list: Option<PathBuf>,
    /// Oversample only the training split, after splitting.
    #[arg(long)]
    pub oversample_after_split: bool,
}

#[derive(Debug, Serialize)]
struct Rejected {
    id: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct PrepDatasetSummary {
    input_records: usize,
    rejected: Vec<Rejected>,
    quality_filtered: usize,
    excluded: usize,
    classes: usize,
    curated_records: usize,
    modality: Option<Modality>,
    oversampled: &'static str,
    replicas: usize,
    min_per_class: usize,
    fractions: Vec<f64>,
    seed: u64,
    splits: BTreeMap<&'static str, usize>,
    outputs: Vec<String>,
}

fn split_names(k: usize) -> &'static [SplitName] {
    if k == 2 {
        &[SplitName::Train, SplitName::Val]
    } else {
        &[SplitName::Train, SplitName::Val, SplitName::Test]
    }
}

pub fn prep_dataset(args: &PrepDatasetArgs) -> anyhow::Result<Outcome> {
    require_file(&args.manifest, "manifest")?;
    if let Some(p) = &args.exclude_list {
        require_file(p, "exclude list")?;
    }
    if let Some(f) = &args.split {
        if f.len() != 2 && f.len() != 3 {
            bail!("--split needs two or three fractions");
        }
    }
    let records = formats::parse_manifest(&formats::read_text(&args.manifest)?).context("reading manifest")?;
    let input_records = records.len();
    let excluded_species = match &args.exclude_list {
        Some(p) => formats::parse_name_list(&formats::read_text(p)?),
        None => Vec::new(),
    };
    let opts = IngestOptions { allowed_qualities: args.qualities.clone(), excluded_species };
    let ingested = ingest(records, &opts)?;
    for r in &ingested.rejected {
        log::error!("record {}: {}", r.id, r.reason);
    }
    let mut manifest = select_top_classes(&ingested.manifest, args.classes);
    let modality = match manifest.records().first().map(|r| r.modality) {
        Some(m) if manifest.records().iter().any(|r| r.modality != m) => bail!("manifest mixes audio and image records"),
        m => m,
    };
    let fractions = match &args.split {
        Some(f) => SplitFractions::new(f.clone())?,
        None if modality == Some(Modality::Image) => SplitFractions::train_val_test(),
        None => SplitFractions::train_val(),
    };
    let oversampling = modality == Some(Modality::Audio) && args.min_per_class > 0;
    let curated_before = manifest.len();
    let mut replicas = 0;
    if oversampling && !args.oversample_after_split {
        manifest = oversample(&manifest, args.min_per_class, args.seed.wrapping_add(1))?;
        replicas = manifest.len() - curated_before;
    }
    let mut splits: Vec<DatasetManifest> =
        if manifest.is_empty() { vec![manifest.clone(); fractions.len()] } else { stratified_split(&manifest, &fractions, args.seed)? };
    if oversampling && args.oversample_after_split && !splits[0].is_empty() {
        let before = splits[0].len();
        splits[0] = oversample(&splits[0], args.min_per_class, args.seed.wrapping_add(1))?;
        replicas = splits[0].len() - before;
    }

    let out = &args.output;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut outputs = Vec::new();
    let mut put = |name: &str, text: String| -> anyhow::Result<()> {
        formats::write_text(&out.join(name), &text)?;
        outputs.push(name.to_string());
        Ok(())
    };
    put("catalog.txt", formats::format_catalog(manifest.catalog()))?;
    put("manifest.jsonl", formats::format_manifest(manifest.records()))?;
    let names = split_names(splits.len());
    let mut split_counts = BTreeMap::new();
    for (name, split) in names.iter().zip(&splits) {
        put(&format!("{}.jsonl", name.as_str()), formats::format_manifest(split.records()))?;
        split_counts.insert(name.as_str(), split.len());
    }
    if !splits[0].is_empty() {
        put("class_weights.tsv", formats::format_weights(&class_weights(&splits[0])?))?;
    }
    let summary = PrepDatasetSummary {
        input_records,
        rejected: ingested.rejected.iter().map(|r| Rejected { id: r.id.clone(), reason: r.reason.clone() }).collect(),
        quality_filtered: ingested.quality_filtered,
        excluded: ingested.excluded,
        classes: manifest.catalog().len(),
        curated_records: curated_before,
        modality,
        oversampled: match (oversampling, args.oversample_after_split) {
            (false, _) => "no",
            (true, false) => "before-split",
            (true, true) => "train-only",
        },
        replicas,
        min_per_class: args.min_per_class,
        fractions: fractions.as_slice().to_vec(),
        seed: args.seed,
        splits: split_counts,
        outputs,
    };
    write_summary(&out.join("prep-dataset.json"), &summary)?;
    println!(
        "classes {} records {} replicas {} rejected {}",
        summary.classes,
        summary.curated_records,
        summary.replicas,
        summary.rejected.len()
    );
    Ok(Outcome { failures: summary.rejected.len() })
}

#[derive(Debug, Clone, Args)]
pub struct CropsArgs {
    /// Image manifest, one JSON record per line; media paths are relative to it.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Detector output: one JSON object per line with image (record id), x0, y0, w, h, confidence, class_id.
    #[arg(long)]
    pub detections: PathBuf,
    /// Output directory for labels/, crops.jsonl and optional crops/.
    #[arg(long)]
    pub output: PathBuf,
    /// Species catalog (class id = line number - 1) [default: manifest frequency order].
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Fraction each box side grows by.
    #[arg(long, default_value_t = 0.15)]
    pub pad: f64,
    /// Minimum detector confidence.
    #[arg(long, default_value_t = 0.1)]
    pub conf_min: f64,
    /// Minimum box area as a fraction of the image.
    #[arg(long, default_value_t = 0.005)]
    pub area_min: f64,
    /// Also write the padded crops as PNG.
    #[arg(long)]
    pub write_crops: bool,
    /// Cap on the longer side of written crops.
    #[arg(long)]
    pub max_side: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct DetectionLine {
    image: String,
    #[serde(flatten)]
    detection: Detection,
}

#[derive(Debug, Serialize)]
struct CropsSummary {
    images: usize,
    selected: usize,
    no_bird: Vec<String>,
    failures: Vec<ItemFailure>,
}

fn scaled_size(w: u32, h: u32, max_side: Option<u32>) -> (u32, u32) {
    match max_side {
        Some(m) if w.max(h) > m && m > 0 => {
            let s = f64::from(m) / f64::from(w.max(h));
            (((f64::from(w) * s).round() as u32).max(1), ((f64::from(h) * s).round() as u32).max(1))
        }
        _ => (w, h),
    }
}

pub fn crops(args: &CropsArgs) -> anyhow::Result<Outcome> {
    require_file(&args.manifest, "manifest")?;
    require_file(&args.detections, "detections")?;
    if let Some(c) = &args.catalog {
        require_file(c, "catalog")?;
    }
    if !(0.0..=1.0).contains(&args.pad) {
        bail!("--pad must lie in [0, 1]");
    }
    let records = formats::parse_manifest(&formats::read_text(&args.manifest)?).context("reading manifest")?;
    if let Some(r) = records.iter().find(|r| r.modality != Modality::Image) {
        bail!("record {} is not an image record", r.id);
    }
    let catalog = match &args.catalog {
        Some(c) => formats::parse_catalog(&formats::read_text(c)?)?,
        None => {
            let all = IngestOptions {
                allowed_qualities: Quality::DEFAULT_ALLOWED.iter().copied().chain([Quality::D, Quality::E, Quality::Unknown]).collect(),
                excluded_species: Vec::new(),
            };
            ingest(records.clone(), &all)?.manifest.catalog().to_vec()
        }
    };
    let mut by_image: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for (i, line) in formats::read_text(&args.detections)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: DetectionLine = serde_json::from_str(line).with_context(|| format!("detections line {}", i + 1))?;
        by_image.entry(d.image).or_default().push(d.detection);
    }
    let base = args.manifest.parent().unwrap_or(Path::new(""));
    let rules = CropRules { conf_min: args.conf_min, area_min_fraction: args.area_min, ..CropRules::default() };
    let out = &args.output;
    std::fs::create_dir_all(out.join("labels"))?;
    if args.write_crops {
        std::fs::create_dir_all(out.join("crops"))?;
    }
    let mut specs = String::new();
    let mut summary = CropsSummary { images: records.len(), selected: 0, no_bird: Vec::new(), failures: Vec::new() };
    for r in &records {
        let result = (|| -> anyhow::Result<bool> {
            let Some(class) = catalog.iter().position(|s| *s == r.species) else {
                bail!("species {:?} is not in the catalog", r.species);
            };
            let path = base.join(&r.media_path);
            let (w, h) = image::image_dimensions(&path).with_context(|| format!("reading {}", path.display()))?;
            let dims = ImageDims::new(w, h);
            let dets = by_image.get(&r.id).map(Vec::as_slice).unwrap_or(&[]);
            let Some(bird) = select_bird_crop(dets, dims, &rules) else { return Ok(false) };
            let padded = pad_bbox(&bird.bbox, args.pad, dims);
            let stem = stem(Path::new(&r.media_path));
            let label = emit_yolo_label(&bird.bbox, class, dims);
            formats::write_text(&out.join("labels").join(format!("{stem}.txt")), &formats::format_labels(&[label]))?;
            let spec = CropSpec { source_image: r.media_path.clone(), padded_box: padded, max_side: args.max_side };
            specs.push_str(&serde_json::to_string(&spec)?);
            specs.push('\n');
            if args.write_crops {
                write_crop(&path, &padded, args.max_side, &out.join("crops").join(format!("{stem}.png")))?;
            }
            Ok(true)
        })();
        match result {
            Ok(true) => summary.selected += 1,
            Ok(false) => summary.no_bird.push(r.id.clone()),
            Err(e) => {
                log::error!("{}: {e:#}", r.id);
                summary.failures.push(ItemFailure { item: r.id.clone(), error: format!("{e:#}") });
            }
        }
    }
    formats::write_text(&out.join("crops.jsonl"), &specs)?;
    write_summary(&out.join("crops.json"), &summary)?;
    println!("images {} selected {} no-bird {} failed {}", summary.images, summary.selected, summary.no_bird.len(), summary.failures.len());
    Ok(Outcome { failures: summary.failures.len() })
}

fn write_crop(src: &Path, padded: &BoundingBox, max_side: Option<u32>, dest: &Path) -> anyhow::Result<()> {
    let img = media::read_image(src)?;
    let (w, h) = scaled_size(padded.w as u32, padded.h as u32, max_side);
    media::write_png(dest, &img.crop_resize(padded, w, h))?;
    Ok(())
}
