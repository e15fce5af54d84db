use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use zwitscher_core::metrics::{balanced_accuracy, class_mean_average_precision, coco_thresholds, detection_map, top_k_accuracy};

use super::{beside, require_file, write_summary, Outcome};
use crate::formats;

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["classification", "detection"])))]
pub struct EvalArgs {
    /// Lines of `true_class score_0 score_1 ...`.
    #[arg(long)]
    pub classification: Option<PathBuf>,
    /// Lines of `image class x0 y0 w h [confidence]`.
    #[arg(long)]
    pub detection: Option<PathBuf>,
    /// Top-k cut-offs reported for classification.
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub k: Vec<usize>,
    /// Summary path [default: <input>.eval.json].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct TopK {
    k: usize,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
struct ClassificationReport {
    samples: usize,
    top_k: Vec<TopK>,
    balanced_accuracy: f64,
    balanced_accuracy_excluded_classes: Vec<usize>,
    cmap: f64,
    cmap_excluded_classes: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct ThresholdRow {
    iou: f64,
    map: f64,
}

#[derive(Debug, Serialize)]
struct DetectionReport {
    images: usize,
    map_50: f64,
    map_75: f64,
    map_50_95: f64,
    per_threshold: Vec<ThresholdRow>,
    excluded_classes: Vec<u32>,
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<Outcome> {
    if let Some(path) = &args.classification {
        require_file(path, "classification input")?;
        let samples = formats::parse_classification_eval(&formats::read_text(path)?)?;
        let n_classes = samples.iter().map(|s| s.scores.len()).max().unwrap_or(0);
        let mut top_k = Vec::new();
        for &k in &args.k {
            if k <= n_classes {
                top_k.push(TopK { k, accuracy: top_k_accuracy(&samples, k)? });
            }
        }
        let ba = balanced_accuracy(&samples)?;
        let cmap = class_mean_average_precision(&samples)?;
        let report = ClassificationReport {
            samples: samples.len(),
            top_k,
            balanced_accuracy: ba.value,
            balanced_accuracy_excluded_classes: ba.excluded,
            cmap: cmap.value,
            cmap_excluded_classes: cmap.excluded,
        };
        println!("samples {}", report.samples);
        for t in &report.top_k {
            println!("top{} {:.6}", t.k, t.accuracy);
        }
        println!("balanced_accuracy {:.6}", report.balanced_accuracy);
        println!("cmap {:.6}", report.cmap);
        write_summary(&args.summary.clone().unwrap_or_else(|| beside(path, ".eval.json")), &report)?;
    }
    if let Some(path) = &args.detection {
        require_file(path, "detection input")?;
        let images = formats::parse_detection_eval(&formats::read_text(path)?)?;
        let pairs: Vec<_> = images.into_iter().map(|(_, p)| p).collect();
        let thresholds = coco_thresholds();
        let m = detection_map(&pairs, &thresholds).context("computing mAP")?;
        let at = |t: f64| m.per_threshold.iter().find(|r| (r.iou_threshold - t).abs() < 1e-9).map_or(0.0, |r| r.map);
        let report = DetectionReport {
            images: pairs.len(),
            map_50: at(0.5),
            map_75: at(0.75),
            map_50_95: m.mean,
            per_threshold: m.per_threshold.iter().map(|r| ThresholdRow { iou: r.iou_threshold, map: r.map }).collect(),
            excluded_classes: m.excluded_classes.clone(),
        };
        println!("images {}", report.images);
        println!("map@0.5 {:.6}", report.map_50);
        println!("map@0.75 {:.6}", report.map_75);
        println!("map@0.5:0.95 {:.6}", report.map_50_95);
        let summary = match (&args.summary, &args.classification) {
            (Some(s), None) => s.clone(),
            _ => beside(path, ".eval.json"),
        };
        write_summary(&summary, &report)?;
    }
    Ok(Outcome::default())
}
