//! Line-oriented text formats: manifests, catalogs, weights, labels and
//! evaluation inputs.

use std::fmt::Write as _;
use std::path::Path;

use zwitscher_core::dataset::{ClassWeights, SampleRecord, YoloLabel};
use zwitscher_core::metrics::{DetectionEvalPair, EvalSample, GroundTruthBox, PredictedBox};
use zwitscher_core::BoundingBox;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
}

fn line_err(line: usize, reason: impl ToString) -> FormatError {
    FormatError::Line { line, reason: reason.to_string() }
}

/// Reads a UTF-8 text file.
pub fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<(), FormatError> {
    let io = |source| FormatError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// One JSON object per line.
pub fn parse_manifest(text: &str) -> Result<Vec<SampleRecord>, FormatError> {
    content_lines(text).map(|(n, l)| serde_json::from_str(l).map_err(|e| line_err(n, e))).collect()
}

pub fn format_manifest(records: &[SampleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// One scientific name per line; line order is class id order.
pub fn parse_catalog(text: &str) -> Result<Vec<String>, FormatError> {
    let mut names: Vec<String> = Vec::new();
    for (n, l) in content_lines(text) {
        if names.iter().any(|s| s == l) {
            return Err(line_err(n, format!("species {l:?} listed twice")));
        }
        names.push(l.to_string());
    }
    Ok(names)
}

pub fn format_catalog(names: &[String]) -> String {
    names.iter().map(|s| format!("{s}\n")).collect()
}

/// Species names to drop, one per line.
pub fn parse_name_list(text: &str) -> Vec<String> {
    content_lines(text).map(|(_, l)| l.to_string()).collect()
}

/// `species<TAB>weight` lines.
pub fn format_weights(w: &ClassWeights) -> String {
    let mut out = String::new();
    for (s, v) in w.species.iter().zip(&w.weights) {
        writeln!(out, "{s}\t{v}").expect("string write");
    }
    out
}

pub fn parse_weights(text: &str) -> Result<ClassWeights, FormatError> {
    let mut w = ClassWeights { species: Vec::new(), weights: Vec::new() };
    for (n, l) in content_lines(text) {
        let (s, v) = l.rsplit_once('\t').ok_or_else(|| line_err(n, "expected species<TAB>weight"))?;
        w.species.push(s.to_string());
        w.weights.push(v.parse().map_err(|e| line_err(n, e))?);
    }
    Ok(w)
}

/// One `class cx cy bw bh` line per label.
pub fn format_labels(labels: &[YoloLabel]) -> String {
    labels.iter().map(|l| format!("{l}\n")).collect()
}

pub fn parse_labels(text: &str) -> Result<Vec<YoloLabel>, FormatError> {
    content_lines(text)
        .map(|(n, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 5 {
                return Err(line_err(n, format!("expected 5 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| line_err(n, e));
            Ok(YoloLabel {
                class_index: f[0].parse().map_err(|e| line_err(n, e))?,
                cx: num(f[1])?,
                cy: num(f[2])?,
                bw: num(f[3])?,
                bh: num(f[4])?,
            })
        })
        .collect()
}

/// `true_class score_0 score_1 ...` lines.
pub fn parse_classification_eval(text: &str) -> Result<Vec<EvalSample>, FormatError> {
    content_lines(text)
        .map(|(n, l)| {
            let mut it = l.split_whitespace();
            let truth: usize = it.next().unwrap_or_default().parse().map_err(|e| line_err(n, format!("class id: {e}")))?;
            let scores = it.map(|s| s.parse::<f64>().map_err(|e| line_err(n, e))).collect::<Result<Vec<_>, _>>()?;
            if scores.is_empty() {
                return Err(line_err(n, "no scores"));
            }
            Ok(EvalSample::new(scores, truth))
        })
        .collect()
}

/// `image class x0 y0 w h [confidence]` lines; a confidence marks a
/// prediction, its absence a ground-truth box. Images keep first-seen order.
pub fn parse_detection_eval(text: &str) -> Result<Vec<(String, DetectionEvalPair)>, FormatError> {
    let mut images: Vec<(String, DetectionEvalPair)> = Vec::new();
    for (n, l) in content_lines(text) {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 6 && f.len() != 7 {
            return Err(line_err(n, format!("expected 6 or 7 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| line_err(n, e));
        let class: u32 = f[1].parse().map_err(|e| line_err(n, e))?;
        let bbox = BoundingBox::new(num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?);
        let idx = match images.iter().position(|(id, _)| id == f[0]) {
            Some(i) => i,
            None => {
                images.push((f[0].to_string(), DetectionEvalPair { predictions: Vec::new(), ground_truth: Vec::new() }));
                images.len() - 1
            }
        };
        let pair = &mut images[idx].1;
        match f.get(6) {
            Some(c) => pair.predictions.push(PredictedBox { bbox, class, confidence: num(c)? }),
            None => pair.ground_truth.push(GroundTruthBox { bbox, class }),
        }
    }
    Ok(images)
}
