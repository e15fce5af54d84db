//! Flat `key = value` configuration file.
//!
//! Every key is optional; command-line flags override file values, which
//! override the defaults.
//!
//! ```toml
//! listen = "0.0.0.0:8080"
//! capacity = 1000
//! log_path = "/var/lib/zwitscher/detections.jsonl"
//! static_dir = "/usr/share/zwitscher/dashboard"
//! fsync = true
//! backends = "backends.toml"
//! gate_threshold = 0.8
//! species_report_threshold = 0.15
//! image_report_threshold = 0.2
//! segment_seconds = 3.0
//! segment_hop_seconds = 3.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use zwitscher_core::engine::PipelineConfig;

use crate::formats;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub listen: Option<String>,
    pub capacity: Option<usize>,
    pub log_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub fsync: Option<bool>,
    pub backends: Option<PathBuf>,
    pub gate_threshold: Option<f64>,
    pub species_report_threshold: Option<f64>,
    pub image_report_threshold: Option<f64>,
    pub segment_seconds: Option<f64>,
    pub segment_hop_seconds: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Read(#[from] formats::FormatError),
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
}

impl FileConfig {
    /// Parses `text`; nested tables are rejected by the flat schema.
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Loads `path`, resolving relative paths in it against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = formats::read_text(path)?;
        let mut c = Self::parse(&text).map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut c.log_path, &mut c.static_dir, &mut c.backends].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// Values of `over` win where set.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            listen: over.listen.or(self.listen),
            capacity: over.capacity.or(self.capacity),
            log_path: over.log_path.or(self.log_path),
            static_dir: over.static_dir.or(self.static_dir),
            fsync: over.fsync.or(self.fsync),
            backends: over.backends.or(self.backends),
            gate_threshold: over.gate_threshold.or(self.gate_threshold),
            species_report_threshold: over.species_report_threshold.or(self.species_report_threshold),
            image_report_threshold: over.image_report_threshold.or(self.image_report_threshold),
            segment_seconds: over.segment_seconds.or(self.segment_seconds),
            segment_hop_seconds: over.segment_hop_seconds.or(self.segment_hop_seconds),
        }
    }

    /// Pipeline settings on top of the defaults.
    pub fn pipeline(&self) -> PipelineConfig {
        let d = PipelineConfig::default();
        PipelineConfig {
            gate_threshold: self.gate_threshold.unwrap_or(d.gate_threshold),
            species_report_threshold: self.species_report_threshold.unwrap_or(d.species_report_threshold),
            image_report_threshold: self.image_report_threshold.unwrap_or(d.image_report_threshold),
            segment_seconds: self.segment_seconds.unwrap_or(d.segment_seconds),
            segment_hop_seconds: self.segment_hop_seconds.unwrap_or(d.segment_hop_seconds),
            ..d
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = FileConfig::parse("capacity = 50\ngate_threshold = 0.5\nlisten = \"127.0.0.1:1\"\n").unwrap();
        let flags = FileConfig { gate_threshold: Some(0.9), ..FileConfig::default() };
        let c = file.overlay(flags);
        assert_eq!(c.capacity, Some(50));
        assert_eq!(c.pipeline().gate_threshold, 0.9);
        assert_eq!(c.pipeline().species_report_threshold, 0.15);
        assert_eq!(c.listen.as_deref(), Some("127.0.0.1:1"));
    }

    #[test]
    fn rejects_unknown_and_nested_keys() {
        assert!(FileConfig::parse("capacityy = 3").is_err());
        assert!(FileConfig::parse("[server]\nlisten = \"x\"").is_err());
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("z.toml");
        std::fs::write(&p, "log_path = \"logs/d.jsonl\"\nstatic_dir = \"/abs\"\n").unwrap();
        let c = FileConfig::load(&p).unwrap();
        assert_eq!(c.log_path.unwrap(), d.path().join("logs/d.jsonl"));
        assert_eq!(c.static_dir.unwrap(), PathBuf::from("/abs"));
    }
}
