//! Append-only detection log: one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use zwitscher_core::detection::validate_sighting;
use zwitscher_core::DetectionRecord;

#[derive(Debug, thiserror::Error)]
pub enum HistoryError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: line {line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
}

/// A discarded final line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    /// 1-based line number.
    pub line: usize,
    /// Byte offset where the valid prefix ends.
    pub valid_len: u64,
    pub reason: String,
}

/// Parsed log contents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub records: Vec<DetectionRecord>,
    pub truncated: Option<Truncation>,
}

impl History {
    /// Sequence number the next append gets.
    pub fn next_seq(&self) -> u64 {
        self.records.last().map_or(1, |r| r.seq + 1)
    }
}

fn parse_line(line: &str, prev: u64) -> Result<DetectionRecord, String> {
    let rec: DetectionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    validate_sighting(&rec.sighting()).map_err(|e| e.to_string())?;
    if rec.seq <= prev {
        return Err(format!("seq {} does not follow {prev}", rec.seq));
    }
    Ok(rec)
}

/// Parses log bytes. A damaged final line (bad JSON, bad record, or no
/// trailing newline and unparseable) is dropped and reported; damage
/// anywhere else is an error naming the line.
pub fn parse_history(bytes: &[u8], path: &Path) -> Result<History, HistoryError> {
    let mut history = History::default();
    let mut offset = 0u64;
    let mut prev = 0;
    let mut lines = bytes.split_inclusive(|&b| b == b'\n').enumerate().peekable();
    while let Some((i, raw)) = lines.next() {
        let is_last = lines.peek().is_none();
        let parsed = std::str::from_utf8(raw).map_err(|e| e.to_string()).and_then(|text| {
            let text = text.trim();
            if text.is_empty() {
                Ok(None)
            } else {
                parse_line(text, prev).map(Some)
            }
        });
        match parsed {
            Ok(Some(rec)) => {
                prev = rec.seq;
                history.records.push(rec);
            }
            Ok(None) => {}
            Err(reason) if is_last => {
                history.truncated = Some(Truncation { line: i + 1, valid_len: offset, reason });
                break;
            }
            Err(reason) => {
                return Err(HistoryError::Corrupt { path: path.display().to_string(), line: i + 1, reason });
            }
        }
        offset += raw.len() as u64;
    }
    Ok(history)
}

/// Reads the log at `path`; a missing file is an empty history.
pub fn load_history(path: &Path) -> Result<History, HistoryError> {
    match std::fs::read(path) {
        Ok(bytes) => {
            let h = parse_history(&bytes, path)?;
            if let Some(t) = &h.truncated {
                log::warn!("{}: dropping damaged final line {} ({})", path.display(), t.line, t.reason);
            }
            Ok(h)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(History::default()),
        Err(source) => Err(HistoryError::Io { path: path.display().to_string(), source }),
    }
}

/// Writer half of the log.
#[derive(Debug)]
pub struct DetectionLog {
    file: File,
    path: PathBuf,
    fsync: bool,
}

impl DetectionLog {
    /// Opens `path` for appending, loading what is already there.
    ///
    /// A damaged final line is cut off the file so later appends start on
    /// a clean line.
    pub fn open(path: &Path, fsync: bool) -> Result<(Self, History), HistoryError> {
        let io = |source| HistoryError::Io { path: path.display().to_string(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let history = load_history(path)?;
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io)?;
        if let Some(t) = &history.truncated {
            file.set_len(t.valid_len).map_err(io)?;
        }
        let len = file.seek(SeekFrom::End(0)).map_err(io)?;
        if len > 0 {
            let mut last = [0u8];
            file.seek(SeekFrom::Start(len - 1)).map_err(io)?;
            std::io::Read::read_exact(&mut file, &mut last).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(io)?;
            }
        }
        if fsync {
            file.sync_all().map_err(io)?;
        }
        Ok((Self { file, path: path.to_path_buf(), fsync }, history))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one record as a single line, synced when configured.
    pub fn append(&mut self, rec: &DetectionRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(rec).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if self.fsync {
            self.file.sync_data()?;
        }
        Ok(())
    }

    /// Flushes file contents to disk.
    pub fn sync(&mut self) -> std::io::Result<()> {
        self.file.sync_all()
    }
}
