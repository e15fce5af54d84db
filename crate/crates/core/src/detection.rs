//! Detection records and the bounded buffer they are collected in.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Input modality of a detection or dataset record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Modality {
    /// Microphone / recording.
    Audio,
    /// Camera / photo.
    Image,
}

impl Modality {
    /// Lowercase wire name.
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Image => "image",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "audio" => Ok(Modality::Audio),
            "image" => Ok(Modality::Image),
            other => Err(alloc::format!("unknown modality {other:?}")),
        }
    }
}

/// A reported sighting before it has been assigned a sequence number.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sighting {
    /// Scientific name.
    pub species: String,
    /// Classifier confidence in `[0, 1]`.
    pub confidence: f64,
    /// UTC milliseconds.
    pub timestamp_ms: i64,
    /// Source pipeline.
    pub modality: Modality,
    /// Optional pointer to the media that produced it.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub media_ref: Option<String>,
}

/// A sighting stored in the detection buffer.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionRecord {
    /// Strictly increasing insertion number starting at 1.
    pub seq: u64,
    /// Scientific name.
    pub species: String,
    /// Classifier confidence in `[0, 1]`.
    pub confidence: f64,
    /// UTC milliseconds.
    pub timestamp_ms: i64,
    /// Source pipeline.
    pub modality: Modality,
    /// Optional pointer to the media that produced it.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub media_ref: Option<String>,
}

impl DetectionRecord {
    /// Attaches `seq` to a sighting.
    pub fn new(seq: u64, s: Sighting) -> Self {
        Self {
            seq,
            species: s.species,
            confidence: s.confidence,
            timestamp_ms: s.timestamp_ms,
            modality: s.modality,
            media_ref: s.media_ref,
        }
    }

    /// The record without its sequence number.
    pub fn sighting(&self) -> Sighting {
        Sighting {
            species: self.species.clone(),
            confidence: self.confidence,
            timestamp_ms: self.timestamp_ms,
            modality: self.modality,
            media_ref: self.media_ref.clone(),
        }
    }
}

/// Rejected sighting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    /// Confidence outside `[0, 1]` or NaN.
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    /// Empty species name.
    #[error("empty species name")]
    EmptySpecies,
    /// History records out of order.
    #[error("sequence {seq} does not follow {prev}")]
    OutOfOrder {
        /// Offending sequence number.
        seq: u64,
        /// Previous sequence number.
        prev: u64,
    },
}

/// Checks the invariants every stored record satisfies.
pub fn validate_sighting(s: &Sighting) -> Result<(), RecordError> {
    if !(0.0..=1.0).contains(&s.confidence) {
        return Err(RecordError::Confidence(s.confidence));
    }
    if s.species.trim().is_empty() {
        return Err(RecordError::EmptySpecies);
    }
    Ok(())
}

/// Per-modality counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModalityCounts {
    /// Audio records.
    pub audio: u64,
    /// Image records.
    pub image: u64,
}

impl ModalityCounts {
    fn bump(&mut self, m: Modality) {
        match m {
            Modality::Audio => self.audio += 1,
            Modality::Image => self.image += 1,
        }
    }
}

/// Fixed-capacity ring of the most recent detections.
///
/// Not synchronized; the service wraps it in a lock.
#[derive(Debug, Clone)]
pub struct DetectionBuffer {
    records: VecDeque<DetectionRecord>,
    capacity: usize,
    next_seq: u64,
    evicted_through: u64,
    counts: ModalityCounts,
    last_timestamp_ms: Option<i64>,
}

/// Default number of records kept in memory.
pub const DEFAULT_CAPACITY: usize = 1000;

impl DetectionBuffer {
    /// Empty buffer; `capacity` is raised to at least 1.
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            records: VecDeque::with_capacity(capacity),
            capacity,
            next_seq: 1,
            evicted_through: 0,
            counts: ModalityCounts::default(),
            last_timestamp_ms: None,
        }
    }

    /// Rebuilds a buffer from persisted history (ascending seqs).
    ///
    /// Counters cover the whole history; only the newest `capacity` records
    /// stay resident. Sequencing resumes after the largest seq found.
    pub fn restore(capacity: usize, history: Vec<DetectionRecord>) -> Result<Self, RecordError> {
        let mut buf = Self::new(capacity);
        let mut prev = 0;
        for rec in history {
            if rec.seq <= prev {
                return Err(RecordError::OutOfOrder { seq: rec.seq, prev });
            }
            prev = rec.seq;
            buf.next_seq = rec.seq + 1;
            buf.push(rec);
        }
        Ok(buf)
    }

    fn push(&mut self, rec: DetectionRecord) {
        if self.records.len() == self.capacity {
            if let Some(old) = self.records.pop_front() {
                self.evicted_through = old.seq;
            }
        }
        self.counts.bump(rec.modality);
        self.last_timestamp_ms = Some(self.last_timestamp_ms.map_or(rec.timestamp_ms, |t| t.max(rec.timestamp_ms)));
        self.records.push_back(rec);
    }

    /// Sequence number the next append will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    /// Builds the record the next append would store, without storing it.
    pub fn prepare(&self, sighting: Sighting) -> Result<DetectionRecord, RecordError> {
        validate_sighting(&sighting)?;
        Ok(DetectionRecord::new(self.next_seq, sighting))
    }

    /// Stores a record produced by [`prepare`](Self::prepare).
    pub fn commit(&mut self, rec: DetectionRecord) -> u64 {
        debug_assert_eq!(rec.seq, self.next_seq);
        let seq = rec.seq;
        self.next_seq = seq + 1;
        self.push(rec);
        seq
    }

    /// Assigns the next seq, evicting the oldest record when full.
    pub fn append(&mut self, sighting: Sighting) -> Result<u64, RecordError> {
        let rec = self.prepare(sighting)?;
        Ok(self.commit(rec))
    }

    /// Records with `seq > after_seq`, ascending, at most `limit`.
    pub fn query_since(&self, after_seq: u64, limit: usize) -> Vec<DetectionRecord> {
        let start = self.records.partition_point(|r| r.seq <= after_seq);
        self.records.iter().skip(start).take(limit).cloned().collect()
    }

    /// Largest assigned seq, 0 when nothing was ever appended.
    pub fn latest_seq(&self) -> u64 {
        self.next_seq - 1
    }

    /// Largest evicted seq: every record with `seq <= evicted_through` is
    /// gone from memory. 0 when nothing was evicted.
    pub fn evicted_through(&self) -> u64 {
        self.evicted_through
    }

    /// Resident records.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when no record is resident.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Maximum resident records.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Records seen per modality.
    pub fn counts(&self) -> ModalityCounts {
        self.counts
    }

    /// Newest timestamp seen.
    pub fn last_timestamp_ms(&self) -> Option<i64> {
        self.last_timestamp_ms
    }
}
