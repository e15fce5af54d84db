//! Shared detection buffer with write-ahead persistence.
//!
//! Appends are serialized on the log lock: the record is written (and
//! synced) before it enters the ring. Readers only take the ring lock, so
//! a slow disk never blocks an HTTP handler.

use std::path::Path;
use std::sync::{Mutex, RwLock};
use std::time::Instant;

use serde::Serialize;
use zwitscher_core::detection::{ModalityCounts, RecordError};
use zwitscher_core::engine::{BackendIdentity, DetectionSink, DutyCycleStats};
use zwitscher_core::{DetectionBuffer, DetectionRecord, Modality, Sighting};

use crate::history::{DetectionLog, History, HistoryError};

/// Poll interval advertised to dashboard clients.
pub const POLL_INTERVAL_MS: u64 = 2000;

/// A configured backend as reported in the status payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendInfo {
    pub role: String,
    pub modality: Modality,
    #[serde(flatten)]
    pub identity: BackendIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutyCycleReport {
    #[serde(flatten)]
    pub stats: DutyCycleStats,
    pub duty_cycle: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PersistenceStatus {
    pub enabled: bool,
    pub failures: u64,
    pub last_error: Option<String>,
}

/// Snapshot served at `/api/status`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemStatus {
    pub uptime_seconds: u64,
    pub counts: ModalityCounts,
    pub buffer_len: usize,
    pub buffer_capacity: usize,
    pub latest_seq: u64,
    pub last_detection_timestamp: Option<i64>,
    pub backends: Vec<BackendInfo>,
    pub duty_cycle: Option<DutyCycleReport>,
    pub persistence: PersistenceStatus,
    pub poll_interval_ms: u64,
}

/// Page served at `/api/detections`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionPage {
    pub records: Vec<DetectionRecord>,
    pub latest_seq: u64,
    /// Highest seq dropped from the ring (0 when nothing was dropped).
    pub evicted_before: u64,
}

#[derive(Debug)]
struct State {
    buffer: DetectionBuffer,
    persistence: PersistenceStatus,
    duty: Option<DutyCycleStats>,
    backends: Vec<BackendInfo>,
}

#[derive(Debug)]
pub struct SharedStore {
    state: RwLock<State>,
    log: Mutex<Option<DetectionLog>>,
    started: Instant,
}

impl SharedStore {
    /// In-memory store without persistence.
    pub fn in_memory(capacity: usize) -> Self {
        Self::build(DetectionBuffer::new(capacity), None)
    }

    /// Store backed by the log at `path`, restoring its history.
    pub fn open(capacity: usize, path: &Path, fsync: bool) -> Result<(Self, History), HistoryError> {
        let (log, history) = DetectionLog::open(path, fsync)?;
        let buffer = DetectionBuffer::restore(capacity, history.records.clone()).map_err(|e| HistoryError::Corrupt {
            path: path.display().to_string(),
            line: 0,
            reason: e.to_string(),
        })?;
        Ok((Self::build(buffer, Some(log)), history))
    }

    fn build(buffer: DetectionBuffer, log: Option<DetectionLog>) -> Self {
        let persistence = PersistenceStatus { enabled: log.is_some(), ..PersistenceStatus::default() };
        Self {
            state: RwLock::new(State { buffer, persistence, duty: None, backends: Vec::new() }),
            log: Mutex::new(log),
            started: Instant::now(),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    /// Persists then buffers `sighting`, returning its seq.
    ///
    /// A failed log write is recorded in the status; the record is still
    /// buffered.
    pub fn append(&self, sighting: Sighting) -> Result<u64, RecordError> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        let rec = self.read().buffer.prepare(sighting)?;
        let failure = log.as_mut().and_then(|l| l.append(&rec).err());
        let mut st = self.write();
        if let Some(e) = failure {
            log::error!("detection log write failed: {e}");
            st.persistence.failures += 1;
            st.persistence.last_error = Some(e.to_string());
        }
        Ok(st.buffer.commit(rec))
    }

    /// Records with `seq > after`, ascending, at most `limit`.
    pub fn query_since(&self, after: u64, limit: usize) -> DetectionPage {
        let st = self.read();
        DetectionPage {
            records: st.buffer.query_since(after, limit),
            latest_seq: st.buffer.latest_seq(),
            evicted_before: st.buffer.evicted_through(),
        }
    }

    pub fn status(&self) -> SystemStatus {
        let st = self.read();
        SystemStatus {
            uptime_seconds: self.started.elapsed().as_secs(),
            counts: st.buffer.counts(),
            buffer_len: st.buffer.len(),
            buffer_capacity: st.buffer.capacity(),
            latest_seq: st.buffer.latest_seq(),
            last_detection_timestamp: st.buffer.last_timestamp_ms(),
            backends: st.backends.clone(),
            duty_cycle: st.duty.map(|stats| DutyCycleReport { stats, duty_cycle: stats.duty_cycle() }),
            persistence: st.persistence.clone(),
            poll_interval_ms: POLL_INTERVAL_MS,
        }
    }

    pub fn set_backends(&self, backends: Vec<BackendInfo>) {
        self.write().backends = backends;
    }

    pub fn set_duty_cycle(&self, stats: DutyCycleStats) {
        self.write().duty = Some(stats);
    }

    /// Waits for any in-flight append and syncs the log.
    pub fn flush(&self) -> std::io::Result<()> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        match log.as_mut() {
            Some(l) => l.sync(),
            None => Ok(()),
        }
    }

    /// Runs `f` while holding the append lock, so no record is half written.
    pub fn with_appends_paused<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(l) = log.as_mut() {
            if let Err(e) = l.sync() {
                log::error!("detection log sync failed: {e}");
            }
        }
        f()
    }
}

/// Pipeline sink appending to a [`SharedStore`].
pub struct StoreSink<'a> {
    store: &'a SharedStore,
    pub rejected: u64,
}

impl<'a> StoreSink<'a> {
    pub fn new(store: &'a SharedStore) -> Self {
        Self { store, rejected: 0 }
    }
}

impl DetectionSink for StoreSink<'_> {
    fn deliver(&mut self, sighting: Sighting) {
        match self.store.append(sighting) {
            Ok(seq) => log::info!("detection {seq} stored"),
            Err(e) => {
                self.rejected += 1;
                log::warn!("sighting rejected: {e}");
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: Modality) -> Sighting {
        Sighting { species: "Parus major".into(), confidence: 0.9, timestamp_ms: 5, modality: m, media_ref: None }
    }

    #[test]
    fn fresh_status() {
        let st = SharedStore::in_memory(10).status();
        assert_eq!((st.counts.audio, st.counts.image, st.buffer_len, st.latest_seq), (0, 0, 0, 0));
        assert_eq!(st.poll_interval_ms, 2000);
        assert!(!st.persistence.enabled);
    }

    #[test]
    fn counts_by_modality() {
        let store = SharedStore::in_memory(10);
        for m in [Modality::Audio, Modality::Image, Modality::Audio, Modality::Image, Modality::Audio] {
            store.append(s(m)).unwrap();
        }
        let st = store.status();
        assert_eq!((st.counts.audio, st.counts.image), (3, 2));
    }

    #[test]
    fn eviction_reported() {
        let store = SharedStore::in_memory(3);
        for _ in 0..4 {
            store.append(s(Modality::Audio)).unwrap();
        }
        let page = store.query_since(0, 10);
        assert_eq!(page.records.iter().map(|r| r.seq).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!((page.latest_seq, page.evicted_before), (4, 1));
    }

    #[test]
    fn invalid_sighting_is_refused() {
        let store = SharedStore::in_memory(3);
        let mut bad = s(Modality::Audio);
        bad.confidence = 1.5;
        assert!(store.append(bad).is_err());
        assert_eq!(store.status().latest_seq, 0);
    }
}
