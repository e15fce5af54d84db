//! Host side of the zwitscher bird monitor.
//!
//! File formats, the detection log and shared store, the HTTP API, backend
//! plugins and the command-line front end. The signal processing, dataset
//! rules, metrics and inference engine live in `zwitscher-core`.

pub mod backends;
pub mod cli;
pub mod config;
pub mod formats;
pub mod history;
pub mod media;
pub mod server;
pub mod store;
pub mod wav;
pub mod zwsp;

pub use zwitscher_core as core;

use zwitscher_core::engine::Clock;

/// Wall clock in UTC milliseconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        let d = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).unwrap_or_default();
        i64::try_from(d.as_millis()).unwrap_or(i64::MAX)
    }
}
