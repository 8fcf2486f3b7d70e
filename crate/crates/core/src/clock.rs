use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};

pub type Timestamp = DateTime<Utc>;

pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Utc::now()
    }
}

/// Deterministic clock for replays: each reading is one second after the
/// previous one.
#[derive(Debug)]
pub struct LogicalClock {
    next: AtomicI64,
}

impl LogicalClock {
    pub fn starting_at(start: Timestamp) -> Self {
        LogicalClock {
            next: AtomicI64::new(start.timestamp()),
        }
    }
}

impl Default for LogicalClock {
    fn default() -> Self {
        LogicalClock::starting_at(Utc.with_ymd_and_hms(2024, 1, 8, 9, 0, 0).unwrap())
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> Timestamp {
        let secs = self.next.fetch_add(1, Ordering::SeqCst);
        Utc.timestamp_opt(secs, 0).unwrap()
    }
}
