use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mkg_core::qa::Session;
use parking_lot::Mutex;

struct Entry {
    session: Arc<Mutex<Session>>,
    last_seen: Instant,
}

/// In-memory sessions evicted after `ttl` without use. Each session has its
/// own lock so requests of one session run one at a time.
pub struct SessionTable {
    ttl: Duration,
    entries: Mutex<HashMap<String, Entry>>,
}

impl SessionTable {
    pub fn new(ttl: Duration) -> Self {
        SessionTable {
            ttl,
            entries: Mutex::new(HashMap::new()),
        }
    }

    /// The session with `id`, created when absent or expired.
    pub fn get_or_create(&self, id: &str) -> Arc<Mutex<Session>> {
        self.get_or_create_at(id, Instant::now())
    }

    pub fn get_or_create_at(&self, id: &str, now: Instant) -> Arc<Mutex<Session>> {
        let mut entries = self.entries.lock();
        self.evict(&mut entries, now);
        let entry = entries.entry(id.to_string()).or_insert_with(|| Entry {
            session: Arc::new(Mutex::new(Session::new(id))),
            last_seen: now,
        });
        entry.last_seen = now;
        entry.session.clone()
    }

    pub fn evict_expired(&self, now: Instant) -> usize {
        self.evict(&mut self.entries.lock(), now)
    }

    fn evict(&self, entries: &mut HashMap<String, Entry>, now: Instant) -> usize {
        let before = entries.len();
        entries.retain(|_, e| now.saturating_duration_since(e.last_seen) < self.ttl);
        before - entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
