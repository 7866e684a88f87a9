//! Append-only JSON-lines cache of count results.
//!
//! One record per line, fields exactly `{db, term, count, fetched_at}`.
//! The logical key is `(db, term)` and the newest `fetched_at` wins on
//! duplicates. Counts for past years are treated as stable, so records never
//! expire unless a caller asks for a maximum age. Corrupt lines are skipped
//! (and counted) rather than aborting a load.
//!
//! Writes are serialised through the handle; concurrent readers are safe.
//! There is no cross-process locking.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

/// One cached count result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub db: String,
    pub term: String,
    pub count: u64,
    pub fetched_at: String,
}

impl CacheRecord {
    pub fn new(
        db: impl Into<String>,
        term: impl Into<String>,
        count: u64,
        fetched_at: impl Into<String>,
    ) -> Self {
        Self {
            db: db.into(),
            term: term.into(),
            count,
            fetched_at: fetched_at.into(),
        }
    }

    /// A record stamped with the current UTC time.
    pub fn now(db: impl Into<String>, term: impl Into<String>, count: u64) -> Self {
        Self::new(
            db,
            term,
            count,
            Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        )
    }

    fn timestamp(&self) -> Option<DateTime<Utc>> {
        DateTime::parse_from_rfc3339(&self.fetched_at)
            .ok()
            .map(|t| t.with_timezone(&Utc))
    }
}

struct Inner {
    latest: HashMap<(String, String), CacheRecord>,
    sink: Option<File>,
    corrupt_lines: usize,
}

/// Handle to a loaded cache. See the module docs for the file format.
pub struct CountCache {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl CountCache {
    /// Loads (or starts) a cache file, skipping corrupt lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut latest: HashMap<(String, String), CacheRecord> = HashMap::new();
        let mut corrupt_lines = 0;
        if path.exists() {
            let file = File::open(&path)?;
            for line in BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(record) if record.timestamp().is_some() => {
                        insert_newest(&mut latest, record);
                    }
                    _ => corrupt_lines += 1,
                }
            }
        }
        let sink = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            inner: Mutex::new(Inner {
                latest,
                sink: Some(sink),
                corrupt_lines,
            }),
        })
    }

    /// A cache with no backing file; useful for tests and one-shot runs.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            inner: Mutex::new(Inner {
                latest: HashMap::new(),
                sink: None,
                corrupt_lines: 0,
            }),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Lines that failed to parse during load.
    pub fn corrupt_line_count(&self) -> usize {
        self.inner.lock().unwrap().corrupt_lines
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Most recent count for `(db, term)`, if present and — when `max_age`
    /// is given — fetched within that duration of now.
    pub fn get(&self, db: &str, term: &str, max_age: Option<Duration>) -> Option<u64> {
        let inner = self.inner.lock().unwrap();
        let record = inner.latest.get(&(db.to_string(), term.to_string()))?;
        if let Some(max_age) = max_age {
            let fetched = record.timestamp()?;
            let age = Utc::now().signed_duration_since(fetched);
            if age.to_std().map_or(true, |a| a > max_age) {
                return None;
            }
        }
        Some(record.count)
    }

    /// Appends a record. The line is written through to the file
    /// immediately; [`flush`](Self::flush) makes it durable.
    pub fn put(&self, record: CacheRecord) -> Result<(), CacheError> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(sink) = inner.sink.as_mut() {
            let line = serde_json::to_string(&record).expect("cache record serialises");
            writeln!(sink, "{line}")?;
        }
        insert_newest(&mut inner.latest, record);
        Ok(())
    }

    /// Ensures all appended records are durably on disk.
    pub fn flush(&self) -> Result<(), CacheError> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(sink) = inner.sink.as_mut() {
            sink.flush()?;
            sink.sync_all()?;
        }
        Ok(())
    }
}

fn insert_newest(latest: &mut HashMap<(String, String), CacheRecord>, record: CacheRecord) {
    let key = (record.db.clone(), record.term.clone());
    match latest.get(&key) {
        Some(existing) if existing.timestamp() > record.timestamp() => {}
        _ => {
            latest.insert(key, record);
        }
    }
}
