//! Pluggable HTTP transports: live, recording, and fixture replay.
//!
//! Recording wraps the live transport and appends every response to a
//! JSON-lines fixture file; replay serves those fixtures back with bit-exact
//! URL matching and never touches the network. This is what keeps the whole
//! test and acceptance story offline and deterministic.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::EntrezError;

/// Status and raw body of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl TransportResponse {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            body: body.into(),
        }
    }

    pub fn body_str(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.body)
    }
}

/// Anything that can answer a GET for a fully encoded URL.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> Result<TransportResponse, EntrezError>;
}

/// One recorded exchange, stored as a single JSON line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub url: String,
    pub status: u16,
    pub body: String,
    pub recorded_at: String,
}

/// Live HTTPS transport backed by a blocking `reqwest` client.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .expect("default TLS backend available");
        Self { client }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, EntrezError> {
        let response = self
            .client
            .get(url)
            .send()
            .map_err(|e| EntrezError::Http(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .bytes()
            .map_err(|e| EntrezError::Http(e.to_string()))?
            .to_vec();
        Ok(TransportResponse { status, body })
    }
}

/// Wraps another transport and appends every exchange to a fixture file.
pub struct RecordingTransport {
    inner: Box<dyn Transport>,
    sink: Mutex<File>,
}

impl RecordingTransport {
    pub fn create(inner: Box<dyn Transport>, path: impl AsRef<Path>) -> std::io::Result<Self> {
        let sink = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path.as_ref())?;
        Ok(Self {
            inner,
            sink: Mutex::new(sink),
        })
    }
}

impl Transport for RecordingTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, EntrezError> {
        let response = self.inner.get(url)?;
        let record = FixtureRecord {
            url: url.to_string(),
            status: response.status,
            body: response.body_str().into_owned(),
            recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        };
        let line = serde_json::to_string(&record).expect("fixture record serialises");
        let mut sink = self.sink.lock().unwrap();
        writeln!(sink, "{line}").map_err(|e| EntrezError::Http(e.to_string()))?;
        sink.flush().map_err(|e| EntrezError::Http(e.to_string()))?;
        Ok(response)
    }
}

/// Serves recorded fixtures keyed by the full request URL. A URL with no
/// recorded response is an error naming the URL, never a live fetch.
pub struct ReplayTransport {
    responses: HashMap<String, FixtureRecord>,
}

impl ReplayTransport {
    /// Loads a JSON-lines fixture file. Later lines win on duplicate URLs,
    /// matching how re-recording appends rather than rewrites.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = File::open(path.as_ref())?;
        let mut responses = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("bad fixture line: {e}"),
                )
            })?;
            responses.insert(record.url.clone(), record);
        }
        Ok(Self { responses })
    }

    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Self {
        Self {
            responses: records.into_iter().map(|r| (r.url.clone(), r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Transport for ReplayTransport {
    fn get(&self, url: &str) -> Result<TransportResponse, EntrezError> {
        let record = self
            .responses
            .get(url)
            .ok_or_else(|| EntrezError::ReplayMiss { url: url.to_string() })?;
        Ok(TransportResponse::new(record.status, record.body.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_body(n: u64) -> String {
        format!("{{\"esearchresult\":{{\"count\":\"{n}\"}}}}")
    }

    fn record(url: &str, n: u64) -> FixtureRecord {
        FixtureRecord {
            url: url.to_string(),
            status: 200,
            body: count_body(n),
            recorded_at: "2026-08-09T12:00:00Z".to_string(),
        }
    }

    #[test]
    fn replay_serves_exact_url() {
        let replay = ReplayTransport::from_records([record("http://x/a", 7)]);
        let got = replay.get("http://x/a").unwrap();
        assert_eq!(got.status, 200);
        assert_eq!(got.body_str(), count_body(7));
    }

    #[test]
    fn replay_miss_names_the_url() {
        let replay = ReplayTransport::from_records([record("http://x/a", 7)]);
        let err = replay.get("http://x/other").unwrap_err();
        assert!(err.to_string().contains("http://x/other"), "{err}");
    }

    #[test]
    fn later_duplicate_lines_win() {
        let replay =
            ReplayTransport::from_records([record("http://x/a", 1), record("http://x/a", 2)]);
        assert_eq!(replay.len(), 1);
        assert_eq!(replay.get("http://x/a").unwrap().body_str(), count_body(2));
    }

    #[test]
    fn record_then_replay_round_trips() {
        struct Fixed;
        impl Transport for Fixed {
            fn get(&self, _url: &str) -> Result<TransportResponse, EntrezError> {
                Ok(TransportResponse::new(200, count_body(42).into_bytes()))
            }
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixtures.jsonl");
        let recording = RecordingTransport::create(Box::new(Fixed), &path).unwrap();
        recording.get("http://x/q").unwrap();
        drop(recording);

        let replay = ReplayTransport::load(&path).unwrap();
        assert_eq!(
            replay.get("http://x/q").unwrap().body_str(),
            count_body(42)
        );
    }

    #[test]
    fn replay_load_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixtures.jsonl");
        let line = serde_json::to_string(&record("http://x/a", 3)).unwrap();
        std::fs::write(&path, format!("\n{line}\n\n")).unwrap();
        let replay = ReplayTransport::load(&path).unwrap();
        assert_eq!(replay.len(), 1);
    }
}
