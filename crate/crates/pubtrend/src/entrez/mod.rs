//! NCBI E-utilities `esearch` count client.
//!
//! Each query asks one question: how many records in a database mention a
//! term in a given year? Searches go through the `esearch` endpoint with
//! `rettype=count`, one request per (term, year) pair. The pre-encoding term
//! grammar is
//!
//! ```text
//! "<term>"[<field>]+AND+<year>[pdat]
//! ```
//!
//! e.g. `"H1N1"[text]+AND+2018[pdat]`, with the free-text field tag written
//! lowercase and the MeSH field tag written `MESH`.

mod limit;
mod transport;

pub use limit::{
    Clock, FakeClock, RateLimiter, RetryPolicy, SystemClock, REQUESTS_PER_SECOND_ANONYMOUS,
    REQUESTS_PER_SECOND_WITH_KEY,
};
pub use transport::{
    FixtureRecord, HttpTransport, RecordingTransport, ReplayTransport, Transport,
    TransportResponse,
};

use std::fmt;
use std::ops::RangeInclusive;

use serde::Deserialize;
use thiserror::Error;

use crate::cache::{CacheRecord, CountCache};
use crate::trend::CountSeries;

/// Base URL of the esearch endpoint.
pub const ESEARCH_URL: &str = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi";

/// Default target database.
pub const DEFAULT_DATABASE: &str = "pubmed";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntrezError {
    #[error("year {0} outside supported range 1000..=9999")]
    InvalidYear(i32),
    #[error("invalid search term {0:?}: must be non-empty and contain no double quotes")]
    InvalidTerm(String),
    #[error("could not extract a count from the response body")]
    MalformedBody,
    #[error("unexpected HTTP status {0}")]
    NonOkStatus(u16),
    #[error("gave up after {attempts} attempts (last status {last_status})")]
    RetriesExhausted { attempts: u32, last_status: u16 },
    #[error("no recorded response for {url}")]
    ReplayMiss { url: String },
    #[error("transport failure: {0}")]
    Http(String),
    #[error("cache failure: {0}")]
    Cache(String),
    #[error("year {year}: {source}")]
    YearFetch {
        year: i32,
        #[source]
        source: Box<EntrezError>,
    },
}

/// Which index a keyword is searched in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SearchField {
    /// Free-text search; tag rendered as `[text]`.
    Text,
    /// Curated Medical Subject Headings; tag rendered as `[MESH]`.
    Mesh,
}

impl SearchField {
    /// The field tag as it appears in the term string.
    pub fn tag(&self) -> &'static str {
        match self {
            SearchField::Text => "text",
            SearchField::Mesh => "MESH",
        }
    }
}

impl fmt::Display for SearchField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A search term plus the field and database it is counted in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeywordSpec {
    term: String,
    field: SearchField,
    database: String,
}

impl KeywordSpec {
    /// Validates the term: non-empty, no embedded double quotes (the term is
    /// wrapped in quotes when the query is built).
    pub fn new(term: impl Into<String>, field: SearchField) -> Result<Self, EntrezError> {
        let term = term.into();
        if term.is_empty() || term.contains('"') {
            return Err(EntrezError::InvalidTerm(term));
        }
        Ok(Self {
            term,
            field,
            database: DEFAULT_DATABASE.to_string(),
        })
    }

    pub fn with_database(mut self, database: impl Into<String>) -> Self {
        self.database = database.into();
        self
    }

    pub fn term(&self) -> &str {
        &self.term
    }

    pub fn field(&self) -> SearchField {
        self.field
    }

    pub fn database(&self) -> &str {
        &self.database
    }
}

/// Optional identification sent with each request. NCBI asks clients to
/// identify themselves and grants a higher rate cap with an API key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Credentials {
    pub api_key: Option<String>,
    pub tool: Option<String>,
    pub email: Option<String>,
}

impl Credentials {
    pub fn is_empty(&self) -> bool {
        self.api_key.is_none() && self.tool.is_none() && self.email.is_none()
    }

    pub fn has_api_key(&self) -> bool {
        self.api_key.is_some()
    }
}

/// A fully assembled count request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntrezQuery {
    pub database: String,
    pub term_string: String,
    pub count_only: bool,
    pub credentials: Credentials,
}

impl EntrezQuery {
    /// Builds the count query for one keyword in one year.
    pub fn count(spec: &KeywordSpec, year: i32) -> Result<Self, EntrezError> {
        Ok(Self {
            database: spec.database().to_string(),
            term_string: build_term(spec, year)?,
            count_only: true,
            credentials: Credentials::default(),
        })
    }

    pub fn with_credentials(mut self, credentials: Credentials) -> Self {
        self.credentials = credentials;
        self
    }
}

/// Assembles the pre-encoding term string: double-quoted term, field tag,
/// then the publication-date year restriction.
///
/// ```
/// use pubtrend::entrez::{build_term, KeywordSpec, SearchField};
///
/// let spec = KeywordSpec::new("H1N1", SearchField::Text).unwrap();
/// assert_eq!(build_term(&spec, 2018).unwrap(), r#""H1N1"[text]+AND+2018[pdat]"#);
/// ```
pub fn build_term(spec: &KeywordSpec, year: i32) -> Result<String, EntrezError> {
    if !(1000..=9999).contains(&year) {
        return Err(EntrezError::InvalidYear(year));
    }
    if spec.term.is_empty() || spec.term.contains('"') {
        return Err(EntrezError::InvalidTerm(spec.term.clone()));
    }
    Ok(format!(
        "\"{}\"[{}]+AND+{}[pdat]",
        spec.term,
        spec.field.tag(),
        year
    ))
}

fn push_encoded(out: &mut String, raw: &str) {
    for byte in raw.bytes() {
        match byte {
            b' ' => out.push('+'),
            b'+' => out.push('+'),
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(byte as char)
            }
            other => {
                out.push('%');
                out.push_str(&format!("{other:02X}"));
            }
        }
    }
}

/// Renders the full esearch URL for a query.
///
/// The term is URL-encoded with `"` as `%22`, spaces as `+`, brackets as
/// `%5B`/`%5D`; the literal `+AND+` separators stay as `+`. Parameters appear
/// in a fixed order: `db`, `term`, `rettype`, `retmode`, then `tool`, `email`
/// and `api_key` when configured.
pub fn encode_request(query: &EntrezQuery) -> String {
    let mut url = String::from(ESEARCH_URL);
    url.push_str("?db=");
    push_encoded(&mut url, &query.database);
    url.push_str("&term=");
    push_encoded(&mut url, &query.term_string);
    if query.count_only {
        url.push_str("&rettype=count");
    }
    url.push_str("&retmode=json");
    if let Some(tool) = &query.credentials.tool {
        url.push_str("&tool=");
        push_encoded(&mut url, tool);
    }
    if let Some(email) = &query.credentials.email {
        url.push_str("&email=");
        push_encoded(&mut url, email);
    }
    if let Some(api_key) = &query.credentials.api_key {
        url.push_str("&api_key=");
        push_encoded(&mut url, api_key);
    }
    url
}

/// Recovers the pre-encoding term string from an encoded `term` parameter
/// value: the inverse of the encoding in [`encode_request`]. A `+` inside the
/// double-quoted term decodes to a space; the `+` separators around `AND`
/// stay literal.
pub fn decode_term_param(encoded: &str) -> String {
    let mut bytes = Vec::with_capacity(encoded.len());
    let mut chars = encoded.bytes().peekable();
    while let Some(b) = chars.next() {
        if b == b'%' {
            let hi = chars.next();
            let lo = chars.next();
            if let (Some(hi), Some(lo)) = (hi, lo) {
                let hex = [hi, lo];
                if let Ok(s) = std::str::from_utf8(&hex) {
                    if let Ok(v) = u8::from_str_radix(s, 16) {
                        bytes.push(v);
                        continue;
                    }
                }
            }
            bytes.push(b);
        } else {
            bytes.push(b);
        }
    }
    let decoded = String::from_utf8_lossy(&bytes).into_owned();
    // Pluses between the term quotes were spaces; pluses outside are the
    // +AND+ separators.
    let mut quote_spans = decoded.match_indices('"');
    match (quote_spans.next(), quote_spans.next()) {
        (Some((open, _)), Some((close, _))) if open < close => {
            let inner = decoded[open + 1..close].replace('+', " ");
            format!("\"{}\"{}", inner, &decoded[close + 1..])
        }
        _ => decoded,
    }
}

#[derive(Deserialize)]
struct EsearchBody {
    esearchresult: EsearchResult,
}

#[derive(Deserialize)]
struct EsearchResult {
    count: String,
}

/// Extracts the count from a JSON esearch response body.
pub fn parse_count(response: &TransportResponse) -> Result<u64, EntrezError> {
    if response.status != 200 {
        return Err(EntrezError::NonOkStatus(response.status));
    }
    let body: EsearchBody =
        serde_json::from_slice(&response.body).map_err(|_| EntrezError::MalformedBody)?;
    body.esearchresult
        .count
        .parse::<u64>()
        .map_err(|_| EntrezError::MalformedBody)
}

fn is_retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// Sends a count query: acquires a rate-limit slot per attempt, retries 429
/// and 5xx responses with exponentially backed-off full jitter, and parses
/// the count on success. At most five attempts.
pub fn fetch_count(
    query: &EntrezQuery,
    transport: &dyn Transport,
    limiter: &RateLimiter,
) -> Result<u64, EntrezError> {
    let policy = RetryPolicy::default();
    let url = encode_request(query);
    let mut rng = rand::rng();
    let mut last_status = 0;
    for attempt in 1..=policy.max_attempts {
        limiter.acquire();
        let response = transport.get(&url)?;
        if response.status == 200 {
            return parse_count(&response);
        }
        if !is_retryable(response.status) {
            return Err(EntrezError::NonOkStatus(response.status));
        }
        last_status = response.status;
        if attempt < policy.max_attempts {
            limiter.sleep(policy.delay(attempt, &mut rng));
        }
    }
    Err(EntrezError::RetriesExhausted {
        attempts: policy.max_attempts,
        last_status,
    })
}

/// Fetches one keyword's counts across an inclusive year range, consulting
/// the cache before the network and storing fresh results back. Fetch
/// failures are annotated with the year they happened in.
pub fn fetch_year_series(
    spec: &KeywordSpec,
    years: RangeInclusive<i32>,
    transport: &dyn Transport,
    limiter: &RateLimiter,
    cache: &CountCache,
    credentials: &Credentials,
) -> Result<CountSeries, EntrezError> {
    let mut counts = Vec::new();
    for year in years {
        let term = build_term(spec, year)
            .map_err(|e| EntrezError::YearFetch { year, source: Box::new(e) })?;
        if let Some(count) = cache.get(spec.database(), &term, None) {
            counts.push((year, count));
            continue;
        }
        let query = EntrezQuery {
            database: spec.database().to_string(),
            term_string: term.clone(),
            count_only: true,
            credentials: credentials.clone(),
        };
        let count = fetch_count(&query, transport, limiter)
            .map_err(|e| EntrezError::YearFetch { year, source: Box::new(e) })?;
        cache
            .put(CacheRecord::now(spec.database(), &term, count))
            .map_err(|e| EntrezError::Cache(e.to_string()))?;
        counts.push((year, count));
    }
    Ok(CountSeries::new(spec.clone(), counts))
}
