//! Measure relative academic interest in keywords by counting yearly PubMed
//! publications and normalising them against one or more reference keywords.
//!
//! Raw publication counts rise for almost any search term simply because the
//! scientific literature keeps growing. Dividing a keyword's yearly count by
//! the count for a common, innocuous reference keyword (classically "banana",
//! or a field-wide term such as "brain" or "cancer") turns the curve into a
//! relative-interest ratio that is comparable across decades.
//!
//! The crate is organised around five pieces:
//!
//! * [`trend`] — pure normalisation math: series alignment, single-reference
//!   and reference-set ratios, reference-stability scoring, and trailing-dip
//!   detection.
//! * [`entrez`] — an NCBI E-utilities `esearch` count client with a pluggable
//!   transport (live HTTP, recording, or fixture replay), client-side rate
//!   limiting and retry with exponential backoff.
//! * [`cache`] — an append-only JSON-lines cache of count results.
//! * [`report`] — deterministic CSV tables and dependency-free SVG line
//!   charts.
//! * [`cli`] — the `pubtrend` command-line front end tying it all together.
//!
//! ```
//! use pubtrend::trend::{normalize_by_reference, CountSeries};
//! use pubtrend::entrez::{KeywordSpec, SearchField};
//!
//! let keyword = KeywordSpec::new("neuroimaging", SearchField::Text).unwrap();
//! let reference = KeywordSpec::new("banana", SearchField::Text).unwrap();
//!
//! let counts = CountSeries::new(keyword, [(2018, 30), (2019, 60)]);
//! let baseline = CountSeries::new(reference, [(2018, 15), (2019, 20)]);
//!
//! let ratios = normalize_by_reference(&counts, &baseline).unwrap();
//! assert_eq!(ratios.get(2018), Some(Some(2.0)));
//! assert_eq!(ratios.get(2019), Some(Some(3.0)));
//! ```

pub mod cache;
pub mod cli;
pub mod entrez;
pub mod report;
pub mod trend;

pub use cache::{CacheRecord, CountCache};
pub use entrez::{EntrezQuery, KeywordSpec, SearchField};
pub use trend::{CountSeries, RatioSeries};
