//! Command-line orchestration: parse a study definition, drive
//! fetch → cache → normalize → report, and surface warnings.
//!
//! Exit codes: 0 success, 2 configuration/usage errors, 3 network or fixture
//! errors, 4 I/O errors. Every failure prints exactly one diagnostic line on
//! stderr.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::cache::{CacheError, CountCache};
use crate::entrez::{
    fetch_year_series, Credentials, EntrezError, HttpTransport, KeywordSpec, RateLimiter,
    RecordingTransport, ReplayTransport, SearchField, SystemClock, Transport,
};
use crate::report::{render_svg, write_csv, ChartSpec, LabeledSeries, ReportError};
use crate::trend::{
    align_years, detect_trailing_dip, normalize_by_reference, normalize_by_set, stability_score,
    ComparisonSet, RatioSeries, TrendError,
};

/// Where count responses come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Query the live E-utilities endpoint.
    Live,
    /// Query live and append every response to the fixture file.
    Record,
    /// Serve responses from the fixture file only; never touch the network.
    Replay,
}

/// A fully validated study definition.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub keywords: Vec<KeywordSpec>,
    pub references: Vec<KeywordSpec>,
    pub years: RangeInclusive<i32>,
    pub database: String,
    pub csv_out: Option<PathBuf>,
    pub svg_out: Option<PathBuf>,
    pub credentials: Credentials,
    pub cache_path: PathBuf,
    pub mode: Mode,
    pub fixture_path: Option<PathBuf>,
    pub stability: bool,
    pub log_scale: bool,
}

/// Errors from argument and environment parsing.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// `--help`/`--version` output; print to stdout and exit 0.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Help(_) => 0,
            ConfigError::Usage(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FieldArg {
    Text,
    Mesh,
}

impl From<FieldArg> for SearchField {
    fn from(value: FieldArg) -> Self {
        match value {
            FieldArg::Text => SearchField::Text,
            FieldArg::Mesh => SearchField::Mesh,
        }
    }
}

/// Compare yearly publication interest in keywords against reference
/// keywords, using counts from the NCBI E-utilities API.
#[derive(Debug, Parser)]
#[command(name = "pubtrend", version, disable_help_subcommand = true)]
struct Cli {
    /// Keyword of interest; repeat for several
    #[arg(long = "keyword", value_name = "TERM", required = true)]
    keywords: Vec<String>,

    /// Reference keyword; repeat to normalise by the mean of a set
    #[arg(long = "reference", value_name = "TERM", required = true)]
    references: Vec<String>,

    /// Inclusive year range, as START:END
    #[arg(long, value_name = "START:END")]
    years: String,

    /// Search field applied to every term
    #[arg(long, value_enum, default_value_t = FieldArg::Text)]
    field: FieldArg,

    /// Target Entrez database
    #[arg(long = "db", value_name = "NAME", default_value = "pubmed")]
    database: String,

    /// Write the normalised ratio table to this CSV file
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Write the trend chart to this SVG file
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,

    /// Transport mode
    #[arg(long, value_enum, default_value_t = Mode::Live)]
    mode: Mode,

    /// Fixture file used by record and replay modes
    #[arg(long, value_name = "PATH")]
    fixtures: Option<PathBuf>,

    /// Count cache file
    #[arg(long, value_name = "PATH", default_value = "./pubtrend-cache.jsonl")]
    cache: PathBuf,

    /// Print a stability score per keyword (for choosing a reference)
    #[arg(long)]
    stability: bool,

    /// Use a log-scale y axis in the SVG chart
    #[arg(long = "log-scale")]
    log_scale: bool,
}

fn parse_years(text: &str) -> Result<RangeInclusive<i32>, ConfigError> {
    let (start, end) = text
        .split_once(':')
        .ok_or_else(|| ConfigError::Usage(format!("invalid --years {text:?}: expected START:END")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<i32>()
            .map_err(|_| ConfigError::Usage(format!("invalid --years {text:?}: {s:?} is not a year")))
    };
    let (start, end) = (parse(start)?, parse(end)?);
    if start > end {
        return Err(ConfigError::Usage(format!(
            "invalid --years {text:?}: start {start} is after end {end}"
        )));
    }
    Ok(start..=end)
}

/// Merges command-line flags over environment credentials
/// (`PUBTREND_API_KEY`, `PUBTREND_EMAIL`, `PUBTREND_TOOL`) over built-in
/// defaults. `args` includes the program name, as in `std::env::args()`.
pub fn load_config<I>(args: I, env: &dyn Fn(&str) -> Option<String>) -> Result<StudyConfig, ConfigError>
where
    I: IntoIterator,
    I::Item: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help(e.to_string()),
        _ => {
            // One diagnostic line; clap's rendering spans several.
            let first = e
                .render()
                .to_string()
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .to_string();
            ConfigError::Usage(format!("{first} (see --help)"))
        }
    })?;

    let years = parse_years(&cli.years)?;
    let field: SearchField = cli.field.into();
    let mk_spec = |term: &String| {
        KeywordSpec::new(term.clone(), field)
            .map(|s| s.with_database(cli.database.clone()))
            .map_err(|e| ConfigError::Usage(e.to_string()))
    };
    let keywords = cli.keywords.iter().map(mk_spec).collect::<Result<Vec<_>, _>>()?;
    let references = cli.references.iter().map(mk_spec).collect::<Result<Vec<_>, _>>()?;

    if matches!(cli.mode, Mode::Record | Mode::Replay) && cli.fixtures.is_none() {
        return Err(ConfigError::Usage(
            "record and replay modes require --fixtures".to_string(),
        ));
    }

    let credentials = Credentials {
        api_key: env("PUBTREND_API_KEY"),
        tool: env("PUBTREND_TOOL"),
        email: env("PUBTREND_EMAIL"),
    };

    Ok(StudyConfig {
        keywords,
        references,
        years,
        database: cli.database,
        csv_out: cli.csv,
        svg_out: cli.svg,
        credentials,
        cache_path: cli.cache,
        mode: cli.mode,
        fixture_path: cli.fixtures,
        stability: cli.stability,
        log_scale: cli.log_scale,
    })
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Fetch(#[from] EntrezError),
    #[error("fixture failure: {0}")]
    Fixture(String),
    #[error("{0}")]
    Trend(#[from] TrendError),
    #[error("{0}")]
    Cache(#[from] CacheError),
    #[error("{0}")]
    Report(#[from] ReportError),
    #[error("I/O failure: {0}")]
    Io(#[from] std::io::Error),
}

impl StudyError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) | StudyError::Trend(_) => 2,
            StudyError::Fetch(_) | StudyError::Fixture(_) => 3,
            StudyError::Cache(_) | StudyError::Report(_) | StudyError::Io(_) => 4,
        }
    }
}

/// What a successful run computed, for printing and for tests.
pub struct StudyOutput {
    pub ratios: Vec<RatioSeries>,
    pub stability: Vec<(String, Result<f64, TrendError>)>,
    pub dips: Vec<(String, crate::trend::TrailingDip)>,
}

/// Runs a study with the default live HTTP transport behind record/live
/// modes. Prints results, returns the process exit code.
pub fn run_study(config: &StudyConfig) -> i32 {
    run_study_with(config, || Box::new(HttpTransport::new()))
}

/// Like [`run_study`] but with an injectable live-transport factory. The
/// factory is only invoked in live and record modes, which is what keeps
/// replay runs provably off the network.
pub fn run_study_with(config: &StudyConfig, live: impl FnOnce() -> Box<dyn Transport>) -> i32 {
    match execute_study(config, live) {
        Ok(output) => {
            for (term, score) in &output.stability {
                match score {
                    Ok(s) => println!("stability {term}: {s:.6}"),
                    Err(e) => println!("stability {term}: undefined ({e})"),
                }
            }
            for (term, dip) in &output.dips {
                eprintln!("pubtrend: warning: {term}: {dip}");
            }
            0
        }
        Err(e) => {
            eprintln!("pubtrend: error: {e}");
            e.exit_code()
        }
    }
}

/// Fetches, aligns, normalises, writes outputs, and collects diagnostics.
pub fn execute_study(
    config: &StudyConfig,
    live: impl FnOnce() -> Box<dyn Transport>,
) -> Result<StudyOutput, StudyError> {
    let transport: Box<dyn Transport> = match config.mode {
        Mode::Live => live(),
        Mode::Record => {
            let path = config
                .fixture_path
                .as_ref()
                .ok_or_else(|| StudyError::Config("record mode requires --fixtures".into()))?;
            Box::new(
                RecordingTransport::create(live(), path)
                    .map_err(|e| StudyError::Fixture(format!("{}: {e}", path.display())))?,
            )
        }
        Mode::Replay => {
            let path = config
                .fixture_path
                .as_ref()
                .ok_or_else(|| StudyError::Config("replay mode requires --fixtures".into()))?;
            Box::new(
                ReplayTransport::load(path)
                    .map_err(|e| StudyError::Fixture(format!("{}: {e}", path.display())))?,
            )
        }
    };

    let clock = Arc::new(SystemClock);
    let limiter = match config.mode {
        // Pacing a fixture file would only slow offline runs down.
        Mode::Replay => RateLimiter::unlimited(clock),
        _ => RateLimiter::for_api_key(config.credentials.has_api_key(), clock),
    };

    let cache = CountCache::load(&config.cache_path)?;
    if cache.corrupt_line_count() > 0 {
        eprintln!(
            "pubtrend: warning: skipped {} corrupt cache line(s) in {}",
            cache.corrupt_line_count(),
            config.cache_path.display()
        );
    }

    let mut fetched = Vec::new();
    for spec in config.keywords.iter().chain(&config.references) {
        let series = fetch_year_series(
            spec,
            config.years.clone(),
            transport.as_ref(),
            &limiter,
            &cache,
            &config.credentials,
        )?;
        fetched.push(series);
    }
    cache.flush()?;

    let aligned = align_years(&fetched)?;
    let (keyword_series, reference_series) = aligned.split_at(config.keywords.len());

    let ratios: Vec<RatioSeries> = if reference_series.len() == 1 {
        keyword_series
            .iter()
            .map(|k| normalize_by_reference(k, &reference_series[0]))
            .collect::<Result<_, _>>()?
    } else {
        let set = ComparisonSet::new(reference_series.to_vec())?;
        keyword_series
            .iter()
            .map(|k| normalize_by_set(k, &set))
            .collect::<Result<_, _>>()?
    };

    let labeled: Vec<LabeledSeries> = ratios
        .iter()
        .map(|r| LabeledSeries::ratios(r.keyword().term(), r))
        .collect();

    if let Some(path) = &config.csv_out {
        let mut out = BufWriter::new(File::create(path)?);
        write_csv(&labeled, &mut out)?;
        out.flush()?;
    }
    if let Some(path) = &config.svg_out {
        let reference_label = ratios
            .first()
            .map(|r| r.reference_label().to_string())
            .unwrap_or_default();
        let spec = ChartSpec::new(
            format!("Publication interest normalised by {reference_label}"),
            "normalised interest",
            labeled.clone(),
        )
        .with_log_scale(config.log_scale);
        std::fs::write(path, render_svg(&spec)?)?;
    }

    let stability = if config.stability {
        ratios
            .iter()
            .map(|r| (r.keyword().term().to_string(), stability_score(r)))
            .collect()
    } else {
        Vec::new()
    };

    let dips = fetched
        .iter()
        .filter_map(|s| {
            detect_trailing_dip(s).map(|d| (s.keyword().term().to_string(), d))
        })
        .collect();

    Ok(StudyOutput {
        ratios,
        stability,
        dips,
    })
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Live => f.write_str("live"),
            Mode::Record => f.write_str("record"),
            Mode::Replay => f.write_str("replay"),
        }
    }
}
