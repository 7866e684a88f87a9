//! End-to-end tests of the `pubtrend` binary and of the study pipeline's
//! offline guarantees.

use std::path::PathBuf;
use std::process::Command;

use pubtrend::cli::{execute_study, load_config, Mode, StudyConfig};
use pubtrend::entrez::{Credentials, EntrezError, KeywordSpec, SearchField, Transport};

fn fixtures(study: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../studies")
        .join(study)
        .join("fixtures.jsonl")
}

fn pubtrend_command() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pubtrend"));
    cmd.env_remove("PUBTREND_API_KEY")
        .env_remove("PUBTREND_EMAIL")
        .env_remove("PUBTREND_TOOL");
    cmd
}

#[test]
fn eq2_path_used_for_two_references() {
    // keyword "supplementary motor area" against the mean of two references.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let output = pubtrend_command()
        .args([
            "--keyword", "supplementary motor area",
            "--reference", "banana",
            "--reference", "brain",
            "--years", "2010:2019",
            "--mode", "replay",
        ])
        .arg("--fixtures")
        .arg(fixtures("neuroimaging"))
        .arg("--cache")
        .arg(dir.path().join("cache.jsonl"))
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");

    let text = std::fs::read_to_string(&csv).unwrap();
    let row_2019 = text.lines().last().unwrap();
    let ratio: f64 = row_2019.split(',').nth(1).unwrap().parse().unwrap();
    // brain dwarfs banana, so the mean denominator pushes ratios toward
    // 2 * keyword / brain -- tiny, and far from the banana-only ratio ~1.
    assert!(ratio < 0.1, "Eq.2 mean denominator expected, got {ratio}");
}

#[test]
fn replay_miss_exits_3_and_names_the_url() {
    let dir = tempfile::tempdir().unwrap();
    let output = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--reference", "fruit",
            // 1979 was never recorded.
            "--years", "1979:1980",
            "--mode", "replay",
        ])
        .arg("--fixtures")
        .arg(fixtures("fruit_stability"))
        .arg("--cache")
        .arg(dir.path().join("cache.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().count(), 1, "one diagnostic line:\n{stderr}");
    assert!(stderr.contains("1979%5Bpdat%5D"), "{stderr}");
}

#[test]
fn missing_fixture_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let output = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--reference", "fruit",
            "--years", "1980:1981",
            "--mode", "replay",
            "--fixtures", "/nonexistent/fixtures.jsonl",
        ])
        .arg("--cache")
        .arg(dir.path().join("cache.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&output.stderr).lines().count(), 1);
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    let output = pubtrend_command().output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");

    let reversed = pubtrend_command()
        .args(["--keyword", "x", "--reference", "y", "--years", "2020:1990"])
        .output()
        .unwrap();
    assert_eq!(reversed.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&reversed.stderr).lines().count(), 1);
}

#[test]
fn unwritable_csv_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let output = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--reference", "fruit",
            "--years", "1980:1981",
            "--mode", "replay",
            "--csv", "/nonexistent-dir/out.csv",
        ])
        .arg("--fixtures")
        .arg(fixtures("fruit_stability"))
        .arg("--cache")
        .arg(dir.path().join("cache.jsonl"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert_eq!(String::from_utf8_lossy(&output.stderr).lines().count(), 1);
}

#[test]
fn help_exits_zero() {
    let output = pubtrend_command().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("--keyword"));
    assert!(stdout.contains("--reference"));
}

#[test]
fn stability_lines_printed_in_keyword_order() {
    let dir = tempfile::tempdir().unwrap();
    let output = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--keyword", "orange",
            "--reference", "fruit",
            "--years", "1980:2019",
            "--mode", "replay",
            "--stability",
        ])
        .arg("--fixtures")
        .arg(fixtures("fruit_stability"))
        .arg("--cache")
        .arg(dir.path().join("cache.jsonl"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2, "{stdout}");
    assert!(lines[0].starts_with("stability banana: "));
    assert!(lines[1].starts_with("stability orange: "));
}

/// A live transport that must never be constructed in replay mode.
struct PanicTransport;

impl Transport for PanicTransport {
    fn get(&self, url: &str) -> Result<pubtrend::entrez::TransportResponse, EntrezError> {
        panic!("network transport used in replay mode: {url}");
    }
}

#[test]
fn replay_mode_never_touches_the_live_transport() {
    let dir = tempfile::tempdir().unwrap();
    let config = StudyConfig {
        keywords: vec![KeywordSpec::new("banana", SearchField::Text).unwrap()],
        references: vec![KeywordSpec::new("fruit", SearchField::Text).unwrap()],
        years: 1980..=2019,
        database: "pubmed".to_string(),
        csv_out: None,
        svg_out: None,
        credentials: Credentials::default(),
        cache_path: dir.path().join("cache.jsonl"),
        mode: Mode::Replay,
        fixture_path: Some(fixtures("fruit_stability")),
        stability: false,
        log_scale: false,
    };
    let output = execute_study(&config, || {
        panic!("live transport factory invoked in replay mode")
    })
    .expect("replay study runs offline");
    assert_eq!(output.ratios.len(), 1);

    // Same config through the factory-taking entry point, with a transport
    // that panics on use rather than on construction.
    let outcome = pubtrend::cli::run_study_with(&config, || Box::new(PanicTransport));
    assert_eq!(outcome, 0);
}

#[test]
fn cache_prewarm_means_zero_fixture_reads_on_second_run() {
    // First replay run fills the cache; second run replays from cache even
    // with an empty fixture set.
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.jsonl");
    let empty_fixtures = dir.path().join("empty.jsonl");
    std::fs::write(&empty_fixtures, "").unwrap();

    let first = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--reference", "fruit",
            "--years", "1980:1985",
            "--mode", "replay",
        ])
        .arg("--fixtures")
        .arg(fixtures("fruit_stability"))
        .arg("--cache")
        .arg(&cache)
        .output()
        .unwrap();
    assert!(first.status.success());

    let second = pubtrend_command()
        .args([
            "--keyword", "banana",
            "--reference", "fruit",
            "--years", "1980:1985",
            "--mode", "replay",
        ])
        .arg("--fixtures")
        .arg(&empty_fixtures)
        .arg("--cache")
        .arg(&cache)
        .output()
        .unwrap();
    assert!(
        second.status.success(),
        "cache-first fetch should not need fixtures: {second:?}"
    );
}

#[test]
fn load_config_is_what_the_binary_parses() {
    let config = load_config(
        [
            "pubtrend",
            "--keyword",
            "supplementary motor area",
            "--reference",
            "banana",
            "--years",
            "1990:2020",
            "--mode",
            "replay",
            "--fixtures",
            "f.jsonl",
            "--csv",
            "out.csv",
        ],
        &|_| None,
    )
    .unwrap();
    assert_eq!(config.keywords[0].term(), "supplementary motor area");
    assert_eq!(config.mode, Mode::Replay);
    assert_eq!(config.years, 1990..=2020);
    assert_eq!(config.csv_out, Some(PathBuf::from("out.csv")));
}
