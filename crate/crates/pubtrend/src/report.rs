//! Deterministic CSV tables and dependency-free SVG line charts.
//!
//! Emission is a pure function of its inputs: no timestamps, no randomness,
//! so identical inputs always produce byte-identical files. Undefined years
//! show up as empty CSV cells and as gaps (not interpolation) in charts.

use std::collections::BTreeMap;
use std::io::Write;

use thiserror::Error;

use crate::trend::{CountSeries, RatioSeries};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report I/O failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("no series to report")]
    EmptySeries,
    #[error("series year ranges differ; align them first")]
    Misaligned,
    #[error("palette has {palette} colors for {series} series")]
    PaletteTooSmall { palette: usize, series: usize },
    #[error("chart dimensions must be positive")]
    InvalidDimensions,
}

/// How a series' numbers are formatted in CSV cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Whole publication counts.
    Count,
    /// Normalised ratios, printed with six significant digits.
    Ratio,
}

/// A label plus per-year values, ready for CSV or chart emission.
/// `None` marks an undefined year.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    label: String,
    kind: ValueKind,
    points: BTreeMap<i32, Option<f64>>,
}

impl LabeledSeries {
    pub fn ratios(label: impl Into<String>, series: &RatioSeries) -> Self {
        Self {
            label: label.into(),
            kind: ValueKind::Ratio,
            points: series.iter().collect(),
        }
    }

    pub fn counts(label: impl Into<String>, series: &CountSeries) -> Self {
        Self {
            label: label.into(),
            kind: ValueKind::Count,
            points: series.iter().map(|(y, c)| (y, Some(c as f64))).collect(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.points.keys().copied()
    }

    pub fn get(&self, year: i32) -> Option<Option<f64>> {
        self.points.get(&year).copied()
    }

    fn same_years(&self, other: &LabeledSeries) -> bool {
        self.points.len() == other.points.len()
            && self.points.keys().zip(other.points.keys()).all(|(a, b)| a == b)
    }
}

/// Formats with the given number of significant digits, plain notation.
pub fn format_significant(value: f64, digits: u32) -> String {
    let digits = digits.max(1) as i32;
    if value == 0.0 {
        return format!("{:.*}", (digits - 1) as usize, 0.0);
    }
    let magnitude = value.abs().log10().floor() as i32;
    // Round to the requested significant digits first; the rounded value may
    // carry into the next magnitude (0.99999 -> 1.0000).
    let scale = 10f64.powi(digits - 1 - magnitude);
    let rounded = (value * scale).round() / scale;
    let magnitude = if rounded == 0.0 {
        magnitude
    } else {
        rounded.abs().log10().floor() as i32
    };
    let decimals = (digits - 1 - magnitude).max(0);
    format!("{:.*}", decimals as usize, rounded)
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes aligned series as UTF-8 CSV: header `year,<label>...`, one row per
/// year ascending, LF line endings, empty cells for undefined years.
pub fn write_csv(series: &[LabeledSeries], out: &mut dyn Write) -> Result<(), ReportError> {
    let first = series.first().ok_or(ReportError::EmptySeries)?;
    if series.iter().any(|s| !first.same_years(s)) {
        return Err(ReportError::Misaligned);
    }
    let mut header = String::from("year");
    for s in series {
        header.push(',');
        header.push_str(&csv_escape(&s.label));
    }
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    for year in first.years() {
        let mut row = year.to_string();
        for s in series {
            row.push(',');
            if let Some(Some(value)) = s.get(year) {
                match s.kind {
                    ValueKind::Count => row.push_str(&format!("{}", value as u64)),
                    ValueKind::Ratio => row.push_str(&format_significant(value, 6)),
                }
            }
        }
        out.write_all(row.as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Default chart palette, ordered to keep multi-series charts readable.
pub const DEFAULT_PALETTE: [&str; 8] = [
    "#1f77b4", // blue
    "#2ca02c", // green
    "#9467bd", // purple
    "#d62728", // red
    "#ff7f0e", // orange
    "#8c564b", // brown
    "#bcbd22", // yellow-olive
    "#7f7f7f", // grey
];

/// Everything needed to render one line chart.
#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    pub palette: Vec<String>,
    pub log_scale: bool,
    pub series: Vec<LabeledSeries>,
}

impl ChartSpec {
    pub fn new(
        title: impl Into<String>,
        y_label: impl Into<String>,
        series: Vec<LabeledSeries>,
    ) -> Self {
        Self {
            title: title.into(),
            y_label: y_label.into(),
            width: 840,
            height: 480,
            palette: DEFAULT_PALETTE.iter().map(|c| c.to_string()).collect(),
            log_scale: false,
            series,
        }
    }

    pub fn with_log_scale(mut self, log_scale: bool) -> Self {
        self.log_scale = log_scale;
        self
    }
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

fn trim_zeros(formatted: String) -> String {
    if !formatted.contains('.') {
        return formatted;
    }
    let trimmed = formatted.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Evenly spaced "nice" tick positions covering `[lo, hi]` using a 1/2/5
/// ladder, at most `target + 2` of them.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let rough = span / target.max(1) as f64;
    let power = 10f64.powf(rough.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * power)
        .find(|&s| span / s <= target as f64)
        .unwrap_or(10.0 * power);
    let mut ticks = Vec::new();
    let mut tick = (lo / step).ceil() * step;
    while tick <= hi + step * 1e-9 {
        ticks.push(tick);
        tick += step;
    }
    ticks
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn project(&self, value: f64) -> f64 {
        let v = if self.log { value.log10() } else { value };
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// Renders the chart as a standalone SVG 1.1 document.
///
/// Each series becomes one group of polylines, broken at undefined years so
/// gaps stay gaps. Axes are linear unless `log_scale` is set, in which case
/// the y axis uses decade ticks and non-positive values join the gaps.
pub fn render_svg(spec: &ChartSpec) -> Result<String, ReportError> {
    let first = spec.series.first().ok_or(ReportError::EmptySeries)?;
    if spec.series.iter().any(|s| !first.same_years(s)) {
        return Err(ReportError::Misaligned);
    }
    if spec.palette.len() < spec.series.len() {
        return Err(ReportError::PaletteTooSmall {
            palette: spec.palette.len(),
            series: spec.series.len(),
        });
    }
    if spec.width == 0 || spec.height == 0 {
        return Err(ReportError::InvalidDimensions);
    }

    let margin = (64.0, 168.0, 46.0, 52.0); // left, right, top, bottom
    let plot_w = spec.width as f64 - margin.0 - margin.1;
    let plot_h = spec.height as f64 - margin.2 - margin.3;

    let years: Vec<i32> = first.years().collect();
    let (mut x_lo, mut x_hi) = (
        *years.first().expect("validated non-empty") as f64,
        *years.last().expect("validated non-empty") as f64,
    );
    if x_lo == x_hi {
        x_lo -= 1.0;
        x_hi += 1.0;
    }
    let x_axis = Axis { lo: x_lo, hi: x_hi, log: false };

    let plottable = |v: f64| !spec.log_scale || v > 0.0;
    let mut max_value = f64::MIN;
    let mut min_positive = f64::MAX;
    for s in &spec.series {
        for year in &years {
            if let Some(Some(v)) = s.get(*year) {
                max_value = max_value.max(v);
                if v > 0.0 {
                    min_positive = min_positive.min(v);
                }
            }
        }
    }
    if max_value == f64::MIN {
        max_value = 1.0;
    }
    if min_positive == f64::MAX {
        min_positive = 0.1;
    }

    let y_axis = if spec.log_scale {
        Axis {
            lo: (min_positive.log10() - 0.2).floor(),
            hi: (max_value.max(min_positive).log10() + 0.2).ceil(),
            log: true,
        }
    } else {
        Axis {
            lo: 0.0,
            hi: if max_value > 0.0 { max_value * 1.05 } else { 1.0 },
            log: false,
        }
    };

    let px = |t: f64| margin.0 + t * plot_w;
    let py = |t: f64| margin.2 + plot_h - t * plot_h;
    let x_of = |year: f64| px(x_axis.project(year));
    let y_of = |value: f64| py(y_axis.project(value));

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = spec.width,
        h = spec.height
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        spec.width, spec.height
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        margin.0 + plot_w / 2.0,
        xml_escape(&spec.title)
    ));

    // Axes and ticks.
    svg.push_str("  <g class=\"axes\" stroke=\"#333333\" stroke-width=\"1\" fill=\"none\">\n");
    svg.push_str(&format!(
        "    <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/>\n",
        margin.0,
        margin.2 + plot_h,
        margin.0 + plot_w,
        margin.2 + plot_h
    ));
    svg.push_str(&format!(
        "    <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\"/>\n",
        margin.0,
        margin.2,
        margin.0,
        margin.2 + plot_h
    ));
    svg.push_str("  </g>\n");

    svg.push_str("  <g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n");
    for tick in nice_ticks(x_lo, x_hi, 7) {
        let year = tick.round();
        let x = x_of(year);
        svg.push_str(&format!(
            "    <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
            margin.2 + plot_h,
            margin.2 + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "    <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            margin.2 + plot_h + 18.0,
            year as i64
        ));
    }
    let y_ticks: Vec<f64> = if spec.log_scale {
        (y_axis.lo as i32..=y_axis.hi as i32)
            .map(|e| 10f64.powi(e))
            .collect()
    } else {
        nice_ticks(y_axis.lo, y_axis.hi, 6)
    };
    for tick in y_ticks {
        let y = y_of(tick);
        svg.push_str(&format!(
            "    <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#333333\"/>\n",
            margin.0 - 5.0,
            margin.0
        ));
        let label = if spec.log_scale && tick < 0.001 {
            format!("1e{}", tick.log10().round() as i32)
        } else {
            trim_zeros(format_significant(tick, 4))
        };
        svg.push_str(&format!(
            "    <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            margin.0 - 9.0,
            y + 4.0,
            label
        ));
    }
    svg.push_str("  </g>\n");

    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        margin.2 + plot_h / 2.0,
        margin.2 + plot_h / 2.0,
        xml_escape(&spec.y_label)
    ));

    // Series: one group per series, one polyline per defined run.
    for (i, s) in spec.series.iter().enumerate() {
        let color = &spec.palette[i];
        svg.push_str(&format!(
            "  <g class=\"series\" data-label=\"{}\" stroke=\"{}\" stroke-width=\"1.8\" fill=\"none\">\n",
            xml_escape(&s.label),
            xml_escape(color)
        ));
        let mut run: Vec<(f64, f64)> = Vec::new();
        let flush_run = |run: &mut Vec<(f64, f64)>, svg: &mut String| {
            if run.is_empty() {
                return;
            }
            let points: Vec<String> = run
                .iter()
                .map(|(x, y)| format!("{x:.2},{y:.2}"))
                .collect();
            svg.push_str(&format!(
                "    <polyline points=\"{}\"/>\n",
                points.join(" ")
            ));
            run.clear();
        };
        for &year in &years {
            match s.get(year) {
                Some(Some(v)) if plottable(v) => {
                    run.push((x_of(year as f64), y_of(v)));
                }
                _ => flush_run(&mut run, &mut svg),
            }
        }
        flush_run(&mut run, &mut svg);
        svg.push_str("  </g>\n");
    }

    // Legend, one entry per series in palette order.
    svg.push_str("  <g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    let legend_x = spec.width as f64 - margin.1 + 18.0;
    for (i, s) in spec.series.iter().enumerate() {
        let y = margin.2 + 10.0 + i as f64 * 20.0;
        svg.push_str(&format!(
            "    <rect x=\"{legend_x:.2}\" y=\"{:.2}\" width=\"13\" height=\"13\" fill=\"{}\"/>\n",
            y - 10.0,
            xml_escape(&spec.palette[i])
        ));
        svg.push_str(&format!(
            "    <text x=\"{:.2}\" y=\"{y:.2}\" fill=\"#333333\">{}</text>\n",
            legend_x + 19.0,
            xml_escape(&s.label)
        ));
    }
    svg.push_str("  </g>\n");
    svg.push_str("</svg>\n");
    Ok(svg)
}
