//! Normalisation math for yearly publication counts.
//!
//! Everything in this module is pure: no I/O, no clocks, no randomness. The
//! intended pipeline is [`align_years`] to restrict all fetched series to a
//! common contiguous year range, then [`normalize_by_reference`] (one
//! reference keyword) or [`normalize_by_set`] (the mean of several) to turn
//! counts into relative-interest ratios.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::entrez::KeywordSpec;

/// Errors from series alignment and normalisation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrendError {
    #[error("no series given")]
    EmptyInput,
    #[error("series for {0:?} has no years")]
    EmptySeries(String),
    #[error("year ranges have an empty intersection")]
    EmptyIntersection,
    #[error("series year ranges differ; align them first")]
    YearMismatch,
    #[error("comparison set has no members")]
    EmptySet,
    #[error("fewer than 2 defined values")]
    InsufficientData,
    #[error("mean of defined values is zero")]
    ZeroMean,
}

/// Per-year publication counts for one keyword.
///
/// Years are kept sorted and deduplicated. Gaps are permitted until the
/// series has been through [`align_years`], which fills interior years with
/// zero counts and guarantees a contiguous range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    keyword: KeywordSpec,
    counts: BTreeMap<i32, u64>,
}

impl CountSeries {
    pub fn new(keyword: KeywordSpec, counts: impl IntoIterator<Item = (i32, u64)>) -> Self {
        Self {
            keyword,
            counts: counts.into_iter().collect(),
        }
    }

    pub fn keyword(&self) -> &KeywordSpec {
        &self.keyword
    }

    pub fn get(&self, year: i32) -> Option<u64> {
        self.counts.get(&year).copied()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.counts.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.counts.keys().next_back().copied()
    }

    /// Years in ascending order.
    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.counts.keys().copied()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (i32, u64)> + '_ {
        self.counts.iter().map(|(&y, &c)| (y, c))
    }

    fn same_years(&self, other: &CountSeries) -> bool {
        self.counts.len() == other.counts.len()
            && self.counts.keys().zip(other.counts.keys()).all(|(a, b)| a == b)
    }
}

/// A non-empty set of reference series sharing one year range.
#[derive(Debug, Clone)]
pub struct ComparisonSet {
    members: Vec<CountSeries>,
}

impl ComparisonSet {
    /// Builds a set from aligned members.
    ///
    /// Fails with [`TrendError::EmptySet`] on no members and
    /// [`TrendError::YearMismatch`] if the members do not share an identical
    /// year range.
    pub fn new(members: Vec<CountSeries>) -> Result<Self, TrendError> {
        let first = members.first().ok_or(TrendError::EmptySet)?;
        if members.iter().any(|m| !first.same_years(m)) {
            return Err(TrendError::YearMismatch);
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[CountSeries] {
        &self.members
    }

    /// Number of reference keywords in the set.
    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Human-readable label naming the set, e.g. `mean(brain, banana)`.
    pub fn label(&self) -> String {
        if self.members.len() == 1 {
            return self.members[0].keyword().term().to_string();
        }
        let terms: Vec<&str> = self.members.iter().map(|m| m.keyword().term()).collect();
        format!("mean({})", terms.join(", "))
    }
}

/// Per-year normalised interest values for one keyword.
///
/// A year maps to `None` exactly when the denominator for that year was zero;
/// such years are rendered as gaps rather than dragging the whole series
/// down with an error.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSeries {
    keyword: KeywordSpec,
    reference_label: String,
    values: BTreeMap<i32, Option<f64>>,
}

impl RatioSeries {
    pub fn from_values(
        keyword: KeywordSpec,
        reference_label: impl Into<String>,
        values: impl IntoIterator<Item = (i32, Option<f64>)>,
    ) -> Self {
        Self {
            keyword,
            reference_label: reference_label.into(),
            values: values.into_iter().collect(),
        }
    }

    pub fn keyword(&self) -> &KeywordSpec {
        &self.keyword
    }

    /// The term (or set description) this series was normalised against.
    pub fn reference_label(&self) -> &str {
        &self.reference_label
    }

    /// `None` for a year outside the range, `Some(None)` for an undefined
    /// year (zero denominator), `Some(Some(r))` for a defined ratio.
    pub fn get(&self, year: i32) -> Option<Option<f64>> {
        self.values.get(&year).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, Option<f64>)> + '_ {
        self.values.iter().map(|(&y, &v)| (y, v))
    }

    /// Only the defined (year, ratio) pairs.
    pub fn defined(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values.iter().filter_map(|(&y, &v)| v.map(|r| (y, r)))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Restricts every series to the intersection of their year ranges.
///
/// Missing interior years are filled with count 0 (a year with no matching
/// records genuinely has zero publications as far as the search index is
/// concerned), so every returned series covers the same contiguous range.
pub fn align_years(series: &[CountSeries]) -> Result<Vec<CountSeries>, TrendError> {
    if series.is_empty() {
        return Err(TrendError::EmptyInput);
    }
    let mut lo = i32::MIN;
    let mut hi = i32::MAX;
    for s in series {
        let first = s
            .first_year()
            .ok_or_else(|| TrendError::EmptySeries(s.keyword().term().to_string()))?;
        let last = s.last_year().expect("non-empty series has a last year");
        lo = lo.max(first);
        hi = hi.min(last);
    }
    if lo > hi {
        return Err(TrendError::EmptyIntersection);
    }
    Ok(series
        .iter()
        .map(|s| {
            let counts = (lo..=hi).map(|y| (y, s.get(y).unwrap_or(0)));
            CountSeries::new(s.keyword().clone(), counts)
        })
        .collect())
}

/// Divides the keyword's yearly counts by a single reference keyword's.
///
/// Years where the reference count is zero come back undefined. Both series
/// must already cover an identical year range.
pub fn normalize_by_reference(
    keyword: &CountSeries,
    reference: &CountSeries,
) -> Result<RatioSeries, TrendError> {
    if !keyword.same_years(reference) {
        return Err(TrendError::YearMismatch);
    }
    let values = keyword.iter().map(|(year, count)| {
        let denom = reference.get(year).expect("years checked equal");
        let ratio = (denom > 0).then(|| count as f64 / denom as f64);
        (year, ratio)
    });
    Ok(RatioSeries::from_values(
        keyword.keyword().clone(),
        reference.keyword().term(),
        values,
    ))
}

/// Divides the keyword's yearly counts by the arithmetic mean of a reference
/// set, zeros included.
///
/// With a single member this is numerically identical to
/// [`normalize_by_reference`]. Years where every member is zero come back
/// undefined.
pub fn normalize_by_set(
    keyword: &CountSeries,
    references: &ComparisonSet,
) -> Result<RatioSeries, TrendError> {
    if references
        .members()
        .iter()
        .any(|m| !keyword.same_years(m))
    {
        return Err(TrendError::YearMismatch);
    }
    let n = references.n() as f64;
    let values = keyword.iter().map(|(year, count)| {
        let sum: u128 = references
            .members()
            .iter()
            .map(|m| m.get(year).expect("years checked equal") as u128)
            .sum();
        // The mean is zero exactly when every member count is zero.
        let ratio = (sum > 0).then(|| count as f64 / (sum as f64 / n));
        (year, ratio)
    });
    Ok(RatioSeries::from_values(
        keyword.keyword().clone(),
        references.label(),
        values,
    ))
}

/// Scores how steady a ratio series is: sample standard deviation over mean
/// (coefficient of variation) of the defined values. Lower is steadier, which
/// is what you want from a reference keyword. Undefined years are skipped.
pub fn stability_score(ratios: &RatioSeries) -> Result<f64, TrendError> {
    let values: Vec<f64> = ratios.defined().map(|(_, r)| r).collect();
    if values.len() < 2 {
        return Err(TrendError::InsufficientData);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(TrendError::ZeroMean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt() / mean)
}

/// A final-year collapse in raw counts, usually an indexing artifact rather
/// than a real loss of interest: records can take months to be indexed, so
/// the most recent year often looks artificially low.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailingDip {
    pub year: i32,
    pub count: u64,
    pub previous_year: i32,
    pub previous_count: u64,
}

impl TrailingDip {
    /// Final-year count as a fraction of the previous year's.
    pub fn ratio(&self) -> f64 {
        self.count as f64 / self.previous_count as f64
    }
}

impl fmt::Display for TrailingDip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} count {} is {:.0}% of the {} count {}; recent years may not be fully indexed yet",
            self.year,
            self.count,
            self.ratio() * 100.0,
            self.previous_year,
            self.previous_count,
        )
    }
}

/// Warns when the final year's count is less than half the previous year's.
///
/// Returns `None` for series shorter than two years or when the previous
/// year's count is zero.
pub fn detect_trailing_dip(series: &CountSeries) -> Option<TrailingDip> {
    let mut rev = series.iter().rev();
    let (year, count) = rev.next()?;
    let (previous_year, previous_count) = rev.next()?;
    if previous_count > 0 && (count as f64) < 0.5 * previous_count as f64 {
        Some(TrailingDip {
            year,
            count,
            previous_year,
            previous_count,
        })
    } else {
        None
    }
}

/// Convenience: the inclusive year span of an aligned series, if any.
pub fn year_span(series: &CountSeries) -> Option<RangeInclusive<i32>> {
    Some(series.first_year()?..=series.last_year()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entrez::SearchField;

    fn kw(term: &str) -> KeywordSpec {
        KeywordSpec::new(term, SearchField::Text).unwrap()
    }

    fn series(term: &str, counts: &[(i32, u64)]) -> CountSeries {
        CountSeries::new(kw(term), counts.iter().copied())
    }

    #[test]
    fn align_restricts_to_intersection() {
        let a = series("a", &[(1990, 1), (1991, 2), (1992, 3)]);
        let b = series("b", &[(1991, 4), (1992, 5), (1993, 6)]);
        let aligned = align_years(&[a, b]).unwrap();
        assert_eq!(aligned[0].years().collect::<Vec<_>>(), vec![1991, 1992]);
        assert_eq!(aligned[1].years().collect::<Vec<_>>(), vec![1991, 1992]);
        assert_eq!(aligned[0].get(1991), Some(2));
        assert_eq!(aligned[1].get(1992), Some(5));
    }

    #[test]
    fn align_single_series_is_identity() {
        let a = series("a", &[(2000, 7), (2001, 8), (2005, 9)]);
        let aligned = align_years(std::slice::from_ref(&a)).unwrap();
        // Range is preserved; the interior gap fills with zeros.
        assert_eq!(aligned[0].first_year(), Some(2000));
        assert_eq!(aligned[0].last_year(), Some(2005));
        assert_eq!(aligned[0].get(2003), Some(0));
        assert_eq!(aligned[0].get(2005), Some(9));
    }

    #[test]
    fn align_disjoint_ranges_fail() {
        let a = series("a", &[(1980, 1), (1985, 2)]);
        let b = series("b", &[(1990, 3), (1995, 4)]);
        assert_eq!(align_years(&[a, b]), Err(TrendError::EmptyIntersection));
    }

    #[test]
    fn align_rejects_empty_input() {
        assert_eq!(align_years(&[]), Err(TrendError::EmptyInput));
        let empty = series("a", &[]);
        assert!(matches!(
            align_years(&[empty]),
            Err(TrendError::EmptySeries(_))
        ));
    }

    #[test]
    fn identical_series_normalize_to_one() {
        let a = series("a", &[(2000, 4), (2001, 9), (2002, 1)]);
        let b = series("b", &[(2000, 4), (2001, 9), (2002, 1)]);
        let r = normalize_by_reference(&a, &b).unwrap();
        assert!(r.defined().all(|(_, v)| v == 1.0));
        assert_eq!(r.reference_label(), "b");
    }

    #[test]
    fn simple_ratio() {
        let a = series("a", &[(2000, 30)]);
        let b = series("b", &[(2000, 15)]);
        let r = normalize_by_reference(&a, &b).unwrap();
        assert_eq!(r.get(2000), Some(Some(2.0)));
    }

    #[test]
    fn zero_denominator_is_undefined() {
        let a = series("a", &[(2000, 7), (2001, 7)]);
        let b = series("b", &[(2000, 0), (2001, 14)]);
        let r = normalize_by_reference(&a, &b).unwrap();
        assert_eq!(r.get(2000), Some(None));
        assert_eq!(r.get(2001), Some(Some(0.5)));
    }

    #[test]
    fn mismatched_years_rejected() {
        let a = series("a", &[(2000, 1)]);
        let b = series("b", &[(2001, 1)]);
        assert_eq!(
            normalize_by_reference(&a, &b),
            Err(TrendError::YearMismatch)
        );
    }

    #[test]
    fn set_mean_of_two() {
        let a = series("a", &[(2000, 30)]);
        let refs = ComparisonSet::new(vec![
            series("r1", &[(2000, 10)]),
            series("r2", &[(2000, 20)]),
        ])
        .unwrap();
        let r = normalize_by_set(&a, &refs).unwrap();
        assert_eq!(r.get(2000), Some(Some(2.0)));
        assert_eq!(r.reference_label(), "mean(r1, r2)");
    }

    #[test]
    fn singleton_set_matches_single_reference() {
        let a = series("a", &[(2000, 3), (2001, 11), (2002, 0)]);
        let b = series("b", &[(2000, 7), (2001, 0), (2002, 5)]);
        let via_set =
            normalize_by_set(&a, &ComparisonSet::new(vec![b.clone()]).unwrap()).unwrap();
        let direct = normalize_by_reference(&a, &b).unwrap();
        for year in 2000..=2002 {
            assert_eq!(via_set.get(year), direct.get(year), "year {year}");
        }
    }

    #[test]
    fn all_zero_references_undefined() {
        let a = series("a", &[(2000, 5)]);
        let refs = ComparisonSet::new(vec![
            series("r1", &[(2000, 0)]),
            series("r2", &[(2000, 0)]),
        ])
        .unwrap();
        assert_eq!(normalize_by_set(&a, &refs).unwrap().get(2000), Some(None));
    }

    #[test]
    fn empty_set_rejected() {
        assert!(matches!(
            ComparisonSet::new(Vec::new()),
            Err(TrendError::EmptySet)
        ));
    }

    #[test]
    fn constant_ratio_scores_zero() {
        let r = RatioSeries::from_values(
            kw("a"),
            "b",
            (2000..2010).map(|y| (y, Some(0.5))),
        );
        assert_eq!(stability_score(&r).unwrap(), 0.0);
    }

    #[test]
    fn two_point_score_matches_hand_computation() {
        // mean 2, sample variance ((1-2)^2 + (3-2)^2) / 1 = 2, cv = sqrt(2)/2
        let r = RatioSeries::from_values(kw("a"), "b", [(2000, Some(1.0)), (2001, Some(3.0))]);
        let got = stability_score(&r).unwrap();
        let expected = 2.0_f64.sqrt() / 2.0;
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn stability_skips_undefined_years() {
        let r = RatioSeries::from_values(
            kw("a"),
            "b",
            [(2000, Some(2.0)), (2001, None), (2002, Some(2.0))],
        );
        assert_eq!(stability_score(&r).unwrap(), 0.0);
    }

    #[test]
    fn stability_needs_two_defined_values() {
        let r = RatioSeries::from_values(kw("a"), "b", [(2000, Some(1.0)), (2001, None)]);
        assert_eq!(stability_score(&r), Err(TrendError::InsufficientData));
    }

    #[test]
    fn stability_rejects_zero_mean() {
        let r = RatioSeries::from_values(kw("a"), "b", [(2000, Some(0.0)), (2001, Some(0.0))]);
        assert_eq!(stability_score(&r), Err(TrendError::ZeroMean));
    }

    #[test]
    fn dip_fires_below_half() {
        let s = series("a", &[(2018, 100), (2019, 110), (2020, 30)]);
        let dip = detect_trailing_dip(&s).expect("dip");
        assert_eq!(dip.year, 2020);
        assert_eq!(dip.previous_year, 2019);
        assert!((dip.ratio() - 30.0 / 110.0).abs() < 1e-12);
    }

    #[test]
    fn no_dip_at_or_above_half() {
        let s = series("a", &[(2019, 100), (2020, 90)]);
        assert_eq!(detect_trailing_dip(&s), None);
        let exactly_half = series("a", &[(2019, 100), (2020, 50)]);
        assert_eq!(detect_trailing_dip(&exactly_half), None);
    }

    #[test]
    fn no_dip_when_previous_year_zero() {
        let s = series("a", &[(2019, 0), (2020, 0)]);
        assert_eq!(detect_trailing_dip(&s), None);
    }

    #[test]
    fn no_dip_on_single_year() {
        let s = series("a", &[(2020, 5)]);
        assert_eq!(detect_trailing_dip(&s), None);
    }
}
