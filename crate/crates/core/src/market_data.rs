//! Daily CPC time series: loading, windowing and log returns.
//!
//! Input files are CSV with the header `keyword,date,cpc`, one row per
//! keyword-day, ISO-8601 dates and `.` as the decimal separator. A keyword is
//! kept only if it covers every calendar day of the requested window with a
//! strictly positive CPC; everything else ends up in the rejection list.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Minimum number of daily observations in a window (the statistical tests
/// need at least eight points).
pub const MIN_WINDOW_OBSERVATIONS: usize = 8;

/// Dated, strictly positive daily CPC observations for one keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSeries {
    keyword: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl KeywordSeries {
    pub fn new(keyword: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let keyword = keyword.into();
        for pair in observations.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::invalid(format!(
                    "keyword '{keyword}': dates must be strictly increasing ({} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        if let Some((date, cpc)) = observations.iter().find(|(_, c)| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!(
                "keyword '{keyword}': cpc {cpc} on {date} is not strictly positive"
            )));
        }
        Ok(Self {
            keyword,
            observations,
        })
    }

    /// Builds a series of consecutive days starting at `start`.
    pub fn from_daily(keyword: impl Into<String>, start: NaiveDate, cpcs: &[f64]) -> Result<Self> {
        let observations = start
            .iter_days()
            .zip(cpcs.iter().copied())
            .collect::<Vec<_>>();
        Self::new(keyword, observations)
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn cpcs(&self) -> Vec<f64> {
        self.observations.iter().map(|&(_, c)| c).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.observations.iter().map(|&(d, _)| d).collect()
    }

    pub fn first_cpc(&self) -> Option<f64> {
        self.observations.first().map(|&(_, c)| c)
    }

    pub fn last_cpc(&self) -> Option<f64> {
        self.observations.last().map(|&(_, c)| c)
    }

    /// Restricts the series to the inclusive date range of `window`.
    pub fn restrict(&self, window: &DataWindow) -> KeywordSeries {
        KeywordSeries {
            keyword: self.keyword.clone(),
            observations: self
                .observations
                .iter()
                .copied()
                .filter(|(d, _)| window.contains(*d))
                .collect(),
        }
    }
}

/// Daily log change rates `y(k) = ln C(t_k) - ln C(t_{k-1})`, dated by the
/// later day of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LogReturnSeries {
    keyword: String,
    returns: Vec<(NaiveDate, f64)>,
}

impl LogReturnSeries {
    pub fn new(keyword: impl Into<String>, returns: Vec<(NaiveDate, f64)>) -> Self {
        Self {
            keyword: keyword.into(),
            returns,
        }
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn returns(&self) -> &[(NaiveDate, f64)] {
        &self.returns
    }

    pub fn values(&self) -> Vec<f64> {
        self.returns.iter().map(|&(_, y)| y).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.returns.iter().map(|&(d, _)| d).collect()
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowRole {
    Training,
    Development,
    Test,
}

impl std::str::FromStr for WindowRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "training" | "train" => Ok(WindowRole::Training),
            "development" | "dev" => Ok(WindowRole::Development),
            "test" => Ok(WindowRole::Test),
            other => Err(Error::invalid(format!("unknown window role '{other}'"))),
        }
    }
}

/// Inclusive calendar window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataWindow {
    role: WindowRole,
    start: NaiveDate,
    end: NaiveDate,
}

impl DataWindow {
    pub fn new(role: WindowRole, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start >= end {
            return Err(Error::invalid(format!(
                "window start {start} must precede end {end}"
            )));
        }
        let window = Self { role, start, end };
        if window.days() < MIN_WINDOW_OBSERVATIONS {
            return Err(Error::TooFewObservations {
                required: MIN_WINDOW_OBSERVATIONS,
                actual: window.days(),
            });
        }
        Ok(window)
    }

    pub fn role(&self) -> WindowRole {
        self.role
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    /// Number of calendar days covered, both ends included.
    pub fn days(&self) -> usize {
        (self.end - self.start).num_days() as usize + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.start && date <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectionReason {
    ZeroCpc,
    NegativeCpc,
    DuplicateDate,
    Gap,
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectionReason::ZeroCpc => "zero CPC",
            RejectionReason::NegativeCpc => "negative CPC",
            RejectionReason::DuplicateDate => "duplicate date",
            RejectionReason::Gap => "gap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub keyword: String,
    pub reason: RejectionReason,
}

/// Result of [`load_series`]: accepted series in first-appearance order plus
/// the keywords that were dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadReport {
    pub series: Vec<KeywordSeries>,
    pub rejected: Vec<Rejection>,
}

impl LoadReport {
    /// Writes the rejection list as CSV `keyword,reason`.
    pub fn write_rejections<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["keyword", "reason"])?;
        for r in &self.rejected {
            w.write_record([r.keyword.as_str(), &r.reason.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("rejection report", e))?;
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    keyword: String,
    date: String,
    cpc: String,
}

/// Loads every keyword in `path` and keeps those that fully cover `window`.
pub fn load_series(path: impl AsRef<Path>, window: &DataWindow) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, window)
}

/// Same as [`load_series`] but from any reader.
pub fn read_series<R: std::io::Read>(reader: R, window: &DataWindow) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["keyword", "date", "cpc"] {
        return Err(Error::Malformed {
            location: "header".into(),
            message: format!("expected `keyword,date,cpc`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(NaiveDate, f64)>> = HashMap::new();
    for (i, record) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = record.map_err(|e| Error::Malformed {
            location: format!("line {line}"),
            message: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d").map_err(|e| Error::Malformed {
            location: format!("line {line}"),
            message: format!("bad date '{}': {e}", row.date),
        })?;
        let cpc: f64 = row.cpc.parse().map_err(|_| Error::Malformed {
            location: format!("line {line}"),
            message: format!("bad cpc '{}'", row.cpc),
        })?;
        if !cpc.is_finite() {
            return Err(Error::Malformed {
                location: format!("line {line}"),
                message: format!("non-finite cpc '{}'", row.cpc),
            });
        }
        if !rows.contains_key(&row.keyword) {
            order.push(row.keyword.clone());
        }
        rows.entry(row.keyword).or_default().push((date, cpc));
    }

    let mut report = LoadReport::default();
    for keyword in order {
        let mut obs: Vec<_> = rows
            .remove(&keyword)
            .unwrap_or_default()
            .into_iter()
            .filter(|(d, _)| window.contains(*d))
            .collect();
        obs.sort_by_key(|&(d, _)| d);
        match screen(&obs, window) {
            Some(reason) => report.rejected.push(Rejection { keyword, reason }),
            None => report.series.push(KeywordSeries {
                keyword,
                observations: obs,
            }),
        }
    }
    Ok(report)
}

fn screen(obs: &[(NaiveDate, f64)], window: &DataWindow) -> Option<RejectionReason> {
    if obs.iter().any(|&(_, c)| c == 0.0) {
        return Some(RejectionReason::ZeroCpc);
    }
    if obs.iter().any(|&(_, c)| c < 0.0) {
        return Some(RejectionReason::NegativeCpc);
    }
    if obs.windows(2).any(|p| p[0].0 == p[1].0) {
        return Some(RejectionReason::DuplicateDate);
    }
    if obs.len() != window.days() {
        return Some(RejectionReason::Gap);
    }
    None
}

/// Log change rates of consecutive observations.
pub fn log_returns(series: &KeywordSeries) -> Result<LogReturnSeries> {
    if series.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: series.len(),
        });
    }
    let returns = series
        .observations
        .windows(2)
        .map(|p| (p[1].0, p[1].1.ln() - p[0].1.ln()))
        .collect();
    Ok(LogReturnSeries::new(series.keyword.clone(), returns))
}

/// Inverse of [`log_returns`]: rebuilds CPC levels from a starting value.
pub fn reconstruct_levels(first_cpc: f64, returns: &[f64]) -> Vec<f64> {
    let log0 = first_cpc.ln();
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(first_cpc);
    let mut acc = 0.0;
    for y in returns {
        acc += y;
        out.push((log0 + acc).exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn window(start: &str, end: &str) -> DataWindow {
        DataWindow::new(WindowRole::Training, day(start), day(end)).unwrap()
    }

    fn csv_for(keyword: &str, start: &str, cpcs: &[f64]) -> String {
        day(start)
            .iter_days()
            .zip(cpcs)
            .map(|(d, c)| format!("{keyword},{d},{c}\n"))
            .collect()
    }

    #[test]
    fn one_keyword_full_window() {
        let cpcs: Vec<f64> = (0..31).map(|i| 2.0 + 0.01 * i as f64).collect();
        let text = format!("keyword,date,cpc\n{}", csv_for("canon cameras", "2012-01-25", &cpcs));
        let rep = read_series(text.as_bytes(), &window("2012-01-25", "2012-02-24")).unwrap();
        assert_eq!(rep.series.len(), 1);
        assert_eq!(rep.series[0].len(), 31);
        assert_eq!(rep.series[0].cpcs(), cpcs);
        assert!(rep.rejected.is_empty());
    }

    #[test]
    fn zero_cpc_keyword_is_excluded() {
        let good: Vec<f64> = vec![1.5; 10];
        let text = format!(
            "keyword,date,cpc\n{}{}",
            csv_for("a", "2012-03-01", &good),
            csv_for("dead", "2012-03-01", &[0.0; 10])
        );
        let rep = read_series(text.as_bytes(), &window("2012-03-01", "2012-03-10")).unwrap();
        assert_eq!(rep.series.len(), 1);
        assert_eq!(rep.rejected, vec![Rejection { keyword: "dead".into(), reason: RejectionReason::ZeroCpc }]);
        let mut buf = Vec::new();
        rep.write_rejections(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "keyword,reason\ndead,zero CPC\n");
    }

    #[test]
    fn gap_inside_window_drops_series() {
        let mut text = String::from("keyword,date,cpc\n");
        for (i, d) in day("2012-03-01").iter_days().take(12).enumerate() {
            if i != 5 {
                text.push_str(&format!("gappy,{d},1.0\n"));
            }
        }
        let rep = read_series(text.as_bytes(), &window("2012-03-01", "2012-03-12")).unwrap();
        assert!(rep.series.is_empty());
        assert_eq!(rep.rejected[0].reason, RejectionReason::Gap);
    }

    #[test]
    fn rows_outside_window_are_ignored() {
        let text = format!("keyword,date,cpc\n{}", csv_for("k", "2012-03-01", &[1.0; 20]));
        let rep = read_series(text.as_bytes(), &window("2012-03-05", "2012-03-14")).unwrap();
        assert_eq!(rep.series[0].len(), 10);
        assert_eq!(rep.series[0].observations()[0].0, day("2012-03-05"));
    }

    #[test]
    fn malformed_rows_are_errors() {
        let bad_date = "keyword,date,cpc\nk,2012-13-01,1.0\n";
        assert!(matches!(
            read_series(bad_date.as_bytes(), &window("2012-03-01", "2012-03-10")),
            Err(Error::Malformed { .. })
        ));
        let bad_cpc = "keyword,date,cpc\nk,2012-03-01,1;0\n";
        assert!(read_series(bad_cpc.as_bytes(), &window("2012-03-01", "2012-03-10")).is_err());
        let bad_header = "kw,day,price\nk,2012-03-01,1.0\n";
        assert!(read_series(bad_header.as_bytes(), &window("2012-03-01", "2012-03-10")).is_err());
    }

    #[test]
    fn window_needs_eight_days() {
        assert!(DataWindow::new(WindowRole::Test, day("2012-01-01"), day("2012-01-07")).is_err());
        assert!(DataWindow::new(WindowRole::Test, day("2012-01-01"), day("2012-01-08")).is_ok());
        assert!(DataWindow::new(WindowRole::Test, day("2012-01-08"), day("2012-01-01")).is_err());
    }

    #[test]
    fn log_returns_examples() {
        let s = KeywordSeries::from_daily("k", day("2012-01-01"), &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(log_returns(&s).unwrap().values(), vec![0.0, 0.0]);

        let s = KeywordSeries::from_daily("k", day("2012-01-01"), &[1.0, std::f64::consts::E]).unwrap();
        assert!((log_returns(&s).unwrap().values()[0] - 1.0).abs() < 1e-15);

        let s = KeywordSeries::from_daily("k", day("2012-01-01"), &[2.0, 3.0, 1.5]).unwrap();
        let y = log_returns(&s).unwrap();
        assert!((y.values()[0] - 1.5f64.ln()).abs() < 1e-15);
        assert!((y.values()[1] - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(y.dates(), vec![day("2012-01-02"), day("2012-01-03")]);

        let s = KeywordSeries::from_daily("k", day("2012-01-01"), &[2.0]).unwrap();
        assert!(log_returns(&s).is_err());
    }

    #[test]
    fn series_invariants_enforced() {
        let d = day("2012-01-01");
        assert!(KeywordSeries::new("k", vec![(d, 1.0), (d, 2.0)]).is_err());
        assert!(KeywordSeries::new("k", vec![(d, 0.0)]).is_err());
    }
}
