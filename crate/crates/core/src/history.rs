//! Commit history parsing, time windowing and per-window touch tables.
//!
//! Two input formats are understood:
//!
//! * git log records: each record starts with byte `0x1E`, followed by
//!   `hash 0x1F author 0x1F iso-date`, a newline, a blank line, then one path
//!   per line. Produced by
//!   `git log --name-only --no-renames --format=%x1e%H%x1f%an%x1f%aI`.
//! * touch TSV: `timestamp<TAB>author<TAB>path` per line, `#` comments.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RECORD_SEP: u8 = 0x1E;
const FIELD_SEP: u8 = 0x1F;

/// One commit: who, when, and which paths it touched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub author: String,
    pub files: Vec<String>,
}

/// How consecutive windows relate to each other.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Windows partition the history.
    #[default]
    Disjoint,
    /// Every window starts at the first commit.
    Cumulative,
}

impl std::str::FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disjoint" => Ok(WindowMode::Disjoint),
            "cumulative" => Ok(WindowMode::Cumulative),
            other => Err(Error::InvalidParameter(format!(
                "window mode `{other}` (expected disjoint or cumulative)"
            ))),
        }
    }
}

/// Half-open interval `[start, end)`; the last window of a history also
/// contains `end` so the final commit is never dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    pub mode: WindowMode,
    pub closed_end: bool,
}

impl TimeWindow {
    pub fn contains(&self, ts: i64) -> bool {
        (self.start <= ts && ts < self.end) || (self.closed_end && ts == self.end)
    }

    pub fn start_iso(&self) -> String {
        iso8601(self.start)
    }

    pub fn end_iso(&self) -> String {
        iso8601(self.end)
    }
}

/// How to split the history span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowSpec {
    /// Fixed interval in seconds.
    Interval(i64),
    /// Divide the span into this many equal windows.
    Count(usize),
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Count(10)
    }
}

pub fn iso8601(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|d| d.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Parses the `0x1E`/`0x1F` record format, preserving input order.
pub fn parse_git_log(input: &[u8]) -> Result<Vec<CommitRecord>> {
    let mut commits = Vec::new();
    let mut offset = 0;
    for (n, chunk) in input.split(|&b| b == RECORD_SEP).enumerate() {
        let chunk_start = offset;
        offset += chunk.len() + 1;
        if n == 0 {
            // bytes before the first separator may only be whitespace
            if chunk.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            return Err(Error::GitLog {
                offset: 0,
                field: "record",
                message: "input does not start with a record separator (0x1E)".into(),
            });
        }
        let err = |at: usize, field: &'static str, message: String| Error::GitLog {
            offset: chunk_start + at,
            field,
            message,
        };
        let text = std::str::from_utf8(chunk)
            .map_err(|e| err(e.valid_up_to(), "record", "invalid UTF-8".into()))?;
        let header_len = text.find('\n').unwrap_or(text.len());
        let header = text[..header_len].trim_end_matches('\r');

        let mut fields = header.split(FIELD_SEP as char);
        let hash = fields.next().unwrap_or_default();
        let author = fields
            .next()
            .ok_or_else(|| err(hash.len(), "author", "missing field separator (0x1F)".into()))?;
        let date_at = hash.len() + 1 + author.len() + 1;
        let date = fields
            .next()
            .ok_or_else(|| err(date_at - 1, "date", "missing field separator (0x1F)".into()))?;
        if fields.next().is_some() {
            return Err(err(header.len(), "record", "more than three header fields".into()));
        }
        if hash.trim().is_empty() {
            return Err(err(0, "hash", "empty commit hash".into()));
        }
        if author.trim().is_empty() {
            return Err(err(hash.len() + 1, "author", "empty author".into()));
        }
        let timestamp = DateTime::parse_from_rfc3339(date.trim())
            .map_err(|e| err(date_at, "date", format!("`{date}` is not ISO-8601: {e}")))?
            .timestamp();
        if timestamp <= 0 {
            return Err(err(date_at, "date", format!("timestamp {timestamp} is not positive")));
        }

        let files = text[header_len..]
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect();
        commits.push(CommitRecord {
            timestamp,
            author: author.trim().to_owned(),
            files,
        });
    }
    Ok(commits)
}

/// Parses `timestamp<TAB>author<TAB>path` rows. Rows sharing a timestamp
/// and author merge into one commit; output is sorted by timestamp.
pub fn parse_touch_tsv(input: &[u8]) -> Result<Vec<CommitRecord>> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Line {
        line: input[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1,
        message: "invalid UTF-8".into(),
    })?;
    let mut order: HashMap<(i64, String), usize> = HashMap::new();
    let mut commits: Vec<CommitRecord> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let line_err = |message: String| Error::Line {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(line_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let timestamp = parse_timestamp(fields[0])
            .ok_or_else(|| line_err(format!("unparsable timestamp `{}`", fields[0])))?;
        if timestamp <= 0 {
            return Err(line_err(format!("timestamp {timestamp} is not positive")));
        }
        let author = fields[1].trim();
        if author.is_empty() {
            return Err(line_err("empty author".into()));
        }
        let path = fields[2].trim();
        if path.is_empty() {
            return Err(line_err("empty path".into()));
        }
        let slot = *order
            .entry((timestamp, author.to_owned()))
            .or_insert_with(|| {
                commits.push(CommitRecord {
                    timestamp,
                    author: author.to_owned(),
                    files: Vec::new(),
                });
                commits.len() - 1
            });
        commits[slot].files.push(path.to_owned());
    }
    // stable: equal timestamps keep first-appearance order
    commits.sort_by_key(|c| c.timestamp);
    Ok(commits)
}

fn span_of(commits: &[CommitRecord]) -> Result<(i64, i64)> {
    let first = commits.iter().map(|c| c.timestamp).min().ok_or(Error::NoHistory)?;
    let last = commits.iter().map(|c| c.timestamp).max().ok_or(Error::NoHistory)?;
    Ok((first, last))
}

fn assemble(bounds: Vec<(i64, i64)>, first: i64, mode: WindowMode) -> Vec<TimeWindow> {
    let count = bounds.len();
    bounds
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| TimeWindow {
            index,
            start: match mode {
                WindowMode::Disjoint => start,
                WindowMode::Cumulative => first,
            },
            end,
            mode,
            closed_end: index + 1 == count,
        })
        .collect()
}

/// `ceil(span / interval)` windows (at least one) of `interval` seconds
/// starting at the first commit.
pub fn make_windows(commits: &[CommitRecord], interval: i64, mode: WindowMode) -> Result<Vec<TimeWindow>> {
    if interval <= 0 {
        return Err(Error::InvalidParameter(format!("interval {interval} must be positive")));
    }
    let (first, last) = span_of(commits)?;
    let span = last - first;
    let count = ((span + interval - 1) / interval).max(1);
    let bounds = (0..count)
        .map(|i| (first + i * interval, first + (i + 1) * interval))
        .collect();
    Ok(assemble(bounds, first, mode))
}

/// Splits the history span into `count` windows of (nearly) equal length.
/// Spans shorter than `count` seconds get one window per second.
pub fn make_windows_by_count(
    commits: &[CommitRecord],
    count: usize,
    mode: WindowMode,
) -> Result<Vec<TimeWindow>> {
    if count == 0 {
        return Err(Error::InvalidParameter("window count must be positive".into()));
    }
    let (first, last) = span_of(commits)?;
    let span = last - first;
    if span == 0 {
        return Ok(assemble(vec![(first, first + 1)], first, mode));
    }
    let count = (count as i64).min(span);
    let edge = |i: i64| first + ((span as i128 * i as i128) / count as i128) as i64;
    let bounds = (0..count).map(|i| (edge(i), edge(i + 1))).collect();
    Ok(assemble(bounds, first, mode))
}

pub fn windows_for(commits: &[CommitRecord], spec: WindowSpec, mode: WindowMode) -> Result<Vec<TimeWindow>> {
    match spec {
        WindowSpec::Interval(secs) => make_windows(commits, secs, mode),
        WindowSpec::Count(n) => make_windows_by_count(commits, n, mode),
    }
}

/// Developer-module activity inside one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TouchTable {
    pub window: TimeWindow,
    /// `(author, module index) -> touches`.
    pub touches: BTreeMap<(String, usize), u64>,
    /// Touches of files that map to no module.
    pub non_module_touches: BTreeMap<String, u64>,
    pub active_authors: BTreeSet<String>,
}

impl TouchTable {
    pub fn total_touches(&self) -> u64 {
        self.touches.values().sum::<u64>() + self.non_module_touches.values().sum::<u64>()
    }
}

/// Counts one touch per (commit, file) for commits inside `window`.
pub fn build_touch_table<F>(commits: &[CommitRecord], window: &TimeWindow, path_map: F) -> TouchTable
where
    F: Fn(&str) -> Option<usize>,
{
    let mut table = TouchTable {
        window: *window,
        touches: BTreeMap::new(),
        non_module_touches: BTreeMap::new(),
        active_authors: BTreeSet::new(),
    };
    for commit in commits.iter().filter(|c| window.contains(c.timestamp)) {
        table.active_authors.insert(commit.author.clone());
        for path in &commit.files {
            match path_map(path) {
                Some(m) => *table.touches.entry((commit.author.clone(), m)).or_default() += 1,
                None => *table.non_module_touches.entry(commit.author.clone()).or_default() += 1,
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = 86_400;

    fn commit(ts: i64, author: &str, files: &[&str]) -> CommitRecord {
        CommitRecord {
            timestamp: ts,
            author: author.into(),
            files: files.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn git_log_two_records() {
        let log = b"\x1eabc123\x1fAlice\x1f2008-01-02T03:04:05+00:00\n\nsrc/A.java\nREADME\n\n\x1edef456\x1fBob\x1f2008-01-03T00:00:00Z\n\nsrc/B.java\n";
        let commits = parse_git_log(log).unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].author, "Alice");
        assert_eq!(commits[0].files, vec!["src/A.java", "README"]);
        assert_eq!(commits[0].timestamp, 1_199_243_045);
        assert_eq!(commits[1].files, vec!["src/B.java"]);
    }

    #[test]
    fn git_log_empty_and_fileless() {
        assert!(parse_git_log(b"").unwrap().is_empty());
        assert!(parse_git_log(b"\n").unwrap().is_empty());
        let commits = parse_git_log(b"\x1eaaa\x1fMerger\x1f2010-05-05T10:00:00+02:00\n").unwrap();
        assert_eq!(commits.len(), 1);
        assert!(commits[0].files.is_empty());
    }

    #[test]
    fn git_log_errors_name_offset_and_field() {
        let log = b"\x1eaaa\x1fA\x1f2008-01-01T00:00:00Z\n\nx\n\x1ebbb\x1fB\x1fyesterday\n\ny\n";
        match parse_git_log(log) {
            Err(Error::GitLog { offset, field, .. }) => {
                assert_eq!(field, "date");
                let second = log.iter().rposition(|&b| b == 0x1e).unwrap();
                assert_eq!(offset, second + 1 + 6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_git_log(b"\x1eaaa\x1fA\n"),
            Err(Error::GitLog { field: "date", .. })
        ));
        assert!(matches!(
            parse_git_log(b"\x1eaaa\x1f \x1f2008-01-01T00:00:00Z\n"),
            Err(Error::GitLog { field: "author", .. })
        ));
        assert!(matches!(
            parse_git_log(b"garbage\x1eaaa"),
            Err(Error::GitLog { offset: 0, .. })
        ));
    }

    #[test]
    fn tsv_merges_and_sorts() {
        let tsv = b"# header\n2008-02-01T00:00:00Z\tbob\tb.java\n2008-01-01T00:00:00Z\talice\tx\n2008-01-01T00:00:00Z\talice\ty\n2008-01-01T00:00:00Z\talice\tz\n";
        let commits = parse_touch_tsv(tsv).unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].author, "alice");
        assert_eq!(commits[0].files, vec!["x", "y", "z"]);
        assert_eq!(commits[1].author, "bob");
    }

    #[test]
    fn tsv_errors_report_line() {
        let err = parse_touch_tsv(b"2008-01-01\ta\tx\n2008-01-01\tonly-two\n").unwrap_err();
        assert!(matches!(err, Error::Line { line: 2, .. }), "{err}");
        let err = parse_touch_tsv(b"# c\nnot-a-date\ta\tx\n").unwrap_err();
        assert!(matches!(err, Error::Line { line: 2, .. }), "{err}");
    }

    #[test]
    fn tsv_accepts_plain_dates() {
        let commits = parse_touch_tsv(b"2008-01-01\ta\tx\n2008-01-01 12:00:00\ta\ty\n").unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[1].timestamp - commits[0].timestamp, 12 * 3600);
    }

    #[test]
    fn windows_disjoint_and_cumulative() {
        let t0 = 1_000_000;
        let commits = vec![commit(t0, "a", &[]), commit(t0 + 90 * DAY, "a", &[])];
        let w = make_windows(&commits, 30 * DAY, WindowMode::Disjoint).unwrap();
        let spans: Vec<(i64, i64)> = w.iter().map(|w| (w.start - t0, w.end - t0)).collect();
        assert_eq!(spans, vec![(0, 30 * DAY), (30 * DAY, 60 * DAY), (60 * DAY, 90 * DAY)]);
        assert!(w[2].contains(t0 + 90 * DAY));
        assert!(!w[1].contains(t0 + 60 * DAY));

        let w = make_windows(&commits, 30 * DAY, WindowMode::Cumulative).unwrap();
        let spans: Vec<(i64, i64)> = w.iter().map(|w| (w.start - t0, w.end - t0)).collect();
        assert_eq!(spans, vec![(0, 30 * DAY), (0, 60 * DAY), (0, 90 * DAY)]);
    }

    #[test]
    fn single_commit_single_window() {
        let commits = vec![commit(5_000, "a", &["x"])];
        for spec in [WindowSpec::Interval(DAY), WindowSpec::Count(10)] {
            let w = windows_for(&commits, spec, WindowMode::Disjoint).unwrap();
            assert_eq!(w.len(), 1);
            assert!(w[0].contains(5_000));
        }
    }

    #[test]
    fn empty_history_is_an_error() {
        assert!(matches!(make_windows(&[], DAY, WindowMode::Disjoint), Err(Error::NoHistory)));
        assert!(matches!(
            make_windows_by_count(&[], 3, WindowMode::Disjoint),
            Err(Error::NoHistory)
        ));
    }

    #[test]
    fn count_windows_are_exact() {
        let commits = vec![commit(100, "a", &[]), commit(100 + 997, "a", &[])];
        let w = make_windows_by_count(&commits, 10, WindowMode::Disjoint).unwrap();
        assert_eq!(w.len(), 10);
        assert_eq!(w[0].start, 100);
        assert_eq!(w[9].end, 1097);
        for pair in w.windows(2) {
            assert_eq!(pair[0].end, pair[1].start);
        }
    }

    #[test]
    fn touch_table_counts() {
        let w = TimeWindow {
            index: 0,
            start: 0,
            end: 100,
            mode: WindowMode::Disjoint,
            closed_end: true,
        };
        let map = |p: &str| if p == "README.md" { None } else { Some(p.len()) };
        let t = build_touch_table(&[commit(10, "a", &["x.java"])], &w, map);
        assert_eq!(t.touches[&("a".to_string(), 6)], 1);

        let t = build_touch_table(&[commit(10, "a", &["README.md"])], &w, map);
        assert!(t.touches.is_empty());
        assert_eq!(t.non_module_touches["a"], 1);
        assert!(t.active_authors.contains("a"));

        let t = build_touch_table(
            &[commit(10, "a", &["x.java"]), commit(20, "a", &["x.java"]), commit(200, "a", &["x.java"])],
            &w,
            map,
        );
        assert_eq!(t.touches[&("a".to_string(), 6)], 2);
    }
}
