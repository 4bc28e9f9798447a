//! Offline section profiles from recorded sessions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use attnweb_core::analytics::analyze_sessions;
use attnweb_core::session::read_session;
use attnweb_core::{SectionProfile, SessionAnalysis, SessionRecord};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CSV_HEADER: [&str; 5] = ["page_id", "scroll_pct_bucket", "mean", "count", "max"];

/// The `--profile` JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub buckets: usize,
    pub max_skew_ms: i64,
    pub sessions: usize,
    pub joined: usize,
    pub dropped: usize,
    pub clamped: usize,
    pub pages: BTreeMap<String, SectionProfile>,
}

impl ProfileDocument {
    pub fn new(analysis: SessionAnalysis, buckets: usize, max_skew_ms: i64, sessions: usize) -> Self {
        ProfileDocument {
            buckets,
            max_skew_ms,
            sessions,
            joined: analysis.joined,
            dropped: analysis.dropped,
            clamped: analysis.clamped,
            pages: analysis.profiles,
        }
    }
}

/// Reads every session; skipped lines come back as warnings.
pub fn load_sessions(paths: &[PathBuf]) -> Result<(Vec<Vec<SessionRecord>>, Vec<String>), CliError> {
    let mut sessions = Vec::with_capacity(paths.len());
    let mut warnings = Vec::new();
    for path in paths {
        let file = File::open(path).map_err(|e| CliError::Runtime(format!("cannot open {}: {e}", path.display())))?;
        let (records, diags) = read_session(BufReader::new(file));
        for d in diags {
            warnings.push(format!("{}:{}: {}", path.display(), d.line, d.message));
        }
        if records.is_empty() {
            warnings.push(format!("{}: no records", path.display()));
        }
        sessions.push(records);
    }
    Ok((sessions, warnings))
}

pub fn analyze(
    paths: &[PathBuf],
    buckets: usize,
    max_skew_ms: i64,
) -> Result<(ProfileDocument, Vec<String>), CliError> {
    if buckets == 0 {
        return Err(CliError::Usage("--buckets must be at least 1".into()));
    }
    if max_skew_ms < 0 {
        return Err(CliError::Usage("--max-skew-ms must not be negative".into()));
    }
    let (sessions, mut warnings) = load_sessions(paths)?;
    let analysis = analyze_sessions(&sessions, buckets, max_skew_ms).map_err(|e| CliError::Runtime(e.to_string()))?;
    if analysis.joined == 0 {
        warnings.push("no attention sample could be paired with a scroll position".into());
    }
    Ok((ProfileDocument::new(analysis, buckets, max_skew_ms, paths.len()), warnings))
}

/// One row per page and bucket; empty buckets leave mean and max blank.
pub fn write_csv<W: Write>(doc: &ProfileDocument, sink: W) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Runtime(format!("cannot write CSV: {e}"));
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER).map_err(io_err)?;
    for (page, profile) in &doc.pages {
        for (i, b) in profile.buckets.iter().enumerate() {
            let mean = b.mean.map(|m| m.to_string()).unwrap_or_default();
            let max = b.max.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([page.as_str(), &i.to_string(), &mean, &b.count.to_string(), &max]).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Runtime(format!("cannot write CSV: {e}")))
}

pub fn csv_string(doc: &ProfileDocument) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(doc, &mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn write_profile(doc: &ProfileDocument, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use attnweb_core::session::write_session;

    fn session(dir: &Path, name: &str, records: &[SessionRecord]) -> PathBuf {
        let path = dir.join(name);
        write_session(records, File::create(&path).unwrap()).unwrap();
        path
    }

    fn att(t: i64, v: i32) -> SessionRecord {
        SessionRecord { t, body: attnweb_core::RecordBody::Attention { v } }
    }

    #[test]
    fn csv_rows_and_blank_buckets() {
        let dir = tempfile::tempdir().unwrap();
        let p = session(
            dir.path(),
            "a.session",
            &[SessionRecord::scroll(0, "p", 0.0, 800.0, 1600.0), att(100, 60), att(200, 40)],
        );
        let (doc, warnings) = analyze(&[p], 4, 500).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(doc.joined, 2);
        let csv = csv_string(&doc).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "page_id,scroll_pct_bucket,mean,count,max");
        assert_eq!(lines[1], "p,0,,0,");
        assert_eq!(lines[3], "p,2,50,2,60");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn empty_session_warns_without_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = session(dir.path(), "empty.session", &[]);
        let (doc, warnings) = analyze(&[p], 20, 500).unwrap();
        assert_eq!(warnings.len(), 2);
        assert_eq!(csv_string(&doc).unwrap().lines().count(), 1);
    }

    #[test]
    fn missing_file_is_a_runtime_error() {
        let err = analyze(&[PathBuf::from("/nonexistent/x.session")], 20, 500).unwrap_err();
        assert_eq!(err.exit_code(), crate::EXIT_RUNTIME);
        assert_eq!(analyze(&[], 0, 500).unwrap_err().exit_code(), crate::EXIT_USAGE);
    }
}
