//! Live session log and the gateway's notion of "now" on the session
//! timeline.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use attnweb_core::analytics::{analyze_session, AnalyticsError, SessionAnalysis};
use attnweb_core::session::write_record;
use attnweb_core::{Clock, RecordBody, SessionRecord, TimestampMs};

/// How session time relates to the gateway clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timeline {
    /// Records carry clock time (device sources, restamped replays).
    Clock,
    /// Records keep their file timestamps; between records, session time
    /// advances with the clock scaled by the replay speed.
    Source { speed: f64 },
}

struct Inner {
    sink: Option<BufWriter<File>>,
    write_error: Option<io::Error>,
    written: usize,
    last_t: Option<TimestampMs>,
    anchor: (TimestampMs, Duration),
    /// Attention and scroll records, for on-demand profiles.
    kept: Vec<SessionRecord>,
}

pub struct Recorder {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    timeline: Timeline,
}

impl Recorder {
    /// `origin` is the session time at which the source starts.
    pub fn new(
        path: Option<&Path>,
        clock: Arc<dyn Clock>,
        timeline: Timeline,
        origin: TimestampMs,
    ) -> io::Result<Self> {
        let sink = path.map(File::create).transpose()?.map(BufWriter::new);
        let anchor = (origin, clock.elapsed());
        Ok(Recorder {
            inner: Mutex::new(Inner { sink, write_error: None, written: 0, last_t: None, anchor, kept: Vec::new() }),
            clock,
            timeline,
        })
    }

    fn now(&self, inner: &Inner) -> TimestampMs {
        match self.timeline {
            Timeline::Clock => self.clock.now_ms(),
            Timeline::Source { speed } => {
                let (t, at) = inner.anchor;
                let since = self.clock.elapsed().saturating_sub(at);
                t + (since.as_secs_f64() * 1000.0 * speed).floor() as TimestampMs
            }
        }
    }

    fn push(&self, inner: &mut Inner, record: SessionRecord) {
        inner.last_t = Some(inner.last_t.map_or(record.t, |l| l.max(record.t)));
        if let Some(sink) = inner.sink.as_mut() {
            if inner.write_error.is_none() {
                match write_record(sink, &record) {
                    Ok(()) => inner.written += 1,
                    Err(e) => inner.write_error = Some(e),
                }
            }
        } else {
            inner.written += 1;
        }
        if matches!(record.body, RecordBody::Attention { .. } | RecordBody::Scroll { .. }) {
            inner.kept.push(record);
        }
    }

    /// Appends a record produced by the source and re-anchors the timeline.
    pub fn append_source(&self, record: SessionRecord) {
        let mut inner = self.inner.lock().unwrap();
        inner.anchor = (record.t, self.clock.elapsed());
        self.push(&mut inner, record);
    }

    /// Appends a derived record, such as a control event.
    pub fn append(&self, record: SessionRecord) {
        let mut inner = self.inner.lock().unwrap();
        self.push(&mut inner, record);
    }

    /// Stamps a scroll report with the current session time, never earlier
    /// than the last record, and appends it.
    pub fn record_scroll(&self, page: String, offset: f64, viewport: f64, content: f64) -> SessionRecord {
        let mut inner = self.inner.lock().unwrap();
        let now = self.now(&inner);
        let t = inner.last_t.map_or(now, |l| l.max(now));
        let record = SessionRecord::scroll(t, page, offset, viewport, content);
        self.push(&mut inner, record.clone());
        record
    }

    pub fn analysis(&self, buckets: usize, max_skew_ms: i64) -> Result<SessionAnalysis<f64>, AnalyticsError> {
        let inner = self.inner.lock().unwrap();
        analyze_session(&inner.kept, buckets, max_skew_ms)
    }

    /// Flushes the session file; returns the number of records written.
    pub fn flush(&self) -> io::Result<usize> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(e) = inner.write_error.take() {
            return Err(e);
        }
        if let Some(sink) = inner.sink.as_mut() {
            sink.flush()?;
        }
        Ok(inner.written)
    }
}
