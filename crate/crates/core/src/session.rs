//! Session logs: one JSON object per line, sorted by timestamp.
//!
//! ```text
//! {"t":1000,"kind":"attention","v":42}
//! {"t":1200,"kind":"scroll","page":"wiki/Main_Page","offset":0.0,"viewport":800.0,"content":1600.0}
//! {"t":1900,"kind":"event","event":"doubleBlink","gapMs":600}
//! ```
//!
//! Sample kinds (`attention`, `meditation`, `blink`, `raw`, `signal_quality`)
//! carry the value in `v`. See `docs/session-format.md` for every field.

use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::engine::{ControlEvent, ControlEventKind};
use crate::sample::{Sample, TimestampMs, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordBody {
    Attention {
        v: i32,
    },
    Meditation {
        v: i32,
    },
    Blink {
        v: i32,
    },
    Raw {
        v: i32,
    },
    SignalQuality {
        v: i32,
    },
    Scroll {
        page: String,
        offset: f64,
        viewport: f64,
        content: f64,
    },
    Event {
        #[serde(flatten)]
        event: ControlEventKind,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub t: TimestampMs,
    #[serde(flatten)]
    pub body: RecordBody,
}

impl SessionRecord {
    pub fn sample(s: &Sample) -> Self {
        let v = s.value;
        let body = match s.track {
            Track::Attention => RecordBody::Attention { v },
            Track::Meditation => RecordBody::Meditation { v },
            Track::Blink => RecordBody::Blink { v },
            Track::Raw => RecordBody::Raw { v },
            Track::SignalQuality => RecordBody::SignalQuality { v },
        };
        SessionRecord { t: s.t_ms, body }
    }

    pub fn scroll(t: TimestampMs, page: impl Into<String>, offset: f64, viewport: f64, content: f64) -> Self {
        SessionRecord { t, body: RecordBody::Scroll { page: page.into(), offset, viewport, content } }
    }

    pub fn event(e: &ControlEvent) -> Self {
        SessionRecord { t: e.t_ms, body: RecordBody::Event { event: e.kind } }
    }

    pub fn as_sample(&self) -> Option<Sample> {
        let (track, value) = match self.body {
            RecordBody::Attention { v } => (Track::Attention, v),
            RecordBody::Meditation { v } => (Track::Meditation, v),
            RecordBody::Blink { v } => (Track::Blink, v),
            RecordBody::Raw { v } => (Track::Raw, v),
            RecordBody::SignalQuality { v } => (Track::SignalQuality, v),
            _ => return None,
        };
        Some(Sample { t_ms: self.t, track, value })
    }

    pub fn as_event(&self) -> Option<ControlEvent> {
        match self.body {
            RecordBody::Event { event } => Some(ControlEvent { t_ms: self.t, kind: event }),
            _ => None,
        }
    }

    fn check(&self) -> Result<(), String> {
        if let Some(s) = self.as_sample() {
            if !s.track.contains(s.value) {
                return Err(format!("value {} outside the {} range", s.value, s.track));
            }
        }
        if let RecordBody::Scroll { offset, viewport, content, .. } = self.body {
            if !(viewport > 0.0 && content > 0.0 && offset >= 0.0 && offset.is_finite()) {
                return Err("scroll geometry must be finite with positive viewport and content".into());
            }
        }
        Ok(())
    }
}

/// Writes one line per record and returns the number written.
pub fn write_session<'a, W: Write>(
    records: impl IntoIterator<Item = &'a SessionRecord>,
    mut sink: W,
) -> io::Result<usize> {
    let mut n = 0;
    for r in records {
        write_record(&mut sink, r)?;
        n += 1;
    }
    sink.flush()?;
    Ok(n)
}

pub fn write_record<W: Write>(sink: &mut W, record: &SessionRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *sink, record)?;
    sink.write_all(b"\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadDiagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Streams records out of a session file. Malformed, out-of-range and
/// out-of-order lines are skipped and logged in [`SessionReader::diagnostics`].
pub struct SessionReader<R> {
    source: R,
    line_no: usize,
    last_t: Option<TimestampMs>,
    buf: String,
    diagnostics: Vec<ReadDiagnostic>,
}

impl<R: BufRead> SessionReader<R> {
    pub fn new(source: R) -> Self {
        SessionReader { source, line_no: 0, last_t: None, buf: String::new(), diagnostics: Vec::new() }
    }

    pub fn diagnostics(&self) -> &[ReadDiagnostic] {
        &self.diagnostics
    }

    pub fn into_diagnostics(self) -> Vec<ReadDiagnostic> {
        self.diagnostics
    }

    fn diag(&mut self, message: String) {
        self.diagnostics.push(ReadDiagnostic { line: self.line_no, message });
    }
}

impl<R: BufRead> Iterator for SessionReader<R> {
    type Item = SessionRecord;

    fn next(&mut self) -> Option<SessionRecord> {
        loop {
            self.buf.clear();
            match self.source.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.line_no += 1;
                    self.diag(format!("read error: {e}"));
                    return None;
                }
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let record = match serde_json::from_str::<SessionRecord>(line) {
                Ok(r) => r,
                Err(e) => {
                    self.diag(format!("malformed record: {e}"));
                    continue;
                }
            };
            if let Err(msg) = record.check() {
                self.diag(msg);
                continue;
            }
            if let Some(last) = self.last_t {
                if record.t < last {
                    self.diag(format!("timestamp {} precedes {}", record.t, last));
                    continue;
                }
            }
            self.last_t = Some(record.t);
            return Some(record);
        }
    }
}

/// Reads a whole session, returning the good records and the skipped lines.
pub fn read_session<R: BufRead>(source: R) -> (Vec<SessionRecord>, Vec<ReadDiagnostic>) {
    let mut reader = SessionReader::new(source);
    let records: Vec<_> = reader.by_ref().collect();
    (records, reader.into_diagnostics())
}

/// Time source for replay and live stamping.
pub trait Clock: Send + Sync {
    /// Wall-clock epoch milliseconds.
    fn now_ms(&self) -> TimestampMs;
    /// Monotonic time since the clock was created.
    fn elapsed(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> TimestampMs {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as TimestampMs).unwrap_or(0)
    }

    fn elapsed(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

/// Clock whose `sleep` advances time instantly.
#[derive(Debug)]
pub struct VirtualClock {
    epoch_ms: TimestampMs,
    nanos: AtomicU64,
}

impl VirtualClock {
    pub fn new(epoch_ms: TimestampMs) -> Self {
        VirtualClock { epoch_ms, nanos: AtomicU64::new(0) }
    }

    pub fn advance(&self, d: Duration) {
        self.nanos.fetch_add(d.as_nanos() as u64, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> TimestampMs {
        self.epoch_ms + (self.nanos.load(Ordering::SeqCst) / 1_000_000) as TimestampMs
    }

    fn elapsed(&self) -> Duration {
        Duration::from_nanos(self.nanos.load(Ordering::SeqCst))
    }

    fn sleep(&self, d: Duration) {
        self.advance(d)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("replay speed must be positive and finite, got {0}")]
pub struct InvalidSpeed(pub f64);

/// Re-emits records paced by their timestamp gaps divided by `speed`.
///
/// Deadlines are measured from the first record, so pacing does not drift
/// with per-record overhead.
pub struct Replay<I> {
    records: I,
    speed: f64,
    clock: Arc<dyn Clock>,
    restamp: bool,
    origin: Option<(Duration, TimestampMs)>,
}

pub fn replay<I>(records: I, speed: f64, clock: Arc<dyn Clock>) -> Result<Replay<I::IntoIter>, InvalidSpeed>
where
    I: IntoIterator<Item = SessionRecord>,
{
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(InvalidSpeed(speed));
    }
    Ok(Replay { records: records.into_iter(), speed, clock, restamp: false, origin: None })
}

impl<I> Replay<I> {
    /// Rewrite each record's timestamp to the clock's time at emission.
    pub fn restamp(mut self, on: bool) -> Self {
        self.restamp = on;
        self
    }
}

impl<I: Iterator<Item = SessionRecord>> Iterator for Replay<I> {
    type Item = SessionRecord;

    fn next(&mut self) -> Option<SessionRecord> {
        let mut record = self.records.next()?;
        match self.origin {
            None => self.origin = Some((self.clock.elapsed(), record.t)),
            Some((start, first_t)) => {
                let offset_ns = ((record.t - first_t).max(0) as f64 * 1e6 / self.speed).round();
                let due = start + Duration::from_nanos(offset_ns as u64);
                let now = self.clock.elapsed();
                if due > now {
                    self.clock.sleep(due - now);
                }
            }
        }
        if self.restamp {
            record.t = self.clock.now_ms();
        }
        Some(record)
    }
}
