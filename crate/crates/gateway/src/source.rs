//! The one active source feeding the gateway.
//!
//! ```text
//! device:<path>            raw headset byte stream (serial device or capture file)
//! replay:<file>[@speed]    recorded session
//! synth:<scenario>[@speed] synthetic session from a JSON scenario
//! ```

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use attnweb_core::session::{read_session, replay, InvalidSpeed};
use attnweb_core::wire::{rows_to_samples, Decoder};
use attnweb_core::{synthesize, Clock, SessionRecord, SynthScenario, TimestampMs};
use tokio::sync::mpsc;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Device(PathBuf),
    Replay { path: PathBuf, speed: f64 },
    Synth { path: PathBuf, speed: f64 },
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("source must be device:<path>, replay:<file>[@speed] or synth:<scenario>[@speed], got `{0}`")]
    Syntax(String),
    #[error(transparent)]
    Speed(#[from] InvalidSpeed),
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: std::io::Error },
    #[error("scenario {path}: {message}")]
    Scenario { path: PathBuf, message: String },
}

fn split_speed(rest: &str) -> (PathBuf, Option<f64>) {
    if let Some((path, speed)) = rest.rsplit_once('@') {
        if let Ok(speed) = speed.parse::<f64>() {
            return (PathBuf::from(path), Some(speed));
        }
    }
    (PathBuf::from(rest), None)
}

impl FromStr for SourceSpec {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| SourceError::Syntax(s.into()))?;
        if rest.is_empty() {
            return Err(SourceError::Syntax(s.into()));
        }
        let spec = match kind {
            "device" => SourceSpec::Device(PathBuf::from(rest)),
            "replay" | "synth" => {
                let (path, speed) = split_speed(rest);
                let speed = speed.unwrap_or(1.0);
                if !(speed > 0.0 && speed.is_finite()) {
                    return Err(InvalidSpeed(speed).into());
                }
                if kind == "replay" {
                    SourceSpec::Replay { path, speed }
                } else {
                    SourceSpec::Synth { path, speed }
                }
            }
            _ => return Err(SourceError::Syntax(s.into())),
        };
        Ok(spec)
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Device(p) => write!(f, "device:{}", p.display()),
            SourceSpec::Replay { path, speed } => write!(f, "replay:{}@{speed}", path.display()),
            SourceSpec::Synth { path, speed } => write!(f, "synth:{}@{speed}", path.display()),
        }
    }
}

/// A source whose files have been opened and parsed.
pub enum Loaded {
    Device(File),
    Records { records: Vec<SessionRecord>, speed: f64 },
}

impl Loaded {
    /// Session time of the first record, if known up front.
    pub fn origin(&self) -> Option<TimestampMs> {
        match self {
            Loaded::Device(_) => None,
            Loaded::Records { records, .. } => records.first().map(|r| r.t),
        }
    }

    pub fn speed(&self) -> f64 {
        match self {
            Loaded::Device(_) => 1.0,
            Loaded::Records { speed, .. } => *speed,
        }
    }
}

fn open(path: &PathBuf) -> Result<File, SourceError> {
    File::open(path).map_err(|source| SourceError::Open { path: path.clone(), source })
}

/// Opens and parses the source so missing or broken files fail at startup.
pub fn load(spec: &SourceSpec) -> Result<Loaded, SourceError> {
    match spec {
        SourceSpec::Device(path) => Ok(Loaded::Device(open(path)?)),
        SourceSpec::Replay { path, speed } => {
            let (records, diags) = read_session(BufReader::new(open(path)?));
            for d in diags {
                tracing::warn!(file = %path.display(), line = d.line, "{}", d.message);
            }
            Ok(Loaded::Records { records, speed: *speed })
        }
        SourceSpec::Synth { path, speed } => {
            let scenario_err = |message: String| SourceError::Scenario { path: path.clone(), message };
            let scenario: SynthScenario =
                serde_json::from_reader(BufReader::new(open(path)?)).map_err(|e| scenario_err(e.to_string()))?;
            let records = synthesize(&scenario).map_err(|e| scenario_err(e.to_string()))?;
            Ok(Loaded::Records { records, speed: *speed })
        }
    }
}

/// Drives the source on the calling thread, sending records in order until
/// it is exhausted or the receiver goes away.
///
/// Device bytes are decoded as they arrive and each packet's samples are
/// stamped with the clock, never earlier than the previous packet.
/// Replayed event records are skipped; the engine derives its own.
pub fn produce(loaded: Loaded, clock: Arc<dyn Clock>, restamp: bool, tx: mpsc::Sender<SessionRecord>) {
    match loaded {
        Loaded::Device(mut file) => {
            let mut decoder = Decoder::default();
            let mut last = TimestampMs::MIN;
            let mut buf = [0u8; 256];
            let emit = |packets: Vec<attnweb_core::Packet>, last: &mut TimestampMs| -> bool {
                for p in packets {
                    let t = clock.now_ms().max(*last);
                    *last = t;
                    let (samples, diags) = rows_to_samples(&p, t);
                    for d in diags {
                        tracing::debug!(?d, "row skipped");
                    }
                    for s in samples {
                        if tx.blocking_send(SessionRecord::sample(&s)).is_err() {
                            return false;
                        }
                    }
                }
                true
            };
            loop {
                let n = match file.read(&mut buf) {
                    Ok(0) => break,
                    Ok(n) => n,
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                    Err(e) => {
                        tracing::error!("device read failed: {e}");
                        break;
                    }
                };
                let (packets, diags) = decoder.feed(&buf[..n]);
                for d in diags {
                    tracing::debug!(?d, "wire diagnostic");
                }
                if !emit(packets, &mut last) {
                    return;
                }
            }
            let (packets, _) = decoder.finish();
            emit(packets, &mut last);
        }
        Loaded::Records { records, speed } => {
            let paced = replay(records, speed, clock).expect("speed validated when parsed").restamp(restamp);
            for r in paced.filter(|r| r.as_event().is_none()) {
                if tx.blocking_send(r).is_err() {
                    return;
                }
            }
        }
    }
}
