//! Picks an attention threshold from a short resting recording.

use std::io::Read;
use std::time::{Duration, Instant};

use attnweb_core::engine::{CALIBRATION_MIN_SAMPLES, DEFAULT_ATTENTION_THRESHOLD};
use attnweb_core::wire::{rows_to_samples, Decoder};
use attnweb_core::{calibrate, Clock, Sample, SystemClock, Track};
use attnweb_gateway::source::{load, Loaded};
use attnweb_gateway::SourceSpec;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calibration {
    pub threshold: i32,
    /// Attention samples used.
    pub samples: usize,
}

impl Calibration {
    pub fn fell_back(&self) -> bool {
        self.samples < CALIBRATION_MIN_SAMPLES
    }
}

/// Attention samples from the first `duration_ms` of the source.
///
/// Recorded and synthetic sources are cut by session time. A device is read
/// for `duration_ms` of wall time or until it reports end of file.
pub fn collect(spec: &SourceSpec, duration_ms: i64) -> Result<Vec<Sample>, CliError> {
    if duration_ms <= 0 {
        return Err(CliError::Usage("--duration-ms must be positive".into()));
    }
    let loaded = load(spec).map_err(|e| CliError::Runtime(e.to_string()))?;
    let attention = |s: &Sample| s.track == Track::Attention;
    match loaded {
        Loaded::Records { records, .. } => {
            let samples: Vec<Sample> = records.iter().filter_map(|r| r.as_sample()).filter(attention).collect();
            let Some(t0) = samples.first().map(|s| s.t_ms) else { return Ok(samples) };
            Ok(samples.into_iter().take_while(|s| s.t_ms - t0 < duration_ms).collect())
        }
        Loaded::Device(mut file) => {
            let clock = SystemClock::new();
            let deadline = Instant::now() + Duration::from_millis(duration_ms as u64);
            let mut decoder = Decoder::new();
            let mut out = Vec::new();
            let mut buf = [0u8; 256];
            let stamp = |packets: Vec<attnweb_core::Packet>, out: &mut Vec<Sample>| {
                for p in packets {
                    out.extend(rows_to_samples(&p, clock.now_ms()).0.into_iter().filter(attention));
                }
            };
            while Instant::now() < deadline {
                let n = match file.read(&mut buf) {
                    Ok(0) => break,
                    Ok(n) => n,
                    Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
                    Err(e) => return Err(CliError::Runtime(format!("device read failed: {e}"))),
                };
                stamp(decoder.feed(&buf[..n]).0, &mut out);
            }
            stamp(decoder.finish().0, &mut out);
            Ok(out)
        }
    }
}

pub fn run(spec: &SourceSpec, duration_ms: i64) -> Result<Calibration, CliError> {
    let samples = collect(spec, duration_ms)?;
    let threshold = calibrate(&samples);
    debug_assert!(samples.len() >= CALIBRATION_MIN_SAMPLES || threshold == DEFAULT_ATTENTION_THRESHOLD);
    Ok(Calibration { threshold, samples: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use attnweb_core::session::write_session;
    use attnweb_core::SessionRecord;

    fn replay_of(values: &[i32]) -> (tempfile::TempDir, SourceSpec) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rest.session");
        let records: Vec<SessionRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| SessionRecord::sample(&Sample { t_ms: i as i64 * 1000, track: Track::Attention, value: v }))
            .collect();
        write_session(&records, std::fs::File::create(&path).unwrap()).unwrap();
        (dir, SourceSpec::Replay { path, speed: 1.0 })
    }

    #[test]
    fn constant_trace_gives_its_value() {
        let (_dir, spec) = replay_of(&[50; 30]);
        assert_eq!(run(&spec, 20_000).unwrap(), Calibration { threshold: 50, samples: 20 });
    }

    #[test]
    fn too_few_samples_fall_back() {
        let (_dir, spec) = replay_of(&[70; 5]);
        let c = run(&spec, 20_000).unwrap();
        assert!(c.fell_back());
        assert_eq!(c.threshold, DEFAULT_ATTENTION_THRESHOLD);
    }

    #[test]
    fn device_capture_is_decoded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("capture.bin");
        let mut bytes = Vec::new();
        for _ in 0..12 {
            bytes.extend(attnweb_core::encode_packet(&[attnweb_core::DataRow::attention(64)]).unwrap());
        }
        std::fs::write(&path, bytes).unwrap();
        let c = run(&SourceSpec::Device(path), 5_000).unwrap();
        assert_eq!(c, Calibration { threshold: 64, samples: 12 });
    }
}
