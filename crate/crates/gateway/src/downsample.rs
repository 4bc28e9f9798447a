//! Per-subscription rate reduction.
//!
//! eSense tracks are decimated: the first sample in each output period is
//! forwarded, the rest dropped. Raw EEG is averaged over blocks of
//! `floor(native / requested)` consecutive samples.

use attnweb_core::{Sample, TimestampMs, Track};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("frequency must be positive and finite, got {0}")]
pub struct BadFrequency(pub f64);

/// Rate actually granted for a request, and whether it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grant {
    pub frequency_hz: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub enum Downsampler {
    Passthrough,
    Decimate { period_ms: f64, origin: Option<TimestampMs>, last_slot: Option<i64> },
    BlockMean { block: usize, sum: i64, n: usize },
}

impl Downsampler {
    /// Builds the reducer for `track` at `requested` Hz (native when `None`).
    pub fn new(track: Track, requested: Option<f64>) -> Result<(Self, Grant), BadFrequency> {
        let native = track.native_rate_hz();
        let f = requested.unwrap_or(native);
        if !(f > 0.0 && f.is_finite()) {
            return Err(BadFrequency(f));
        }
        let clamped = f > native;
        let f = f.min(native);
        if f == native {
            return Ok((Downsampler::Passthrough, Grant { frequency_hz: native, clamped }));
        }
        if track == Track::Raw {
            let block = ((native / f).floor() as usize).max(1);
            let grant = Grant { frequency_hz: native / block as f64, clamped };
            return Ok((Downsampler::BlockMean { block, sum: 0, n: 0 }, grant));
        }
        let ds = Downsampler::Decimate { period_ms: 1000.0 / f, origin: None, last_slot: None };
        Ok((ds, Grant { frequency_hz: f, clamped }))
    }

    /// Feeds one sample; returns the value to emit, if any.
    pub fn push(&mut self, s: &Sample) -> Option<(TimestampMs, f64)> {
        match self {
            Downsampler::Passthrough => Some((s.t_ms, s.value as f64)),
            Downsampler::Decimate { period_ms, origin, last_slot } => {
                let t0 = *origin.get_or_insert(s.t_ms);
                let slot = ((s.t_ms - t0) as f64 / *period_ms).floor() as i64;
                if last_slot.is_some_and(|l| slot <= l) {
                    return None;
                }
                *last_slot = Some(slot);
                Some((s.t_ms, s.value as f64))
            }
            Downsampler::BlockMean { block, sum, n } => {
                *sum += s.value as i64;
                *n += 1;
                if *n < *block {
                    return None;
                }
                let mean = *sum as f64 / *n as f64;
                *sum = 0;
                *n = 0;
                Some((s.t_ms, mean))
            }
        }
    }
}
