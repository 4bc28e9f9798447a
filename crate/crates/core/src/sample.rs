//! Timestamped readings on a single headset track.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Epoch milliseconds. Sources stamp samples on receipt; replayed sessions
/// keep whatever timeline they were recorded with.
pub type TimestampMs = i64;

/// One signal channel of the headset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track {
    Attention,
    Meditation,
    Blink,
    Raw,
    SignalQuality,
}

impl Track {
    pub const ALL: [Track; 5] = [Track::Attention, Track::Meditation, Track::Blink, Track::Raw, Track::SignalQuality];

    pub fn label(self) -> &'static str {
        match self {
            Track::Attention => "attention",
            Track::Meditation => "meditation",
            Track::Blink => "blink",
            Track::Raw => "raw",
            Track::SignalQuality => "signal_quality",
        }
    }

    /// Inclusive value range accepted on this track.
    pub fn range(self) -> (i32, i32) {
        match self {
            Track::Attention | Track::Meditation => (1, 100),
            Track::Blink => (0, 100),
            Track::Raw => (i16::MIN as i32, i16::MAX as i32),
            Track::SignalQuality => (0, 200),
        }
    }

    /// Rate at which the headset produces this track.
    pub fn native_rate_hz(self) -> f64 {
        match self {
            Track::Raw => 512.0,
            _ => 1.0,
        }
    }

    pub fn contains(self, value: i32) -> bool {
        let (lo, hi) = self.range();
        (lo..=hi).contains(&value)
    }
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown track label `{0}`")]
pub struct UnknownTrack(pub String);

impl FromStr for Track {
    type Err = UnknownTrack;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Track::ALL.into_iter().find(|t| t.label() == s).ok_or_else(|| UnknownTrack(s.to_string()))
    }
}

/// A reading on one track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub t_ms: TimestampMs,
    pub track: Track,
    pub value: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("value {value} outside the {track} range")]
pub struct OutOfRange {
    pub track: Track,
    pub value: i32,
}

impl Sample {
    /// Builds a sample, rejecting values outside the track's range.
    pub fn new(t_ms: TimestampMs, track: Track, value: i32) -> Result<Self, OutOfRange> {
        if track.contains(value) {
            Ok(Sample { t_ms, track, value })
        } else {
            Err(OutOfRange { track, value })
        }
    }

    pub fn attention(t_ms: TimestampMs, value: i32) -> Self {
        Sample { t_ms, track: Track::Attention, value }
    }

    pub fn blink(t_ms: TimestampMs, value: i32) -> Self {
        Sample { t_ms, track: Track::Blink, value }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip() {
        for t in Track::ALL {
            assert_eq!(t.label().parse::<Track>().unwrap(), t);
        }
        assert!("gamma".parse::<Track>().is_err());
    }

    #[test]
    fn ranges() {
        assert!(Sample::new(0, Track::Attention, 0).is_err());
        assert!(Sample::new(0, Track::Attention, 100).is_ok());
        assert!(Sample::new(0, Track::Blink, 0).is_ok());
        assert!(Sample::new(0, Track::SignalQuality, 201).is_err());
        assert!(Sample::new(0, Track::Raw, -32768).is_ok());
        assert!(Sample::new(0, Track::Raw, 32768).is_err());
    }
}
