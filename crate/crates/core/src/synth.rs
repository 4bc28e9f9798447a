//! Deterministic synthetic sessions standing in for a live headset.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`; attention noise is `StandardNormal` from
//! `rand_distr`, drawn once per attention sample whether or not the
//! segment's stddev is zero. The raw waveform uses the same seed on ChaCha
//! stream 1, so adding a raw track never perturbs the attention values.
//! Both generators are specified to be platform independent.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::sample::{Sample, TimestampMs, Track};
use crate::session::SessionRecord;

fn default_period() -> i64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_ms: i64,
    pub mean: f64,
    #[serde(default)]
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBlink {
    pub t_ms: TimestampMs,
    pub strength: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedScroll {
    pub t_ms: TimestampMs,
    pub page: String,
    pub offset: f64,
    pub viewport: f64,
    pub content: f64,
}

/// Sine plus Gaussian noise at the headset's 512 Hz raw rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawWave {
    pub amplitude: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub noise_stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub seed: u64,
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub blink_script: Vec<ScriptedBlink>,
    #[serde(default = "default_period")]
    pub sample_period_ms: i64,
    /// Added to every generated timestamp.
    #[serde(default)]
    pub start_ms: TimestampMs,
    #[serde(default)]
    pub raw: Option<RawWave>,
    #[serde(default)]
    pub scroll_script: Vec<ScriptedScroll>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("segment {0} has a non-positive duration")]
    Duration(usize),
    #[error("segment {0} has a negative or non-finite stddev")]
    Stddev(usize),
    #[error("sample period must be positive")]
    Period,
    #[error("blink strength {0} outside 0..=100")]
    BlinkStrength(i32),
    #[error("scripted scroll at {0} ms has invalid geometry")]
    Scroll(TimestampMs),
    #[error("raw wave parameters must be finite with non-negative noise")]
    Raw,
}

impl SynthScenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.sample_period_ms <= 0 {
            return Err(ScenarioError::Period);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.duration_ms <= 0 {
                return Err(ScenarioError::Duration(i));
            }
            if !(seg.stddev >= 0.0 && seg.stddev.is_finite() && seg.mean.is_finite()) {
                return Err(ScenarioError::Stddev(i));
            }
        }
        if let Some(b) = self.blink_script.iter().find(|b| !Track::Blink.contains(b.strength)) {
            return Err(ScenarioError::BlinkStrength(b.strength));
        }
        if let Some(s) = self.scroll_script.iter().find(|s| !(s.viewport > 0.0 && s.content > 0.0 && s.offset >= 0.0)) {
            return Err(ScenarioError::Scroll(s.t_ms));
        }
        if let Some(raw) = &self.raw {
            if !(raw.amplitude.is_finite() && raw.frequency_hz.is_finite() && raw.noise_stddev >= 0.0) {
                return Err(ScenarioError::Raw);
            }
        }
        Ok(())
    }

    pub fn duration_ms(&self) -> i64 {
        self.segments.iter().map(|s| s.duration_ms).sum()
    }
}

pub const RAW_RATE_HZ: i64 = 512;

/// Generates the scenario's records in time order. At equal timestamps the
/// order is attention, raw, blink, scroll.
pub fn synthesize(scenario: &SynthScenario) -> Result<Vec<SessionRecord>, ScenarioError> {
    scenario.validate()?;
    let base = scenario.start_ms;
    let total = scenario.duration_ms();
    let mut out = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut seg_end = 0;
    let mut segments = scenario.segments.iter();
    let mut current = None;
    let mut t = 0;
    while t < total {
        while t >= seg_end {
            let seg = segments.next().expect("t < total implies a remaining segment");
            seg_end += seg.duration_ms;
            current = Some(seg);
        }
        let seg = current.expect("set above");
        let z: f64 = rng.sample(StandardNormal);
        let value = (seg.mean + seg.stddev * z).round().clamp(1.0, 100.0) as i32;
        out.push(SessionRecord::sample(&Sample::attention(base + t, value)));
        t += scenario.sample_period_ms;
    }

    if let Some(wave) = &scenario.raw {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(1);
        let n = total * RAW_RATE_HZ / 1000;
        for i in 0..n {
            let secs = i as f64 / RAW_RATE_HZ as f64;
            let z: f64 = rng.sample(StandardNormal);
            let v = wave.amplitude * (TAU * wave.frequency_hz * secs).sin() + wave.noise_stddev * z;
            let v = v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i32;
            let t_ms = base + i * 1000 / RAW_RATE_HZ;
            out.push(SessionRecord::sample(&Sample { t_ms, track: Track::Raw, value: v }));
        }
    }

    for b in &scenario.blink_script {
        out.push(SessionRecord::sample(&Sample::blink(base + b.t_ms, b.strength)));
    }
    for s in &scenario.scroll_script {
        out.push(SessionRecord::scroll(base + s.t_ms, s.page.clone(), s.offset, s.viewport, s.content));
    }

    out.sort_by_key(|r| r.t);
    Ok(out)
}
