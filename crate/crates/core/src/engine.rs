//! Streaming control-event detection over attention and blink samples.
//!
//! Attention drives a hold/advance navigation protocol: a run of samples at
//! or above `attention_threshold` lasting at least `hold_ms` (measured from
//! the first sample of the run) enters the sustained-high state, and the
//! first sample below threshold leaves it. Outside sustained-high the focus
//! advances at most once per sample, whenever `advance_period_ms` has passed
//! since the previous advance or since the first attention sample.
//!
//! Blinks are compared to the previous blink strength (0 before the first
//! blink). A rise of at least `blink_delta` is a deliberate blink, and two
//! deliberate blinks whose gap lies in `[min_gap, max_gap]` form a double
//! blink. A pair is consumed once it fires; a deliberate blink that does not
//! complete a pair becomes the first half of the next candidate pair.

use serde::{Deserialize, Serialize};

use crate::sample::{Sample, TimestampMs, Track};

pub const DEFAULT_ATTENTION_THRESHOLD: i32 = 30;
pub const DEFAULT_HOLD_MS: i64 = 1000;
pub const DEFAULT_BLINK_DELTA: i32 = 20;
/// Signal-quality ceiling; the gate is off at this value.
pub const SIGNAL_QUALITY_OFF_HEAD: i32 = 200;

/// Which attention level moves the focus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigationPolarity {
    /// Sustained high attention holds the current item; otherwise advance.
    #[default]
    HoldOnHigh,
    /// Sustained high attention advances; otherwise hold.
    AdvanceOnHigh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventConfig {
    pub attention_threshold: i32,
    pub hold_ms: i64,
    pub advance_period_ms: i64,
    pub blink_delta: i32,
    pub double_blink_min_gap_ms: i64,
    pub double_blink_max_gap_ms: i64,
    /// Attention and blink samples are dropped while the latest signal
    /// quality reading is above this value.
    pub signal_quality_gate: i32,
    pub polarity: NavigationPolarity,
    /// Compare `|current - previous|` instead of `current - previous`.
    pub absolute_blink_delta: bool,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig {
            attention_threshold: DEFAULT_ATTENTION_THRESHOLD,
            hold_ms: DEFAULT_HOLD_MS,
            advance_period_ms: 1000,
            blink_delta: DEFAULT_BLINK_DELTA,
            double_blink_min_gap_ms: 100,
            double_blink_max_gap_ms: 1000,
            signal_quality_gate: SIGNAL_QUALITY_OFF_HEAD,
            polarity: NavigationPolarity::HoldOnHigh,
            absolute_blink_delta: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("attention threshold {0} outside 1..=100")]
    Threshold(i32),
    #[error("blink delta {0} outside 1..=100")]
    BlinkDelta(i32),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("double-blink gap window must satisfy 0 < min < max")]
    GapWindow,
    #[error("signal quality gate {0} outside 0..=200")]
    Gate(i32),
}

impl EventConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=100).contains(&self.attention_threshold) {
            return Err(ConfigError::Threshold(self.attention_threshold));
        }
        if !(1..=100).contains(&self.blink_delta) {
            return Err(ConfigError::BlinkDelta(self.blink_delta));
        }
        if self.hold_ms <= 0 {
            return Err(ConfigError::NonPositive("hold_ms"));
        }
        if self.advance_period_ms <= 0 {
            return Err(ConfigError::NonPositive("advance_period_ms"));
        }
        if !(0 < self.double_blink_min_gap_ms && self.double_blink_min_gap_ms < self.double_blink_max_gap_ms) {
            return Err(ConfigError::GapWindow);
        }
        if !(0..=SIGNAL_QUALITY_OFF_HEAD).contains(&self.signal_quality_gate) {
            return Err(ConfigError::Gate(self.signal_quality_gate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ControlEventKind {
    SustainedHighEnter { value: i32, run_start_ms: TimestampMs },
    SustainedHighExit { value: i32 },
    FocusAdvance { value: i32 },
    DeliberateBlink { strength: i32, delta: i32 },
    DoubleBlink { gap_ms: i64 },
}

impl ControlEventKind {
    /// Wire name of the event kind.
    pub fn name(&self) -> &'static str {
        match self {
            ControlEventKind::SustainedHighEnter { .. } => "sustainedHighEnter",
            ControlEventKind::SustainedHighExit { .. } => "sustainedHighExit",
            ControlEventKind::FocusAdvance { .. } => "focusAdvance",
            ControlEventKind::DeliberateBlink { .. } => "deliberateBlink",
            ControlEventKind::DoubleBlink { .. } => "doubleBlink",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlEvent {
    #[serde(rename = "t")]
    pub t_ms: TimestampMs,
    #[serde(flatten)]
    pub kind: ControlEventKind,
}

/// Why a sample was not applied. The state is left untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum EngineDiagnostic {
    #[error("sample at {t_ms} ms precedes last sample at {last_ms} ms")]
    OutOfOrder { t_ms: TimestampMs, last_ms: TimestampMs },
    #[error("sample at {t_ms} ms dropped: signal quality {signal_quality} above gate")]
    Gated { t_ms: TimestampMs, signal_quality: i32 },
    #[error("expected a {expected} sample, got {found}")]
    WrongTrack { expected: Track, found: Track },
}

/// Everything the engine remembers between samples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EngineState {
    last_t: Option<TimestampMs>,
    run_start: Option<TimestampMs>,
    sustained: bool,
    // Previous advance, or the first attention sample before any advance.
    advance_anchor: Option<TimestampMs>,
    prev_blink: i32,
    pending_blink: Option<TimestampMs>,
    signal_quality: i32,
}

impl EngineState {
    pub fn is_sustained(&self) -> bool {
        self.sustained
    }

    fn admit(&self, sample: &Sample, config: &EventConfig) -> Result<(), EngineDiagnostic> {
        if let Some(last_ms) = self.last_t {
            if sample.t_ms < last_ms {
                return Err(EngineDiagnostic::OutOfOrder { t_ms: sample.t_ms, last_ms });
            }
        }
        if self.signal_quality > config.signal_quality_gate {
            return Err(EngineDiagnostic::Gated { t_ms: sample.t_ms, signal_quality: self.signal_quality });
        }
        Ok(())
    }

    fn apply_attention(&mut self, t: TimestampMs, value: i32, config: &EventConfig) -> Vec<ControlEvent> {
        let mut events = Vec::new();
        self.last_t = Some(t);

        if value >= config.attention_threshold {
            let start = *self.run_start.get_or_insert(t);
            if !self.sustained && t - start >= config.hold_ms {
                self.sustained = true;
                events.push(ControlEvent {
                    t_ms: t,
                    kind: ControlEventKind::SustainedHighEnter { value, run_start_ms: start },
                });
            }
        } else {
            self.run_start = None;
            if self.sustained {
                self.sustained = false;
                events.push(ControlEvent { t_ms: t, kind: ControlEventKind::SustainedHighExit { value } });
            }
        }

        let anchor = *self.advance_anchor.get_or_insert(t);
        let moving = match config.polarity {
            NavigationPolarity::HoldOnHigh => !self.sustained,
            NavigationPolarity::AdvanceOnHigh => self.sustained,
        };
        if moving && t - anchor >= config.advance_period_ms {
            self.advance_anchor = Some(t);
            events.push(ControlEvent { t_ms: t, kind: ControlEventKind::FocusAdvance { value } });
        }
        events
    }

    fn apply_blink(&mut self, t: TimestampMs, strength: i32, config: &EventConfig) -> Vec<ControlEvent> {
        let mut events = Vec::new();
        self.last_t = Some(t);

        let mut delta = strength - self.prev_blink;
        if config.absolute_blink_delta {
            delta = delta.abs();
        }
        self.prev_blink = strength;
        if delta < config.blink_delta {
            return events;
        }

        events.push(ControlEvent { t_ms: t, kind: ControlEventKind::DeliberateBlink { strength, delta } });
        match self.pending_blink {
            Some(first) if (config.double_blink_min_gap_ms..=config.double_blink_max_gap_ms).contains(&(t - first)) => {
                self.pending_blink = None;
                events.push(ControlEvent { t_ms: t, kind: ControlEventKind::DoubleBlink { gap_ms: t - first } });
            }
            _ => self.pending_blink = Some(t),
        }
        events
    }
}

fn expect_track(sample: &Sample, expected: Track) -> Result<(), EngineDiagnostic> {
    if sample.track == expected {
        Ok(())
    } else {
        Err(EngineDiagnostic::WrongTrack { expected, found: sample.track })
    }
}

/// Applies one attention sample, returning the events it triggers and the next state.
pub fn on_attention(
    sample: &Sample,
    state: &EngineState,
    config: &EventConfig,
) -> Result<(Vec<ControlEvent>, EngineState), EngineDiagnostic> {
    expect_track(sample, Track::Attention)?;
    state.admit(sample, config)?;
    let mut next = state.clone();
    let events = next.apply_attention(sample.t_ms, sample.value, config);
    Ok((events, next))
}

/// Applies one blink-strength sample.
pub fn on_blink(
    sample: &Sample,
    state: &EngineState,
    config: &EventConfig,
) -> Result<(Vec<ControlEvent>, EngineState), EngineDiagnostic> {
    expect_track(sample, Track::Blink)?;
    state.admit(sample, config)?;
    let mut next = state.clone();
    let events = next.apply_blink(sample.t_ms, sample.value, config);
    Ok((events, next))
}

/// One engine per source stream.
#[derive(Debug, Clone, Default)]
pub struct EventEngine {
    config: EventConfig,
    state: EngineState,
}

impl EventEngine {
    pub fn new(config: EventConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(EventEngine { config, state: EngineState::default() })
    }

    pub fn config(&self) -> &EventConfig {
        &self.config
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    /// Routes any sample. Signal-quality readings update the gate, other
    /// non-control tracks only advance the clock.
    pub fn on_sample(&mut self, sample: &Sample) -> Result<Vec<ControlEvent>, EngineDiagnostic> {
        if let Some(last_ms) = self.state.last_t {
            if sample.t_ms < last_ms {
                return Err(EngineDiagnostic::OutOfOrder { t_ms: sample.t_ms, last_ms });
            }
        }
        match sample.track {
            Track::Attention | Track::Blink => {
                self.state.admit(sample, &self.config)?;
                Ok(if sample.track == Track::Attention {
                    self.state.apply_attention(sample.t_ms, sample.value, &self.config)
                } else {
                    self.state.apply_blink(sample.t_ms, sample.value, &self.config)
                })
            }
            Track::SignalQuality => {
                self.state.signal_quality = sample.value;
                self.state.last_t = Some(sample.t_ms);
                Ok(Vec::new())
            }
            Track::Meditation | Track::Raw => {
                self.state.last_t = Some(sample.t_ms);
                Ok(Vec::new())
            }
        }
    }

    /// Runs a whole trace, dropping rejected samples.
    pub fn run<'a>(&mut self, samples: impl IntoIterator<Item = &'a Sample>) -> Vec<ControlEvent> {
        samples.into_iter().filter_map(|s| self.on_sample(s).ok()).flatten().collect()
    }
}

pub const CALIBRATION_MIN_SAMPLES: usize = 10;
pub const CALIBRATION_CLAMP: (i32, i32) = (20, 80);

/// Baseline threshold from a resting recording: nearest-rank 75th
/// percentile of the attention values, clamped to [20, 80]. Fewer than ten
/// attention samples fall back to the default threshold.
pub fn calibrate(samples: &[Sample]) -> i32 {
    let mut values: Vec<i32> = samples.iter().filter(|s| s.track == Track::Attention).map(|s| s.value).collect();
    if values.len() < CALIBRATION_MIN_SAMPLES {
        return DEFAULT_ATTENTION_THRESHOLD;
    }
    values.sort_unstable();
    // nearest rank: ceil(0.75 * n), 1-based
    let rank = (3 * values.len()).div_ceil(4);
    values[rank - 1].clamp(CALIBRATION_CLAMP.0, CALIBRATION_CLAMP.1)
}
