//! Core of the attention gateway: the headset wire codec, session logs and
//! synthetic sources, the control-event engine, and scroll analytics.
//!
//! Analytics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the gateway and CLI use.

pub mod analytics;
pub mod engine;
pub mod sample;
pub mod scalar;
pub mod session;
pub mod synth;
pub mod wire;

pub use engine::{calibrate, ControlEvent, ControlEventKind, EventConfig, EventEngine};
pub use sample::{Sample, TimestampMs, Track};
pub use scalar::Scalar;
pub use session::{Clock, RecordBody, SessionRecord, SystemClock, VirtualClock};
pub use synth::{synthesize, SynthScenario};
pub use wire::{decode_stream, encode_packet, rows_to_samples, DataRow, DecoderState, Packet};

pub type ScrollSample = analytics::ScrollSample<f64>;
pub type JoinedSample = analytics::JoinedSample<f64>;
pub type SectionProfile = analytics::SectionProfile<f64>;
pub type BucketStats = analytics::BucketStats<f64>;
pub type JoinReport = analytics::JoinReport<f64>;
pub type SessionAnalysis = analytics::SessionAnalysis<f64>;

pub type ScrollSampleF32 = analytics::ScrollSample<f32>;
pub type JoinedSampleF32 = analytics::JoinedSample<f32>;
pub type SectionProfileF32 = analytics::SectionProfile<f32>;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
