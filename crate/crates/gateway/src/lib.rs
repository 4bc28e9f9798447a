//! Streams headset samples and control events to WebSocket subscribers and
//! records scroll telemetry alongside them.
//!
//! One source (device, replay or synthetic) feeds the decoder, the event
//! engine and the session recorder; a fan-out layer delivers to each
//! connection through its own bounded outbox.

pub mod downsample;
pub mod hub;
pub mod protocol;
pub mod queue;
pub mod recorder;
pub mod server;
pub mod source;

pub use protocol::{ClientMessage, ServerMessage, TrackDescriptor};
pub use server::{Gateway, GatewayError, GatewayOptions, RunSummary, DEFAULT_LISTEN};
pub use source::{SourceError, SourceSpec};
