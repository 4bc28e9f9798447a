//! JSON text messages exchanged over the `/eeg` WebSocket.
//!
//! Every message is one WebSocket text frame holding one JSON object with a
//! `type` field. Field names are camelCase. See `docs/protocol.md`.

use attnweb_core::{ControlEvent, TimestampMs};
use serde::{Deserialize, Serialize, Serializer};

/// Messages a client may send.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ClientMessage {
    Subscribe {
        tracks: Vec<String>,
        /// Requested rate for every track; absent means native rate.
        #[serde(default)]
        frequency_hz: Option<f64>,
        /// Whether control events are wanted on this connection.
        #[serde(default = "yes")]
        events: bool,
    },
    Unsubscribe {
        stream_id: String,
    },
    Scroll {
        page: String,
        offset: f64,
        viewport: f64,
        content: f64,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackDescriptor {
    pub id: String,
    pub label: String,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ErrorCode {
    BadRequest,
    UnknownTrack,
    BadFrequency,
    UnknownStream,
    InvalidScroll,
}

/// Messages the gateway sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ServerMessage {
    StreamCreated {
        stream_id: String,
        tracks: Vec<TrackDescriptor>,
        events: bool,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    Data {
        stream_id: String,
        track_id: String,
        t: TimestampMs,
        #[serde(serialize_with = "compact_number")]
        value: f64,
    },
    Event(ControlEvent),
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<TimestampMs>,
    },
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        valid_tracks: Option<Vec<String>>,
    },
    Warning {
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dropped: Option<u64>,
    },
    /// The source has no more records.
    SourceEnded,
}

/// Integral values go out as JSON integers, block means as floats.
fn compact_number<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        s.serialize_i64(*v as i64)
    } else {
        s.serialize_f64(*v)
    }
}

impl ServerMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error { code, message: message.into(), valid_tracks: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}
