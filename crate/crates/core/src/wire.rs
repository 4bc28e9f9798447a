//! Framed binary serial protocol spoken by the headset.
//!
//! Every frame on the wire has the layout
//!
//! ```text
//! AA AA | P | payload (P bytes, 1..=169) | checksum
//! ```
//!
//! where `checksum = !(sum(payload) as u8)`. The payload is a sequence of
//! data rows. A row whose code is below `0x80` carries exactly one value
//! byte; codes at or above `0x80` carry a length byte `L` followed by `L`
//! value bytes.
//!
//! | code   | track          | value                                  |
//! |--------|----------------|----------------------------------------|
//! | `0x02` | signal quality | 0 good .. 200 off-head                 |
//! | `0x04` | attention      | 0..=100 (0 = no reading yet)           |
//! | `0x05` | meditation     | 0..=100 (0 = no reading yet)           |
//! | `0x16` | blink strength | 0..=100                                |
//! | `0x80` | raw EEG        | `L = 2`, signed 16-bit big-endian      |
//!
//! Rows with other codes are carried through the decoder untouched and
//! skipped by [`rows_to_samples`].

use serde::{Deserialize, Serialize};

use crate::sample::{Sample, TimestampMs, Track};

pub const SYNC: u8 = 0xAA;
pub const MAX_PAYLOAD: usize = 169;
/// Sync pair, length byte and checksum.
pub const FRAME_OVERHEAD: usize = 4;

pub mod code {
    pub const SIGNAL_QUALITY: u8 = 0x02;
    pub const ATTENTION: u8 = 0x04;
    pub const MEDITATION: u8 = 0x05;
    pub const BLINK: u8 = 0x16;
    pub const RAW: u8 = 0x80;
    /// First code that carries a length-prefixed value.
    pub const MULTI_BYTE: u8 = 0x80;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowValue {
    Byte(u8),
    Bytes(Vec<u8>),
}

/// One code/value pair inside a packet payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataRow {
    pub code: u8,
    pub value: RowValue,
}

impl DataRow {
    pub fn byte(code: u8, value: u8) -> Self {
        DataRow { code, value: RowValue::Byte(value) }
    }

    pub fn bytes(code: u8, value: impl Into<Vec<u8>>) -> Self {
        DataRow { code, value: RowValue::Bytes(value.into()) }
    }

    pub fn signal_quality(v: u8) -> Self {
        Self::byte(code::SIGNAL_QUALITY, v)
    }

    pub fn attention(v: u8) -> Self {
        Self::byte(code::ATTENTION, v)
    }

    pub fn meditation(v: u8) -> Self {
        Self::byte(code::MEDITATION, v)
    }

    pub fn blink(v: u8) -> Self {
        Self::byte(code::BLINK, v)
    }

    pub fn raw(v: i16) -> Self {
        Self::bytes(code::RAW, v.to_be_bytes().to_vec())
    }

    /// Number of payload bytes this row occupies once encoded.
    pub fn encoded_len(&self) -> usize {
        match &self.value {
            RowValue::Byte(_) => 2,
            RowValue::Bytes(b) => 2 + b.len(),
        }
    }

    fn validate(&self) -> Result<(), EncodeError> {
        let out_of_range = |value: i64| EncodeError::ValueOutOfRange { code: self.code, value };
        match (&self.value, self.code) {
            (RowValue::Byte(_), c) if c >= code::MULTI_BYTE => Err(EncodeError::ShapeMismatch { code: c }),
            (RowValue::Bytes(_), c) if c < code::MULTI_BYTE => Err(EncodeError::ShapeMismatch { code: c }),
            (RowValue::Byte(v), code::SIGNAL_QUALITY) if *v > 200 => Err(out_of_range(*v as i64)),
            (RowValue::Byte(v), code::ATTENTION | code::MEDITATION | code::BLINK) if *v > 100 => {
                Err(out_of_range(*v as i64))
            }
            (RowValue::Bytes(b), code::RAW) if b.len() != 2 => Err(out_of_range(b.len() as i64)),
            (RowValue::Bytes(b), _) if b.len() > MAX_PAYLOAD => Err(EncodeError::PayloadTooLong { len: b.len() + 2 }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub rows: Vec<DataRow>,
}

impl Packet {
    pub fn new(rows: Vec<DataRow>) -> Self {
        Packet { rows }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error("payload of {len} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLong { len: usize },
    #[error("a packet needs at least one row")]
    Empty,
    #[error("value {value} out of range for row code {code:#04x}")]
    ValueOutOfRange { code: u8, value: i64 },
    #[error("row code {code:#04x} has the wrong value shape")]
    ShapeMismatch { code: u8 },
}

pub fn checksum(payload: &[u8]) -> u8 {
    !payload.iter().fold(0u8, |acc, b| acc.wrapping_add(*b))
}

/// Serializes rows into one complete frame.
pub fn encode_packet(rows: &[DataRow]) -> Result<Vec<u8>, EncodeError> {
    if rows.is_empty() {
        return Err(EncodeError::Empty);
    }
    for row in rows {
        row.validate()?;
    }
    let len: usize = rows.iter().map(DataRow::encoded_len).sum();
    if len > MAX_PAYLOAD {
        return Err(EncodeError::PayloadTooLong { len });
    }

    let mut out = Vec::with_capacity(len + FRAME_OVERHEAD);
    out.extend_from_slice(&[SYNC, SYNC, len as u8]);
    for row in rows {
        out.push(row.code);
        match &row.value {
            RowValue::Byte(v) => out.push(*v),
            RowValue::Bytes(b) => {
                out.push(b.len() as u8);
                out.extend_from_slice(b);
            }
        }
    }
    out.push(checksum(&out[3..]));
    Ok(out)
}

/// Non-fatal findings while scanning a byte stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeDiagnostic {
    /// Bytes discarded while hunting for the next frame.
    Resync {
        skipped: usize,
    },
    ChecksumMismatch {
        expected: u8,
        found: u8,
    },
    /// Checksum passed but the rows do not tile the payload.
    MalformedPayload {
        reason: &'static str,
    },
}

/// Bytes carried over between [`decode_stream`] calls.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecoderState {
    pending: Vec<u8>,
    skipped: usize,
}

impl DecoderState {
    /// Buffered bytes that did not yet form a full frame.
    pub fn pending(&self) -> &[u8] {
        &self.pending
    }
}

/// Scans `bytes` (appended to whatever `state` retained) for frames.
///
/// Never fails: garbage becomes [`DecodeDiagnostic`]s and an incomplete
/// trailing frame is kept in the returned state. A frame failing its
/// checksum is reported and scanning resumes one byte past its sync.
/// Splitting the input into arbitrary chunks yields the same packets and
/// diagnostics as one call.
pub fn decode_stream(bytes: &[u8], mut state: DecoderState) -> (Vec<Packet>, Vec<DecodeDiagnostic>, DecoderState) {
    let mut packets = Vec::new();
    let mut diags = Vec::new();
    state.pending.extend_from_slice(bytes);

    let buf = &state.pending;
    let mut pos = 0;
    loop {
        let rest = &buf[pos..];
        let Some(sync_at) = rest.windows(2).position(|w| w == [SYNC, SYNC]) else {
            // Keep a lone trailing sync byte; it may pair with the next chunk.
            let keep = usize::from(rest.last() == Some(&SYNC));
            state.skipped += rest.len() - keep;
            pos = buf.len() - keep;
            break;
        };
        state.skipped += sync_at;
        pos += sync_at;

        let Some(&len) = buf.get(pos + 2) else { break };
        let len = len as usize;
        if len == 0 || len > MAX_PAYLOAD {
            state.skipped += 1;
            pos += 1;
            continue;
        }
        let frame_len = len + FRAME_OVERHEAD;
        if buf.len() - pos < frame_len {
            break;
        }

        if state.skipped > 0 {
            diags.push(DecodeDiagnostic::Resync { skipped: state.skipped });
            state.skipped = 0;
        }
        let payload = &buf[pos + 3..pos + 3 + len];
        let found = buf[pos + 3 + len];
        let expected = checksum(payload);
        let rejected = if expected != found {
            DecodeDiagnostic::ChecksumMismatch { expected, found }
        } else {
            match parse_payload(payload) {
                Ok(rows) => {
                    packets.push(Packet { rows });
                    pos += frame_len;
                    continue;
                }
                Err(reason) => DecodeDiagnostic::MalformedPayload { reason },
            }
        };
        // A bad frame may be a false sync inside garbage that overlaps a real
        // frame, so only its first byte is dropped before rescanning.
        diags.push(rejected);
        state.skipped += 1;
        pos += 1;
    }

    state.pending.drain(..pos);
    (packets, diags, state)
}

/// Flushes a finished stream: a trailing partial frame is treated as
/// garbage and rescanned for complete frames, and any bytes skipped since
/// the last frame are reported.
pub fn finish(mut state: DecoderState) -> (Vec<Packet>, Vec<DecodeDiagnostic>) {
    let mut packets = Vec::new();
    let mut diags = Vec::new();
    loop {
        let (p, d, next) = decode_stream(&[], state);
        packets.extend(p);
        diags.extend(d);
        state = next;
        if state.pending.is_empty() {
            break;
        }
        state.pending.remove(0);
        state.skipped += 1;
    }
    if state.skipped > 0 {
        diags.push(DecodeDiagnostic::Resync { skipped: state.skipped });
    }
    (packets, diags)
}

fn parse_payload(payload: &[u8]) -> Result<Vec<DataRow>, &'static str> {
    let mut rows = Vec::new();
    let mut i = 0;
    while i < payload.len() {
        let code = payload[i];
        i += 1;
        if code >= code::MULTI_BYTE {
            let &len = payload.get(i).ok_or("missing row length")?;
            i += 1;
            let end = i + len as usize;
            let value = payload.get(i..end).ok_or("row overruns payload")?;
            rows.push(DataRow::bytes(code, value));
            i = end;
        } else {
            let &v = payload.get(i).ok_or("missing row value")?;
            rows.push(DataRow::byte(code, v));
            i += 1;
        }
    }
    Ok(rows)
}

/// Stateful wrapper around [`decode_stream`] for callers that own the stream.
#[derive(Debug, Default)]
pub struct Decoder {
    state: DecoderState,
}

impl Decoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> (Vec<Packet>, Vec<DecodeDiagnostic>) {
        let (packets, diags, state) = decode_stream(bytes, std::mem::take(&mut self.state));
        self.state = state;
        (packets, diags)
    }

    /// Ends the stream; see [`finish`].
    pub fn finish(self) -> (Vec<Packet>, Vec<DecodeDiagnostic>) {
        finish(self.state)
    }
}

/// Rows that could not be mapped onto a track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowDiagnostic {
    UnknownCode {
        code: u8,
    },
    /// eSense value 0: the headset has no estimate yet.
    NoReading {
        track: Track,
    },
    ValueOutOfRange {
        track: Track,
        value: i32,
    },
    BadRawLength {
        len: usize,
    },
}

/// Maps the recognized rows of a validated packet onto samples stamped `t_ms`.
pub fn rows_to_samples(packet: &Packet, t_ms: TimestampMs) -> (Vec<Sample>, Vec<RowDiagnostic>) {
    let mut samples = Vec::with_capacity(packet.rows.len());
    let mut diags = Vec::new();
    for row in &packet.rows {
        let (track, value) = match (row.code, &row.value) {
            (code::SIGNAL_QUALITY, RowValue::Byte(v)) => (Track::SignalQuality, *v as i32),
            (code::ATTENTION, RowValue::Byte(v)) => (Track::Attention, *v as i32),
            (code::MEDITATION, RowValue::Byte(v)) => (Track::Meditation, *v as i32),
            (code::BLINK, RowValue::Byte(v)) => (Track::Blink, *v as i32),
            (code::RAW, RowValue::Bytes(b)) => match b.as_slice() {
                [hi, lo] => (Track::Raw, i16::from_be_bytes([*hi, *lo]) as i32),
                _ => {
                    diags.push(RowDiagnostic::BadRawLength { len: b.len() });
                    continue;
                }
            },
            (code, _) => {
                diags.push(RowDiagnostic::UnknownCode { code });
                continue;
            }
        };
        if value == 0 && matches!(track, Track::Attention | Track::Meditation) {
            diags.push(RowDiagnostic::NoReading { track });
            continue;
        }
        match Sample::new(t_ms, track, value) {
            Ok(s) => samples.push(s),
            Err(_) => diags.push(RowDiagnostic::ValueOutOfRange { track, value }),
        }
    }
    (samples, diags)
}
