//! The committed fixture corpus, regenerated deterministically.
//!
//! ```text
//! scenarios/*.scenario   synthetic scenarios (JSON)
//! sessions/*.session     the scenarios rendered as session logs
//! wire/*.hex             headset byte streams as hex dumps
//! wire/manifest.json     expected decode outcome of each dump
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use attnweb_core::session::write_session;
use attnweb_core::synth::{ScriptedBlink, ScriptedScroll, Segment};
use attnweb_core::wire::{DataRow, Packet};
use attnweb_core::{encode_packet, synthesize, SynthScenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hex::to_hex;
use crate::CliError;

/// Page used by the mid-page reading fixtures.
pub const MIDPAGE_PAGE: &str = "wiki/Main_Page";

pub struct FixtureFile {
    /// Relative to the fixture root.
    pub path: PathBuf,
    pub contents: Vec<u8>,
}

fn scenario(seed: u64, segments: &[(i64, f64, f64)]) -> SynthScenario {
    SynthScenario {
        seed,
        segments: segments.iter().map(|&(duration_ms, mean, stddev)| Segment { duration_ms, mean, stddev }).collect(),
        blink_script: vec![],
        sample_period_ms: 1000,
        start_ms: 0,
        raw: None,
        scroll_script: vec![],
    }
}

/// Two minutes of steady reading, well above the default threshold.
pub fn reading() -> SynthScenario {
    scenario(4, &[(120_000, 62.0, 6.0)])
}

/// Casual blinks (rise below 20 over the previous blink) around two
/// planted deliberate pairs at 10.0/10.5 s and 25.0/25.7 s.
pub fn blinks() -> SynthScenario {
    let script = [
        (1_000, 15),
        (2_500, 25),
        (4_000, 18),
        (5_500, 30),
        (7_000, 22),
        (10_000, 70),
        (10_250, 15),
        (10_500, 72),
        (13_000, 30),
        (14_500, 38),
        (16_000, 25),
        (17_500, 33),
        (19_000, 41),
        (20_500, 28),
        (25_000, 80),
        (25_300, 20),
        (25_700, 75),
        (28_000, 35),
        (29_500, 45),
        (31_000, 30),
        (32_500, 42),
    ];
    SynthScenario {
        blink_script: script.iter().map(|&(t_ms, strength)| ScriptedBlink { t_ms, strength }).collect(),
        ..scenario(3, &[(40_000, 45.0, 8.0)])
    }
}

/// Thirty attention samples and a few blinks; the gateway replay fixture.
pub fn replay_30s() -> SynthScenario {
    SynthScenario {
        blink_script: [(4_500, 30), (12_500, 60), (21_500, 40)]
            .iter()
            .map(|&(t_ms, strength)| ScriptedBlink { t_ms, strength })
            .collect(),
        start_ms: 1_000_000,
        ..scenario(30, &[(30_000, 50.0, 15.0)])
    }
}

/// Reading a page top to bottom over 100 s with attention raised while the
/// middle of the page is on screen.
pub fn midpage(seed: u64) -> SynthScenario {
    let (viewport, content) = (800.0, 8000.0);
    // Offsets at which the scroll percentage sweeps 10 % to 100 %.
    let max_offset = (content - viewport) / 2.0;
    let scroll_script = (0..100)
        .map(|k| ScriptedScroll {
            t_ms: k * 1000 + 200,
            page: MIDPAGE_PAGE.into(),
            offset: max_offset * k as f64 / 99.0,
            viewport,
            content,
        })
        .collect();
    SynthScenario { scroll_script, ..scenario(seed, &[(35_000, 30.0, 5.0), (30_000, 70.0, 5.0), (35_000, 30.0, 5.0)]) }
}

/// Thirty seconds at a constant 50, for calibration.
pub fn constant_50() -> SynthScenario {
    scenario(50, &[(30_000, 50.0, 0.0)])
}

pub fn scenarios() -> Vec<(&'static str, SynthScenario)> {
    vec![
        ("reading", reading()),
        ("blinks", blinks()),
        ("replay-30s", replay_30s()),
        ("midpage-a", midpage(61)),
        ("midpage-b", midpage(62)),
        ("constant-50", constant_50()),
    ]
}

/// Expected outcome of decoding a wire dump in full, including the flush
/// at end of stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireExpectation {
    pub description: String,
    pub packets: usize,
    pub checksum_mismatches: usize,
    pub malformed: usize,
    /// Sum of all `Resync` diagnostics.
    pub skipped_bytes: usize,
}

fn expect(
    description: &str,
    packets: usize,
    checksum_mismatches: usize,
    malformed: usize,
    skipped: usize,
) -> WireExpectation {
    WireExpectation { description: description.into(), packets, checksum_mismatches, malformed, skipped_bytes: skipped }
}

/// Hand-assembled frames with hand-computed outcomes.
pub fn small_wire_fixtures() -> Vec<(&'static str, Vec<u8>, WireExpectation)> {
    vec![
        ("valid-attention", vec![0xAA, 0xAA, 0x02, 0x04, 0x32, 0xC9], expect("attention 50", 1, 0, 0, 0)),
        ("valid-raw", vec![0xAA, 0xAA, 0x04, 0x80, 0x02, 0x01, 0xF4, 0x88], expect("raw sample 500", 1, 0, 0, 0)),
        (
            "valid-esense",
            vec![0xAA, 0xAA, 0x08, 0x02, 0x00, 0x04, 0x30, 0x05, 0x3D, 0x16, 0x37, 0x3A],
            expect("signal quality 0, attention 48, meditation 61, blink 55", 1, 0, 0, 0),
        ),
        (
            "corrupt-checksum",
            vec![0xAA, 0xAA, 0x02, 0x04, 0x32, 0x00],
            expect("attention frame with checksum 00 instead of C9", 0, 1, 0, 6),
        ),
        (
            "garbage-prefix",
            vec![0x00, 0xFF, 0x12, 0xAA, 0xAA, 0x02, 0x04, 0x32, 0xC9],
            expect("three garbage bytes before a valid frame", 1, 0, 0, 3),
        ),
        (
            "truncated",
            vec![0xAA, 0xAA, 0x04, 0x80, 0x02, 0x01],
            expect("raw frame cut off before its last value byte and checksum", 0, 0, 0, 6),
        ),
        (
            "oversize-length",
            vec![0xAA, 0xAA, 0xC8, 0x01, 0x02, 0xAA, 0xAA, 0x02, 0x04, 0x32, 0xC9],
            expect("length byte 200 exceeds 169; the following frame decodes", 1, 0, 0, 5),
        ),
        (
            "malformed-payload",
            vec![0xAA, 0xAA, 0x02, 0x80, 0x05, 0x7A],
            expect("checksum passes but the raw row claims 5 bytes", 0, 0, 1, 6),
        ),
        (
            "triple-sync",
            vec![0xAA, 0xAA, 0xAA, 0x02, 0x04, 0x32, 0xC9],
            expect("an extra sync byte before a valid frame", 1, 0, 0, 1),
        ),
    ]
}

/// A long mixed stream with known content.
pub struct WireStream {
    pub bytes: Vec<u8>,
    /// Intact frames in stream order.
    pub packets: Vec<Packet>,
    pub corrupted: usize,
    pub skipped_bytes: usize,
}

fn no_sync(rng: &mut ChaCha8Rng, range: std::ops::RangeInclusive<u8>) -> u8 {
    loop {
        let b = rng.random_range(range.clone());
        if b != 0xAA {
            return b;
        }
    }
}

/// At least `min_len` bytes of eSense and raw frames with garbage bursts,
/// corrupted checksums and a truncated frame at the end.
///
/// Value bytes, garbage and corrupted checksums never equal the sync byte,
/// so no spurious frame can start inside them and the decoder must recover
/// exactly `packets`.
pub fn wire_stream(seed: u64, min_len: usize) -> WireStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = WireStream { bytes: Vec::new(), packets: Vec::new(), corrupted: 0, skipped_bytes: 0 };
    while out.bytes.len() < min_len {
        let roll: f64 = rng.random();
        if roll < 0.05 {
            let n = rng.random_range(1..=20);
            for _ in 0..n {
                let b = no_sync(&mut rng, 0..=255);
                out.bytes.push(b);
            }
            out.skipped_bytes += n;
            continue;
        }
        let rows = if roll < 0.75 {
            let mut rows = vec![
                DataRow::signal_quality(no_sync(&mut rng, 0..=200)),
                DataRow::attention(rng.random_range(1..=100)),
                DataRow::meditation(rng.random_range(1..=100)),
            ];
            if rng.random_bool(0.2) {
                rows.push(DataRow::blink(rng.random_range(0..=100)));
            }
            rows
        } else {
            let v = loop {
                let v: i16 = rng.random();
                if !v.to_be_bytes().contains(&0xAA) {
                    break v;
                }
            };
            vec![DataRow::raw(v)]
        };
        let mut frame = encode_packet(&rows).expect("rows fit one frame");
        if roll >= 0.95 {
            let last = frame.len() - 1;
            let flipped = (0..8).map(|bit| frame[last] ^ (1 << bit)).find(|&b| b != 0xAA).expect("some flip avoids AA");
            frame[last] = flipped;
            out.corrupted += 1;
            out.skipped_bytes += frame.len();
        } else {
            out.packets.push(Packet::new(rows));
        }
        out.bytes.extend(frame);
    }
    let tail = encode_packet(&[DataRow::raw(0x0102)]).expect("one raw row");
    let cut = &tail[..tail.len() - 2];
    out.bytes.extend_from_slice(cut);
    out.skipped_bytes += cut.len();
    out
}

pub const STREAM_SEED: u64 = 10_240;
pub const STREAM_MIN_LEN: usize = 10_240;

fn json(value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push(b'\n');
    Ok(text)
}

/// Every fixture file with its contents.
pub fn generate() -> Result<Vec<FixtureFile>, CliError> {
    let mut files = Vec::new();
    for (name, sc) in scenarios() {
        files.push(FixtureFile { path: PathBuf::from(format!("scenarios/{name}.scenario")), contents: json(&sc)? });
        let records = synthesize(&sc).map_err(|e| CliError::Runtime(format!("scenario {name}: {e}")))?;
        let mut buf = Vec::new();
        write_session(&records, &mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
        files.push(FixtureFile { path: PathBuf::from(format!("sessions/{name}.session")), contents: buf });
    }

    let mut manifest = BTreeMap::new();
    for (name, bytes, expectation) in small_wire_fixtures() {
        let file = format!("{name}.hex");
        let contents = to_hex(&bytes, &[&expectation.description], 16).into_bytes();
        files.push(FixtureFile { path: PathBuf::from("wire").join(&file), contents });
        manifest.insert(file, expectation);
    }
    let stream = wire_stream(STREAM_SEED, STREAM_MIN_LEN);
    let description = format!(
        "{} bytes: {} intact frames, {} corrupted checksums, garbage bursts, truncated final frame",
        stream.bytes.len(),
        stream.packets.len(),
        stream.corrupted
    );
    files.push(FixtureFile {
        path: PathBuf::from("wire/stream-10k.hex"),
        contents: to_hex(&stream.bytes, &[&description], 32).into_bytes(),
    });
    manifest.insert(
        "stream-10k.hex".into(),
        WireExpectation {
            description,
            packets: stream.packets.len(),
            checksum_mismatches: stream.corrupted,
            malformed: 0,
            skipped_bytes: stream.skipped_bytes,
        },
    );
    files.push(FixtureFile { path: PathBuf::from("wire/manifest.json"), contents: json(&manifest)? });
    Ok(files)
}

pub fn write_all(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for f in generate()? {
        let path = root.join(&f.path);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(&path, &f.contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
