//! Brute-force reference computations used by the test suites.
//!
//! Each function recomputes a result from the whole input at once, without
//! the streaming or two-pointer machinery of the real implementation.
//! Compiled only for tests or with the `oracle` feature.

use std::collections::BTreeMap;

use crate::analytics::{BucketStats, JoinedSample, ScrollSample, SectionProfile};
use crate::engine::{ControlEvent, ControlEventKind, EventConfig, NavigationPolarity};
use crate::sample::{Sample, Track};

/// Complement of the low byte of the widened payload sum.
pub fn checksum(payload: &[u8]) -> u8 {
    let sum: u32 = payload.iter().map(|&b| b as u32).sum();
    0xFF - (sum % 256) as u8
}

/// Recomputes control events from a whole, time-sorted trace.
pub fn engine_events(trace: &[Sample], config: &EventConfig) -> Vec<ControlEvent> {
    // (position in trace, tie-break rank, event)
    let mut out: Vec<(usize, u8, ControlEvent)> = Vec::new();

    // Gate: a sample is kept unless the latest earlier quality reading exceeds the gate.
    let mut kept: Vec<(usize, &Sample)> = Vec::new();
    for (i, s) in trace.iter().enumerate() {
        let quality = trace[..i].iter().rev().find(|p| p.track == Track::SignalQuality).map_or(0, |p| p.value);
        if matches!(s.track, Track::Attention | Track::Blink) && quality <= config.signal_quality_gate {
            kept.push((i, s));
        }
    }

    let att: Vec<(usize, &Sample)> = kept.iter().copied().filter(|(_, s)| s.track == Track::Attention).collect();
    let mut sustained = vec![false; att.len()];
    let mut start = 0;
    while start < att.len() {
        if att[start].1.value < config.attention_threshold {
            start += 1;
            continue;
        }
        let mut end = start;
        while end + 1 < att.len() && att[end + 1].1.value >= config.attention_threshold {
            end += 1;
        }
        let run_t = att[start].1.t_ms;
        if let Some(k) = (start..=end).find(|&k| att[k].1.t_ms - run_t >= config.hold_ms) {
            let (pos, s) = att[k];
            out.push((
                pos,
                0,
                ControlEvent {
                    t_ms: s.t_ms,
                    kind: ControlEventKind::SustainedHighEnter { value: s.value, run_start_ms: run_t },
                },
            ));
            sustained[k..=end].iter_mut().for_each(|x| *x = true);
            if let Some(&(pos, s)) = att.get(end + 1) {
                out.push((
                    pos,
                    0,
                    ControlEvent { t_ms: s.t_ms, kind: ControlEventKind::SustainedHighExit { value: s.value } },
                ));
            }
        }
        start = end + 1;
    }

    if let Some(&(_, first)) = att.first() {
        let mut anchor = first.t_ms;
        for (k, &(pos, s)) in att.iter().enumerate() {
            let moving = match config.polarity {
                NavigationPolarity::HoldOnHigh => !sustained[k],
                NavigationPolarity::AdvanceOnHigh => sustained[k],
            };
            if moving && s.t_ms - anchor >= config.advance_period_ms {
                anchor = s.t_ms;
                out.push((
                    pos,
                    1,
                    ControlEvent { t_ms: s.t_ms, kind: ControlEventKind::FocusAdvance { value: s.value } },
                ));
            }
        }
    }

    let blinks: Vec<(usize, &Sample)> = kept.iter().copied().filter(|(_, s)| s.track == Track::Blink).collect();
    let deliberate: Vec<(usize, &Sample, i32)> = blinks
        .iter()
        .enumerate()
        .filter_map(|(j, &(pos, s))| {
            let prev = if j == 0 { 0 } else { blinks[j - 1].1.value };
            let d = if config.absolute_blink_delta { (s.value - prev).abs() } else { s.value - prev };
            (d >= config.blink_delta).then_some((pos, s, d))
        })
        .collect();
    for &(pos, s, delta) in &deliberate {
        out.push((
            pos,
            0,
            ControlEvent { t_ms: s.t_ms, kind: ControlEventKind::DeliberateBlink { strength: s.value, delta } },
        ));
    }
    let window = config.double_blink_min_gap_ms..=config.double_blink_max_gap_ms;
    let mut i = 0;
    while i + 1 < deliberate.len() {
        let gap = deliberate[i + 1].1.t_ms - deliberate[i].1.t_ms;
        if window.contains(&gap) {
            let (pos, s, _) = deliberate[i + 1];
            out.push((pos, 1, ControlEvent { t_ms: s.t_ms, kind: ControlEventKind::DoubleBlink { gap_ms: gap } }));
            i += 2;
        } else {
            i += 1;
        }
    }

    out.sort_by_key(|&(pos, rank, _)| (pos, rank));
    out.into_iter().map(|(_, _, e)| e).collect()
}

/// All-pairs nearest-timestamp join: minimizes `(|dt|, scroll t, index)`.
/// Returns the joined samples and the dropped count.
pub fn join(attention: &[Sample], scroll: &[ScrollSample<f64>], max_skew_ms: i64) -> (Vec<JoinedSample<f64>>, usize) {
    let mut joined = Vec::new();
    let mut dropped = 0;
    for a in attention.iter().filter(|s| s.track == Track::Attention) {
        let best = scroll
            .iter()
            .enumerate()
            .min_by_key(|(i, s)| ((s.t_ms - a.t_ms).abs(), s.t_ms, *i))
            .filter(|(_, s)| (s.t_ms - a.t_ms).abs() <= max_skew_ms);
        match best {
            Some((_, s)) => {
                let raw = (2.0 * s.scroll_offset_px + s.viewport_h_px) / s.content_h_px.max(s.viewport_h_px) * 100.0;
                joined.push(JoinedSample {
                    t_ms: a.t_ms,
                    attention: a.value,
                    scroll_pct: raw.clamp(0.0, 100.0),
                    page_id: s.page_id.clone(),
                });
            }
            None => dropped += 1,
        }
    }
    (joined, dropped)
}

/// Groups samples into a map keyed by section, then summarizes each group.
pub fn group(page_id: &str, joined: &[JoinedSample<f64>], buckets: usize) -> SectionProfile<f64> {
    let mut groups: BTreeMap<usize, Vec<i32>> = BTreeMap::new();
    for s in joined {
        let idx = ((s.scroll_pct * buckets as f64 / 100.0).floor() as usize).min(buckets - 1);
        groups.entry(idx).or_default().push(s.attention);
    }
    let buckets = (0..buckets)
        .map(|i| match groups.get(&i) {
            Some(vals) => BucketStats {
                mean: Some(vals.iter().map(|&v| v as f64).sum::<f64>() / vals.len() as f64),
                count: vals.len() as u64,
                max: vals.iter().copied().max(),
            },
            None => BucketStats::default(),
        })
        .collect();
    SectionProfile { page_id: page_id.to_string(), buckets }
}

/// Nearest-rank 75th percentile by counting, clamped to [20, 80], with the
/// default 30 below ten attention samples.
pub fn calibration(samples: &[Sample]) -> i32 {
    let values: Vec<i32> = samples.iter().filter(|s| s.track == Track::Attention).map(|s| s.value).collect();
    if values.len() < 10 {
        return 30;
    }
    let n = values.len();
    let p75 = (1..=100)
        .find(|&v| 4 * values.iter().filter(|&&x| x <= v).count() >= 3 * n)
        .expect("attention values are at most 100");
    p75.clamp(20, 80)
}

/// Block means over consecutive groups of `block` values; a trailing
/// partial block is discarded.
pub fn block_means(values: &[i32], block: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + block <= values.len() {
        let mut sum = 0.0;
        for v in &values[i..i + block] {
            sum += *v as f64;
        }
        out.push(sum / block as f64);
        i += block;
    }
    out
}

/// Compares profiles bucket by bucket with an absolute tolerance on means.
pub fn profiles_close(a: &SectionProfile<f64>, b: &SectionProfile<f64>, tol: f64) -> bool {
    a.page_id == b.page_id
        && a.buckets.len() == b.buckets.len()
        && a.buckets.iter().zip(&b.buckets).all(|(x, y)| {
            x.count == y.count
                && x.max == y.max
                && match (x.mean, y.mean) {
                    (Some(m), Some(n)) => (m - n).abs() <= tol,
                    (None, None) => true,
                    _ => false,
                }
        })
}
