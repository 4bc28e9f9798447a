//! Scroll position, attention/scroll timestamp join, and per-section profiles.
//!
//! The page position of a reading is the scroll percentage
//!
//! ```text
//! ((2 * scroll_offset + viewport_height) / content_height) * 100
//! ```
//!
//! with `scroll_offset` measured at the top edge of the viewport. The value
//! can exceed 100 near the bottom of a page and is clamped to `[0, 100]`.
//! Sections are `B` equal slices of that range, the last one closed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sample::{Sample, TimestampMs, Track};
use crate::scalar::Scalar;
use crate::session::{RecordBody, SessionRecord};

pub const DEFAULT_MAX_SKEW_MS: i64 = 500;
pub const DEFAULT_BUCKETS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("viewport and content heights must be positive and offsets finite")]
    InvalidGeometry,
    #[error("{0} samples are not sorted by timestamp")]
    Unsorted(&'static str),
    #[error("bucket count must be at least 1")]
    ZeroBuckets,
    #[error("profile for page `{found}` cannot combine with page `{expected}`")]
    PageMismatch { expected: String, found: String },
    #[error("bucket counts differ: {expected} vs {found}")]
    BucketMismatch { expected: usize, found: usize },
    #[error("nothing to merge")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrollSample<T> {
    pub t_ms: TimestampMs,
    pub page_id: String,
    pub scroll_offset_px: T,
    pub viewport_h_px: T,
    pub content_h_px: T,
}

impl<T: Scalar> ScrollSample<T> {
    pub fn percentage(&self) -> Result<T, AnalyticsError> {
        scroll_percentage(self.scroll_offset_px, self.viewport_h_px, self.content_h_px)
    }

    /// Extracts the scroll record, if any.
    pub fn from_record(r: &SessionRecord) -> Option<Self> {
        match &r.body {
            RecordBody::Scroll { page, offset, viewport, content } => Some(ScrollSample {
                t_ms: r.t,
                page_id: page.clone(),
                scroll_offset_px: T::from_f64(*offset)?,
                viewport_h_px: T::from_f64(*viewport)?,
                content_h_px: T::from_f64(*content)?,
            }),
            _ => None,
        }
    }
}

/// Unclamped scroll percentage. Content shorter than the viewport is
/// treated as exactly one viewport tall.
pub fn raw_scroll_percentage<T: Scalar>(offset: T, viewport: T, content: T) -> Result<T, AnalyticsError> {
    let zero = T::zero();
    if !(viewport > zero && content > zero && offset.is_finite() && viewport.is_finite() && content.is_finite()) {
        return Err(AnalyticsError::InvalidGeometry);
    }
    let content = content.max(viewport);
    let two = T::one() + T::one();
    Ok((two * offset + viewport) / content * T::hundred())
}

/// Scroll percentage clamped to `[0, 100]`.
pub fn scroll_percentage<T: Scalar>(offset: T, viewport: T, content: T) -> Result<T, AnalyticsError> {
    raw_scroll_percentage(offset, viewport, content).map(|p| p.max(T::zero()).min(T::hundred()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JoinedSample<T> {
    pub t_ms: TimestampMs,
    pub attention: i32,
    pub scroll_pct: T,
    pub page_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinReport<T> {
    pub joined: Vec<JoinedSample<T>>,
    /// Attention samples with no scroll sample within the skew.
    pub dropped: usize,
    /// Pairs whose raw scroll percentage fell outside `[0, 100]`.
    pub clamped: usize,
}

fn check_sorted<I: Iterator<Item = TimestampMs>>(ts: I, what: &'static str) -> Result<(), AnalyticsError> {
    let mut last = TimestampMs::MIN;
    for t in ts {
        if t < last {
            return Err(AnalyticsError::Unsorted(what));
        }
        last = t;
    }
    Ok(())
}

/// Pairs each attention sample with the scroll sample nearest in time.
///
/// Only pairs with `|dt| <= max_skew_ms` are kept. On equal distance the
/// earlier scroll sample wins, and among scroll samples sharing a timestamp
/// the first in input order wins. Non-attention samples are ignored.
pub fn join_by_timestamp<T: Scalar>(
    attention: &[Sample],
    scroll: &[ScrollSample<T>],
    max_skew_ms: i64,
) -> Result<JoinReport<T>, AnalyticsError> {
    let attention: Vec<&Sample> = attention.iter().filter(|s| s.track == Track::Attention).collect();
    check_sorted(attention.iter().map(|s| s.t_ms), "attention")?;
    check_sorted(scroll.iter().map(|s| s.t_ms), "scroll")?;

    let mut report = JoinReport { joined: Vec::new(), dropped: 0, clamped: 0 };
    // `upper` is the first scroll index with t > the current attention t.
    let mut upper = 0;
    for a in attention {
        while upper < scroll.len() && scroll[upper].t_ms <= a.t_ms {
            upper += 1;
        }
        let before = upper.checked_sub(1).map(|mut i| {
            while i > 0 && scroll[i - 1].t_ms == scroll[i].t_ms {
                i -= 1;
            }
            i
        });
        let after = (upper < scroll.len()).then_some(upper);
        let best = match (before, after) {
            (Some(b), Some(f)) => {
                if a.t_ms - scroll[b].t_ms <= scroll[f].t_ms - a.t_ms {
                    Some(b)
                } else {
                    Some(f)
                }
            }
            (b, f) => b.or(f),
        };
        let Some(i) = best.filter(|&i| (scroll[i].t_ms - a.t_ms).abs() <= max_skew_ms) else {
            report.dropped += 1;
            continue;
        };
        let s = &scroll[i];
        let raw = raw_scroll_percentage(s.scroll_offset_px, s.viewport_h_px, s.content_h_px)?;
        let pct = raw.max(T::zero()).min(T::hundred());
        if pct != raw {
            report.clamped += 1;
        }
        report.joined.push(JoinedSample {
            t_ms: a.t_ms,
            attention: a.value,
            scroll_pct: pct,
            page_id: s.page_id.clone(),
        });
    }
    Ok(report)
}

/// Section index of a scroll percentage: `floor(pct * B / 100)`, with 100
/// falling into the last section.
pub fn bucket_index<T: Scalar>(pct: T, buckets: usize) -> usize {
    let b = T::from_usize(buckets).expect("bucket count fits a float");
    let idx = (pct * b / T::hundred()).floor().to_usize().unwrap_or(0);
    idx.min(buckets - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats<T> {
    /// `None` for an empty bucket.
    pub mean: Option<T>,
    pub count: u64,
    pub max: Option<i32>,
}

impl<T> Default for BucketStats<T> {
    fn default() -> Self {
        BucketStats { mean: None, count: 0, max: None }
    }
}

/// Attention statistics per page section. Carries no user identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionProfile<T> {
    pub page_id: String,
    pub buckets: Vec<BucketStats<T>>,
}

impl<T: Scalar> SectionProfile<T> {
    pub fn empty(page_id: impl Into<String>, buckets: usize) -> Result<Self, AnalyticsError> {
        if buckets == 0 {
            return Err(AnalyticsError::ZeroBuckets);
        }
        Ok(SectionProfile { page_id: page_id.into(), buckets: vec![BucketStats::default(); buckets] })
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn total_count(&self) -> u64 {
        self.buckets.iter().map(|b| b.count).sum()
    }

    /// Index of the bucket with the highest mean attention.
    pub fn peak_bucket(&self) -> Option<usize> {
        self.buckets
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.mean.map(|m| (i, m)))
            .fold(None, |best: Option<(usize, T)>, (i, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((i, m)),
            })
            .map(|(i, _)| i)
    }

    /// Lower and upper scroll-percentage bounds of bucket `i`.
    pub fn bucket_bounds(&self, i: usize) -> (T, T) {
        let b = T::from_usize(self.buckets.len()).expect("bucket count fits a float");
        let i = T::from_usize(i).expect("index fits a float");
        (i * T::hundred() / b, (i + T::one()) * T::hundred() / b)
    }
}

/// Groups joined samples of one page into `buckets` sections.
pub fn bucketize<T: Scalar>(
    page_id: &str,
    joined: &[JoinedSample<T>],
    buckets: usize,
) -> Result<SectionProfile<T>, AnalyticsError> {
    let mut profile = SectionProfile::empty(page_id, buckets)?;
    let mut sums = vec![T::zero(); buckets];
    for s in joined {
        if s.page_id != page_id {
            return Err(AnalyticsError::PageMismatch { expected: page_id.to_string(), found: s.page_id.clone() });
        }
        let i = bucket_index(s.scroll_pct, buckets);
        let b = &mut profile.buckets[i];
        b.count += 1;
        b.max = Some(b.max.map_or(s.attention, |m| m.max(s.attention)));
        sums[i] = sums[i] + T::of_i64(s.attention as i64);
    }
    for (b, sum) in profile.buckets.iter_mut().zip(sums) {
        if b.count > 0 {
            b.mean = Some(sum / T::of_i64(b.count as i64));
        }
    }
    Ok(profile)
}

/// Pools profiles of the same page: count-weighted means, summed counts,
/// max of maxes.
pub fn merge_profiles<T: Scalar>(profiles: &[SectionProfile<T>]) -> Result<SectionProfile<T>, AnalyticsError> {
    let first = profiles.first().ok_or(AnalyticsError::Empty)?;
    let n = first.bucket_count();
    let mut weighted = vec![T::zero(); n];
    let mut out = SectionProfile::empty(first.page_id.clone(), n)?;
    for p in profiles {
        if p.page_id != first.page_id {
            return Err(AnalyticsError::PageMismatch { expected: first.page_id.clone(), found: p.page_id.clone() });
        }
        if p.bucket_count() != n {
            return Err(AnalyticsError::BucketMismatch { expected: n, found: p.bucket_count() });
        }
        for (i, b) in p.buckets.iter().enumerate() {
            let Some(mean) = b.mean.filter(|_| b.count > 0) else { continue };
            let acc = &mut out.buckets[i];
            acc.count += b.count;
            acc.max = match (acc.max, b.max) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            };
            weighted[i] = weighted[i] + mean * T::of_i64(b.count as i64);
        }
    }
    for (b, w) in out.buckets.iter_mut().zip(weighted) {
        if b.count > 0 {
            b.mean = Some(w / T::of_i64(b.count as i64));
        }
    }
    Ok(out)
}

/// Join statistics and per-page profiles of one or more sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionAnalysis<T> {
    pub profiles: BTreeMap<String, SectionProfile<T>>,
    pub joined: usize,
    pub dropped: usize,
    pub clamped: usize,
}

impl<T: Scalar> SessionAnalysis<T> {
    fn empty() -> Self {
        SessionAnalysis { profiles: BTreeMap::new(), joined: 0, dropped: 0, clamped: 0 }
    }

    /// Pools two analyses page by page.
    pub fn merge(mut self, other: SessionAnalysis<T>) -> Result<Self, AnalyticsError> {
        for (page, p) in other.profiles {
            let merged = match self.profiles.remove(&page) {
                Some(mine) => merge_profiles(&[mine, p])?,
                None => p,
            };
            self.profiles.insert(page, merged);
        }
        self.joined += other.joined;
        self.dropped += other.dropped;
        self.clamped += other.clamped;
        Ok(self)
    }
}

/// Joins a session's attention with its scroll records and profiles each
/// page that received at least one pairing.
pub fn analyze_session<T: Scalar>(
    records: &[SessionRecord],
    buckets: usize,
    max_skew_ms: i64,
) -> Result<SessionAnalysis<T>, AnalyticsError> {
    if buckets == 0 {
        return Err(AnalyticsError::ZeroBuckets);
    }
    let attention: Vec<Sample> =
        records.iter().filter_map(SessionRecord::as_sample).filter(|s| s.track == Track::Attention).collect();
    let scroll: Vec<ScrollSample<T>> = records.iter().filter_map(ScrollSample::from_record).collect();
    let report = join_by_timestamp(&attention, &scroll, max_skew_ms)?;

    let mut by_page: BTreeMap<&str, Vec<JoinedSample<T>>> = BTreeMap::new();
    for j in &report.joined {
        by_page.entry(j.page_id.as_str()).or_default().push(j.clone());
    }
    let mut out = SessionAnalysis::empty();
    for (page, joined) in by_page {
        out.profiles.insert(page.to_string(), bucketize(page, &joined, buckets)?);
    }
    out.joined = report.joined.len();
    out.dropped = report.dropped;
    out.clamped = report.clamped;
    Ok(out)
}

/// Analyzes several sessions independently and pools the results.
pub fn analyze_sessions<T: Scalar>(
    sessions: &[Vec<SessionRecord>],
    buckets: usize,
    max_skew_ms: i64,
) -> Result<SessionAnalysis<T>, AnalyticsError> {
    if buckets == 0 {
        return Err(AnalyticsError::ZeroBuckets);
    }
    sessions.iter().try_fold(SessionAnalysis::empty(), |acc, s| acc.merge(analyze_session(s, buckets, max_skew_ms)?))
}
