//! Energy-based endpointing with hysteresis: segments open at the loud
//! threshold, stay open until energy falls below the quiet threshold, short
//! gaps are bridged, and too-short segments are discarded.

use serde::{Deserialize, Serialize};

use crate::audio::FeatureFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// A closed gate opens at or above this log-energy (dBFS).
    pub open_threshold_db: f64,
    /// An open gate closes strictly below this log-energy (dBFS).
    pub close_threshold_db: f64,
    /// Gaps shorter than this are merged into one segment.
    pub min_gap_ms: f64,
    /// Segments shorter than this (after merging) are dropped.
    pub min_segment_ms: f64,
    /// Frame hop; must match the framing used to produce the features.
    pub hop_ms: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            open_threshold_db: -45.0,
            close_threshold_db: -55.0,
            min_gap_ms: 200.0,
            min_segment_ms: 80.0,
            hop_ms: 10.0,
        }
    }
}

impl EndpointConfig {
    pub fn min_gap_frames(&self) -> usize {
        (self.min_gap_ms / self.hop_ms).round().max(1.0) as usize
    }

    pub fn min_segment_frames(&self) -> usize {
        (self.min_segment_ms / self.hop_ms).round().max(1.0) as usize
    }
}

/// A contiguous endpointed span of an utterance.
///
/// `start_frame..end_frame` index the source feature sequence. After the
/// normalization filter resamples a segment, `frames.len()` may differ from
/// `end_frame - start_frame`; the indices always describe the source span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_frame: usize,
    pub end_frame: usize,
    pub frames: Vec<FeatureFrame>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn mean_log_energy(&self) -> f64 {
        if self.frames.is_empty() {
            return f64::NAN;
        }
        self.frames.iter().map(|f| f.log_energy).sum::<f64>() / self.frames.len() as f64
    }
}

/// Hysteresis endpointing. Gaps shorter than `min_gap` are merged first;
/// segments shorter than `min_segment` are dropped afterwards, so a cluster
/// of short bursts separated by short gaps survives as one segment.
pub fn endpoint_segments(frames: &[FeatureFrame], cfg: &EndpointConfig) -> Vec<Segment> {
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, f) in frames.iter().enumerate() {
        match open {
            None => {
                if f.log_energy >= cfg.open_threshold_db {
                    open = Some(i);
                }
            }
            Some(start) => {
                if f.log_energy < cfg.close_threshold_db {
                    raw.push((start, i));
                    open = None;
                }
            }
        }
    }
    if let Some(start) = open {
        raw.push((start, frames.len()));
    }

    let mut merged: Vec<(usize, usize)> = Vec::new();
    for span in raw {
        match merged.last_mut() {
            Some(prev) if span.0 - prev.1 < cfg.min_gap_frames() => prev.1 = span.1,
            _ => merged.push(span),
        }
    }

    merged
        .into_iter()
        .filter(|(start, end)| end - start >= cfg.min_segment_frames())
        .map(|(start, end)| Segment {
            start_frame: start,
            end_frame: end,
            frames: frames[start..end].to_vec(),
        })
        .collect()
}
