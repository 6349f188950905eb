//! Temporal confirmation of a sign from noisy per-frame detections.
//!
//! Every label keeps a running score. Each frame first decays all scores,
//! then adds the label's contribution: the mean confidence of that label's
//! detections in the frame, or the number of detections under the counting
//! strategy. A label is confirmed once its score strictly exceeds `delta`.
//!
//! Scores are held in fixed point (`SCORE_SCALE` units per 1.0) so that sums
//! are exact and a score landing exactly on `delta` never confirms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed-point units per unit of score.
pub const SCORE_SCALE: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub conf: f64,
    /// `[x_min, y_min, width, height]`, normalized to the frame.
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    /// Seconds since session start.
    pub t: f64,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("frame time {0} is negative or not finite")]
    BadTime(f64),
    #[error("frame time {t} precedes previous frame time {prev}")]
    OutOfOrder { prev: f64, t: f64 },
    #[error("detection {index} has an empty label")]
    EmptyLabel { index: usize },
    #[error("detection {index} ({label}) confidence {conf} outside [0, 1]")]
    Confidence {
        index: usize,
        label: String,
        conf: f64,
    },
    #[error("detection {index} ({label}) bbox {bbox:?}: {reason}")]
    BBox {
        index: usize,
        label: String,
        bbox: [f64; 4],
        reason: &'static str,
    },
}

impl Detection {
    pub fn new(label: impl Into<String>, conf: f64, bbox: [f64; 4]) -> Self {
        Detection {
            label: label.into(),
            conf,
            bbox,
        }
    }

    fn validate(&self, index: usize) -> Result<(), FrameError> {
        if self.label.is_empty() {
            return Err(FrameError::EmptyLabel { index });
        }
        if !(0.0..=1.0).contains(&self.conf) {
            return Err(FrameError::Confidence {
                index,
                label: self.label.clone(),
                conf: self.conf,
            });
        }
        let bbox_err = |reason| FrameError::BBox {
            index,
            label: self.label.clone(),
            bbox: self.bbox,
            reason,
        };
        if !self.bbox.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(bbox_err("components must lie in [0, 1]"));
        }
        let [x, y, w, h] = self.bbox;
        // small slack for float noise in producers
        if x + w > 1.0 + 1e-9 || y + h > 1.0 + 1e-9 {
            return Err(bbox_err("box extends past the frame"));
        }
        Ok(())
    }
}

impl DetectionFrame {
    pub fn new(t: f64, detections: Vec<Detection>) -> Self {
        DetectionFrame { t, detections }
    }

    pub fn empty(t: f64) -> Self {
        DetectionFrame::new(t, Vec::new())
    }

    /// Checks the frame in isolation (ordering is checked by [`ConfirmState`]).
    pub fn validate(&self) -> Result<(), FrameError> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(FrameError::BadTime(self.t));
        }
        self.detections
            .iter()
            .enumerate()
            .try_for_each(|(i, d)| d.validate(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Sum over frames of the per-frame mean confidence.
    CumulativeConfidence,
    /// Sum over frames of the per-frame detection count.
    DetectionCount,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::CumulativeConfidence, Strategy::DetectionCount];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::CumulativeConfidence => "cumulative_confidence",
            Strategy::DetectionCount => "detection_count",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfirmConfig {
    pub strategy: Strategy,
    pub delta: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
}

fn default_decay() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("delta must be a finite value > 0, got {0}")]
    Delta(f64),
    #[error("decay must lie in (0, 1], got {0}")]
    Decay(f64),
}

impl Default for ConfirmConfig {
    /// Cumulative confidence with δ = 50, no decay.
    fn default() -> Self {
        ConfirmConfig {
            strategy: Strategy::CumulativeConfidence,
            delta: 50.0,
            decay: 1.0,
        }
    }
}

impl ConfirmConfig {
    pub fn new(strategy: Strategy, delta: f64) -> Self {
        ConfirmConfig {
            strategy,
            delta,
            decay: 1.0,
        }
    }

    pub fn with_decay(mut self, decay: f64) -> Self {
        self.decay = decay;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(ConfigError::Delta(self.delta));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(ConfigError::Decay(self.decay));
        }
        Ok(())
    }

    /// A score confirms iff it is strictly greater than this many units.
    fn delta_units(&self) -> u64 {
        (self.delta * SCORE_SCALE as f64).floor() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedSymbol {
    pub label: String,
    pub score: f64,
    pub frames_to_confirm: u32,
    pub t: f64,
}

fn to_units(conf: f64) -> u64 {
    (conf * SCORE_SCALE as f64).round() as u64
}

fn to_score(units: u64) -> f64 {
    units as f64 / SCORE_SCALE as f64
}

/// Per-session accumulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfirmState {
    config: ConfirmConfig,
    staged: Option<ConfirmConfig>,
    acc: BTreeMap<String, u64>,
    frames_seen: u32,
    last_t: Option<f64>,
}

impl ConfirmState {
    pub fn new(config: ConfirmConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(ConfirmState {
            config,
            staged: None,
            acc: BTreeMap::new(),
            frames_seen: 0,
            last_t: None,
        })
    }

    pub fn config(&self) -> &ConfirmConfig {
        &self.config
    }

    /// Config waiting for the next accumulator reset, if any.
    pub fn staged_config(&self) -> Option<&ConfirmConfig> {
        self.staged.as_ref()
    }

    pub fn frames_seen(&self) -> u32 {
        self.frames_seen
    }

    /// Queues `config` to take effect at the next confirmation or reset.
    pub fn stage_config(&mut self, config: ConfirmConfig) -> Result<(), ConfigError> {
        config.validate()?;
        self.staged = Some(config);
        Ok(())
    }

    pub fn score(&self, label: &str) -> f64 {
        self.acc.get(label).copied().map(to_score).unwrap_or(0.0)
    }

    /// Current non-zero scores, keyed by label.
    pub fn scores(&self) -> BTreeMap<String, f64> {
        self.acc
            .iter()
            .map(|(label, &units)| (label.clone(), to_score(units)))
            .collect()
    }

    /// Clears every accumulator and the frame clock, then applies any staged
    /// config.
    pub fn reset(&mut self) {
        self.clear_accumulators();
        self.last_t = None;
    }

    fn clear_accumulators(&mut self) {
        self.acc.clear();
        self.frames_seen = 0;
        if let Some(config) = self.staged.take() {
            self.config = config;
        }
    }

    /// Feeds one frame. A malformed or out-of-order frame is rejected and
    /// leaves the state untouched.
    pub fn ingest_frame(
        &mut self,
        frame: &DetectionFrame,
    ) -> Result<Option<ConfirmedSymbol>, FrameError> {
        frame.validate()?;
        if let Some(prev) = self.last_t {
            if frame.t < prev {
                return Err(FrameError::OutOfOrder { prev, t: frame.t });
            }
        }
        self.last_t = Some(frame.t);
        self.frames_seen += 1;

        if self.config.decay < 1.0 {
            let decay = self.config.decay;
            self.acc.retain(|_, units| {
                *units = (*units as f64 * decay).floor() as u64;
                *units > 0
            });
        }

        // label -> (sum of confidence units, detection count)
        let mut per_label: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for det in &frame.detections {
            let entry = per_label.entry(det.label.as_str()).or_default();
            entry.0 += to_units(det.conf);
            entry.1 += 1;
        }
        for (label, (sum, count)) in per_label {
            let add = match self.config.strategy {
                Strategy::CumulativeConfidence => sum / count,
                Strategy::DetectionCount => count * SCORE_SCALE,
            };
            if add > 0 {
                *self.acc.entry(label.to_string()).or_default() += add;
            }
        }

        let threshold = self.config.delta_units();
        let mut winner: Option<(&String, u64)> = None;
        for (label, &units) in &self.acc {
            // BTreeMap order plus strict `>` keeps the smallest label on ties
            if units > threshold && winner.is_none_or(|(_, best)| units > best) {
                winner = Some((label, units));
            }
        }
        let confirmed = winner.map(|(label, units)| ConfirmedSymbol {
            label: label.clone(),
            score: to_score(units),
            frames_to_confirm: self.frames_seen,
            t: frame.t,
        });
        if confirmed.is_some() {
            self.clear_accumulators();
        }
        Ok(confirmed)
    }
}
