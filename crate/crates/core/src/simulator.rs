//! Synthetic detector front end.
//!
//! [`simulate`] turns a label sequence into a timed stream of noisy
//! [`DetectionFrame`]s, [`replay`] reads such streams back from JSONL, and
//! [`bench`] measures confirmation accuracy and latency over a δ grid with a
//! closed-loop signer that moves on as soon as a sign is confirmed.
//!
//! Defaults target the anchor operating point: about 45 fps, and a mean
//! confidence near 0.83 so that δ = 50 is reached in about 60 frames.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::RuleSet;
use crate::confirmer::{ConfirmConfig, ConfirmState, Detection, DetectionFrame, Strategy};
use crate::planner::{PlanError, Planner, SpellingPlan};
use crate::wire::Inbound;

/// Fixed on-screen hand box the true detection jitters around.
const HAND_BOX: [f64; 4] = [0.41, 0.38, 0.18, 0.24];
const BOX_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorProfile {
    pub fps: f64,
    /// Frames each sign is held.
    pub hold_frames: u32,
    /// Blank frames between consecutive signs.
    pub gap_frames: u32,
    pub conf_mean: f64,
    pub conf_std: f64,
    /// Per-frame probability of an extra detection of a look-alike class.
    pub false_rate: f64,
    /// Per-frame probability the true detection is dropped.
    pub miss_rate: f64,
    /// Look-alike classes per true sign; 0 draws from the whole alphabet.
    pub confusers: u32,
    pub seed: u64,
}

impl Default for SensorProfile {
    fn default() -> Self {
        SensorProfile {
            fps: 45.0,
            hold_frames: 70,
            gap_frames: 10,
            conf_mean: 0.83,
            conf_std: 0.05,
            false_rate: 0.7,
            miss_rate: 0.02,
            confusers: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("fps must be finite and > 0, got {0}")]
    Fps(f64),
    #[error("hold_frames must be at least 1")]
    Hold,
    #[error("conf_mean must lie in [0, 1], got {0}")]
    ConfMean(f64),
    #[error("conf_std must be finite and >= 0, got {0}")]
    ConfStd(f64),
    #[error("{name} must lie in [0, 1), got {value}")]
    Rate { name: &'static str, value: f64 },
}

impl SensorProfile {
    /// Constant confidence, no misses, no false detections.
    pub fn noiseless() -> Self {
        SensorProfile {
            conf_std: 0.0,
            false_rate: 0.0,
            miss_rate: 0.0,
            ..SensorProfile::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_conf(mut self, conf_mean: f64) -> Self {
        self.conf_mean = conf_mean;
        self
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(ProfileError::Fps(self.fps));
        }
        if self.hold_frames == 0 {
            return Err(ProfileError::Hold);
        }
        if !(0.0..=1.0).contains(&self.conf_mean) {
            return Err(ProfileError::ConfMean(self.conf_mean));
        }
        if !(self.conf_std.is_finite() && self.conf_std >= 0.0) {
            return Err(ProfileError::ConfStd(self.conf_std));
        }
        for (name, value) in [("false_rate", self.false_rate), ("miss_rate", self.miss_rate)] {
            if !(0.0..1.0).contains(&value) {
                return Err(ProfileError::Rate { name, value });
            }
        }
        Ok(())
    }

    pub fn frame_time(&self, index: u64) -> f64 {
        index as f64 / self.fps
    }
}

/// Stable 64-bit mix, used to derive per-label and per-trial streams.
fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Draws per-frame detections for one held sign.
struct FrameSampler<'a> {
    profile: &'a SensorProfile,
    conf: Normal<f64>,
    labels: &'a [String],
}

impl<'a> FrameSampler<'a> {
    fn new(profile: &'a SensorProfile, labels: &'a [String]) -> Self {
        let conf = Normal::new(profile.conf_mean, profile.conf_std).expect("validated profile");
        FrameSampler { profile, conf, labels }
    }

    /// Look-alike classes for `label`, fixed for a given seed.
    fn confusers(&self, label: &str) -> Vec<&'a str> {
        let others: Vec<&str> = self
            .labels
            .iter()
            .map(String::as_str)
            .filter(|l| *l != label)
            .collect();
        let wanted = self.profile.confusers as usize;
        if wanted == 0 || wanted >= others.len() {
            return others;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.profile.seed ^ label_hash(label)));
        rand::seq::index::sample(&mut rng, others.len(), wanted)
            .into_iter()
            .map(|i| others[i])
            .collect()
    }

    fn jitter(rng: &mut ChaCha8Rng, spread: f64) -> [f64; 4] {
        let [x, y, w, h] = HAND_BOX;
        [
            x + rng.random_range(-spread..=spread),
            y + rng.random_range(-spread..=spread),
            w,
            h,
        ]
    }

    fn frame(&self, rng: &mut ChaCha8Rng, t: f64, label: &str, confusers: &[&str]) -> DetectionFrame {
        let mut detections = Vec::with_capacity(2);
        // draw order is fixed so streams stay reproducible
        let missed = rng.random::<f64>() < self.profile.miss_rate;
        let conf = self.conf.sample(rng).clamp(0.0, 1.0);
        let bbox = Self::jitter(rng, BOX_JITTER);
        if !missed {
            detections.push(Detection::new(label, conf, bbox));
        }
        let extra = rng.random::<f64>() < self.profile.false_rate;
        if extra && !confusers.is_empty() {
            let other = confusers[rng.random_range(0..confusers.len())];
            let conf = if self.profile.conf_mean > 0.0 {
                rng.random_range(0.0..self.profile.conf_mean)
            } else {
                0.0
            };
            detections.push(Detection::new(other, conf, Self::jitter(rng, 3.0 * BOX_JITTER)));
        }
        DetectionFrame::new(t, detections)
    }
}

/// A simulated detection stream and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub profile: SensorProfile,
    /// The signed label sequence.
    pub labels: Vec<String>,
    pub frames: Vec<DetectionFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceHeader {
    profile: SensorProfile,
    #[serde(default)]
    labels: Vec<String>,
}

impl Trace {
    /// Header line followed by one `frame` message per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header = TraceHeader {
            profile: self.profile.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for frame in &self.frames {
            serde_json::to_writer(&mut out, &Inbound::frame(frame))?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.profile.fps
    }
}

/// Emits `hold_frames` frames per label with `gap_frames` blank frames
/// between labels. Deterministic for a given profile seed.
pub fn simulate_labels(
    labels: &[String],
    rules: &RuleSet,
    profile: &SensorProfile,
) -> Result<Trace, ProfileError> {
    profile.validate()?;
    let alphabet: Vec<String> = rules.classes().iter().map(|c| c.label.clone()).collect();
    let sampler = FrameSampler::new(profile, &alphabet);
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut frames = Vec::with_capacity(labels.len() * (profile.hold_frames + profile.gap_frames) as usize);
    let mut index = 0u64;
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            for _ in 0..profile.gap_frames {
                frames.push(DetectionFrame::empty(profile.frame_time(index)));
                index += 1;
            }
        }
        let confusers = sampler.confusers(label);
        for _ in 0..profile.hold_frames {
            frames.push(sampler.frame(&mut rng, profile.frame_time(index), label, &confusers));
            index += 1;
        }
    }
    Ok(Trace {
        profile: profile.clone(),
        labels: labels.to_vec(),
        frames,
    })
}

pub fn simulate(
    plan: &SpellingPlan,
    rules: &RuleSet,
    profile: &SensorProfile,
) -> Result<Trace, ProfileError> {
    simulate_labels(&plan.labels, rules, profile)
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("cannot open trace {path}: {source}")]
    Open {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Read {
        line: usize,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

impl ReplayError {
    /// 1-based line the error refers to, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ReplayError::Open { .. } => None,
            ReplayError::Read { line, .. } | ReplayError::Malformed { line, .. } => Some(*line),
        }
    }
}

/// Iterator over the frames of a JSONL trace, in file order.
///
/// Blank lines and `{"profile": ...}` header lines are skipped. With pacing
/// on, each frame is held back until its timestamp offset has elapsed on the
/// wall clock.
pub struct Replay<R> {
    lines: std::io::Lines<R>,
    line: usize,
    paced: bool,
    origin: Option<(Instant, f64)>,
}

impl<R: BufRead> Replay<R> {
    pub fn new(reader: R) -> Self {
        Replay {
            lines: reader.lines(),
            line: 0,
            paced: false,
            origin: None,
        }
    }

    pub fn paced(mut self, paced: bool) -> Self {
        self.paced = paced;
        self
    }

    fn parse(&self, text: &str) -> Result<Option<DetectionFrame>, ReplayError> {
        let malformed = |reason: String| ReplayError::Malformed {
            line: self.line,
            reason,
        };
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
        if value.get("profile").is_some() && value.get("type").is_none() {
            return Ok(None);
        }
        match serde_json::from_value::<Inbound>(value) {
            Ok(Inbound::Frame { t, detections }) => Ok(Some(DetectionFrame::new(t, detections))),
            Ok(_) => Err(malformed("only frame messages may appear in a trace".into())),
            Err(e) => Err(malformed(e.to_string())),
        }
    }

    fn pace(&mut self, t: f64) {
        if !self.paced {
            return;
        }
        let (start, t0) = *self.origin.get_or_insert((Instant::now(), t));
        let due = start + Duration::from_secs_f64((t - t0).max(0.0));
        let now = Instant::now();
        if due > now {
            std::thread::sleep(due - now);
        }
    }
}

impl<R: BufRead> Iterator for Replay<R> {
    type Item = Result<DetectionFrame, ReplayError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(text) => text,
                Err(source) => {
                    self.line += 1;
                    return Some(Err(ReplayError::Read {
                        line: self.line,
                        source,
                    }));
                }
            };
            self.line += 1;
            if text.trim().is_empty() {
                continue;
            }
            match self.parse(&text) {
                Ok(Some(frame)) => {
                    self.pace(frame.t);
                    return Some(Ok(frame));
                }
                Ok(None) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Opens a trace file for replay.
pub fn replay(path: impl AsRef<Path>) -> Result<Replay<BufReader<std::fs::File>>, ReplayError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| ReplayError::Open {
        path: path.display().to_string(),
        source,
    })?;
    Ok(Replay::new(BufReader::new(file)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub delta: f64,
    pub strategy: Strategy,
    pub characters: usize,
    pub correct: usize,
    /// Trials that ended without any confirmation.
    pub timeouts: usize,
    pub accuracy: f64,
    /// Mean frames from sign onset to confirmation, over confirmed trials.
    pub mean_frames: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub profile: SensorProfile,
    pub rows: Vec<BenchRow>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark corpus is empty")]
    EmptyCorpus,
    #[error("cannot plan {word:?}: {source}")]
    Plan {
        word: String,
        #[source]
        source: PlanError,
    },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Config(#[from] crate::confirmer::ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub deltas: Vec<f64>,
    pub strategies: Vec<Strategy>,
    /// The corpus is cycled until at least this many characters are signed.
    pub min_characters: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            deltas: vec![5.0, 10.0, 20.0, 30.0, 50.0],
            strategies: Strategy::ALL.to_vec(),
            min_characters: 1000,
        }
    }
}

/// Runs one closed-loop cell: each planned label is held until the first
/// confirmation or `hold_frames`, whichever comes first, then `gap_frames`
/// blank frames follow. Trial `i` draws from its own stream of the profile
/// seed, so every cell sees the same noise for the same character.
fn bench_cell(
    labels: &[String],
    alphabet: &[String],
    profile: &SensorProfile,
    config: ConfirmConfig,
) -> Result<BenchRow, BenchError> {
    let sampler = FrameSampler::new(profile, alphabet);
    let mut state = ConfirmState::new(config)?;
    let mut index = 0u64;
    let (mut correct, mut timeouts, mut confirmed, mut frame_sum) = (0usize, 0usize, 0usize, 0u64);

    for (trial, label) in labels.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        rng.set_stream(trial as u64);
        let confusers = sampler.confusers(label);
        let mut outcome = None;
        for held in 1..=profile.hold_frames {
            let frame = sampler.frame(&mut rng, profile.frame_time(index), label, &confusers);
            index += 1;
            if let Some(sym) = state.ingest_frame(&frame).expect("simulated frames are valid") {
                outcome = Some((sym.label, held));
                break;
            }
        }
        match outcome {
            Some((got, held)) => {
                confirmed += 1;
                frame_sum += held as u64;
                if &got == label {
                    correct += 1;
                }
            }
            None => timeouts += 1,
        }
        for _ in 0..profile.gap_frames {
            state
                .ingest_frame(&DetectionFrame::empty(profile.frame_time(index)))
                .expect("blank frames are valid");
            index += 1;
        }
    }

    let mean_frames = if confirmed > 0 {
        frame_sum as f64 / confirmed as f64
    } else {
        f64::NAN
    };
    Ok(BenchRow {
        delta: config.delta,
        strategy: config.strategy,
        characters: labels.len(),
        correct,
        timeouts,
        accuracy: correct as f64 / labels.len() as f64,
        mean_frames,
        mean_seconds: mean_frames / profile.fps,
    })
}

/// Accuracy and latency for every (δ, strategy) pair over `words`.
pub fn bench(
    words: &[String],
    planner: &Planner,
    profile: &SensorProfile,
    options: &BenchOptions,
) -> Result<BenchReport, BenchError> {
    profile.validate()?;
    if words.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let mut plans = Vec::with_capacity(words.len());
    for word in words {
        let plan = planner.plan(word).map_err(|source| BenchError::Plan {
            word: word.clone(),
            source,
        })?;
        plans.push(plan);
    }
    let mut labels: Vec<String> = Vec::new();
    if plans.iter().all(|p| p.labels.is_empty()) {
        return Err(BenchError::EmptyCorpus);
    }
    while labels.len() < options.min_characters.max(1) {
        for plan in &plans {
            labels.extend(plan.labels.iter().cloned());
        }
    }
    let alphabet: Vec<String> = planner
        .rules()
        .classes()
        .iter()
        .map(|c| c.label.clone())
        .collect();

    let cells: Vec<ConfirmConfig> = options
        .strategies
        .iter()
        .flat_map(|&s| options.deltas.iter().map(move |&d| ConfirmConfig::new(s, d)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&config| bench_cell(&labels, &alphabet, profile, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport {
        profile: profile.clone(),
        rows,
    })
}

impl BenchReport {
    pub fn row(&self, strategy: Strategy, delta: f64) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.delta == delta)
    }

    /// Threshold grid in the layout of the original experiment table.
    pub fn to_table(&self) -> String {
        let mut deltas: Vec<f64> = self.rows.iter().map(|r| r.delta).collect();
        deltas.sort_by(f64::total_cmp);
        deltas.dedup();
        let cell = |s: Strategy, d: f64, f: &dyn Fn(&BenchRow) -> String| {
            self.row(s, d).map(f).unwrap_or_else(|| "-".into())
        };
        let mut out = format!(
            "{:>9}  {:>12}  {:>12}  {:>11}  {:>11}  {:>9}\n",
            "threshold", "accuracy(n)", "accuracy(c)", "frames(n)", "frames(c)", "time(c) s"
        );
        for d in deltas {
            let acc = |r: &BenchRow| format!("{:.2}%", 100.0 * r.accuracy);
            let frames = |r: &BenchRow| format!("{:.2}", r.mean_frames);
            let secs = |r: &BenchRow| format!("{:.3}", r.mean_seconds);
            out.push_str(&format!(
                "{:>9}  {:>12}  {:>12}  {:>11}  {:>11}  {:>9}\n",
                d,
                cell(Strategy::DetectionCount, d, &acc),
                cell(Strategy::CumulativeConfidence, d, &acc),
                cell(Strategy::DetectionCount, d, &frames),
                cell(Strategy::CumulativeConfidence, d, &frames),
                cell(Strategy::CumulativeConfidence, d, &secs),
            ));
        }
        out
    }
}
