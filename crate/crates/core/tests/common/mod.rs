#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use bdspell::metrics::{BBox, GroundTruth, Prediction};
use bdspell::{
    ConfirmConfig, ConfirmState, Composer, EventKind, Mode, Planner, RuleSet, SensorProfile,
    Strategy, Trigger,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rules() -> Arc<RuleSet> {
    Arc::new(RuleSet::default_bengali())
}

// ---------- confirmation oracle ----------

/// Frames needed at constant confidence `a / 20` for integer `delta`:
/// the least k with k·a > 20·delta, in integers.
pub fn closed_form_frames(a: u64, delta: u64) -> u64 {
    20 * delta / a + 1
}

/// Feeds single-detection frames at confidence `conf` until confirmation.
pub fn frames_by_simulation(conf: f64, config: ConfirmConfig, limit: u32) -> Option<u32> {
    let mut state = ConfirmState::new(config).unwrap();
    for k in 0..limit {
        let frame = bdspell::DetectionFrame::new(
            k as f64,
            vec![bdspell::Detection::new("ka", conf, [0.4, 0.4, 0.2, 0.2])],
        );
        if let Some(sym) = state.ingest_frame(&frame).unwrap() {
            return Some(sym.frames_to_confirm);
        }
    }
    None
}

/// Every (a, δ) cell of the 20×5 grid where simulation disagrees with the
/// closed form.
pub fn closed_form_mismatches() -> Vec<(u64, u64, u64, Option<u32>)> {
    let mut bad = Vec::new();
    for a in 1..=20u64 {
        for delta in [5u64, 10, 20, 30, 50] {
            let want = closed_form_frames(a, delta);
            let config = ConfirmConfig::new(Strategy::CumulativeConfidence, delta as f64);
            let got = frames_by_simulation(a as f64 / 20.0, config, 2000);
            if got != Some(want as u32) {
                bad.push((a, delta, want, got));
            }
        }
    }
    bad
}

// ---------- end-to-end round trip ----------

/// plan → noiseless simulate → confirmer → composer.
pub fn round_trip(word: &str, planner: &Planner) -> Result<String, String> {
    let rules = planner.rules();
    let plan = planner.plan(word).map_err(|e| e.to_string())?;
    let trace = bdspell::simulator::simulate(&plan, rules, &SensorProfile::noiseless())
        .map_err(|e| e.to_string())?;
    let mut state = ConfirmState::new(ConfirmConfig::default()).unwrap();
    let mut composer = Composer::new(Arc::clone(rules));
    let mut confirmed = Vec::new();
    for frame in &trace.frames {
        if let Some(sym) = state.ingest_frame(frame).map_err(|e| e.to_string())? {
            confirmed.push(sym.label.clone());
            composer.apply_symbol(&sym).map_err(|e| e.to_string())?;
        }
    }
    if confirmed != plan.labels {
        return Err(format!("confirmed {confirmed:?}, planned {:?}", plan.labels));
    }
    Ok(composer.render())
}

// ---------- composer fuzz ----------

/// Random symbol stream biased toward sequences that make triggers fire.
pub struct SymbolSource {
    rng: ChaCha8Rng,
    rules: Arc<RuleSet>,
    labels: Vec<String>,
    triggers: Vec<String>,
    queue: Vec<String>,
}

impl SymbolSource {
    pub fn new(rules: Arc<RuleSet>, seed: u64) -> Self {
        let labels = rules.classes().iter().map(|c| c.label.clone()).collect();
        let triggers = Trigger::ALL
            .iter()
            .filter_map(|&t| rules.trigger_class(t).map(|c| c.label.clone()))
            .collect();
        SymbolSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rules,
            labels,
            triggers,
            queue: Vec::new(),
        }
    }

    /// Next label. Under `pressure` half the fresh draws are backspaces, or
    /// the numeral exit in numeral mode, so the buffer stays short.
    pub fn next_label(&mut self, pressure: Option<Mode>) -> String {
        if let Some(l) = self.queue.pop() {
            return l;
        }
        if let Some(mode) = pressure {
            if self.rng.random::<bool>() {
                return match mode {
                    Mode::Textual => self.rules.trigger_label(Trigger::T6).to_string(),
                    Mode::Numeral => self.rules.numeral_mode_exit_label().to_string(),
                };
            }
        }
        let roll: f64 = self.rng.random();
        let r = &self.rules;
        let mut seq: Vec<String> = if roll < 0.1 {
            let all: Vec<_> = r.compounds2().iter().chain(r.compounds3()).collect();
            let rule = all[self.rng.random_range(0..all.len())];
            let t = if rule.parts.len() == 2 { Trigger::T2 } else { Trigger::T3 };
            let mut s = rule.parts.clone();
            s.push(r.trigger_label(t).to_string());
            s
        } else if roll < 0.15 {
            let rule = &r.hidden()[self.rng.random_range(0..r.hidden().len())];
            let mut s = rule.pattern.clone();
            s.push(r.trigger_label(Trigger::T4).to_string());
            s
        } else if roll < 0.4 {
            vec![self.triggers[self.rng.random_range(0..self.triggers.len())].clone()]
        } else {
            vec![self.labels[self.rng.random_range(0..self.labels.len())].clone()]
        };
        seq.reverse();
        self.queue = seq;
        self.queue.pop().unwrap()
    }
}

/// Runs `steps` random symbols through a composer, checking the composer
/// invariants after every step. Returns the first violation.
pub fn fuzz_composer(steps: usize, seed: u64) -> Result<(), String> {
    let rules = rules();
    let mut source = SymbolSource::new(Arc::clone(&rules), seed);
    let mut composer = Composer::new(Arc::clone(&rules));
    let t5 = rules.trigger_label(Trigger::T5).to_string();
    let t6 = rules.trigger_label(Trigger::T6).to_string();
    let exit = rules.numeral_mode_exit_label().to_string();
    let (mut entries, mut exits) = (0i64, 0i64);

    for step in 0..steps {
        let pressure = (composer.buffer().len() > 48).then(|| composer.mode());
        let label = source.next_label(pressure);
        let before = composer.buffer().to_vec();
        let mode_before = composer.mode();
        let events = composer
            .apply(&label)
            .map_err(|e| format!("step {step}: {label}: {e}"))?;
        let after = composer.buffer();
        let fail = |what: &str| Err(format!("step {step} ({label}): {what}"));

        if events.is_empty() {
            return fail("no event");
        }
        for ev in &events {
            if ev.mode != composer.mode() {
                return fail("event mode differs from state");
            }
        }
        if events.last().unwrap().buffer_text != composer.render()
            || composer.render() != bdspell::composer::render(after)
        {
            return fail("buffer_text differs from render");
        }
        let common = before.iter().zip(after).take_while(|(a, b)| a == b).count();
        if common < before.len().saturating_sub(3) || after.len() > before.len() + 1 {
            return fail("touched more than the last 3 graphemes");
        }

        match mode_before {
            Mode::Textual if label == t5 => entries += 1,
            Mode::Numeral if label == exit => exits += 1,
            _ => {}
        }
        if (composer.mode() == Mode::Numeral) != ((entries - exits) % 2 == 1) {
            return fail("mode parity broken");
        }

        let appended = events
            .iter()
            .any(|e| matches!(e.kind, EventKind::Appended | EventKind::Space));
        if appended && composer.mode() == Mode::Textual {
            let mut probe = composer.clone();
            probe.apply(&t6).unwrap();
            if probe.buffer() != before.as_slice() {
                return fail("T6 did not undo the append");
            }
        }
    }
    Ok(())
}

// ---------- metrics reference ----------

pub const CLASSES: [&str; 3] = ["ka", "kha", "ga"];

/// 3 classes over 20 images in pixel coordinates, with planted true
/// positives of varying overlap, off-target boxes, duplicates, stray
/// images and missed objects. Scores are distinct.
pub fn synthetic_dataset(seed: u64) -> (Vec<GroundTruth>, Vec<Prediction>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gts = Vec::new();
    let mut preds = Vec::new();
    let mut score_pool: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
    let mut score = |rng: &mut ChaCha8Rng| score_pool.swap_remove(rng.random_range(0..score_pool.len()));

    for img in 0..20 {
        let image = format!("img{img:02}");
        let objects = rng.random_range(1..=4);
        for _ in 0..objects {
            let class = CLASSES[rng.random_range(0..3)];
            let (w, h) = (rng.random_range(40.0..160.0), rng.random_range(40.0..160.0));
            let (x, y) = (rng.random_range(0.0..480.0), rng.random_range(0.0..320.0));
            let gt = BBox::new(x, y, w, h);
            gts.push(GroundTruth::new(&image, class, gt));

            let roll: f64 = rng.random();
            if roll < 0.15 {
                continue; // missed
            }
            // shift spans IoU from ~1 down to well below 0.5
            let shift = rng.random_range(0.0..0.45);
            let shifted = BBox::new(x + shift * w, y + shift * h * 0.5, w, h);
            preds.push(Prediction::new(&image, class, shifted, score(&mut rng)));
            if roll > 0.85 {
                let dup = BBox::new(x + 2.0, y - 1.0, w, h);
                preds.push(Prediction::new(&image, class, dup, score(&mut rng)));
            }
            if roll > 0.7 && roll <= 0.85 {
                let other = CLASSES[(CLASSES.iter().position(|c| *c == class).unwrap() + 1) % 3];
                preds.push(Prediction::new(&image, other, gt, score(&mut rng)));
            }
        }
        if rng.random::<f64>() < 0.3 {
            let class = CLASSES[rng.random_range(0..3)];
            let stray = BBox::new(rng.random_range(0.0..500.0), rng.random_range(0.0..400.0), 60.0, 60.0);
            preds.push(Prediction::new(&image, class, stray, score(&mut rng)));
        }
    }
    (gts, preds)
}

/// IoU from corner coordinates.
pub fn reference_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = (a.x_min, a.y_min, a.x_min + a.width, a.y_min + a.height);
    let (bx1, by1, bx2, by2) = (b.x_min, b.y_min, b.x_min + b.width, b.y_min + b.height);
    let iw = (ax2.min(bx2) - ax1.max(bx1)).max(0.0);
    let ih = (ay2.min(by2) - ay1.max(by1)).max(0.0);
    let inter = iw * ih;
    let union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Precision and recall when only predictions scoring at least `cut` are kept,
/// matched from scratch.
fn counts_at_cut(gts: &[&GroundTruth], preds: &[&Prediction], cut: f64, thr: f64) -> (usize, usize) {
    let mut kept: Vec<&&Prediction> = preds.iter().filter(|p| p.score >= cut).collect();
    kept.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let mut used = vec![false; gts.len()];
    let mut tp = 0;
    for p in &kept {
        let mut best = None;
        let mut best_iou = thr;
        for (j, g) in gts.iter().enumerate() {
            if used[j] || g.image_id != p.image_id {
                continue;
            }
            let o = reference_iou(&p.bbox, &g.bbox);
            if o >= best_iou && (best.is_none() || o > best_iou) {
                best = Some(j);
                best_iou = o;
            }
        }
        if let Some(j) = best {
            used[j] = true;
            tp += 1;
        }
    }
    (tp, kept.len() - tp)
}

/// AP as the mean, over the recall levels 1/G, 2/G, ..., 1, of the best
/// precision reached at that recall or beyond.
pub fn reference_ap(gts: &[GroundTruth], preds: &[Prediction], class: &str, thr: f64) -> f64 {
    let g: Vec<&GroundTruth> = gts.iter().filter(|x| x.class_label == class).collect();
    let p: Vec<&Prediction> = preds.iter().filter(|x| x.class_label == class).collect();
    if g.is_empty() {
        return 0.0;
    }
    let cuts: BTreeSet<u64> = p.iter().map(|x| x.score.to_bits()).collect();
    let curve: Vec<(usize, f64)> = cuts
        .iter()
        .map(|&bits| {
            let (tp, fp) = counts_at_cut(&g, &p, f64::from_bits(bits), thr);
            (tp, if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 })
        })
        .collect();
    let total = g.len();
    (1..=total)
        .map(|m| {
            curve
                .iter()
                .filter(|(tp, _)| *tp >= m)
                .map(|&(_, prec)| prec)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / total as f64
}

pub struct ReferenceReport {
    pub per_class: BTreeMap<String, Vec<f64>>,
    pub map50: f64,
    pub map50_95: f64,
}

pub fn reference_evaluate(gts: &[GroundTruth], preds: &[Prediction]) -> ReferenceReport {
    let thresholds: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
    let classes: BTreeSet<&str> = gts.iter().map(|g| g.class_label.as_str()).collect();
    let per_class: BTreeMap<String, Vec<f64>> = classes
        .iter()
        .map(|c| (c.to_string(), thresholds.iter().map(|&t| reference_ap(gts, preds, c, t)).collect()))
        .collect();
    let n = classes.len() as f64;
    let map_at = |k: usize| per_class.values().map(|v| v[k]).sum::<f64>() / n;
    ReferenceReport {
        map50: map_at(0),
        map50_95: (0..thresholds.len()).map(map_at).sum::<f64>() / thresholds.len() as f64,
        per_class,
    }
}

/// Largest absolute difference between `evaluate` and the reference over
/// every per-class AP and both mAPs.
pub fn metrics_oracle_gap(seed: u64) -> f64 {
    let (gts, preds) = synthetic_dataset(seed);
    let report = bdspell::metrics::evaluate(
        &gts,
        &preds,
        &bdspell::metrics::coco_iou_thresholds(),
        &bdspell::metrics::default_conf_grid(),
    )
    .unwrap();
    let reference = reference_evaluate(&gts, &preds);
    let mut gap: f64 = (report.map50 - reference.map50)
        .abs()
        .max((report.map50_95 - reference.map50_95).abs());
    assert_eq!(report.per_class_ap.len(), reference.per_class.len());
    for (class, aps) in &report.per_class_ap {
        for (got, want) in aps.iter().zip(&reference.per_class[class]) {
            gap = gap.max((got.ap - want).abs());
        }
    }
    gap
}
