//! Detection evaluation: IoU, thresholding, precision/recall, AP and mAP.
//!
//! Matching follows the usual greedy protocol: predictions of one class are
//! visited in descending score order and each takes the unmatched ground
//! truth of the same class and image with the highest IoU, provided the IoU
//! reaches the threshold. Ground truths are single-use.
//!
//! PR points are taken at every distinct score, so tied predictions enter the
//! curve together. AP is the area under the precision envelope (all-point
//! interpolation).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// `[x_min, y_min, width, height]`; the unit is whatever the dataset uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub width: f64,
    pub height: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x_min, y_min, width, height]: [f64; 4]) -> Self {
        BBox { x_min, y_min, width, height }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.width, b.height]
    }
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Self {
        BBox { x_min, y_min, width, height }
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    fn max_coordinate(&self) -> f64 {
        (self.x_min + self.width).max(self.y_min + self.height).max(self.x_min).max(self.y_min)
    }
}

/// Intersection over union. Zero-area boxes score 0 against anything.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (area_a, area_b) = (a.area(), b.area());
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let w = (a.x_min + a.width).min(b.x_min + b.width) - a.x_min.max(b.x_min);
    let h = (a.y_min + a.height).min(b.y_min + b.height) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    (inter / (area_a + area_b - inter)).clamp(0.0, 1.0)
}

/// 1 when `score` is strictly above `threshold`, else 0.
pub fn classify_at(score: f64, threshold: f64) -> u8 {
    u8::from(score > threshold)
}

fn id_string<'de, D: Deserializer<'de>>(de: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Int(i64),
    }
    Ok(match Id::deserialize(de)? {
        Id::Text(s) => s,
        Id::Int(n) => n.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(deserialize_with = "id_string")]
    pub image_id: String,
    #[serde(rename = "label", alias = "class_label")]
    pub class_label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    #[serde(deserialize_with = "id_string")]
    pub image_id: String,
    #[serde(rename = "label", alias = "class_label")]
    pub class_label: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
}

impl GroundTruth {
    pub fn new(image_id: impl Into<String>, class_label: impl Into<String>, bbox: BBox) -> Self {
        GroundTruth {
            image_id: image_id.into(),
            class_label: class_label.into(),
            bbox,
        }
    }
}

impl Prediction {
    pub fn new(
        image_id: impl Into<String>,
        class_label: impl Into<String>,
        bbox: BBox,
        score: f64,
    ) -> Self {
        Prediction {
            image_id: image_id.into(),
            class_label: class_label.into(),
            bbox,
            score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Outcome of matching one class at one IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(prediction index, score, is_tp)` in descending score order.
    pub ranked: Vec<(usize, f64, bool)>,
}

impl MatchResult {
    pub fn ground_truths(&self) -> usize {
        self.tp + self.fn_
    }

    /// One point per distinct score, from the highest score down.
    pub fn pr_curve(&self) -> Vec<PRPoint> {
        let total = self.ground_truths();
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (i, &(_, score, hit)) in self.ranked.iter().enumerate() {
            if hit {
                tp += 1;
            } else {
                fp += 1;
            }
            let last_of_tie = self.ranked.get(i + 1).is_none_or(|next| next.1 != score);
            if last_of_tie {
                points.push(PRPoint {
                    threshold: score,
                    precision: tp as f64 / (tp + fp) as f64,
                    recall: if total > 0 { tp as f64 / total as f64 } else { 0.0 },
                    tp,
                    fp,
                    fn_: total - tp,
                });
            }
        }
        points
    }
}

/// Greedy score-ordered matching for one class.
pub fn match_and_count(
    gts: &[GroundTruth],
    preds: &[Prediction],
    class_label: &str,
    iou_threshold: f64,
) -> MatchResult {
    let mut by_image: HashMap<&str, Vec<(&BBox, bool)>> = HashMap::new();
    let mut total = 0;
    for gt in gts.iter().filter(|g| g.class_label == class_label) {
        by_image.entry(gt.image_id.as_str()).or_default().push((&gt.bbox, false));
        total += 1;
    }

    let mut order: Vec<usize> = preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.class_label == class_label)
        .map(|(i, _)| i)
        .collect();
    // stable: equal scores keep input order
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut ranked = Vec::with_capacity(order.len());
    let mut tp = 0;
    for i in order {
        let pred = &preds[i];
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = by_image.get(pred.image_id.as_str()) {
            for (j, (bbox, used)) in candidates.iter().enumerate() {
                if *used {
                    continue;
                }
                let overlap = iou(&pred.bbox, bbox);
                if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((j, overlap));
                }
            }
        }
        let hit = match best {
            Some((j, _)) => {
                by_image.get_mut(pred.image_id.as_str()).unwrap()[j].1 = true;
                tp += 1;
                true
            }
            None => false,
        };
        ranked.push((i, pred.score, hit));
    }
    let fp = ranked.len() - tp;
    MatchResult { tp, fp, fn_: total - tp, ranked }
}

/// Area under the precision envelope. `points` must be in ascending recall
/// order (as produced by [`MatchResult::pr_curve`]). Empty input gives 0.
pub fn average_precision(points: &[PRPoint]) -> f64 {
    let mut envelope: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, interp) in points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * interp;
        prev_recall = p.recall;
    }
    ap.clamp(0.0, 1.0)
}

/// The IoU grid 0.50, 0.55, ..., 0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Confidence grid 0.000, 0.001, ..., 1.000.
pub fn default_conf_grid() -> Vec<f64> {
    (0..=1000).map(|i| i as f64 / 1000.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Point {
    pub conf: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub iou: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    /// Per class, AP at each IoU threshold (same order as `iou_thresholds`).
    pub per_class_ap: BTreeMap<String, Vec<ClassAp>>,
    /// Mean over classes at each IoU threshold.
    pub map_per_iou: Vec<f64>,
    #[serde(rename = "map_50")]
    pub map50: f64,
    #[serde(rename = "map_50_95")]
    pub map50_95: f64,
    /// Micro-averaged over classes at IoU 0.5, one point per grid value.
    pub f1_curve: Vec<F1Point>,
    pub best_f1: F1Point,
    /// Classes seen only in predictions; excluded from every mean.
    pub excluded_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("box conventions differ: {0}")]
    BoxConvention(String),
    #[error("invalid {what} {index}: {reason}")]
    Invalid {
        what: &'static str,
        index: usize,
        reason: String,
    },
    #[error("IoU threshold {0} outside (0, 1]")]
    IouThreshold(f64),
}

fn check_inputs(gts: &[GroundTruth], preds: &[Prediction]) -> Result<(), EvalError> {
    if gts.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let invalid = |what, index, reason: &str| EvalError::Invalid {
        what,
        index,
        reason: reason.to_string(),
    };
    for (i, g) in gts.iter().enumerate() {
        if g.image_id.is_empty() || g.class_label.is_empty() {
            return Err(invalid("ground truth", i, "empty image_id or label"));
        }
        if !(g.bbox.width >= 0.0 && g.bbox.height >= 0.0) {
            return Err(invalid("ground truth", i, "negative box size"));
        }
    }
    for (i, p) in preds.iter().enumerate() {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(invalid("prediction", i, "score outside [0, 1]"));
        }
        if !(p.bbox.width >= 0.0 && p.bbox.height >= 0.0) {
            return Err(invalid("prediction", i, "negative box size"));
        }
    }
    // all-normalized on one side, pixel-sized on the other
    let normalized = |max: f64| max <= 1.5;
    let gt_max = gts.iter().map(|g| g.bbox.max_coordinate()).fold(0.0, f64::max);
    let pred_max = preds.iter().map(|p| p.bbox.max_coordinate()).fold(0.0, f64::max);
    if !preds.is_empty() && normalized(gt_max) != normalized(pred_max) {
        return Err(EvalError::BoxConvention(format!(
            "largest ground-truth coordinate {gt_max}, largest prediction coordinate {pred_max}"
        )));
    }
    Ok(())
}

/// Full evaluation: per-class AP at each IoU threshold, both mAPs and the
/// F1-confidence curve at IoU 0.5.
pub fn evaluate(
    gts: &[GroundTruth],
    preds: &[Prediction],
    iou_thresholds: &[f64],
    conf_grid: &[f64],
) -> Result<EvalReport, EvalError> {
    check_inputs(gts, preds)?;
    let mut thresholds = iou_thresholds.to_vec();
    if thresholds.is_empty() {
        thresholds = coco_iou_thresholds();
    }
    if let Some(&bad) = thresholds.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(EvalError::IouThreshold(bad));
    }

    let classes: BTreeSet<&str> = gts.iter().map(|g| g.class_label.as_str()).collect();
    let excluded: Vec<String> = preds
        .iter()
        .map(|p| p.class_label.as_str())
        .filter(|c| !classes.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();

    let mut per_class_ap = BTreeMap::new();
    for &class in &classes {
        let aps = thresholds
            .iter()
            .map(|&t| ClassAp {
                iou: t,
                ap: average_precision(&match_and_count(gts, preds, class, t).pr_curve()),
            })
            .collect::<Vec<_>>();
        per_class_ap.insert(class.to_string(), aps);
    }
    let n = classes.len() as f64;
    let map_per_iou: Vec<f64> = (0..thresholds.len())
        .map(|k| per_class_ap.values().map(|aps: &Vec<ClassAp>| aps[k].ap).sum::<f64>() / n)
        .collect();
    let map50_95 = map_per_iou.iter().sum::<f64>() / map_per_iou.len() as f64;
    let map50 = match thresholds.iter().position(|&t| t == 0.5) {
        Some(k) => map_per_iou[k],
        None => {
            classes
                .iter()
                .map(|c| average_precision(&match_and_count(gts, preds, c, 0.5).pr_curve()))
                .sum::<f64>()
                / n
        }
    };

    let f1_curve = f1_curve(gts, preds, &classes, conf_grid);
    let best_f1 = f1_curve
        .iter()
        .copied()
        .fold(None, |best: Option<F1Point>, p| match best {
            Some(b) if b.f1 >= p.f1 => Some(b),
            _ => Some(p),
        })
        .unwrap_or(F1Point { conf: 0.0, precision: 0.0, recall: 0.0, f1: 0.0 });

    Ok(EvalReport {
        iou_thresholds: thresholds,
        per_class_ap,
        map_per_iou,
        map50,
        map50_95,
        f1_curve,
        best_f1,
        excluded_classes: excluded,
    })
}

/// Matching at IoU 0.5 done once per class; a prediction survives a
/// confidence cut when its score is strictly above it.
fn f1_curve(
    gts: &[GroundTruth],
    preds: &[Prediction],
    classes: &BTreeSet<&str>,
    conf_grid: &[f64],
) -> Vec<F1Point> {
    let matches: Vec<MatchResult> = classes
        .iter()
        .map(|c| match_and_count(gts, preds, c, 0.5))
        .collect();
    let total_gt: usize = matches.iter().map(MatchResult::ground_truths).sum();
    // predictions of classes without ground truth are false positives
    let stray: Vec<f64> = preds
        .iter()
        .filter(|p| !classes.contains(p.class_label.as_str()))
        .map(|p| p.score)
        .collect();
    conf_grid
        .iter()
        .map(|&conf| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for m in &matches {
                for &(_, score, hit) in &m.ranked {
                    if classify_at(score, conf) == 1 {
                        if hit { tp += 1 } else { fp += 1 }
                    }
                }
            }
            fp += stray.iter().filter(|&&s| classify_at(s, conf) == 1).count();
            let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
            let recall = if total_gt > 0 { tp as f64 / total_gt as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            F1Point { conf, precision, recall, f1 }
        })
        .collect()
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.iou_thresholds.iter().map(|t| format!("AP@{t:.2}")).collect();
        out.push_str(&format!("{:<14}{}\n", "class", header.iter().map(|h| format!("{h:>9}")).collect::<String>()));
        for (class, aps) in &self.per_class_ap {
            let cells: String = aps.iter().map(|a| format!("{:>9.4}", a.ap)).collect();
            out.push_str(&format!("{class:<14}{cells}\n"));
        }
        let cells: String = self.map_per_iou.iter().map(|m| format!("{m:>9.4}")).collect();
        out.push_str(&format!("{:<14}{cells}\n", "mAP"));
        out.push_str(&format!("mAP@0.5        {:.4}\n", self.map50));
        out.push_str(&format!("mAP@0.5:0.95   {:.4}\n", self.map50_95));
        let b = self.best_f1;
        out.push_str(&format!(
            "best F1        {:.4} at conf {:.3} (P {:.4}, R {:.4})\n",
            b.f1, b.conf, b.precision, b.recall
        ));
        if !self.excluded_classes.is_empty() {
            out.push_str(&format!("excluded (no ground truth): {}\n", self.excluded_classes.join(", ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h)
    }

    #[test]
    fn iou_cases() {
        let a = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(5.0, 5.0, 1.0, 1.0)), 0.0);
        assert!((iou(&a, &b(1.0, 1.0, 2.0, 2.0)) - 1.0 / 7.0).abs() < 1e-12);
        // touching edges
        assert_eq!(iou(&a, &b(2.0, 0.0, 1.0, 1.0)), 0.0);
        assert_eq!(iou(&b(0.0, 0.0, 0.0, 3.0), &a), 0.0);
        assert_eq!(iou(&b(0.5, 0.5, 0.0, 0.0), &b(0.5, 0.5, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn strict_class_threshold() {
        assert_eq!(classify_at(0.9, 0.5), 1);
        assert_eq!(classify_at(0.5, 0.5), 0);
        assert_eq!(classify_at(0.336, 0.335), 1);
    }

    #[test]
    fn matching_examples() {
        let gts = vec![GroundTruth::new("img", "ka", b(0.0, 0.0, 1.0, 1.0))];
        let one = vec![Prediction::new("img", "ka", b(0.0, 0.0, 1.0, 0.9), 0.8)];
        let m = match_and_count(&gts, &one, "ka", 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));

        let two = vec![
            Prediction::new("img", "ka", b(0.0, 0.0, 1.0, 0.9), 0.8),
            Prediction::new("img", "ka", b(0.0, 0.05, 1.0, 0.9), 0.7),
        ];
        let m = match_and_count(&gts, &two, "ka", 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
        assert_eq!(m.ranked, vec![(0, 0.8, true), (1, 0.7, false)]);

        let gts2 = vec![
            GroundTruth::new("a", "ka", b(0.0, 0.0, 1.0, 1.0)),
            GroundTruth::new("b", "ka", b(0.0, 0.0, 1.0, 1.0)),
        ];
        let m = match_and_count(&gts2, &[], "ka", 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 0, 2));
    }

    #[test]
    fn matching_respects_image_and_class() {
        let gts = vec![GroundTruth::new("a", "ka", b(0.0, 0.0, 1.0, 1.0))];
        let preds = vec![
            Prediction::new("b", "ka", b(0.0, 0.0, 1.0, 1.0), 0.9),
            Prediction::new("a", "kha", b(0.0, 0.0, 1.0, 1.0), 0.9),
        ];
        let m = match_and_count(&gts, &preds, "ka", 0.5);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
    }

    fn points(hits: &[bool], total: usize) -> Vec<PRPoint> {
        MatchResult {
            tp: hits.iter().filter(|h| **h).count(),
            fp: hits.iter().filter(|h| !**h).count(),
            fn_: total - hits.iter().filter(|h| **h).count(),
            ranked: hits
                .iter()
                .enumerate()
                .map(|(i, &h)| (i, 1.0 - i as f64 * 0.1, h))
                .collect(),
        }
        .pr_curve()
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&points(&[true, true, false], 2)), 1.0);
        assert_eq!(average_precision(&points(&[false, false], 2)), 0.0);
        let ap = average_precision(&points(&[true, false, true], 2));
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(average_precision(&[]), 0.0);
    }

    #[test]
    fn tied_scores_form_one_point() {
        let m = MatchResult {
            tp: 1,
            fp: 1,
            fn_: 0,
            ranked: vec![(0, 0.5, true), (1, 0.5, false)],
        };
        let curve = m.pr_curve();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve[0].precision, 0.5);
        assert_eq!(average_precision(&curve), 0.5);
    }

    #[test]
    fn perfect_single_class() {
        let gts: Vec<_> = (0..4)
            .map(|i| GroundTruth::new(format!("img{i}"), "ka", b(0.1, 0.1, 0.3, 0.3)))
            .collect();
        let preds: Vec<_> = gts
            .iter()
            .map(|g| Prediction::new(g.image_id.clone(), "ka", g.bbox, 0.9))
            .collect();
        let report = evaluate(&gts, &preds, &coco_iou_thresholds(), &default_conf_grid()).unwrap();
        assert_eq!(report.map50, 1.0);
        assert_eq!(report.map50_95, 1.0);
        assert_eq!(report.best_f1.f1, 1.0);
        assert!(report.best_f1.conf < 0.9);
    }

    #[test]
    fn evaluate_errors() {
        assert_eq!(evaluate(&[], &[], &[0.5], &[0.5]), Err(EvalError::EmptyGroundTruth));
        let gts = vec![GroundTruth::new("a", "ka", b(0.1, 0.1, 0.2, 0.2))];
        let preds = vec![Prediction::new("a", "ka", b(10.0, 20.0, 64.0, 64.0), 0.9)];
        assert!(matches!(
            evaluate(&gts, &preds, &[0.5], &[0.5]),
            Err(EvalError::BoxConvention(_))
        ));
        let preds = vec![Prediction::new("a", "ka", b(0.1, 0.1, 0.2, 0.2), 1.5)];
        assert!(matches!(evaluate(&gts, &preds, &[0.5], &[0.5]), Err(EvalError::Invalid { .. })));
    }

    #[test]
    fn stray_classes_are_excluded_from_means() {
        let gts = vec![GroundTruth::new("a", "ka", b(0.1, 0.1, 0.2, 0.2))];
        let preds = vec![
            Prediction::new("a", "ka", b(0.1, 0.1, 0.2, 0.2), 0.9),
            Prediction::new("a", "ma", b(0.5, 0.5, 0.2, 0.2), 0.8),
        ];
        let report = evaluate(&gts, &preds, &[0.5], &[0.0, 0.85]).unwrap();
        assert_eq!(report.excluded_classes, ["ma"]);
        assert_eq!(report.map50, 1.0);
        assert_eq!(report.f1_curve[0].precision, 0.5);
        assert_eq!(report.f1_curve[1].precision, 1.0);
    }

    #[test]
    fn report_json_shape() {
        let gts = vec![GroundTruth::new("a", "ka", b(0.1, 0.1, 0.2, 0.2))];
        let preds = vec![Prediction::new("a", "ka", b(0.1, 0.1, 0.2, 0.2), 0.9)];
        let report = evaluate(&gts, &preds, &[0.5, 0.75], &[0.5]).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        for key in ["map_50", "map_50_95", "per_class_ap", "best_f1", "f1_curve"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let input: Vec<GroundTruth> =
            serde_json::from_str(r#"[{"image_id": 7, "label": "ka", "box": [0.1, 0.1, 0.2, 0.2]}]"#).unwrap();
        assert_eq!(input[0].image_id, "7");
    }
}
