//! Score a small set of detections: per-class AP over IoU 0.50:0.95,
//! both mAPs and the best F1 operating point.
//!
//!     cargo run -p bdspell --example evaluate_detections

use bdspell::metrics::{coco_iou_thresholds, default_conf_grid, evaluate, BBox, EvalReport, GroundTruth, Prediction};

pub fn run() -> EvalReport {
    let gt = |img: &str, label: &str, b: [f64; 4]| GroundTruth::new(img, label, BBox::from(b));
    let pred = |img: &str, label: &str, b: [f64; 4], s: f64| Prediction::new(img, label, BBox::from(b), s);
    let truths = vec![
        gt("a", "ka", [10.0, 10.0, 50.0, 50.0]),
        gt("a", "ma", [100.0, 40.0, 40.0, 60.0]),
        gt("b", "ka", [20.0, 30.0, 60.0, 60.0]),
        gt("c", "ma", [5.0, 5.0, 30.0, 30.0]),
    ];
    let predictions = vec![
        pred("a", "ka", [12.0, 11.0, 50.0, 48.0], 0.92), // tight hit
        pred("a", "ka", [14.0, 12.0, 50.0, 50.0], 0.40), // duplicate
        pred("a", "ma", [108.0, 46.0, 40.0, 60.0], 0.81), // loose hit
        pred("b", "ka", [60.0, 60.0, 60.0, 60.0], 0.75), // misplaced
        pred("c", "ka", [5.0, 5.0, 30.0, 30.0], 0.33), // wrong class
    ];
    let report = evaluate(&truths, &predictions, &coco_iou_thresholds(), &default_conf_grid())
        .expect("consistent pixel boxes");
    print!("{}", report.to_table());
    report
}

#[allow(dead_code)]
fn main() {
    run();
}
