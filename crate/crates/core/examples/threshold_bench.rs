//! Accuracy and latency of both confirmation strategies over a δ grid,
//! laid out like the original experiment table.
//!
//!     cargo run --release -p bdspell --example threshold_bench

use std::sync::Arc;

use bdspell::simulator::{bench, BenchOptions, BenchReport};
use bdspell::{Planner, RuleSet, SensorProfile};

pub fn run(seed: u64, min_characters: usize) -> BenchReport {
    let planner = Planner::new(Arc::new(RuleSet::default_bengali()));
    let words = bdspell::corpus::shipped_words();
    let options = BenchOptions {
        min_characters,
        ..BenchOptions::default()
    };
    let report = bench(&words, &planner, &SensorProfile::default().with_seed(seed), &options)
        .expect("shipped words are spellable");
    print!("{}", report.to_table());
    report
}

#[allow(dead_code)]
fn main() {
    run(7, 1000);
}
