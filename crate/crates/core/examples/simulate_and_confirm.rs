//! Simulate a noisy detector signing a word, then confirm and compose it
//! frame by frame.
//!
//!     cargo run -p bdspell --example simulate_and_confirm

use std::sync::Arc;

use bdspell::simulator::simulate;
use bdspell::{Composer, ConfirmConfig, ConfirmState, Planner, RuleSet, SensorProfile};

pub fn run(word: &str, seed: u64) -> String {
    let rules = Arc::new(RuleSet::default_bengali());
    let plan = Planner::new(Arc::clone(&rules)).plan(word).expect("spellable");
    let profile = SensorProfile::default().with_seed(seed);
    let trace = simulate(&plan, &rules, &profile).expect("valid profile");
    println!(
        "{word}: {} signs, {} frames ({:.1} s at {} fps)",
        plan.labels.len(),
        trace.frames.len(),
        trace.duration(),
        profile.fps
    );

    let mut state = ConfirmState::new(ConfirmConfig::default()).unwrap();
    let mut composer = Composer::new(rules);
    for frame in &trace.frames {
        if let Some(sym) = state.ingest_frame(frame).expect("simulated frames are valid") {
            composer.apply_symbol(&sym).unwrap();
            println!(
                "  t={:>6.3}s {:<6} score {:>5.2} after {:>2} frames -> {}",
                sym.t,
                sym.label,
                sym.score,
                sym.frames_to_confirm,
                composer.render()
            );
        }
    }
    composer.render()
}

#[allow(dead_code)]
fn main() {
    run("কলম", 1);
}
