//! Plan the sign sequence for a few words and show which rule covers each
//! piece of text.
//!
//!     cargo run -p bdspell --example plan_words -- "কক্ত আম"

use std::sync::Arc;

use bdspell::{Planner, RuleSet};

pub fn run(words: &[String]) -> Vec<Vec<String>> {
    let planner = Planner::new(Arc::new(RuleSet::default_bengali()));
    let mut plans = Vec::new();
    for word in words {
        match planner.plan(word) {
            Ok(plan) => {
                println!("{word}: {}", plan.labels.join(" "));
                for span in &plan.coverage {
                    println!("    {:<6} {:?} <- {}", span.text, span.kind, span.labels.join(" "));
                }
                plans.push(plan.labels);
            }
            Err(e) => println!("{word}: {e}"),
        }
    }
    plans
}

#[allow(dead_code)]
fn main() {
    let mut words: Vec<String> = std::env::args().skip(1).collect();
    if words.is_empty() {
        words = ["ক্ত", "মন্ত্র", "অ্যা", "নদী", "১২ টাকা", "ঘর"].map(String::from).to_vec();
    }
    run(&words);
}
