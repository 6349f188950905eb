//! Feed confirmed sign labels straight into the composer and watch the
//! trigger state machine build Bengali text.
//!
//!     cargo run -p bdspell --example compose_from_signs

use std::sync::Arc;

use bdspell::{Composer, RuleSet};

pub fn run() -> String {
    let mut composer = Composer::new(Arc::new(RuleSet::default_bengali()));
    // মন্ত্র: three consonants fused by T3, then আম via T1 and a literal
    let signs = [
        "ma", "na", "tta", "ra", "three", // মন্ত্র
        "zero",                           // space
        "aa", "one", "ma",                // আম
        "zero",
        "five", "two", "four", "aa",      // numeral run ২৪
        "zero",
        "ka", "ka", "six",                // typo and backspace
        "sa", "four",                     // ক + স → ক্ষ
    ];
    for sign in signs {
        for event in composer.apply(sign).expect("known label") {
            println!("{sign:>6}  {:<12} {}", format!("{:?}", event.kind), event.buffer_text);
        }
    }
    composer.render()
}

#[allow(dead_code)]
fn main() {
    println!("\n{}", run());
}
