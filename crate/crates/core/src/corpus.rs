//! Word lists for round-trip and benchmark runs.

use crate::alphabet::RuleSet;

const SHIPPED_WORDS: &str = include_str!("../data/words.txt");

/// Entries of `data/words.txt`, comments and blank lines removed.
pub fn shipped_words() -> Vec<String> {
    parse_word_list(SHIPPED_WORDS)
}

/// One entry per non-empty, non-`#` line.
pub fn parse_word_list(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// One synthetic word per rule of the ruleset, so every vowel pair, hidden
/// character and compound is exercised at least once.
pub fn rule_words(rules: &RuleSet) -> Vec<String> {
    let ka = rules.class_of("ka").map(|c| c.codepoints.clone()).unwrap_or_default();
    let mut words = Vec::new();
    for pair in rules.vowels() {
        words.push(format!("{}{}", pair.independent_codepoints, ka));
    }
    for rule in rules.hidden() {
        words.push(format!("{}{}", ka, rule.result_codepoints));
    }
    for rule in rules.compounds2().iter().chain(rules.compounds3()) {
        words.push(format!("{}{}", ka, rule.result_codepoints));
    }
    words
}

/// Shipped words followed by the rule-derived ones.
pub fn coverage_corpus(rules: &RuleSet) -> Vec<String> {
    let mut words = shipped_words();
    words.extend(rule_words(rules));
    words
}
