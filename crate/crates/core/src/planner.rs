//! Target text to sign-label sequence.
//!
//! The planner inverts every forward rule of the ruleset into a table keyed
//! by output text, then scans the (NFC-normalized) target greedily, taking the
//! longest table entry at each position. Every plan is replayed through a
//! fresh [`Composer`] before it is returned.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::alphabet::{Role, RuleSet, Trigger};
use crate::composer::{Composer, Mode};

/// How a span of the target was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Literal,
    VowelTransform,
    Hidden,
    Compound2,
    Compound3,
    DigitMode,
    Space,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageSpan {
    pub text: String,
    pub kind: Coverage,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpellingPlan {
    /// The target after canonical composition.
    pub target: String,
    pub labels: Vec<String>,
    pub coverage: Vec<CoverageSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("cannot spell {ch:?} (U+{code:04X}) at character offset {offset}")]
    Uncoverable { ch: char, code: u32, offset: usize },
    #[error("plan for {target:?} renders {rendered:?} when replayed")]
    Verification { target: String, rendered: String },
}

/// Reverse index from output text to the labels that produce it.
#[derive(Debug, Clone)]
pub struct Planner {
    rules: Arc<RuleSet>,
    productions: HashMap<String, (Coverage, Vec<String>)>,
    digits: HashMap<char, String>,
    max_chars: usize,
}

impl Planner {
    pub fn new(rules: Arc<RuleSet>) -> Self {
        let mut productions: HashMap<String, (Coverage, Vec<String>)> = HashMap::new();
        let label = |t: Trigger| rules.trigger_label(t).to_string();
        let with = |parts: &[String], trigger: String| {
            let mut labels = parts.to_vec();
            labels.push(trigger);
            labels
        };

        // earlier tables win when two rules render the same text
        for rule in rules.compounds3() {
            productions
                .entry(rule.result_codepoints.clone())
                .or_insert_with(|| (Coverage::Compound3, with(&rule.parts, label(Trigger::T3))));
        }
        for rule in rules.compounds2() {
            productions
                .entry(rule.result_codepoints.clone())
                .or_insert_with(|| (Coverage::Compound2, with(&rule.parts, label(Trigger::T2))));
        }
        for rule in rules.hidden() {
            productions
                .entry(rule.result_codepoints.clone())
                .or_insert_with(|| (Coverage::Hidden, with(&rule.pattern, label(Trigger::T4))));
        }
        for pair in rules.vowels() {
            productions
                .entry(pair.independent_codepoints.clone())
                .or_insert_with(|| {
                    (
                        Coverage::VowelTransform,
                        vec![pair.dependent_label.clone(), label(Trigger::T1)],
                    )
                });
        }
        let mut digits = HashMap::new();
        for class in rules.classes() {
            if class.role == Role::Numeral {
                let mut chars = class.codepoints.chars();
                if let (Some(c), None) = (chars.next(), chars.next()) {
                    digits.entry(c).or_insert_with(|| class.label.clone());
                }
                continue;
            }
            productions
                .entry(class.codepoints.clone())
                .or_insert_with(|| (Coverage::Literal, vec![class.label.clone()]));
        }
        let max_chars = productions
            .keys()
            .map(|k| k.chars().count())
            .max()
            .unwrap_or(1);
        Planner {
            rules,
            productions,
            digits,
            max_chars,
        }
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn plan(&self, text: &str) -> Result<SpellingPlan, PlanError> {
        let target: String = text.nfc().collect();
        let chars: Vec<char> = target.chars().collect();
        let mut coverage = Vec::new();
        let mut pos = 0;

        while pos < chars.len() {
            let c = chars[pos];
            if c == ' ' {
                coverage.push(CoverageSpan {
                    text: " ".into(),
                    kind: Coverage::Space,
                    labels: vec![self.rules.trigger_label(Trigger::T0).to_string()],
                });
                pos += 1;
                continue;
            }
            if self.digits.contains_key(&c) {
                let run: Vec<char> = chars[pos..]
                    .iter()
                    .copied()
                    .take_while(|c| self.digits.contains_key(c))
                    .collect();
                let mut labels = vec![self.rules.trigger_label(Trigger::T5).to_string()];
                labels.extend(run.iter().map(|c| self.digits[c].clone()));
                labels.push(self.rules.numeral_mode_exit_label().to_string());
                pos += run.len();
                coverage.push(CoverageSpan {
                    text: run.into_iter().collect(),
                    kind: Coverage::DigitMode,
                    labels,
                });
                continue;
            }
            let longest = self.max_chars.min(chars.len() - pos);
            let found = (1..=longest).rev().find_map(|len| {
                let piece: String = chars[pos..pos + len].iter().collect();
                self.productions.get(&piece).map(|p| (len, piece, p))
            });
            let Some((len, piece, (kind, labels))) = found else {
                return Err(PlanError::Uncoverable {
                    ch: c,
                    code: c as u32,
                    offset: pos,
                });
            };
            coverage.push(CoverageSpan {
                text: piece,
                kind: *kind,
                labels: labels.clone(),
            });
            pos += len;
        }

        let labels: Vec<String> = coverage.iter().flat_map(|s| s.labels.clone()).collect();
        let mut composer = Composer::new(Arc::clone(&self.rules));
        for label in &labels {
            composer
                .apply(label)
                .expect("planner only emits ruleset labels");
        }
        let rendered = composer.render();
        if rendered != target || composer.mode() != Mode::Textual {
            return Err(PlanError::Verification { target, rendered });
        }
        Ok(SpellingPlan {
            target,
            labels,
            coverage,
        })
    }
}

/// One-shot convenience around [`Planner::plan`].
pub fn plan(text: &str, rules: Arc<RuleSet>) -> Result<SpellingPlan, PlanError> {
    Planner::new(rules).plan(text)
}
