//! Sign alphabet and transformation tables.
//!
//! A [`RuleSet`] is loaded from a JSON document (see `data/ruleset.json` for
//! the shipped Bengali table) and validated once. After that it is immutable
//! and can be shared across sessions behind an `Arc`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Bengali sign virama (hasanta), the consonant-cluster joiner.
pub const VIRAMA: char = '\u{09CD}';

const DEFAULT_RULESET: &str = include_str!("../data/ruleset.json");

/// Schema version accepted by [`RuleSet::from_json_str`].
pub const RULESET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Consonant,
    DependentVowel,
    Numeral,
}

/// Trigger ids bound to numeral signs in textual mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trigger {
    T0,
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
}

/// What a trigger does to the composition buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerAction {
    Space,
    IndependentVowel,
    Compound2,
    Compound3,
    Hidden,
    NumeralMode,
    Backspace,
    Reserved,
}

impl Trigger {
    pub const ALL: [Trigger; 8] = [
        Trigger::T0,
        Trigger::T1,
        Trigger::T2,
        Trigger::T3,
        Trigger::T4,
        Trigger::T5,
        Trigger::T6,
        Trigger::T7,
    ];

    pub fn action(self) -> TriggerAction {
        match self {
            Trigger::T0 => TriggerAction::Space,
            Trigger::T1 => TriggerAction::IndependentVowel,
            Trigger::T2 => TriggerAction::Compound2,
            Trigger::T3 => TriggerAction::Compound3,
            Trigger::T4 => TriggerAction::Hidden,
            Trigger::T5 => TriggerAction::NumeralMode,
            Trigger::T6 => TriggerAction::Backspace,
            Trigger::T7 => TriggerAction::Reserved,
        }
    }

    /// T7 has no defined behaviour and may stay unbound.
    pub fn is_required(self) -> bool {
        self != Trigger::T7
    }
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

/// One recognizable hand sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignClass {
    pub label: String,
    pub role: Role,
    pub codepoints: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Trigger>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VowelPair {
    pub dependent_label: String,
    pub dependent_codepoints: String,
    pub independent_label: String,
    pub independent_codepoints: String,
}

/// Hidden character produced by T4 from a 1–2 item buffer suffix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenRule {
    pub pattern: Vec<String>,
    pub result_label: String,
    pub result_codepoints: String,
}

/// Consonant cluster produced by T2 (two parts) or T3 (three parts).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundRule {
    pub parts: Vec<String>,
    pub result_label: String,
    pub result_codepoints: String,
}

/// On-disk layout of a ruleset. Field order is irrelevant; the canonical
/// serialization sorts keys.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetDoc {
    ruleset_version: u32,
    classes: Vec<SignClass>,
    vowels: Vec<VowelPair>,
    hidden: Vec<HiddenRule>,
    compounds2: Vec<CompoundRule>,
    compounds3: Vec<CompoundRule>,
    numeral_mode_exit_label: String,
}

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("cannot read ruleset {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ruleset does not match the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported ruleset_version {0} (expected {RULESET_VERSION})")]
    Version(u32),
    #[error("duplicate label {label:?} at classes[{index}]")]
    DuplicateLabel { label: String, index: usize },
    #[error("{table}[{index}] references unknown label {label:?}")]
    DanglingLabel {
        table: &'static str,
        index: usize,
        label: String,
    },
    #[error("{table}[{index}]: {reason}")]
    Invariant {
        table: &'static str,
        index: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("compound lookup needs 2 or 3 parts, got {0}")]
    WrongArity(usize),
}

/// Validated, indexed alphabet plus every transformation table.
#[derive(Debug, Clone)]
pub struct RuleSet {
    doc: RuleSetDoc,
    by_label: HashMap<String, usize>,
    by_trigger: HashMap<Trigger, usize>,
    vowel_by_dependent: HashMap<String, usize>,
    compound2_by_parts: HashMap<Vec<String>, usize>,
    compound3_by_parts: HashMap<Vec<String>, usize>,
    hidden_by_pattern: HashMap<Vec<String>, usize>,
}

impl PartialEq for RuleSet {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

fn invariant(table: &'static str, index: usize, reason: impl Into<String>) -> RulesetError {
    RulesetError::Invariant {
        table,
        index,
        reason: reason.into(),
    }
}

fn check_text(
    table: &'static str,
    index: usize,
    field: &str,
    text: &str,
) -> Result<(), RulesetError> {
    if text.is_empty() {
        return Err(invariant(table, index, format!("{field} is empty")));
    }
    if text.nfc().ne(text.chars()) {
        return Err(invariant(
            table,
            index,
            format!("{field} {text:?} is not in NFC form"),
        ));
    }
    Ok(())
}

fn is_bengali_digit(c: char) -> bool {
    ('\u{09E6}'..='\u{09EF}').contains(&c)
}

/// Loads and validates a ruleset file.
pub fn load_ruleset(path: impl AsRef<Path>) -> Result<RuleSet, RulesetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| RulesetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RuleSet::from_json_str(&text)
}

impl RuleSet {
    /// The shipped Bengali alphabet: 36 classes, triggers T0–T7 on the
    /// numerals zero..seven.
    pub fn default_bengali() -> RuleSet {
        RuleSet::from_json_str(DEFAULT_RULESET).expect("shipped ruleset is valid")
    }

    pub fn from_json_str(text: &str) -> Result<RuleSet, RulesetError> {
        let doc: RuleSetDoc = serde_json::from_str(text)?;
        RuleSet::from_doc(doc)
    }

    fn from_doc(doc: RuleSetDoc) -> Result<RuleSet, RulesetError> {
        if doc.ruleset_version != RULESET_VERSION {
            return Err(RulesetError::Version(doc.ruleset_version));
        }

        let mut by_label = HashMap::new();
        let mut by_trigger = HashMap::new();
        for (index, class) in doc.classes.iter().enumerate() {
            if class.label.is_empty() || !class.label.is_ascii() {
                return Err(invariant(
                    "classes",
                    index,
                    format!("label {:?} must be non-empty ASCII", class.label),
                ));
            }
            check_text("classes", index, "codepoints", &class.codepoints)?;
            if by_label.insert(class.label.clone(), index).is_some() {
                return Err(RulesetError::DuplicateLabel {
                    label: class.label.clone(),
                    index,
                });
            }
            match class.role {
                Role::Numeral => {
                    if !class.codepoints.chars().all(is_bengali_digit) {
                        return Err(invariant(
                            "classes",
                            index,
                            "numeral class must render Bengali digits",
                        ));
                    }
                }
                _ if class.trigger.is_some() => {
                    return Err(invariant(
                        "classes",
                        index,
                        "only numeral classes may carry a trigger",
                    ));
                }
                _ => {}
            }
            if let Some(trigger) = class.trigger {
                if by_trigger.insert(trigger, index).is_some() {
                    return Err(invariant(
                        "classes",
                        index,
                        format!("trigger {trigger} bound more than once"),
                    ));
                }
            }
        }
        for trigger in Trigger::ALL.into_iter().filter(|t| t.is_required()) {
            if !by_trigger.contains_key(&trigger) {
                return Err(invariant(
                    "classes",
                    doc.classes.len(),
                    format!("trigger {trigger} is not bound to any class"),
                ));
            }
        }

        let class_at = |table: &'static str, index: usize, label: &str| {
            by_label
                .get(label)
                .map(|&i| &doc.classes[i])
                .ok_or_else(|| RulesetError::DanglingLabel {
                    table,
                    index,
                    label: label.to_string(),
                })
        };

        let mut vowel_by_dependent = HashMap::new();
        let mut independents = HashSet::new();
        for (index, pair) in doc.vowels.iter().enumerate() {
            let class = class_at("vowels", index, &pair.dependent_label)?;
            if class.role != Role::DependentVowel {
                return Err(invariant(
                    "vowels",
                    index,
                    format!("{:?} is not a dependent vowel", pair.dependent_label),
                ));
            }
            check_text("vowels", index, "dependent_codepoints", &pair.dependent_codepoints)?;
            check_text("vowels", index, "independent_codepoints", &pair.independent_codepoints)?;
            if pair.dependent_codepoints != class.codepoints {
                return Err(invariant(
                    "vowels",
                    index,
                    "dependent_codepoints differ from the class codepoints",
                ));
            }
            if pair.dependent_codepoints == pair.independent_codepoints {
                return Err(invariant(
                    "vowels",
                    index,
                    "dependent and independent forms are identical",
                ));
            }
            if pair.independent_label.is_empty() {
                return Err(invariant("vowels", index, "independent_label is empty"));
            }
            if vowel_by_dependent
                .insert(pair.dependent_label.clone(), index)
                .is_some()
            {
                return Err(invariant(
                    "vowels",
                    index,
                    format!("{:?} mapped more than once", pair.dependent_label),
                ));
            }
            if !independents.insert(pair.independent_codepoints.as_str()) {
                return Err(invariant(
                    "vowels",
                    index,
                    "independent form shared by two dependent vowels",
                ));
            }
        }

        let mut hidden_by_pattern = HashMap::new();
        for (index, rule) in doc.hidden.iter().enumerate() {
            if !(1..=2).contains(&rule.pattern.len()) {
                return Err(invariant(
                    "hidden",
                    index,
                    format!("pattern length {} outside 1..=2", rule.pattern.len()),
                ));
            }
            for label in &rule.pattern {
                class_at("hidden", index, label)?;
            }
            check_text("hidden", index, "result_codepoints", &rule.result_codepoints)?;
            if rule.result_label.is_empty() {
                return Err(invariant("hidden", index, "result_label is empty"));
            }
            if hidden_by_pattern
                .insert(rule.pattern.clone(), index)
                .is_some()
            {
                return Err(invariant("hidden", index, "duplicate pattern"));
            }
        }
        for (index, rule) in doc.hidden.iter().enumerate() {
            for other in &doc.hidden {
                let longer = &other.pattern;
                if longer.len() > rule.pattern.len() && longer.ends_with(&rule.pattern) {
                    return Err(invariant(
                        "hidden",
                        index,
                        format!("pattern {:?} is a suffix of {:?}", rule.pattern, longer),
                    ));
                }
            }
        }

        let mut compound_maps = [HashMap::new(), HashMap::new()];
        for (table, arity, rules, map) in [
            ("compounds2", 2, &doc.compounds2, 0),
            ("compounds3", 3, &doc.compounds3, 1),
        ] {
            for (index, rule) in rules.iter().enumerate() {
                if rule.parts.len() != arity {
                    return Err(invariant(
                        table,
                        index,
                        format!("expected {arity} parts, got {}", rule.parts.len()),
                    ));
                }
                for label in &rule.parts {
                    class_at(table, index, label)?;
                }
                check_text(table, index, "result_codepoints", &rule.result_codepoints)?;
                if !rule.result_codepoints.contains(VIRAMA) {
                    return Err(invariant(table, index, "cluster has no virama joiner"));
                }
                if rule.result_label.is_empty() {
                    return Err(invariant(table, index, "result_label is empty"));
                }
                if compound_maps[map].insert(rule.parts.clone(), index).is_some() {
                    return Err(invariant(table, index, "duplicate parts tuple"));
                }
            }
        }
        let [compound2_by_parts, compound3_by_parts] = compound_maps;

        let exit = class_at("numeral_mode_exit_label", 0, &doc.numeral_mode_exit_label)?;
        if exit.role != Role::DependentVowel {
            return Err(invariant(
                "numeral_mode_exit_label",
                0,
                "exit label must be a dependent vowel",
            ));
        }

        Ok(RuleSet {
            doc,
            by_label,
            by_trigger,
            vowel_by_dependent,
            compound2_by_parts,
            compound3_by_parts,
            hidden_by_pattern,
        })
    }

    /// Canonical serialization: keys sorted, two-space indent, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        // serde_json's map is ordered by key unless `preserve_order` is on.
        let value = serde_json::to_value(&self.doc).expect("ruleset serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(&self.doc).expect("ruleset serializes")
    }

    pub fn classes(&self) -> &[SignClass] {
        &self.doc.classes
    }

    pub fn vowels(&self) -> &[VowelPair] {
        &self.doc.vowels
    }

    pub fn hidden(&self) -> &[HiddenRule] {
        &self.doc.hidden
    }

    pub fn compounds2(&self) -> &[CompoundRule] {
        &self.doc.compounds2
    }

    pub fn compounds3(&self) -> &[CompoundRule] {
        &self.doc.compounds3
    }

    pub fn numeral_mode_exit_label(&self) -> &str {
        &self.doc.numeral_mode_exit_label
    }

    pub fn contains(&self, label: &str) -> bool {
        self.by_label.contains_key(label)
    }

    pub fn class_of(&self, label: &str) -> Result<&SignClass, LookupError> {
        self.by_label
            .get(label)
            .map(|&i| &self.doc.classes[i])
            .ok_or_else(|| LookupError::UnknownLabel(label.to_string()))
    }

    /// The class bound to `trigger`, if any.
    pub fn trigger_class(&self, trigger: Trigger) -> Option<&SignClass> {
        self.by_trigger.get(&trigger).map(|&i| &self.doc.classes[i])
    }

    /// Label of the class bound to `trigger`.
    ///
    /// Panics for unbound T7; T0–T6 are guaranteed bound by validation.
    pub fn trigger_label(&self, trigger: Trigger) -> &str {
        &self
            .trigger_class(trigger)
            .unwrap_or_else(|| panic!("trigger {trigger} is unbound"))
            .label
    }

    pub fn vowel_for_dependent(&self, label: &str) -> Option<&VowelPair> {
        self.vowel_by_dependent
            .get(label)
            .map(|&i| &self.doc.vowels[i])
    }

    pub fn lookup_compound<S: AsRef<str>>(
        &self,
        parts: &[S],
    ) -> Result<Option<&CompoundRule>, LookupError> {
        let key: Vec<String> = parts.iter().map(|p| p.as_ref().to_string()).collect();
        match key.len() {
            2 => Ok(self
                .compound2_by_parts
                .get(&key)
                .map(|&i| &self.doc.compounds2[i])),
            3 => Ok(self
                .compound3_by_parts
                .get(&key)
                .map(|&i| &self.doc.compounds3[i])),
            n => Err(LookupError::WrongArity(n)),
        }
    }

    pub fn hidden_exact<S: AsRef<str>>(&self, pattern: &[S]) -> Option<&HiddenRule> {
        let key: Vec<String> = pattern.iter().map(|p| p.as_ref().to_string()).collect();
        self.hidden_by_pattern
            .get(&key)
            .map(|&i| &self.doc.hidden[i])
    }

    /// Longest hidden rule whose pattern equals a suffix of `labels`.
    ///
    /// Returns the matched length alongside the rule.
    pub fn match_hidden_suffix<S: AsRef<str>>(&self, labels: &[S]) -> Option<(usize, &HiddenRule)> {
        (1..=labels.len().min(2)).rev().find_map(|len| {
            self.hidden_exact(&labels[labels.len() - len..])
                .map(|rule| (len, rule))
        })
    }
}
