//! Trigger-driven text composition.
//!
//! The composer consumes confirmed sign labels one at a time. In textual mode
//! ordinary signs append their character and numeral signs bound to a trigger
//! edit the buffer instead:
//!
//! | trigger | effect |
//! |---------|--------|
//! | T0 | append a space |
//! | T1 | trailing dependent vowel becomes its independent form |
//! | T2 | last two characters become a 2-part compound |
//! | T3 | last three characters become a 3-part compound |
//! | T4 | longest matching suffix (≤ 2) becomes a hidden character |
//! | T5 | switch to numeral mode |
//! | T6 | delete the last grapheme |
//! | T7 | reserved, warns |
//!
//! In numeral mode every sign appends literally except the ruleset's exit
//! label, which returns to textual mode. Transformations that cannot apply
//! leave the buffer alone and report a warning.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alphabet::{LookupError, Role, RuleSet, TriggerAction};
use crate::confirmer::ConfirmedSymbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphemeKind {
    Consonant,
    DepVowel,
    IndepVowel,
    Hidden,
    Compound,
    Digit,
    Space,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grapheme {
    pub kind: GraphemeKind,
    /// Labels that produced this grapheme, in spelling order.
    pub source_labels: Vec<String>,
    pub codepoints: String,
}

impl Grapheme {
    /// Single label, literally appended consonant or vowel sign. Only these
    /// take part in compound and hidden-character patterns.
    fn plain_label(&self) -> Option<&str> {
        match (self.kind, self.source_labels.as_slice()) {
            (GraphemeKind::Consonant | GraphemeKind::DepVowel, [label]) => Some(label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Textual,
    Numeral,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Textual => "textual",
            Mode::Numeral => "numeral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Appended,
    Transformed,
    Deleted,
    Space,
    ModeChanged,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeEvent {
    pub kind: EventKind,
    pub detail: String,
    pub buffer_text: String,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct Composer {
    rules: Arc<RuleSet>,
    mode: Mode,
    buffer: Vec<Grapheme>,
}

impl PartialEq for Composer {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.buffer == other.buffer
    }
}

impl Composer {
    pub fn new(rules: Arc<RuleSet>) -> Self {
        Composer {
            rules,
            mode: Mode::Textual,
            buffer: Vec::new(),
        }
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buffer(&self) -> &[Grapheme] {
        &self.buffer
    }

    /// Concatenation of the buffer's codepoints.
    pub fn render(&self) -> String {
        render(&self.buffer)
    }

    /// Empty buffer, textual mode.
    pub fn reset(&mut self) {
        self.buffer.clear();
        self.mode = Mode::Textual;
    }

    pub fn apply_symbol(&mut self, sym: &ConfirmedSymbol) -> Result<Vec<ComposeEvent>, LookupError> {
        self.apply(&sym.label)
    }

    /// Applies one confirmed label. Always yields at least one event unless
    /// the label is unknown, in which case nothing changes.
    pub fn apply(&mut self, label: &str) -> Result<Vec<ComposeEvent>, LookupError> {
        let rules = Arc::clone(&self.rules);
        let class = rules.class_of(label)?;

        if self.mode == Mode::Numeral {
            if label == rules.numeral_mode_exit_label() {
                self.mode = Mode::Textual;
                return Ok(vec![self.event(EventKind::ModeChanged, "numeral mode exit")]);
            }
            return Ok(vec![self.append_literal(label, class.role, &class.codepoints)]);
        }

        let Some(trigger) = class.trigger else {
            return Ok(vec![self.append_literal(label, class.role, &class.codepoints)]);
        };

        let event = match trigger.action() {
            TriggerAction::Space => {
                self.buffer.push(Grapheme {
                    kind: GraphemeKind::Space,
                    source_labels: vec![label.to_string()],
                    codepoints: " ".to_string(),
                });
                self.event(EventKind::Space, format!("{trigger} space"))
            }
            TriggerAction::IndependentVowel => self.independent_vowel(),
            TriggerAction::Compound2 => self.compound(2),
            TriggerAction::Compound3 => self.compound(3),
            TriggerAction::Hidden => self.hidden(),
            TriggerAction::NumeralMode => {
                self.mode = Mode::Numeral;
                self.event(EventKind::ModeChanged, format!("{trigger} numeral mode"))
            }
            TriggerAction::Backspace => match self.buffer.pop() {
                Some(g) => self.event(EventKind::Deleted, format!("{trigger} deleted {:?}", g.codepoints)),
                None => self.warning(format!("{trigger} backspace on empty buffer")),
            },
            TriggerAction::Reserved => self.warning(format!("{trigger} has no action")),
        };
        Ok(vec![event])
    }

    fn append_literal(&mut self, label: &str, role: Role, codepoints: &str) -> ComposeEvent {
        let kind = match role {
            Role::Consonant => GraphemeKind::Consonant,
            Role::DependentVowel => GraphemeKind::DepVowel,
            Role::Numeral => GraphemeKind::Digit,
        };
        self.buffer.push(Grapheme {
            kind,
            source_labels: vec![label.to_string()],
            codepoints: codepoints.to_string(),
        });
        self.event(EventKind::Appended, format!("appended {label}"))
    }

    fn independent_vowel(&mut self) -> ComposeEvent {
        let pair = match self.buffer.last() {
            Some(g) if g.kind == GraphemeKind::DepVowel => g
                .plain_label()
                .and_then(|label| self.rules.vowel_for_dependent(label))
                .cloned(),
            _ => return self.warning("T1 needs a trailing dependent vowel"),
        };
        let Some(pair) = pair else {
            return self.warning("T1: no independent form for trailing vowel");
        };
        self.buffer.pop();
        self.buffer.push(Grapheme {
            kind: GraphemeKind::IndepVowel,
            source_labels: vec![pair.dependent_label.clone()],
            codepoints: pair.independent_codepoints.clone(),
        });
        self.event(
            EventKind::Transformed,
            format!("{} -> {}", pair.dependent_label, pair.independent_label),
        )
    }

    fn compound(&mut self, arity: usize) -> ComposeEvent {
        let trigger = if arity == 2 { "T2" } else { "T3" };
        if self.buffer.len() < arity {
            return self.warning(format!("{trigger} needs {arity} characters in the buffer"));
        }
        let tail = &self.buffer[self.buffer.len() - arity..];
        let Some(parts) = tail.iter().map(Grapheme::plain_label).collect::<Option<Vec<_>>>() else {
            return self.warning(format!("{trigger}: trailing graphemes are not plain characters"));
        };
        let rule = match self.rules.lookup_compound(&parts) {
            Ok(Some(rule)) => rule.clone(),
            _ => return self.warning(format!("{trigger}: no compound for {}", parts.join("+"))),
        };
        self.buffer.truncate(self.buffer.len() - arity);
        self.buffer.push(Grapheme {
            kind: GraphemeKind::Compound,
            source_labels: rule.parts.clone(),
            codepoints: rule.result_codepoints.clone(),
        });
        self.event(
            EventKind::Transformed,
            format!("{} -> {}", rule.parts.join("+"), rule.result_label),
        )
    }

    fn hidden(&mut self) -> ComposeEvent {
        // the plain run at the end of the buffer, at most 2 long
        let labels: Vec<&str> = self
            .buffer
            .iter()
            .rev()
            .take(2)
            .map_while(Grapheme::plain_label)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        let Some((len, rule)) = self.rules.match_hidden_suffix(&labels) else {
            return self.warning("T4: no hidden character matches the buffer tail");
        };
        let rule = rule.clone();
        self.buffer.truncate(self.buffer.len() - len);
        self.buffer.push(Grapheme {
            kind: GraphemeKind::Hidden,
            source_labels: rule.pattern.clone(),
            codepoints: rule.result_codepoints.clone(),
        });
        self.event(
            EventKind::Transformed,
            format!("{} -> {}", rule.pattern.join("+"), rule.result_label),
        )
    }

    fn warning(&self, detail: impl Into<String>) -> ComposeEvent {
        self.event(EventKind::Warning, detail)
    }

    fn event(&self, kind: EventKind, detail: impl Into<String>) -> ComposeEvent {
        ComposeEvent {
            kind,
            detail: detail.into(),
            buffer_text: self.render(),
            mode: self.mode,
        }
    }
}

/// Concatenates grapheme codepoints in order.
pub fn render(buffer: &[Grapheme]) -> String {
    buffer.iter().map(|g| g.codepoints.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn composer() -> Composer {
        Composer::new(Arc::new(RuleSet::default_bengali()))
    }

    fn spell(c: &mut Composer, labels: &[&str]) -> Vec<ComposeEvent> {
        labels.iter().flat_map(|l| c.apply(l).unwrap()).collect()
    }

    #[test]
    fn two_part_compound() {
        let mut c = composer();
        spell(&mut c, &["ka", "tta"]);
        let events = c.apply("two").unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Transformed);
        assert_eq!(c.buffer().len(), 1);
        assert_eq!(c.buffer()[0].kind, GraphemeKind::Compound);
        assert_eq!(c.buffer()[0].source_labels, ["ka", "tta"]);
        assert_eq!(c.render(), "\u{0995}\u{09CD}\u{09A4}");
    }

    #[test]
    fn three_part_compound() {
        let mut c = composer();
        spell(&mut c, &["ma", "na", "tta", "ra", "three"]);
        assert_eq!(c.render(), "মন্ত্র");
        assert_eq!(c.buffer().len(), 2);
    }

    #[test]
    fn dependent_to_independent_vowel() {
        let mut c = composer();
        spell(&mut c, &["aa", "one"]);
        assert_eq!(c.buffer().len(), 1);
        assert_eq!(c.buffer()[0].kind, GraphemeKind::IndepVowel);
        assert_eq!(c.render(), "\u{0986}");
    }

    #[test]
    fn hidden_character_from_pair() {
        let mut c = composer();
        spell(&mut c, &["a", "A"]);
        let events = c.apply("four").unwrap();
        assert_eq!(events[0].kind, EventKind::Transformed);
        assert_eq!(c.buffer().len(), 1);
        assert_eq!(c.buffer()[0].kind, GraphemeKind::Hidden);
        assert_eq!(c.render(), "অ্যা");
    }

    #[test]
    fn hidden_prefers_longest_suffix() {
        let mut c = composer();
        spell(&mut c, &["ma", "ma", "four"]);
        assert_eq!(c.render(), "ং");
        let mut c = composer();
        spell(&mut c, &["ka", "tta", "four"]);
        assert_eq!(c.render(), "কৎ");
    }

    #[test]
    fn backspace_on_empty_warns() {
        let mut c = composer();
        let events = c.apply("six").unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].kind, EventKind::Warning);
        assert!(c.buffer().is_empty());
    }

    #[test]
    fn numeral_mode_appends_digits() {
        let mut c = composer();
        let events = c.apply("five").unwrap();
        assert_eq!(events[0].kind, EventKind::ModeChanged);
        assert_eq!(c.mode(), Mode::Numeral);
        let events = c.apply("five").unwrap();
        assert_eq!(events[0].kind, EventKind::Appended);
        assert_eq!(c.render(), "\u{09EB}");
        spell(&mut c, &["six", "ka"]);
        assert_eq!(c.render(), "৫৬ক");
        let events = c.apply("aa").unwrap();
        assert_eq!(events[0].kind, EventKind::ModeChanged);
        assert_eq!(c.mode(), Mode::Textual);
        assert_eq!(c.render(), "৫৬ক");
    }

    #[test]
    fn failed_transformations_are_warnings() {
        let cases: &[&[&str]] = &[
            &["ka", "one"],
            &["one"],
            &["ka", "ka", "two"],
            &["ka", "two"],
            &["ka", "tta", "three"],
            &["ga", "four"],
            &["four"],
            &["seven"],
            &["ka", "tta", "two", "ra", "two"],
        ];
        for labels in cases {
            let (last, prefix) = labels.split_last().unwrap();
            let mut c = composer();
            spell(&mut c, prefix);
            let before = c.clone();
            let events = c.apply(last).unwrap();
            assert_eq!(events.len(), 1, "{labels:?}");
            assert_eq!(events[0].kind, EventKind::Warning, "{labels:?}");
            assert_eq!(c, before, "{labels:?}");
        }
    }

    #[test]
    fn unknown_label_is_an_error() {
        let mut c = composer();
        assert_eq!(c.apply("zz"), Err(LookupError::UnknownLabel("zz".into())));
    }

    #[test]
    fn render_examples() {
        let mut c = composer();
        spell(&mut c, &["ka", "ka", "tta", "two"]);
        assert_eq!(c.render(), "কক্ত");
        let mut c = composer();
        assert_eq!(c.render(), "");
        spell(&mut c, &["aa", "one", "ma"]);
        assert_eq!(c.render(), "আম");
    }

    #[test]
    fn reset_is_idempotent() {
        let mut c = composer();
        spell(&mut c, &["ka", "five", "one"]);
        c.reset();
        let once = c.clone();
        c.reset();
        assert_eq!(c, once);
        assert_eq!(c.render(), "");
        assert_eq!(c.mode(), Mode::Textual);
    }

    #[test]
    fn space_and_event_text() {
        let mut c = composer();
        let events = spell(&mut c, &["ka", "zero", "ma"]);
        assert_eq!(events[1].kind, EventKind::Space);
        assert_eq!(events[2].buffer_text, "ক ম");
    }
}
