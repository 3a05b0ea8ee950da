//! Regex pattern bank for span extraction.

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::freelogic::{SpanPair, SpanSource};
use crate::model::NliLabel;
use crate::text::{is_article, lowercase_first};

const DEFAULT_BANK: &str = include_str!("../../data/patterns.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    /// Strip a leading a/an/the.
    Articles,
    /// Strip trailing punctuation.
    TrailingPunct,
}

/// Serialized form of one rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRuleSpec {
    pub id: String,
    pub label_class: NliLabel,
    pub match_template: String,
    #[serde(default)]
    pub normalize: Vec<Normalize>,
    /// Reject the match if either captured span contains a negation word.
    #[serde(default)]
    pub reject_negation: bool,
    /// Reject the match if either captured span contains one of these words.
    #[serde(default)]
    pub forbid_words: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PatternRule {
    pub spec: PatternRuleSpec,
    regex: Regex,
}

impl PatternRule {
    pub fn compile(spec: PatternRuleSpec) -> Result<Self, ConfigError> {
        let regex = Regex::new(&spec.match_template)
            .map_err(|e| ConfigError::Pattern { id: spec.id.clone(), message: e.to_string() })?;
        for group in ["A", "B"] {
            if !regex.capture_names().flatten().any(|n| n == group) {
                return Err(ConfigError::Pattern {
                    id: spec.id.clone(),
                    message: format!("missing named capture group {group}"),
                });
            }
        }
        Ok(PatternRule { spec, regex })
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    /// Applies the rule to an already-trimmed explanation.
    fn apply(&self, explanation: &str) -> Option<SpanPair> {
        let caps = self.regex.captures(explanation)?;
        let a = caps.name("A")?;
        let b = caps.name("B")?;
        let a_text = self.normalize(a.as_str(), a.start() == 0);
        let b_text = self.normalize(b.as_str(), b.start() == 0);
        if self.spec.reject_negation && (has_negation(&a_text) || has_negation(&b_text)) {
            return None;
        }
        if [&a_text, &b_text].iter().any(|s| contains_any_word(s, &self.spec.forbid_words)) {
            return None;
        }
        SpanPair::new(&a_text, &b_text, SpanSource::Regex, Some(self.spec.id.clone()))
    }

    fn normalize(&self, span: &str, sentence_initial: bool) -> String {
        let mut s = span.trim().to_string();
        let mut initial = sentence_initial;
        for step in &self.spec.normalize {
            match step {
                Normalize::TrailingPunct => {
                    s = s.trim_end_matches(|c: char| c.is_ascii_punctuation()).trim_end().to_string();
                }
                Normalize::Articles => {
                    if let Some((first, rest)) = s.split_once(char::is_whitespace) {
                        if is_article(first) && !rest.trim().is_empty() {
                            s = rest.trim_start().to_string();
                            // The span's first word was preceded by the article, so its
                            // capitalisation is its own.
                            initial = false;
                        }
                    }
                }
            }
        }
        if initial && looks_like_sentence_case(&s) {
            s = lowercase_first(&s);
        }
        s
    }
}

fn looks_like_sentence_case(s: &str) -> bool {
    let first_word = s.split_whitespace().next().unwrap_or("");
    let mut chars = first_word.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase()) && chars.all(|c| !c.is_uppercase())
}

fn contains_any_word(s: &str, words: &[String]) -> bool {
    s.split(|c: char| !c.is_alphanumeric()).any(|w| words.iter().any(|f| f.eq_ignore_ascii_case(w)))
}

fn has_negation(s: &str) -> bool {
    s.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .any(|w| matches!(w.to_lowercase().as_str(), "not" | "no" | "never" | "cannot") || w.ends_with("n't"))
}

/// Ordered rules, grouped by label class. First match wins within a class.
#[derive(Debug, Clone)]
pub struct PatternBank {
    rules: Vec<PatternRule>,
}

impl PatternBank {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let specs: Vec<PatternRuleSpec> = serde_json::from_str(text)?;
        let rules = specs.into_iter().map(PatternRule::compile).collect::<Result<Vec<_>, _>>()?;
        Ok(PatternBank { rules })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled bank covering the common e-SNLI explanation templates.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_BANK).expect("bundled pattern bank is valid")
    }

    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    pub fn rules_for(&self, label: NliLabel) -> impl Iterator<Item = &PatternRule> {
        self.rules.iter().filter(move |r| r.spec.label_class == label)
    }

    /// First rule of `label`'s class that matches, as a span pair.
    pub fn extract(&self, explanation: &str, label: NliLabel) -> Option<SpanPair> {
        let cleaned = clean_explanation(explanation);
        self.rules_for(label).find_map(|r| r.apply(&cleaned))
    }

    /// Label class whose templates the explanation's surface form matches, in `E, C, N` order.
    pub fn leaked_label(&self, explanation: &str) -> Option<NliLabel> {
        NliLabel::ALL.into_iter().find(|l| self.extract(explanation, *l).is_some())
    }
}

impl Default for PatternBank {
    fn default() -> Self {
        Self::builtin()
    }
}

fn clean_explanation(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.trim_end_matches(['.', '!', '?']).trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use NliLabel::*;

    fn spans(p: Option<SpanPair>) -> Option<(String, String)> {
        p.map(|p| (p.a, p.b))
    }

    fn s(a: &str, b: &str) -> Option<(String, String)> {
        Some((a.into(), b.into()))
    }

    #[test]
    fn builtin_bank_extracts_canonical_templates() {
        let bank = PatternBank::builtin();
        assert_eq!(spans(bank.extract("The dog is an animal.", E)), s("dog", "animal"));
        assert_eq!(spans(bank.extract("A man is not a woman.", C)), s("man", "woman"));
        assert_eq!(spans(bank.extract("Because they are playing happily.", E)), None);
        assert_eq!(spans(bank.extract("A puppy is a type of dog.", E)), s("puppy", "dog"));
        assert_eq!(spans(bank.extract("Sleeping implies resting.", E)), s("sleeping", "resting"));
        assert_eq!(spans(bank.extract("A man cannot be a woman.", C)), s("man", "woman"));
        assert_eq!(spans(bank.extract("Not all dogs are playful.", N)), s("dogs", "playful"));
        assert_eq!(
            spans(bank.extract("Sitting on a bench does not mean waiting for a bus.", N)),
            s("sitting on a bench", "waiting for a bus")
        );
        assert_eq!(
            spans(bank.extract("A tire swing is not necessarily outside.", N)),
            s("tire swing", "outside")
        );
    }

    #[test]
    fn negated_explanations_do_not_match_positive_rules() {
        let bank = PatternBank::builtin();
        assert_eq!(bank.extract("A man is not a woman.", E), None);
        assert_eq!(bank.extract("A tire swing is not necessarily outside.", E), None);
        assert_eq!(bank.extract("A tire swing is not necessarily outside.", C), None);
    }

    #[test]
    fn first_match_wins_in_declared_order() {
        let bank = PatternBank::from_json(
            r#"[{"id":"first","label_class":"E","match_template":"^(?P<A>\\w+) is (?P<B>\\w+)$"},
                {"id":"second","label_class":"E","match_template":"^(?P<A>\\w+) (?P<B>.+)$"}]"#,
        )
        .unwrap();
        assert_eq!(bank.extract("dog is animal", E).unwrap().pattern_id.as_deref(), Some("first"));
        assert_eq!(bank.extract("dog barks loudly", E).unwrap().pattern_id.as_deref(), Some("second"));
    }

    #[test]
    fn rules_must_have_both_groups() {
        let err = PatternBank::from_json(r#"[{"id":"x","label_class":"E","match_template":"(?P<A>a)"}]"#).unwrap_err();
        assert!(err.to_string().contains("missing named capture group B"));
        let err = PatternBank::from_json(r#"[{"id":"y","label_class":"E","match_template":"(?P<A>"}]"#).unwrap_err();
        assert!(err.to_string().starts_with("pattern y"));
    }

    #[test]
    fn leakage_follows_surface_form() {
        let bank = PatternBank::builtin();
        assert_eq!(bank.leaked_label("The dog is an animal."), Some(E));
        assert_eq!(bank.leaked_label("A man is not a woman."), Some(C));
        assert_eq!(bank.leaked_label("A tire swing is not necessarily outside."), Some(N));
        assert_eq!(bank.leaked_label("Because they are playing happily."), None);
    }

    #[test]
    fn sentence_initial_capital_is_dropped_from_span() {
        let bank = PatternBank::builtin();
        assert_eq!(spans(bank.extract("Dogs are animals.", E)), s("dogs", "animals"));
        assert_eq!(spans(bank.extract("NASA is an agency.", E)), s("NASA", "agency"));
    }
}
