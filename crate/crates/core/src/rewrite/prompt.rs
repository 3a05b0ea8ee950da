//! Few-shot prompt sets and deterministic prompt rendering.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::freelogic::SpanPair;
use crate::model::{BranchId, Instance, NliLabel};

const DEFAULT_PROMPTS: &str = include_str!("../../data/prompts.json");

pub const DEFAULT_WORD_BUDGET: usize = 900;

/// One priming example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prime {
    pub hypothesis: String,
    pub explanation: String,
    pub a: String,
    pub b: String,
    /// The main-branch counterfactual, or the `A_branch` one for neutral primes.
    pub counterfactual: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterfactual_neg_b: Option<String>,
}

impl Prime {
    fn counterfactual_for(&self, branch: BranchId) -> Option<&str> {
        match branch {
            BranchId::NegBBranch => self.counterfactual_neg_b.as_deref(),
            _ => Some(&self.counterfactual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    #[serde(rename = "E")]
    pub entailment: Vec<Prime>,
    #[serde(rename = "C")]
    pub contradiction: Vec<Prime>,
    #[serde(rename = "N")]
    pub neutral: Vec<Prime>,
}

impl PromptSet {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let set: PromptSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled set, 20 primes per label.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_PROMPTS).expect("bundled prompt set is valid")
    }

    pub fn primes(&self, label: NliLabel) -> &[Prime] {
        match label {
            NliLabel::E => &self.entailment,
            NliLabel::C => &self.contradiction,
            NliLabel::N => &self.neutral,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for label in NliLabel::ALL {
            if self.primes(label).is_empty() {
                return Err(ConfigError::Invalid(format!("prompt set has no primes for label {label}")));
            }
        }
        Ok(())
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Extract,
    Transform,
}

/// Layout of one prompt stage.
///
/// `example` may use `{hypothesis}`, `{explanation}`, `{a}`, `{b}`, `{branch}`
/// and `{answer}`. The query is the example with an empty answer, right-trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub stage: Stage,
    pub header: String,
    pub separator: String,
    pub example: String,
    pub stop: String,
}

impl PromptTemplate {
    pub fn default_extract() -> Self {
        PromptTemplate {
            stage: Stage::Extract,
            header: "Extract the two logical spans A and B that the explanation relates.".into(),
            separator: "\n\n".into(),
            example: "Hypothesis: {hypothesis}\nExplanation: {explanation}\nSpans: {answer}".into(),
            stop: "\n".into(),
        }
    }

    pub fn default_transform() -> Self {
        PromptTemplate {
            stage: Stage::Transform,
            header: "Rewrite the hypothesis using the spans so that it follows the explanation.".into(),
            separator: "\n\n".into(),
            example: "Hypothesis: {hypothesis}\nA: {a}\nB: {b}\nBranch: {branch}\nCounterfactual: {answer}".into(),
            stop: "\n".into(),
        }
    }

    fn render(&self, fields: &Fields<'_>, answer: &str) -> String {
        let mut out = String::with_capacity(self.example.len() + 128);
        let mut rest = self.example.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close) => {
                    let value = match &after[..close] {
                        "hypothesis" => Some(fields.hypothesis),
                        "explanation" => Some(fields.explanation),
                        "a" => Some(fields.a),
                        "b" => Some(fields.b),
                        "branch" => Some(fields.branch),
                        "answer" => Some(answer),
                        _ => None,
                    };
                    match value {
                        Some(v) => out.push_str(v),
                        None => out.push_str(&rest[open..open + close + 2]),
                    }
                    rest = &after[close + 1..];
                }
                None => {
                    out.push_str(&rest[open..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub extract: PromptTemplate,
    pub transform: PromptTemplate,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates { extract: PromptTemplate::default_extract(), transform: PromptTemplate::default_transform() }
    }
}

struct Fields<'a> {
    hypothesis: &'a str,
    explanation: &'a str,
    a: &'a str,
    b: &'a str,
    branch: &'a str,
}

/// What is being asked of the generator.
#[derive(Debug, Clone, Copy)]
pub enum PromptItem<'a> {
    Extract(&'a Instance),
    Transform(&'a Instance, &'a SpanPair, BranchId),
}

impl PromptItem<'_> {
    fn instance(&self) -> &Instance {
        match self {
            PromptItem::Extract(i) | PromptItem::Transform(i, ..) => i,
        }
    }

    fn stage(&self) -> Stage {
        match self {
            PromptItem::Extract(_) => Stage::Extract,
            PromptItem::Transform(..) => Stage::Transform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltPrompt {
    pub text: String,
    /// Rendered query section (the tail of `text`).
    pub query: String,
    pub primes_used: usize,
    /// Whitespace-separated word count of `text`.
    pub words: usize,
}

pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Canonical step-1 answer line.
pub fn format_spans(a: &str, b: &str) -> String {
    format!("A: {a} | B: {b}")
}

/// Header, primes in set order, then the query with an empty answer slot.
/// Trailing primes are dropped while the prompt exceeds `word_budget`; the
/// query is always kept.
pub fn build_prompt(
    prompts: &PromptSet,
    template: &PromptTemplate,
    item: PromptItem<'_>,
    word_budget: usize,
) -> Result<BuiltPrompt, ConfigError> {
    if template.stage != item.stage() {
        return Err(ConfigError::Invalid(format!("template stage {:?} does not match the item", template.stage)));
    }
    let instance = item.instance();
    let primes = prompts.primes(instance.gold_label);
    if primes.is_empty() {
        return Err(ConfigError::Invalid(format!("no primes for label {}", instance.gold_label)));
    }
    let (query_fields, branch) = match item {
        PromptItem::Extract(i) => (
            Fields { hypothesis: &i.hypothesis, explanation: &i.explanation, a: "", b: "", branch: "" },
            None,
        ),
        PromptItem::Transform(i, pair, branch) => (
            Fields { hypothesis: &i.hypothesis, explanation: &i.explanation, a: &pair.a, b: &pair.b, branch: branch.as_str() },
            Some(branch),
        ),
    };
    let query = template.render(&query_fields, "").trim_end().to_string();

    let rendered: Vec<String> = primes
        .iter()
        .filter_map(|p| {
            let (answer, branch_name) = match branch {
                None => (format_spans(&p.a, &p.b), ""),
                Some(br) => (p.counterfactual_for(br)?.to_string(), br.as_str()),
            };
            let f = Fields { hypothesis: &p.hypothesis, explanation: &p.explanation, a: &p.a, b: &p.b, branch: branch_name };
            Some(template.render(&f, &answer))
        })
        .collect();

    let fixed = word_count(&template.header) + word_count(&query);
    let mut used = 0;
    let mut words = fixed;
    for r in &rendered {
        let w = word_count(r);
        if words + w > word_budget {
            break;
        }
        words += w;
        used += 1;
    }

    let mut parts: Vec<&str> = Vec::with_capacity(used + 2);
    if !template.header.is_empty() {
        parts.push(&template.header);
    }
    parts.extend(rendered[..used].iter().map(String::as_str));
    parts.push(&query);
    let text = parts.join(&template.separator);
    Ok(BuiltPrompt { words: word_count(&text), text, query, primes_used: used })
}
