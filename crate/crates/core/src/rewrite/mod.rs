//! Counterfactual hypothesis construction: regex extraction plus span substitution,
//! and the two-step few-shot path through a text generator.

pub mod fsp;
pub mod patterns;
pub mod prompt;
pub mod stem;

use serde::{Deserialize, Serialize};

use crate::error::RewriteError;
use crate::freelogic::{derive_counterfactual_labels, neutral_branch_rewrite, substitute_span, SpanPair};
use crate::model::{BranchId, CounterfactualRecord, Instance, NliLabel, Provenance};
use patterns::PatternBank;

/// Machine-readable reason for producing no counterfactual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NoPattern,
    SpanNotFound,
    UnparseableExtraction,
    EmptyGeneration,
    NoExternalCounterfactual,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NoPattern => "no-pattern",
            SkipReason::SpanNotFound => "span-not-found",
            SkipReason::UnparseableExtraction => "unparseable-extraction",
            SkipReason::EmptyGeneration => "empty-generation",
            SkipReason::NoExternalCounterfactual => "no-external-counterfactual",
        }
    }
}

impl std::fmt::Display for SkipReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Records for one instance, or the reason there are none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteOutcome {
    pub records: Vec<CounterfactualRecord>,
    pub spans: Option<SpanPair>,
    pub skip: Option<SkipReason>,
}

impl RewriteOutcome {
    pub fn skipped(reason: SkipReason, spans: Option<SpanPair>) -> Self {
        RewriteOutcome { records: Vec::new(), spans, skip: Some(reason) }
    }

    pub fn is_skipped(&self) -> bool {
        self.skip.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewriteMode {
    Regex,
    Fsp,
    #[default]
    Hybrid,
    External,
}

impl std::str::FromStr for RewriteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "regex" => Ok(RewriteMode::Regex),
            "fsp" => Ok(RewriteMode::Fsp),
            "hybrid" => Ok(RewriteMode::Hybrid),
            "external" => Ok(RewriteMode::External),
            other => Err(format!("unknown rewrite mode {other:?} (regex, fsp, hybrid, external)")),
        }
    }
}

pub fn regex_extract(bank: &PatternBank, explanation: &str, label: NliLabel) -> Option<SpanPair> {
    bank.extract(explanation, label)
}

/// Counterfactual text for one branch: substitution for `main` (exact match
/// first, then stemmed), deletion/negation for the neutral branches.
pub fn rewrite_branch(hypothesis: &str, pair: &SpanPair, branch: BranchId) -> Result<String, RewriteError> {
    match branch {
        BranchId::Main => substitute_span(hypothesis, pair, false).or_else(|_| substitute_span(hypothesis, pair, true)),
        _ => neutral_branch_rewrite(hypothesis, pair, branch),
    }
}

/// One record per derived branch, or the first branch's error.
pub fn apply_spans(
    instance: &Instance,
    pair: &SpanPair,
    provenance: Provenance,
) -> Result<Vec<CounterfactualRecord>, RewriteError> {
    derive_counterfactual_labels(instance.gold_label)
        .into_iter()
        .map(|(branch, y_cf)| {
            Ok(CounterfactualRecord {
                instance_id: instance.id.clone(),
                branch,
                x_cf: rewrite_branch(&instance.hypothesis, pair, branch)?,
                y_cf,
                provenance,
                pattern_id: pair.pattern_id.clone(),
            })
        })
        .collect()
}

pub fn regex_rewrite(instance: &Instance, bank: &PatternBank) -> RewriteOutcome {
    let Some(pair) = regex_extract(bank, &instance.explanation, instance.gold_label) else {
        return RewriteOutcome::skipped(SkipReason::NoPattern, None);
    };
    match apply_spans(instance, &pair, Provenance::Regex) {
        Ok(records) => RewriteOutcome { records, spans: Some(pair), skip: None },
        Err(_) => RewriteOutcome::skipped(SkipReason::SpanNotFound, Some(pair)),
    }
}
