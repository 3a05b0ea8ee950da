//! Two-step few-shot rewriting: extract the spans, then generate each counterfactual.

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{ConfigError, ModelError};
use crate::freelogic::{derive_counterfactual_labels, SpanPair, SpanSource};
use crate::model::{BranchId, CounterfactualRecord, Instance, Provenance};
use crate::modelio::mock::CannedResponse;
use crate::modelio::protocol::{GenerateRequest, Generator};
use crate::rewrite::prompt::{build_prompt, format_spans, PromptItem, PromptSet, PromptTemplates, DEFAULT_WORD_BUDGET};
use crate::rewrite::{RewriteOutcome, SkipReason};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FspOptions {
    pub word_budget: usize,
    pub extract_max_tokens: u32,
    pub transform_max_tokens: u32,
    pub temperature: f64,
}

impl Default for FspOptions {
    fn default() -> Self {
        FspOptions { word_budget: DEFAULT_WORD_BUDGET, extract_max_tokens: 64, transform_max_tokens: 96, temperature: 0.0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FspError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Parses `A: <span> | B: <span>`.
pub fn parse_spans(text: &str) -> Option<SpanPair> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^\s*A:\s*(.+?)\s*\|\s*B:\s*(.+?)\s*$").expect("valid regex"));
    let caps = re.captures(text)?;
    SpanPair::new(&caps[1], &caps[2], SpanSource::Fsp, None)
}

pub fn fsp_rewrite<G: Generator + ?Sized>(
    instance: &Instance,
    generator: &G,
    prompts: &PromptSet,
    templates: &PromptTemplates,
    options: &FspOptions,
) -> Result<RewriteOutcome, FspError> {
    let extract = build_prompt(prompts, &templates.extract, PromptItem::Extract(instance), options.word_budget)?;
    let request = GenerateRequest {
        prompt: extract.text,
        max_tokens: options.extract_max_tokens,
        stop: vec![templates.extract.stop.clone()],
        temperature: options.temperature,
    };
    let text = generator.generate(&request)?;
    if text.trim().is_empty() {
        return Ok(RewriteOutcome::skipped(SkipReason::EmptyGeneration, None));
    }
    let Some(pair) = parse_spans(&text) else {
        return Ok(RewriteOutcome::skipped(SkipReason::UnparseableExtraction, None));
    };

    let mut records = Vec::new();
    for (branch, y_cf) in derive_counterfactual_labels(instance.gold_label) {
        let item = PromptItem::Transform(instance, &pair, branch);
        let prompt = build_prompt(prompts, &templates.transform, item, options.word_budget)?;
        let request = GenerateRequest {
            prompt: prompt.text,
            max_tokens: options.transform_max_tokens,
            stop: vec![templates.transform.stop.clone()],
            temperature: options.temperature,
        };
        let x_cf = generator.generate(&request)?.trim().to_string();
        if x_cf.is_empty() {
            return Ok(RewriteOutcome::skipped(SkipReason::EmptyGeneration, Some(pair)));
        }
        records.push(CounterfactualRecord {
            instance_id: instance.id.clone(),
            branch,
            x_cf,
            y_cf,
            provenance: Provenance::Fsp,
            pattern_id: None,
        });
    }
    Ok(RewriteOutcome { records, spans: Some(pair), skip: None })
}

/// Canned responses that make a mock generator answer `instance`'s prompts
/// with the given spans and counterfactuals (one per derived branch).
pub fn echo_responses(
    instance: &Instance,
    pair: &SpanPair,
    counterfactuals: &[(BranchId, String)],
    prompts: &PromptSet,
    templates: &PromptTemplates,
    options: &FspOptions,
) -> Result<Vec<CannedResponse>, ConfigError> {
    let extract = build_prompt(prompts, &templates.extract, PromptItem::Extract(instance), options.word_budget)?;
    let mut out = vec![CannedResponse {
        prompt_suffix: extract.query,
        text: format!(" {}{}", format_spans(&pair.a, &pair.b), templates.extract.stop),
    }];
    for (branch, x_cf) in counterfactuals {
        let item = PromptItem::Transform(instance, pair, *branch);
        let built = build_prompt(prompts, &templates.transform, item, options.word_budget)?;
        out.push(CannedResponse { prompt_suffix: built.query, text: format!(" {x_cf}{}", templates.transform.stop) });
    }
    Ok(out)
}
