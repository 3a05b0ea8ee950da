//! Browser bindings: regex rewriting, FTC scores for one prediction, METEOR.
//! Each export returns a JSON string; errors become JS exceptions.

use ftc_core::metrics::{ftc_delta, ftc_kl, ftc_wasserstein, MetricConfig};
use ftc_core::model::{Instance, LabelDistribution, NliLabel};
use ftc_core::rewrite::patterns::PatternBank;
use ftc_core::rewrite::regex_rewrite;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

pub fn rewrite_json(hypothesis: &str, label: &str, explanation: &str) -> Result<Value, String> {
    let gold_label: NliLabel = label.parse().map_err(|e: ftc_core::error::ArgumentError| e.0)?;
    let instance = Instance {
        id: "demo".into(),
        premise_ref: "demo".into(),
        hypothesis: hypothesis.trim().into(),
        gold_label,
        explanation: explanation.trim().into(),
        annotator_labels: Vec::new(),
    };
    instance.validate().map_err(|e| e.0)?;
    let out = regex_rewrite(&instance, &PatternBank::builtin());
    let records: Vec<Value> = out
        .records
        .iter()
        .map(|r| json!({"branch": r.branch, "x_cf": r.x_cf, "y_cf": r.y_cf, "pattern_id": r.pattern_id}))
        .collect();
    Ok(json!({
        "spans": out.spans.map(|s| json!({"a": s.a, "b": s.b, "pattern_id": s.pattern_id})),
        "records": records,
        "skip": out.skip.map(|s| s.as_str()),
    }))
}

pub fn ftc_score_json(p_e: f64, p_c: f64, p_n: f64, y_cf: &str, alpha: f64) -> Result<Value, String> {
    let pred = LabelDistribution::new(p_e, p_c, p_n).map_err(|e| e.0)?;
    let y: NliLabel = y_cf.parse().map_err(|e: ftc_core::error::ArgumentError| e.0)?;
    let cfg = MetricConfig::new(alpha).map_err(|e| e.0)?;
    Ok(json!({
        "predicted": pred.argmax(),
        "ftc_delta": ftc_delta(&pred, y, &cfg),
        "ftc_kl": ftc_kl(&pred, y, &cfg),
        "ftc_w": ftc_wasserstein(&pred, y, &cfg),
    }))
}

/// `references` holds one reference per line.
pub fn meteor_lines(candidate: &str, references: &str) -> f64 {
    let refs: Vec<&str> = references.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    ftc_core::metrics::meteor(candidate, &refs)
}

#[wasm_bindgen]
pub fn rewrite(hypothesis: &str, label: &str, explanation: &str) -> Result<String, JsValue> {
    to_js(rewrite_json(hypothesis, label, explanation))
}

#[wasm_bindgen]
pub fn ftc_score(p_e: f64, p_c: f64, p_n: f64, y_cf: &str, alpha: f64) -> Result<String, JsValue> {
    to_js(ftc_score_json(p_e, p_c, p_n, y_cf, alpha))
}

#[wasm_bindgen]
pub fn meteor(candidate: &str, references: &str) -> f64 {
    meteor_lines(candidate, references)
}
