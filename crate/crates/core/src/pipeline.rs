//! End-to-end evaluation: counterfactual construction, classification, scoring,
//! annotation filtering and aggregation into a [`Report`].

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{ArgumentError, ConfigError, ModelError};
use crate::freelogic::derive_counterfactual_labels;
use crate::metrics::{ftc_delta, ftc_kl, ftc_wasserstein, ftc_wasserstein_floor, MetricConfig};
use crate::model::{
    filter_consistent, majority_vote, BranchId, CounterfactualRecord, DropReason, Instance, NliLabel, Provenance,
};
use crate::modelio::cache::canonical_json;
use crate::modelio::protocol::{ClassifyRequest, Classifier, Condition, Generator};
use crate::report::{aggregate, Report, ReportMetadata, ReportRow, RowStatus, SimRow};
use crate::rewrite::fsp::{fsp_rewrite, FspError, FspOptions};
use crate::rewrite::patterns::PatternBank;
use crate::rewrite::prompt::{PromptSet, PromptTemplates};
use crate::rewrite::{regex_rewrite, RewriteMode, RewriteOutcome, SkipReason};
use crate::stats::fleiss_kappa_from_labels;

/// A human-written counterfactual for one branch, with its annotators' labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanCounterfactual {
    pub instance_id: String,
    pub branch: BranchId,
    pub x_cf: String,
    #[serde(default)]
    pub annotator_labels: Vec<NliLabel>,
}

/// One JSON object per non-blank line.
pub fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>, ArgumentError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| ArgumentError(format!("line {}: {e}", i + 1))))
        .collect()
}

/// What to do with an instance that yields no counterfactual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnrewritablePolicy {
    /// Report it as skipped and leave it out of the means.
    #[default]
    Skip,
    /// Score every derived branch as unfaithful: δ = 0, W at its floor, K undefined.
    Unfaithful,
}

impl std::str::FromStr for UnrewritablePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "skip" => Ok(UnrewritablePolicy::Skip),
            "unfaithful" => Ok(UnrewritablePolicy::Unfaithful),
            other => Err(format!("unknown policy {other:?} (skip, unfaithful)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    #[serde(default)]
    pub mode: RewriteMode,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub unrewritable: UnrewritablePolicy,
    /// Input-noise level for the simulatability metrics; absent disables them.
    #[serde(default)]
    pub simulatability_noise: Option<f64>,
    #[serde(default)]
    pub fsp: FspOptions,
    #[serde(skip, default = "default_jobs")]
    pub jobs: usize,
}

fn default_jobs() -> usize {
    1
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            mode: RewriteMode::default(),
            metric: MetricConfig::default(),
            unrewritable: UnrewritablePolicy::default(),
            simulatability_noise: None,
            fsp: FspOptions::default(),
            jobs: default_jobs(),
        }
    }
}

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub classifier: &'a dyn Classifier,
    pub generator: Option<&'a dyn Generator>,
    pub bank: &'a PatternBank,
    pub prompts: &'a PromptSet,
    pub templates: &'a PromptTemplates,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub instances: &'a [Instance],
    /// Counterfactuals used as-is in external mode.
    pub external: &'a [CounterfactualRecord],
    pub human: &'a [HumanCounterfactual],
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(
        "model call failed for instance {instance_id}: {source}; responses received so far are cached, \
         re-run with the same cache directory to resume"
    )]
    Model { instance_id: String, source: ModelError },
}

/// Runs `f` over `items` on up to `jobs` threads. Results keep input order;
/// after the first error no new items are started.
pub fn parallel_map<T, R, E, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let workers = jobs.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<R, E>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                if r.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let mut out = Vec::with_capacity(items.len());
    let mut first_err = None;
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            None => {}
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Hash of everything that can change scores: options, patterns and prompts.
pub fn config_hash(options: &PipelineOptions, backends: &Backends<'_>) -> String {
    let specs: Vec<_> = backends.bank.rules().iter().map(|r| &r.spec).collect();
    let v = json!({
        "options": options,
        "patterns": specs,
        "prompts": backends.prompts,
        "templates": backends.templates,
    });
    hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
}

struct HumanJudgement {
    branch: BranchId,
    x_cf: String,
    labels: Vec<NliLabel>,
    prediction: NliLabel,
}

struct InstanceResult {
    rows: Vec<ReportRow>,
    human: Vec<HumanJudgement>,
}

fn model_err(instance: &Instance) -> impl Fn(ModelError) -> PipelineError + '_ {
    move |source| PipelineError::Model { instance_id: instance.id.clone(), source }
}

fn rewrite(
    instance: &Instance,
    options: &PipelineOptions,
    backends: &Backends<'_>,
    external: &HashMap<&str, Vec<&CounterfactualRecord>>,
) -> Result<RewriteOutcome, PipelineError> {
    let fsp = |g: &dyn Generator| -> Result<RewriteOutcome, PipelineError> {
        fsp_rewrite(instance, g, backends.prompts, backends.templates, &options.fsp).map_err(|e| match e {
            FspError::Model(source) => PipelineError::Model { instance_id: instance.id.clone(), source },
            FspError::Config(c) => PipelineError::Config(c),
        })
    };
    match options.mode {
        RewriteMode::Regex => Ok(regex_rewrite(instance, backends.bank)),
        RewriteMode::Fsp => fsp(backends.generator.ok_or_else(no_generator)?),
        RewriteMode::Hybrid => {
            let out = regex_rewrite(instance, backends.bank);
            match backends.generator {
                Some(g) if out.is_skipped() => fsp(g),
                _ => Ok(out),
            }
        }
        RewriteMode::External => {
            let have = external.get(instance.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let mut records = Vec::new();
            for (branch, _) in derive_counterfactual_labels(instance.gold_label) {
                match have.iter().find(|r| r.branch == branch) {
                    Some(r) => records.push((*r).clone()),
                    None => return Ok(RewriteOutcome::skipped(SkipReason::NoExternalCounterfactual, None)),
                }
            }
            Ok(RewriteOutcome { records, spans: None, skip: None })
        }
    }
}

fn no_generator() -> PipelineError {
    PipelineError::Config(ConfigError::Invalid("few-shot rewriting needs a generator backend".into()))
}

fn blank_row(instance: &Instance) -> ReportRow {
    ReportRow {
        instance_id: instance.id.clone(),
        gold_label: instance.gold_label,
        branch: None,
        status: RowStatus::Scored,
        reason: None,
        x_cf: None,
        y_cf: None,
        provenance: None,
        pattern_id: None,
        probs: None,
        ftc_delta: None,
        ftc_kl: None,
        ftc_w: None,
        human_agreement: None,
        sim: None,
    }
}

fn simulate(instance: &Instance, sigma: f64, classifier: &dyn Classifier) -> Result<SimRow, PipelineError> {
    let err = model_err(instance);
    let base = ClassifyRequest::new(&instance.premise_ref, &instance.hypothesis);
    let xe = base.clone().with_explanation(Condition::XAndE, &instance.explanation);
    let eo = base.clone().with_explanation(Condition::EOnly, &instance.explanation);
    let ask = |r: &ClassifyRequest| classifier.classify(r).map(|d| d.argmax()).map_err(&err);
    let y = instance.gold_label;
    let x = ask(&base)?;
    let x_noisy = ask(&base.clone().with_noise(sigma))?;
    let with_e = ask(&xe)?;
    let with_e_noisy = ask(&xe.with_noise(sigma))?;
    let leak = ask(&eo)?;
    Ok(SimRow {
        correct_with_x_and_e: with_e == y,
        correct_with_x: x == y,
        leak_k: leak == y,
        f: (x_noisy != x) as i8,
        z: (with_e == y) as i8 - (with_e_noisy == y) as i8,
    })
}

fn process(
    instance: &Instance,
    options: &PipelineOptions,
    backends: &Backends<'_>,
    external: &HashMap<&str, Vec<&CounterfactualRecord>>,
    human: &HashMap<&str, Vec<&HumanCounterfactual>>,
) -> Result<InstanceResult, PipelineError> {
    let err = model_err(instance);
    let cfg = &options.metric;
    let outcome = rewrite(instance, options, backends, external)?;
    let sim = match options.simulatability_noise {
        Some(sigma) => Some(simulate(instance, sigma, backends.classifier)?),
        None => None,
    };

    let mut rows = Vec::new();
    if let Some(reason) = outcome.skip {
        match options.unrewritable {
            UnrewritablePolicy::Skip => rows.push(ReportRow {
                status: RowStatus::Skipped,
                reason: Some(reason.as_str().to_string()),
                ..blank_row(instance)
            }),
            UnrewritablePolicy::Unfaithful => {
                for (branch, y_cf) in derive_counterfactual_labels(instance.gold_label) {
                    rows.push(ReportRow {
                        branch: Some(branch),
                        reason: Some(format!("unrewritable:{reason}")),
                        y_cf: Some(y_cf),
                        ftc_delta: Some(0.0),
                        ftc_w: Some(ftc_wasserstein_floor(y_cf, cfg)),
                        ..blank_row(instance)
                    });
                }
            }
        }
    } else {
        for record in &outcome.records {
            let request = ClassifyRequest::new(&instance.premise_ref, &record.x_cf);
            let probs = backends.classifier.classify(&request).map_err(&err)?;
            rows.push(ReportRow {
                branch: Some(record.branch),
                x_cf: Some(record.x_cf.clone()),
                y_cf: Some(record.y_cf),
                provenance: Some(record.provenance),
                pattern_id: record.pattern_id.clone(),
                ftc_delta: Some(ftc_delta(&probs, record.y_cf, cfg)),
                ftc_kl: Some(ftc_kl(&probs, record.y_cf, cfg)),
                ftc_w: Some(ftc_wasserstein(&probs, record.y_cf, cfg)),
                probs: Some(probs),
                ..blank_row(instance)
            });
        }
    }
    for row in &mut rows {
        row.sim = sim;
    }

    let mut judgements = Vec::new();
    for h in human.get(instance.id.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
        let request = ClassifyRequest::new(&instance.premise_ref, &h.x_cf);
        let prediction = backends.classifier.classify(&request).map_err(&err)?.argmax();
        judgements.push(HumanJudgement {
            branch: h.branch,
            x_cf: h.x_cf.clone(),
            labels: h.annotator_labels.clone(),
            prediction,
        });
    }
    Ok(InstanceResult { rows, human: judgements })
}

fn validate_inputs(inputs: &PipelineInputs<'_>, options: &PipelineOptions) -> Result<(), PipelineError> {
    options.metric.validate().map_err(|e| PipelineError::Input(e.0))?;
    if let Some(s) = options.simulatability_noise {
        if !(s > 0.0 && s.is_finite()) {
            return Err(PipelineError::Input(format!("simulatability noise must be positive, got {s}")));
        }
    }
    let mut gold: HashMap<&str, NliLabel> = HashMap::new();
    for inst in inputs.instances {
        inst.validate().map_err(|e| PipelineError::Input(format!("instance {}: {e}", inst.id)))?;
        if gold.insert(&inst.id, inst.gold_label).is_some() {
            return Err(PipelineError::Input(format!("duplicate instance id {:?}", inst.id)));
        }
    }
    for r in inputs.external {
        let g = gold
            .get(r.instance_id.as_str())
            .ok_or_else(|| PipelineError::Input(format!("counterfactual for unknown instance {:?}", r.instance_id)))?;
        r.check_against(*g).map_err(|e| PipelineError::Input(format!("instance {}: {e}", r.instance_id)))?;
    }
    for h in inputs.human {
        let g = gold
            .get(h.instance_id.as_str())
            .ok_or_else(|| PipelineError::Input(format!("annotation for unknown instance {:?}", h.instance_id)))?;
        if !derive_counterfactual_labels(*g).iter().any(|(b, _)| *b == h.branch) {
            return Err(PipelineError::Input(format!(
                "annotation for instance {} names branch {}, which a {} instance does not have",
                h.instance_id,
                h.branch.as_str(),
                g.as_str()
            )));
        }
    }
    Ok(())
}

pub fn run_pipeline(
    inputs: PipelineInputs<'_>,
    options: &PipelineOptions,
    backends: &Backends<'_>,
) -> Result<Report, PipelineError> {
    validate_inputs(&inputs, options)?;
    if options.mode == RewriteMode::Fsp && backends.generator.is_none() {
        return Err(no_generator());
    }
    let mut external: HashMap<&str, Vec<&CounterfactualRecord>> = HashMap::new();
    for r in inputs.external {
        external.entry(r.instance_id.as_str()).or_default().push(r);
    }
    let mut human: HashMap<&str, Vec<&HumanCounterfactual>> = HashMap::new();
    for h in inputs.human {
        human.entry(h.instance_id.as_str()).or_default().push(h);
    }

    let results = parallel_map(inputs.instances, options.jobs, |inst| process(inst, options, backends, &external, &human))?;

    let mut rows = Vec::new();
    let mut rated = Vec::new();
    for (instance, result) in inputs.instances.iter().zip(results) {
        let mut rows_here = result.rows;
        if !result.human.is_empty() {
            let mut pairs = Vec::new();
            for (branch, y_cf) in derive_counterfactual_labels(instance.gold_label) {
                let judgement = result.human.iter().find(|j| j.branch == branch);
                let annotated = Instance {
                    annotator_labels: judgement.map(|j| j.labels.clone()).unwrap_or_default(),
                    ..instance.clone()
                };
                let record = CounterfactualRecord {
                    instance_id: instance.id.clone(),
                    branch,
                    x_cf: judgement.map(|j| j.x_cf.clone()).unwrap_or_default(),
                    y_cf,
                    provenance: Provenance::Human,
                    pattern_id: None,
                };
                pairs.push((annotated, record));
            }
            let (kept, dropped) = filter_consistent(pairs);
            let scoring = rows_here.iter().any(|r| r.status == RowStatus::Scored);
            if let Some(d) = dropped.first().filter(|_| scoring) {
                for row in &mut rows_here {
                    row.status = RowStatus::Filtered;
                    row.reason = Some(filter_reason(d.reason, d.record.branch));
                }
            } else {
                for (_, record) in kept {
                    let j = result.human.iter().find(|j| j.branch == record.branch).expect("kept branch was judged");
                    let majority = majority_vote(&j.labels).ok().flatten();
                    for row in rows_here.iter_mut().filter(|r| r.branch == Some(record.branch)) {
                        row.human_agreement = majority.map(|m| m == j.prediction);
                    }
                }
            }
            for j in &result.human {
                if !j.labels.is_empty() {
                    rated.push(j.labels.clone());
                }
            }
        }
        rows.extend(rows_here);
    }

    let kappa = if !rated.is_empty() && rated.iter().all(|l| l.len() >= 2 && l.len() == rated[0].len()) {
        fleiss_kappa_from_labels(&rated).ok()
    } else {
        if !rated.is_empty() {
            log::warn!("annotations have unequal rater counts; skipping Fleiss' kappa");
        }
        None
    };

    let metadata = ReportMetadata {
        config_hash: config_hash(options, backends),
        mode: options.mode,
        alpha: options.metric.alpha,
        unrewritable: options.unrewritable,
        instances: inputs.instances.len(),
    };
    let aggregates = aggregate(&rows);
    Ok(Report { metadata, rows, aggregates, kappa })
}

fn filter_reason(reason: DropReason, branch: BranchId) -> String {
    format!("annotation-{}:{}", reason.as_str(), branch.as_str())
}
