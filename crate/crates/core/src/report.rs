//! Per-row results, per-class aggregates and their TSV / JSON / Markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{las_scores, lra_score, LasInputs, LasScores, LraInputs};
use crate::model::{BranchId, LabelDistribution, NliLabel, Provenance};
use crate::pipeline::UnrewritablePolicy;
use crate::rewrite::RewriteMode;
use crate::stats::{rank_sum, KappaResult, RankSumResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Scored,
    Skipped,
    Filtered,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Scored => "scored",
            RowStatus::Skipped => "skipped",
            RowStatus::Filtered => "filtered",
        }
    }
}

/// Simulator outcomes on the original hypothesis of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRow {
    pub correct_with_x_and_e: bool,
    pub correct_with_x: bool,
    pub leak_k: bool,
    pub f: i8,
    pub z: i8,
}

impl SimRow {
    pub fn las_inputs(&self) -> LasInputs {
        LasInputs { correct_with_x_and_e: self.correct_with_x_and_e, correct_with_x: self.correct_with_x, leak_k: self.leak_k }
    }

    pub fn lra_inputs(&self) -> LraInputs {
        LraInputs { f: self.f, z: self.z }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance_id: String,
    pub gold_label: NliLabel,
    /// Absent on a skipped instance's single row.
    pub branch: Option<BranchId>,
    pub status: RowStatus,
    pub reason: Option<String>,
    pub x_cf: Option<String>,
    pub y_cf: Option<NliLabel>,
    pub provenance: Option<Provenance>,
    pub pattern_id: Option<String>,
    pub probs: Option<LabelDistribution>,
    pub ftc_delta: Option<f64>,
    pub ftc_kl: Option<f64>,
    pub ftc_w: Option<f64>,
    /// Whether the classifier's label on the human counterfactual matches the annotators.
    pub human_agreement: Option<bool>,
    pub sim: Option<SimRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    /// `C`, `E`, `N` or `all`.
    pub label: String,
    pub instances: usize,
    pub scored: usize,
    pub skipped: usize,
    pub filtered: usize,
    pub ftc_delta: Option<f64>,
    pub ftc_kl: Option<f64>,
    pub ftc_w: Option<f64>,
    pub las: LasScores,
    pub lra: Option<f64>,
    /// Agreeing vs. disagreeing rows, keyed by metric name.
    pub rank_sum: BTreeMap<String, RankSumResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub mode: RewriteMode,
    pub alpha: f64,
    pub unrewritable: UnrewritablePolicy,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<ClassAggregate>,
    pub kappa: Option<KappaResult>,
}

pub const METRIC_KEYS: [&str; 5] = ["ftc_delta", "ftc_kl", "ftc_w", "las", "lra"];

fn metric_title(key: &str) -> &str {
    match key {
        "ftc_delta" => "FTC-δ",
        "ftc_kl" => "FTC-K",
        "ftc_w" => "FTC-W",
        "las" => "LAS",
        "lra" => "LRA",
        other => other,
    }
}

fn row_metric(row: &ReportRow, key: &str) -> Option<f64> {
    match key {
        "ftc_delta" => row.ftc_delta,
        "ftc_kl" => row.ftc_kl,
        "ftc_w" => row.ftc_w,
        "las" => row.sim.map(|s| s.correct_with_x_and_e as i8 as f64 - s.correct_with_x as i8 as f64),
        "lra" => row.sim.map(|s| (s.f == s.z) as u8 as f64),
        _ => None,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups consecutive rows by instance id.
fn by_instance(rows: &[ReportRow]) -> Vec<&[ReportRow]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].instance_id != rows[start].instance_id {
            if i > start {
                out.push(&rows[start..i]);
            }
            start = i;
        }
    }
    out
}

fn aggregate_class(label: &str, groups: &[&[ReportRow]]) -> ClassAggregate {
    let count = |s: RowStatus| groups.iter().filter(|g| g[0].status == s).count();
    let scored: Vec<&[ReportRow]> = groups.iter().copied().filter(|g| g[0].status == RowStatus::Scored).collect();
    let instance_mean = |f: fn(&ReportRow) -> Option<f64>| mean(scored.iter().filter_map(|g| mean(g.iter().filter_map(f))));
    let sims: Vec<_> = groups.iter().filter_map(|g| g[0].sim).collect();
    let las_rows: Vec<LasInputs> = sims.iter().map(SimRow::las_inputs).collect();
    let lra_rows: Vec<LraInputs> = sims.iter().map(SimRow::lra_inputs).collect();

    let mut ranks = BTreeMap::new();
    for key in METRIC_KEYS {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for row in scored.iter().flat_map(|g| g.iter()) {
            if let (Some(agree), Some(v)) = (row.human_agreement, row_metric(row, key)) {
                if agree {
                    a.push(v)
                } else {
                    b.push(v)
                }
            }
        }
        if let Ok(r) = rank_sum(&a, &b) {
            ranks.insert(key.to_string(), r);
        }
    }

    ClassAggregate {
        label: label.to_string(),
        instances: groups.len(),
        scored: scored.len(),
        skipped: count(RowStatus::Skipped),
        filtered: count(RowStatus::Filtered),
        ftc_delta: instance_mean(|r| r.ftc_delta),
        ftc_kl: instance_mean(|r| r.ftc_kl),
        ftc_w: instance_mean(|r| r.ftc_w),
        las: las_scores(&las_rows),
        lra: lra_score(&lra_rows).ok(),
        rank_sum: ranks,
    }
}

/// Aggregates in column order C, E, N, all. Instance scores are branch means;
/// LAS and LRA use every instance, whatever its status.
pub fn aggregate(rows: &[ReportRow]) -> Vec<ClassAggregate> {
    let groups = by_instance(rows);
    let mut out = Vec::new();
    for label in [NliLabel::C, NliLabel::E, NliLabel::N] {
        let g: Vec<&[ReportRow]> = groups.iter().copied().filter(|g| g[0].gold_label == label).collect();
        out.push(aggregate_class(label.as_str(), &g));
    }
    out.push(aggregate_class("all", &groups));
    out
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

fn text_cell(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\t', "\\t").replace('\n', "\\n").replace('\r', "\\r")
}

pub const TSV_COLUMNS: [&str; 16] = [
    "instance_id",
    "gold_label",
    "branch",
    "status",
    "reason",
    "x_cf",
    "y_cf",
    "provenance",
    "pattern_id",
    "p_E",
    "p_C",
    "p_N",
    "ftc_delta",
    "ftc_kl",
    "ftc_w",
    "human_agreement",
];

impl Report {
    pub fn aggregate(&self, label: &str) -> Option<&ClassAggregate> {
        self.aggregates.iter().find(|a| a.label == label)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = TSV_COLUMNS.join("\t");
        out.push('\n');
        for r in &self.rows {
            let opt = |s: Option<&str>| s.map_or_else(|| "NA".to_string(), text_cell);
            let p = |l: NliLabel| num(r.probs.map(|d| d.prob(l)));
            let cells = [
                text_cell(&r.instance_id),
                r.gold_label.as_str().to_string(),
                opt(r.branch.map(BranchId::as_str)),
                r.status.as_str().to_string(),
                opt(r.reason.as_deref()),
                opt(r.x_cf.as_deref()),
                opt(r.y_cf.map(NliLabel::as_str)),
                opt(r.provenance.map(Provenance::as_str)),
                opt(r.pattern_id.as_deref()),
                p(NliLabel::E),
                p(NliLabel::C),
                p(NliLabel::N),
                num(r.ftc_delta),
                num(r.ftc_kl),
                num(r.ftc_w),
                opt(r.human_agreement.map(|a| if a { "yes" } else { "no" })),
            ];
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Metrics as rows, classes C, E, N, All as columns.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Metric | C | E | N | All |\n|---|---|---|---|---|\n");
        if self.rows.is_empty() {
            return out;
        }
        let line = |out: &mut String, name: &str, f: &dyn Fn(&ClassAggregate) -> String| {
            let cells: Vec<String> = self.aggregates.iter().map(f).collect();
            let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
        };
        line(&mut out, "Instances", &|a| a.instances.to_string());
        line(&mut out, "Scored", &|a| a.scored.to_string());
        line(&mut out, "Skipped", &|a| a.skipped.to_string());
        line(&mut out, "Filtered", &|a| a.filtered.to_string());
        line(&mut out, "FTC-δ", &|a| num(a.ftc_delta));
        line(&mut out, "FTC-K", &|a| num(a.ftc_kl));
        line(&mut out, "FTC-W", &|a| num(a.ftc_w));
        if self.aggregates.iter().any(|a| a.lra.is_some()) {
            line(&mut out, "LAS", &|a| num(a.las.las));
            line(&mut out, "LRA", &|a| num(a.lra));
        }
        for key in METRIC_KEYS {
            if self.aggregates.iter().any(|a| a.rank_sum.contains_key(key)) {
                let title = metric_title(key);
                line(&mut out, &format!("ρ {title}"), &|a| num(a.rank_sum.get(key).map(|r| r.rho)));
                line(&mut out, &format!("p {title}"), &|a| num(a.rank_sum.get(key).map(|r| r.p_value)));
            }
        }
        if let Some(k) = &self.kappa {
            let _ = write!(out, "\nFleiss' κ: {:.4}\n", k.kappa);
        }
        out
    }
}
