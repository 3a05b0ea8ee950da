//! Canonical data types, dataset ingestion and consistency filtering.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ArgumentError, DatasetError};

/// NLI label. The derived ordering `E < C < N` is used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NliLabel {
    E,
    C,
    N,
}

impl NliLabel {
    pub const ALL: [NliLabel; 3] = [NliLabel::E, NliLabel::C, NliLabel::N];

    pub fn index(self) -> usize {
        match self {
            NliLabel::E => 0,
            NliLabel::C => 1,
            NliLabel::N => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NliLabel::E => "E",
            NliLabel::C => "C",
            NliLabel::N => "N",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            NliLabel::E => "entailment",
            NliLabel::C => "contradiction",
            NliLabel::N => "neutral",
        }
    }
}

impl fmt::Display for NliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NliLabel {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "e" | "entailment" => Ok(NliLabel::E),
            "c" | "contradiction" => Ok(NliLabel::C),
            "n" | "neutral" => Ok(NliLabel::N),
            other => Err(ArgumentError(format!("unknown label {other:?}"))),
        }
    }
}

/// Counterfactual branch. `Main` serves E and C; the two neutral branches
/// test `A` and `not B` separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BranchId {
    #[serde(rename = "main")]
    Main,
    #[serde(rename = "A_branch")]
    ABranch,
    #[serde(rename = "negB_branch")]
    NegBBranch,
}

impl BranchId {
    pub fn as_str(self) -> &'static str {
        match self {
            BranchId::Main => "main",
            BranchId::ABranch => "A_branch",
            BranchId::NegBBranch => "negB_branch",
        }
    }

    /// Whether this branch may be attached to an instance with `label`.
    pub fn admits(self, label: NliLabel) -> bool {
        match self {
            BranchId::Main => matches!(label, NliLabel::E | NliLabel::C),
            BranchId::ABranch | BranchId::NegBBranch => label == NliLabel::N,
        }
    }
}

impl fmt::Display for BranchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BranchId {
    type Err = ArgumentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "main" => Ok(BranchId::Main),
            "A_branch" => Ok(BranchId::ABranch),
            "negB_branch" => Ok(BranchId::NegBBranch),
            other => Err(ArgumentError(format!("unknown branch {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Regex,
    Fsp,
    Human,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Regex => "regex",
            Provenance::Fsp => "fsp",
            Provenance::Human => "human",
        }
    }
}

/// One NLI datapoint. The premise is an opaque handle and is never inspected locally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub premise_ref: String,
    pub hypothesis: String,
    pub gold_label: NliLabel,
    pub explanation: String,
    #[serde(default)]
    pub annotator_labels: Vec<NliLabel>,
}

impl Instance {
    pub fn validate(&self) -> Result<(), ArgumentError> {
        if self.id.trim().is_empty() {
            return Err(ArgumentError("instance id is empty".into()));
        }
        if self.hypothesis.trim().is_empty() {
            return Err(ArgumentError(format!("instance {}: empty hypothesis", self.id)));
        }
        if self.explanation.trim().is_empty() {
            return Err(ArgumentError(format!("instance {}: empty explanation", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub instance_id: String,
    pub branch: BranchId,
    pub x_cf: String,
    pub y_cf: NliLabel,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_id: Option<String>,
}

impl CounterfactualRecord {
    /// Checks the record against the label-derivation table for `gold`.
    pub fn check_against(&self, gold: NliLabel) -> Result<(), ArgumentError> {
        if !self.branch.admits(gold) {
            return Err(ArgumentError(format!(
                "record {}: branch {} not allowed for label {gold}",
                self.instance_id, self.branch
            )));
        }
        let expected = crate::freelogic::derive_counterfactual_labels(gold)
            .into_iter()
            .find(|(b, _)| *b == self.branch)
            .map(|(_, y)| y);
        if expected != Some(self.y_cf) {
            return Err(ArgumentError(format!(
                "record {}: y_cf {} does not follow from ({gold}, {})",
                self.instance_id, self.y_cf, self.branch
            )));
        }
        Ok(())
    }
}

const DIST_TOLERANCE: f64 = 1e-6;

/// Classifier output over `{E, C, N}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    #[serde(rename = "E")]
    pub p_e: f64,
    #[serde(rename = "C")]
    pub p_c: f64,
    #[serde(rename = "N")]
    pub p_n: f64,
}

impl LabelDistribution {
    pub fn new(p_e: f64, p_c: f64, p_n: f64) -> Result<Self, ArgumentError> {
        let d = LabelDistribution { p_e, p_c, p_n };
        d.validate()?;
        Ok(d)
    }

    pub fn one_hot(label: NliLabel) -> Self {
        let mut p = [0.0; 3];
        p[label.index()] = 1.0;
        LabelDistribution::from_array(p)
    }

    pub fn uniform() -> Self {
        LabelDistribution::from_array([1.0 / 3.0; 3])
    }

    /// Near one-hot: `1 - eps` on `label`, `eps / 2` on the others.
    pub fn smoothed(label: NliLabel, eps: f64) -> Self {
        let mut p = [eps / 2.0; 3];
        p[label.index()] = 1.0 - eps;
        LabelDistribution::from_array(p)
    }

    pub(crate) fn from_array(p: [f64; 3]) -> Self {
        LabelDistribution { p_e: p[0], p_c: p[1], p_n: p[2] }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_e, self.p_c, self.p_n]
    }

    pub fn prob(&self, label: NliLabel) -> f64 {
        self.as_array()[label.index()]
    }

    pub fn validate(&self) -> Result<(), ArgumentError> {
        let p = self.as_array();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(ArgumentError(format!("probabilities out of [0,1]: {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > DIST_TOLERANCE {
            return Err(ArgumentError(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Highest-probability label; exact ties go to the lowest label in `E < C < N`.
    pub fn argmax(&self) -> NliLabel {
        let p = self.as_array();
        let mut best = NliLabel::E;
        for label in [NliLabel::C, NliLabel::N] {
            if p[label.index()] > p[best.index()] {
                best = label;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Tsv,
    Jsonl,
}

/// Column names (TSV header cells) or object keys (JSONL).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: String,
    pub explanation: String,
    #[serde(default)]
    pub annotator_labels: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "id".into(),
            premise: "premise".into(),
            hypothesis: "hypothesis".into(),
            label: "label".into(),
            explanation: "explanation".into(),
            annotator_labels: Some("annotator_labels".into()),
        }
    }
}

fn default_max_errors() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFormatConfig {
    #[serde(default)]
    pub format: DatasetFormat,
    #[serde(default)]
    pub columns: ColumnMap,
    /// Dataset label string -> label. Matching trims and ignores case.
    #[serde(default = "default_aliases")]
    pub label_aliases: BTreeMap<String, NliLabel>,
    #[serde(default = "default_max_errors")]
    pub max_errors: usize,
}

fn default_aliases() -> BTreeMap<String, NliLabel> {
    NliLabel::ALL
        .iter()
        .flat_map(|l| [(l.long_name().to_string(), *l), (l.as_str().to_string(), *l)])
        .collect()
}

impl Default for DatasetFormatConfig {
    fn default() -> Self {
        DatasetFormatConfig {
            format: DatasetFormat::Tsv,
            columns: ColumnMap::default(),
            label_aliases: default_aliases(),
            max_errors: default_max_errors(),
        }
    }
}

impl DatasetFormatConfig {
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        let cfg: DatasetFormatConfig =
            serde_json::from_str(text).map_err(|e| DatasetError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let c = &self.columns;
        let mut seen = HashSet::new();
        let names = [&c.id, &c.premise, &c.hypothesis, &c.label, &c.explanation]
            .into_iter()
            .chain(c.annotator_labels.as_ref());
        for name in names {
            if name.trim().is_empty() {
                return Err(DatasetError::Config("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(DatasetError::Config(format!("column {name:?} mapped twice")));
            }
        }
        Ok(())
    }

    pub fn resolve_label(&self, raw: &str) -> Option<NliLabel> {
        let needle = raw.trim();
        self.label_aliases
            .iter()
            .find(|(alias, _)| alias.trim().eq_ignore_ascii_case(needle))
            .map(|(_, l)| *l)
    }

    /// Preferred dataset spelling of `label` when writing.
    fn label_spelling(&self, label: NliLabel) -> String {
        let long = label.long_name();
        if self.resolve_label(long) == Some(label) {
            return long.to_string();
        }
        self.label_aliases
            .iter()
            .find(|(_, l)| **l == label)
            .map(|(a, _)| a.clone())
            .unwrap_or_else(|| label.as_str().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    /// 1-based line number in the source.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedDataset {
    pub instances: Vec<Instance>,
    pub row_errors: Vec<RowError>,
}

/// Parses a TSV or JSONL dataset. Malformed rows are collected in `row_errors`
/// until `max_errors` is exceeded, at which point parsing aborts.
pub fn parse_instances<R: Read>(
    mut source: R,
    config: &DatasetFormatConfig,
) -> Result<ParsedDataset, DatasetError> {
    config.validate()?;
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| DatasetError::Encoding(e.to_string()))?;
    let mut out = match config.format {
        DatasetFormat::Tsv => parse_tsv(&text, config)?,
        DatasetFormat::Jsonl => parse_jsonl(&text, config)?,
    };
    let mut seen = HashSet::new();
    let mut kept = Vec::with_capacity(out.instances.len());
    for (line, inst) in std::mem::take(&mut out.instances) {
        if !seen.insert(inst.id.clone()) {
            push_error(&mut out.row_errors, config, line, format!("duplicate id {:?}", inst.id))?;
            continue;
        }
        kept.push(inst);
    }
    Ok(ParsedDataset { instances: kept, row_errors: out.row_errors })
}

struct Staged {
    instances: Vec<(usize, Instance)>,
    row_errors: Vec<RowError>,
}

fn push_error(
    errors: &mut Vec<RowError>,
    config: &DatasetFormatConfig,
    line: usize,
    message: String,
) -> Result<(), DatasetError> {
    errors.push(RowError { line, message });
    if errors.len() > config.max_errors {
        return Err(DatasetError::TooManyErrors { count: errors.len(), rows: errors.clone() });
    }
    Ok(())
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn parse_tsv(text: &str, config: &DatasetFormatConfig) -> Result<Staged, DatasetError> {
    let mut it = lines(text);
    let header = match it.next() {
        Some((_, h)) if !h.trim().is_empty() => h,
        _ => return Err(DatasetError::Config("missing TSV header row".into())),
    };
    let cells: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| -> Result<usize, DatasetError> {
        let mut hits = cells.iter().enumerate().filter(|(_, c)| **c == name);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (None, _) => Err(DatasetError::MissingColumn(name.to_string())),
            (Some(_), Some(_)) => Err(DatasetError::Config(format!("column {name:?} appears twice"))),
        }
    };
    let c = &config.columns;
    let idx = [find(&c.id)?, find(&c.premise)?, find(&c.hypothesis)?, find(&c.label)?, find(&c.explanation)?];
    let ann_idx = match &c.annotator_labels {
        Some(name) => match find(name) {
            Ok(i) => Some(i),
            Err(DatasetError::MissingColumn(_)) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };

    let mut staged = Staged { instances: Vec::new(), row_errors: Vec::new() };
    for (line, raw) in it {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != cells.len() {
            push_error(
                &mut staged.row_errors,
                config,
                line,
                format!("expected {} fields, found {}", cells.len(), fields.len()),
            )?;
            continue;
        }
        let get = |i: usize| unescape_tsv(fields[i]);
        let annotators = ann_idx.map(&get).unwrap_or_default();
        let row = RawRow {
            id: get(idx[0]),
            premise: get(idx[1]),
            hypothesis: get(idx[2]),
            label: get(idx[3]),
            explanation: get(idx[4]),
            annotators: split_annotators(&annotators),
        };
        match row.into_instance(config) {
            Ok(inst) => staged.instances.push((line, inst)),
            Err(msg) => push_error(&mut staged.row_errors, config, line, msg)?,
        }
    }
    Ok(staged)
}

fn split_annotators(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_jsonl(text: &str, config: &DatasetFormatConfig) -> Result<Staged, DatasetError> {
    let c = &config.columns;
    let mut staged = Staged { instances: Vec::new(), row_errors: Vec::new() };
    for (line, raw) in lines(text) {
        if raw.trim().is_empty() {
            continue;
        }
        let obj: serde_json::Map<String, serde_json::Value> = match serde_json::from_str(raw) {
            Ok(v) => v,
            Err(e) => {
                push_error(&mut staged.row_errors, config, line, format!("invalid JSON: {e}"))?;
                continue;
            }
        };
        let field = |key: &str| -> Result<String, String> {
            match obj.get(key) {
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
                Some(other) => Err(format!("key {key:?} is not a string: {other}")),
                None => Err(format!("missing key {key:?}")),
            }
        };
        let annotators = match c.annotator_labels.as_ref().and_then(|k| obj.get(k)) {
            None | Some(serde_json::Value::Null) => Ok(Vec::new()),
            Some(serde_json::Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(String::from).ok_or_else(|| "annotator label not a string".to_string()))
                .collect(),
            Some(serde_json::Value::String(s)) => Ok(split_annotators(s)),
            Some(other) => Err(format!("annotator labels malformed: {other}")),
        };
        let row = (|| {
            Ok::<_, String>(RawRow {
                id: field(&c.id)?,
                premise: field(&c.premise)?,
                hypothesis: field(&c.hypothesis)?,
                label: field(&c.label)?,
                explanation: field(&c.explanation)?,
                annotators: annotators?,
            })
        })();
        match row.and_then(|r| r.into_instance(config)) {
            Ok(inst) => staged.instances.push((line, inst)),
            Err(msg) => push_error(&mut staged.row_errors, config, line, msg)?,
        }
    }
    Ok(staged)
}

struct RawRow {
    id: String,
    premise: String,
    hypothesis: String,
    label: String,
    explanation: String,
    annotators: Vec<String>,
}

impl RawRow {
    fn into_instance(self, config: &DatasetFormatConfig) -> Result<Instance, String> {
        let gold_label = config
            .resolve_label(&self.label)
            .ok_or_else(|| format!("unknown label {:?}", self.label))?;
        let annotator_labels = self
            .annotators
            .iter()
            .map(|a| config.resolve_label(a).ok_or_else(|| format!("unknown annotator label {a:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        let inst = Instance {
            id: self.id,
            premise_ref: self.premise,
            hypothesis: self.hypothesis,
            gold_label,
            explanation: self.explanation,
            annotator_labels,
        };
        inst.validate().map_err(|e| e.0)?;
        Ok(inst)
    }
}

fn escape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_tsv(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Writes instances in `config`'s format; `parse_instances` reads them back unchanged.
pub fn serialize_instances(instances: &[Instance], config: &DatasetFormatConfig) -> String {
    let c = &config.columns;
    let mut out = String::new();
    match config.format {
        DatasetFormat::Tsv => {
            let mut header = vec![&c.id, &c.premise, &c.hypothesis, &c.label, &c.explanation];
            if let Some(a) = &c.annotator_labels {
                header.push(a);
            }
            out.push_str(&header.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\t"));
            out.push('\n');
            for inst in instances {
                let mut cells = vec![
                    escape_tsv(&inst.id),
                    escape_tsv(&inst.premise_ref),
                    escape_tsv(&inst.hypothesis),
                    config.label_spelling(inst.gold_label),
                    escape_tsv(&inst.explanation),
                ];
                if c.annotator_labels.is_some() {
                    cells.push(
                        inst.annotator_labels
                            .iter()
                            .map(|l| config.label_spelling(*l))
                            .collect::<Vec<_>>()
                            .join(","),
                    );
                }
                out.push_str(&cells.join("\t"));
                out.push('\n');
            }
        }
        DatasetFormat::Jsonl => {
            for inst in instances {
                let mut obj = serde_json::Map::new();
                obj.insert(c.id.clone(), inst.id.clone().into());
                obj.insert(c.premise.clone(), inst.premise_ref.clone().into());
                obj.insert(c.hypothesis.clone(), inst.hypothesis.clone().into());
                obj.insert(c.label.clone(), config.label_spelling(inst.gold_label).into());
                obj.insert(c.explanation.clone(), inst.explanation.clone().into());
                if let Some(a) = &c.annotator_labels {
                    let labels: Vec<serde_json::Value> =
                        inst.annotator_labels.iter().map(|l| config.label_spelling(*l).into()).collect();
                    obj.insert(a.clone(), labels.into());
                }
                out.push_str(&serde_json::Value::Object(obj).to_string());
                out.push('\n');
            }
        }
    }
    out
}

/// Strict-majority label, or `None` when no label has more than half the votes.
pub fn majority_vote(labels: &[NliLabel]) -> Result<Option<NliLabel>, ArgumentError> {
    if labels.is_empty() {
        return Err(ArgumentError("majority_vote needs at least one label".into()));
    }
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    Ok(NliLabel::ALL.into_iter().find(|l| counts[l.index()] * 2 > labels.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DropReason {
    Unannotated,
    Tie,
    Mismatch,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Unannotated => "unannotated",
            DropReason::Tie => "tie",
            DropReason::Mismatch => "mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dropped {
    pub instance: Instance,
    pub record: CounterfactualRecord,
    pub reason: DropReason,
}

/// Keeps records whose annotator majority equals `y_cf`. Order is preserved on both sides.
pub fn filter_consistent(
    records: Vec<(Instance, CounterfactualRecord)>,
) -> (Vec<(Instance, CounterfactualRecord)>, Vec<Dropped>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (instance, record) in records {
        let verdict = match majority_vote(&instance.annotator_labels) {
            Err(_) => Err(DropReason::Unannotated),
            Ok(None) => Err(DropReason::Tie),
            Ok(Some(l)) if l == record.y_cf => Ok(()),
            Ok(Some(_)) => Err(DropReason::Mismatch),
        };
        match verdict {
            Ok(()) => kept.push((instance, record)),
            Err(reason) => dropped.push(Dropped { instance, record, reason }),
        }
    }
    (kept, dropped)
}
