//! Metric responses to ablated explanation sets: the same instances scored
//! with explanations produced under four conditioning regimes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{ArgumentError, ConfigError};
use crate::metrics::meteor;
use crate::model::Instance;
use crate::pipeline::{parse_jsonl, run_pipeline, Backends, PipelineError, PipelineInputs, PipelineOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationCondition {
    FullYxu,
    YOnly,
    XOnly,
    UOnly,
}

impl AblationCondition {
    pub const ALL: [AblationCondition; 4] =
        [AblationCondition::FullYxu, AblationCondition::YOnly, AblationCondition::XOnly, AblationCondition::UOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationCondition::FullYxu => "full_yxu",
            AblationCondition::YOnly => "y_only",
            AblationCondition::XOnly => "x_only",
            AblationCondition::UOnly => "u_only",
        }
    }
}

impl std::str::FromStr for AblationCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationCondition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown condition {s:?} (full_yxu, y_only, x_only, u_only)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionedExplanationSet {
    pub condition: AblationCondition,
    /// Instance id to explanation.
    pub explanations: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct ExplanationLine {
    instance_id: String,
    explanation: String,
}

impl ConditionedExplanationSet {
    /// Lines of `{"instance_id": ..., "explanation": ...}`.
    pub fn from_jsonl(condition: AblationCondition, text: &str) -> Result<Self, ArgumentError> {
        let mut explanations = BTreeMap::new();
        for line in parse_jsonl::<ExplanationLine>(text)? {
            if explanations.insert(line.instance_id.clone(), line.explanation).is_some() {
                return Err(ArgumentError(format!("duplicate explanation for {:?}", line.instance_id)));
            }
        }
        Ok(ConditionedExplanationSet { condition, explanations })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub condition: AblationCondition,
    pub scored: usize,
    pub skipped: usize,
    pub ftc_kl: Option<f64>,
    pub ftc_delta: Option<f64>,
    pub ftc_w: Option<f64>,
    pub las: Option<f64>,
    pub lra: Option<f64>,
    /// Against the dataset's own explanations.
    pub meteor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub rows: Vec<SensitivityRow>,
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl SensitivityTable {
    pub fn row(&self, condition: AblationCondition) -> Option<&SensitivityRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("condition\tscored\tskipped\tftc_kl\tftc_delta\tftc_w\tlas\tlra\tmeteor\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.condition.as_str(),
                r.scored,
                r.skipped,
                num(r.ftc_kl),
                num(r.ftc_delta),
                num(r.ftc_w),
                num(r.las),
                num(r.lra),
                num(r.meteor)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }
}

/// Runs the pipeline once per condition. Every condition must be present once
/// and cover exactly the given instances.
pub fn sensitivity_report(
    instances: &[Instance],
    sets: &[ConditionedExplanationSet],
    options: &PipelineOptions,
    backends: &Backends<'_>,
    with_meteor: bool,
) -> Result<SensitivityTable, PipelineError> {
    for c in AblationCondition::ALL {
        match sets.iter().filter(|s| s.condition == c).count() {
            0 => return Err(ConfigError::Invalid(format!("missing explanation set for condition {}", c.as_str())).into()),
            1 => {}
            _ => return Err(ConfigError::Invalid(format!("condition {} given more than once", c.as_str())).into()),
        }
    }
    let mut rows = Vec::new();
    for c in AblationCondition::ALL {
        let set = sets.iter().find(|s| s.condition == c).expect("checked above");
        if let Some(extra) = set.explanations.keys().find(|k| !instances.iter().any(|i| &&i.id == k)) {
            return Err(PipelineError::Input(format!("{}: explanation for unknown instance {extra:?}", c.as_str())));
        }
        let mut ablated = Vec::with_capacity(instances.len());
        for inst in instances {
            let explanation = set.explanations.get(&inst.id).ok_or_else(|| {
                PipelineError::Input(format!("{}: no explanation for instance {:?}", c.as_str(), inst.id))
            })?;
            ablated.push(Instance { explanation: explanation.clone(), ..inst.clone() });
        }
        let report = run_pipeline(PipelineInputs { instances: &ablated, ..Default::default() }, options, backends)?;
        let all = report.aggregate("all").expect("the all column is always present");
        let meteor_mean = (with_meteor && !instances.is_empty()).then(|| {
            ablated.iter().zip(instances).map(|(a, o)| meteor(&a.explanation, &[&o.explanation])).sum::<f64>()
                / instances.len() as f64
        });
        rows.push(SensitivityRow {
            condition: c,
            scored: all.scored,
            skipped: all.skipped,
            ftc_kl: all.ftc_kl,
            ftc_delta: all.ftc_delta,
            ftc_w: all.ftc_w,
            las: all.las.las,
            lra: all.lra,
            meteor: meteor_mean,
        });
    }
    Ok(SensitivityTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelio::oracle::{OracleClassifier, OracleSettings};
    use crate::rewrite::patterns::PatternBank;
    use crate::rewrite::prompt::{PromptSet, PromptTemplates};
    use crate::rewrite::RewriteMode;
    use crate::synth::{SynthConfig, SynthSuite};

    fn set(c: AblationCondition, suite: &SynthSuite, expl: &[String]) -> ConditionedExplanationSet {
        ConditionedExplanationSet {
            condition: c,
            explanations: suite.items.iter().zip(expl).map(|(it, e)| (it.instance.id.clone(), e.clone())).collect(),
        }
    }

    #[test]
    fn faithful_condition_ranks_first() {
        let suite = SynthSuite::generate(&SynthConfig { per_label: 15, seed: 2, ..SynthConfig::default() });
        let oracle = OracleClassifier::new(suite.compiled().clone(), OracleSettings::default());
        let (bank, prompts, templates) = (PatternBank::builtin(), PromptSet::builtin(), PromptTemplates::default());
        let b = Backends { classifier: &oracle, generator: None, bank: &bank, prompts: &prompts, templates: &templates };
        let instances = suite.instances();
        let sets = vec![
            set(AblationCondition::FullYxu, &suite, &suite.faithful_explanations()),
            set(AblationCondition::YOnly, &suite, &suite.pathological_explanations(1)),
            set(AblationCondition::XOnly, &suite, &suite.pathological_explanations(2)),
            set(AblationCondition::UOnly, &suite, &suite.pathological_explanations(3)),
        ];
        let opts = PipelineOptions { mode: RewriteMode::Regex, simulatability_noise: Some(0.3), ..Default::default() };
        let table = sensitivity_report(&instances, &sets, &opts, &b, true).unwrap();
        let full = table.row(AblationCondition::FullYxu).unwrap();
        assert_eq!(full.meteor.map(|m| m > 0.9), Some(true));
        for c in &AblationCondition::ALL[1..] {
            assert!(full.ftc_kl > table.row(*c).unwrap().ftc_kl);
        }
        assert_eq!(table.to_tsv().lines().count(), 5);

        let err = sensitivity_report(&instances, &sets[..3], &opts, &b, false).unwrap_err();
        assert!(err.to_string().contains("u_only"));
    }

    #[test]
    fn jsonl_sets() {
        let s = ConditionedExplanationSet::from_jsonl(
            AblationCondition::YOnly,
            "{\"instance_id\":\"a\",\"explanation\":\"x\"}\n{\"instance_id\":\"b\",\"explanation\":\"y\"}\n",
        )
        .unwrap();
        assert_eq!(s.explanations.len(), 2);
        assert!(ConditionedExplanationSet::from_jsonl(
            AblationCondition::YOnly,
            "{\"instance_id\":\"a\",\"explanation\":\"x\"}\n{\"instance_id\":\"a\",\"explanation\":\"y\"}\n"
        )
        .is_err());
        assert_eq!("x_only".parse::<AblationCondition>().unwrap(), AblationCondition::XOnly);
    }
}
