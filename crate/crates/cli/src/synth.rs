use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use ftc_core::model::{serialize_instances, DatasetFormatConfig};
use ftc_core::modelio::mock::{MockConfig, OracleBackendConfig};
use ftc_core::modelio::oracle::OracleSettings;
use ftc_core::sensitivity::AblationCondition;
use ftc_core::synth::{SynthConfig, SynthSuite};
use serde_json::json;

#[derive(Args)]
pub struct SynthArgs {
    /// Directory to write the suite into.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub per_label: usize,
    /// Half-width of the mock classifier's smoothing.
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    /// Chance the mock classifier answers with a wrong label.
    #[arg(long, default_value_t = 0.03)]
    pub error_rate: f64,
    /// Which explanations go into the dataset.
    #[arg(long, value_enum, default_value_t = Explanations::Faithful)]
    pub explanations: Explanations,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Explanations {
    Faithful,
    Shuffled,
    Pathological,
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
}

fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| serde_json::to_string(&v).expect("serializes") + "\n").collect()
}

/// Writes `dataset.tsv`, `world.json`, `mock.json`, `human.jsonl`,
/// `explanations/<condition>.jsonl` and a `config.json` tying them together.
pub fn write_suite(args: &SynthArgs, seed: Option<u64>) -> Result<()> {
    let seed = seed.unwrap_or(0);
    let cfg = SynthConfig { per_label: args.per_label, seed, ..SynthConfig::default() };
    let suite = SynthSuite::generate(&cfg);
    let dir = &args.dir;
    std::fs::create_dir_all(dir.join("explanations")).with_context(|| format!("creating {}", dir.display()))?;

    let explanations = match args.explanations {
        Explanations::Faithful => suite.faithful_explanations(),
        Explanations::Shuffled => suite.shuffled_explanations(seed),
        Explanations::Pathological => suite.pathological_explanations(seed),
    };
    write(dir, "dataset.tsv", &serialize_instances(&suite.with_explanations(&explanations), &DatasetFormatConfig::default()))?;
    write(dir, "world.json", &(serde_json::to_string_pretty(&suite.world)? + "\n"))?;

    let mock = MockConfig {
        oracle: Some(OracleBackendConfig {
            world: None,
            world_path: Some("world.json".into()),
            settings: OracleSettings { epsilon: args.epsilon, error_rate: args.error_rate, seed },
        }),
        ..MockConfig::default()
    };
    write(dir, "mock.json", &(serde_json::to_string_pretty(&mock)? + "\n"))?;
    write(dir, "human.jsonl", &jsonl(suite.human_counterfactuals(&cfg)))?;

    let sets = [
        (AblationCondition::FullYxu, suite.faithful_explanations()),
        (AblationCondition::YOnly, suite.pathological_explanations(seed + 1)),
        (AblationCondition::XOnly, suite.pathological_explanations(seed + 2)),
        (AblationCondition::UOnly, suite.pathological_explanations(seed + 3)),
    ];
    let mut set_paths = serde_json::Map::new();
    for (cond, expl) in &sets {
        let name = format!("explanations/{}.jsonl", cond.as_str());
        let lines = suite
            .items
            .iter()
            .zip(expl)
            .map(|(it, e)| json!({"instance_id": it.instance.id, "explanation": e}));
        write(dir, &name, &jsonl(lines))?;
        set_paths.insert(cond.as_str().into(), name.into());
    }

    let unrewritable = if args.explanations == Explanations::Faithful { "skip" } else { "unfaithful" };
    let config = json!({
        "dataset": "dataset.tsv",
        "mode": "regex",
        "mock": mock,
        "human_counterfactuals": "human.jsonl",
        "unrewritable": unrewritable,
        "simulatability_noise": 0.3,
        "explanation_sets": set_paths,
    });
    write(dir, "config.json", &(serde_json::to_string_pretty(&config)? + "\n"))?;
    eprintln!("wrote {} instances to {}", suite.items.len(), dir.display());
    Ok(())
}
