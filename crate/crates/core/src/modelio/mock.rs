//! Deterministic in-process backends used by the mock server and tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ModelError};
use crate::model::LabelDistribution;
use crate::modelio::oracle::{CompiledWorld, OracleClassifier, OracleSettings, OracleWorld};
use crate::modelio::protocol::{
    truncate_at_stop, ClassifyRequest, Classifier, GenerateRequest, Generator, DEFAULT_MAX_TOKENS_CAP,
};

/// A canned continuation, served when the prompt ends with `prompt_suffix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CannedResponse {
    pub prompt_suffix: String,
    pub text: String,
}

/// Generator answering only from its canned list; the longest matching suffix wins.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    canned: Vec<CannedResponse>,
    max_tokens_cap: u32,
}

impl MockGenerator {
    pub fn new(canned: Vec<CannedResponse>) -> Self {
        MockGenerator { canned, max_tokens_cap: DEFAULT_MAX_TOKENS_CAP }
    }

    pub fn push(&mut self, prompt_suffix: impl Into<String>, text: impl Into<String>) {
        self.canned.push(CannedResponse { prompt_suffix: prompt_suffix.into(), text: text.into() });
    }

    pub fn canned(&self) -> &[CannedResponse] {
        &self.canned
    }
}

impl Default for MockGenerator {
    fn default() -> Self {
        MockGenerator::new(Vec::new())
    }
}

impl Generator for MockGenerator {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        request.validate(self.max_tokens_cap)?;
        let hit = self
            .canned
            .iter()
            .filter(|c| request.prompt.ends_with(&c.prompt_suffix))
            .max_by_key(|c| c.prompt_suffix.len())
            .ok_or_else(|| ModelError::protocol("no_canned_response", "no canned response"))?;
        Ok(truncate_at_stop(&hit.text, &request.stop))
    }
}

/// Oracle section of a mock config. The world is given inline or by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBackendConfig {
    #[serde(default)]
    pub world: Option<OracleWorld>,
    #[serde(default)]
    pub world_path: Option<String>,
    #[serde(flatten)]
    pub settings: OracleSettings,
}

/// Configuration of the mock backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockConfig {
    #[serde(default)]
    pub oracle: Option<OracleBackendConfig>,
    #[serde(default)]
    pub canned_generate: Vec<CannedResponse>,
    /// Extra canned files (JSON arrays of `{prompt_suffix, text}`).
    #[serde(default)]
    pub canned_files: Vec<String>,
    #[serde(default = "default_cap")]
    pub max_tokens_cap: u32,
}

fn default_cap() -> u32 {
    DEFAULT_MAX_TOKENS_CAP
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig { oracle: None, canned_generate: Vec::new(), canned_files: Vec::new(), max_tokens_cap: default_cap() }
    }
}

/// The resolved backends behind a mock server.
#[derive(Debug, Clone)]
pub struct MockBackend {
    pub classifier: Option<OracleClassifier>,
    pub generator: MockGenerator,
}

impl MockBackend {
    /// Resolves paths relative to `base_dir`.
    pub fn from_config(config: &MockConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let classifier = match &config.oracle {
            None => None,
            Some(o) => {
                let world = match (&o.world, &o.world_path) {
                    (Some(w), None) => w.clone(),
                    (None, Some(p)) => OracleWorld::from_json(&std::fs::read_to_string(base_dir.join(p))?)?,
                    _ => return Err(ConfigError::Invalid("oracle needs exactly one of `world`, `world_path`".into())),
                };
                if !(0.0..1.0).contains(&o.settings.epsilon) || !(0.0..=1.0).contains(&o.settings.error_rate) {
                    return Err(ConfigError::Invalid("oracle epsilon must be in [0,1), error_rate in [0,1]".into()));
                }
                Some(OracleClassifier::new(world.compile()?, o.settings.clone()))
            }
        };
        let mut canned = config.canned_generate.clone();
        for f in &config.canned_files {
            let text = std::fs::read_to_string(base_dir.join(f))?;
            canned.extend(serde_json::from_str::<Vec<CannedResponse>>(&text)?);
        }
        if classifier.is_none() && canned.is_empty() {
            return Err(ConfigError::Invalid("mock config defines neither an oracle nor canned responses".into()));
        }
        let mut generator = MockGenerator::new(canned);
        generator.max_tokens_cap = config.max_tokens_cap;
        Ok(MockBackend { classifier, generator })
    }

    pub fn from_world(world: CompiledWorld, settings: OracleSettings) -> Self {
        MockBackend { classifier: Some(OracleClassifier::new(world, settings)), generator: MockGenerator::default() }
    }
}

impl Classifier for MockBackend {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        match &self.classifier {
            Some(c) => c.classify(request),
            None => Err(ModelError::protocol("no_classifier", "mock server has no classifier configured")),
        }
    }
}

impl Generator for MockBackend {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        self.generator.generate(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canned_echo_and_strictness() {
        let mut g = MockGenerator::default();
        g.push("Explanation: x\n", "A: dog | B: animal\nmore");
        g.push("x\n", "short");
        let req = GenerateRequest::greedy("prefix\nExplanation: x\n", 32, "\n");
        assert_eq!(g.generate(&req).unwrap(), "A: dog | B: animal");
        let req = GenerateRequest::greedy("other x\n", 32, "\n");
        assert_eq!(g.generate(&req).unwrap(), "short");
        let err = g.generate(&GenerateRequest::greedy("unmatched", 32, "\n")).unwrap_err();
        assert!(matches!(err, ModelError::Protocol { ref message, .. } if message == "no canned response"));
    }

    #[test]
    fn immediate_stop_gives_empty_text() {
        let g = MockGenerator::new(vec![CannedResponse { prompt_suffix: "".into(), text: "\nlater".into() }]);
        assert_eq!(g.generate(&GenerateRequest::greedy("anything", 8, "\n")).unwrap(), "");
    }

    #[test]
    fn config_validation() {
        let empty = MockConfig::default();
        assert!(MockBackend::from_config(&empty, Path::new(".")).is_err());
        let cfg: MockConfig = serde_json::from_str(
            r#"{"oracle":{"world":{"isa_edges":[["dog","animal"]],"disjoint_pairs":[],"relations":[],
                "scene_facts":{},"vocabulary":["dog","animal"]},"epsilon":0.02}}"#,
        )
        .unwrap();
        let backend = MockBackend::from_config(&cfg, Path::new(".")).unwrap();
        let d = backend.classify(&ClassifyRequest::new("p", "The dog is an animal.")).unwrap();
        assert_eq!(d.argmax(), crate::model::NliLabel::E);
    }
}
