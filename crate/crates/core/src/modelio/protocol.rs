//! Wire-protocol messages shared by clients, the mock server and the cache.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::LabelDistribution;

pub const CLASSIFY_PATH: &str = "/v1/classify";
pub const GENERATE_PATH: &str = "/v1/generate";

/// Which inputs the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Condition {
    #[default]
    #[serde(rename = "x")]
    X,
    #[serde(rename = "x_and_e")]
    XAndE,
    #[serde(rename = "e_only")]
    EOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub premise_ref: String,
    pub hypothesis: String,
    #[serde(default)]
    pub condition: Condition,
    #[serde(default)]
    pub explanation: Option<String>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
}

impl ClassifyRequest {
    pub fn new(premise_ref: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        ClassifyRequest {
            premise_ref: premise_ref.into(),
            hypothesis: hypothesis.into(),
            condition: Condition::X,
            explanation: None,
            noise_sigma: None,
        }
    }

    pub fn with_explanation(mut self, condition: Condition, explanation: impl Into<String>) -> Self {
        self.condition = condition;
        self.explanation = Some(explanation.into());
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = Some(sigma);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.condition != Condition::X && self.explanation.as_deref().is_none_or(|e| e.trim().is_empty()) {
            return Err(ModelError::InvalidRequest("condition requires an explanation".into()));
        }
        if let Some(s) = self.noise_sigma {
            if !s.is_finite() || s < 0.0 {
                return Err(ModelError::InvalidRequest(format!("noise_sigma must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub probs: LabelDistribution,
}

pub const DEFAULT_MAX_TOKENS_CAP: u32 = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub max_tokens: u32,
    #[serde(default)]
    pub stop: Vec<String>,
    #[serde(default)]
    pub temperature: f64,
}

impl GenerateRequest {
    /// Greedy request with a single stop string.
    pub fn greedy(prompt: impl Into<String>, max_tokens: u32, stop: &str) -> Self {
        GenerateRequest { prompt: prompt.into(), max_tokens, stop: vec![stop.to_string()], temperature: 0.0 }
    }

    pub fn validate(&self, max_tokens_cap: u32) -> Result<(), ModelError> {
        if self.max_tokens == 0 || self.max_tokens > max_tokens_cap {
            return Err(ModelError::InvalidRequest(format!(
                "max_tokens must be in 1..={max_tokens_cap}, got {}",
                self.max_tokens
            )));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ModelError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEnvelope {
    pub error: ErrorBody,
}

impl ErrorEnvelope {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorEnvelope { error: ErrorBody { code: code.to_string(), message: message.into() } }
    }
}

/// Cuts `text` at the earliest occurrence of any stop string.
pub fn truncate_at_stop(text: &str, stop: &[String]) -> String {
    let cut = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}

/// A black-box NLI classifier.
pub trait Classifier: Send + Sync {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError>;
}

/// A text-generation backend. Implementations truncate at the request's stop strings.
pub trait Generator: Send + Sync {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError>;
}

impl<T: Classifier + ?Sized> Classifier for &T {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        (**self).classify(request)
    }
}

impl<T: Classifier + ?Sized> Classifier for std::sync::Arc<T> {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        (**self).classify(request)
    }
}

impl<T: Generator + ?Sized> Generator for &T {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        (**self).generate(request)
    }
}

impl<T: Generator + ?Sized> Generator for std::sync::Arc<T> {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        (**self).generate(request)
    }
}

/// Parses and validates a classify response body.
pub fn parse_classify_response(body: &str) -> Result<LabelDistribution, ModelError> {
    let resp: ClassifyResponse = serde_json::from_str(body).map_err(|e| ModelError::Protocol {
        code: "bad_response".into(),
        message: e.to_string(),
        raw_body: Some(body.to_string()),
    })?;
    resp.probs.validate().map_err(|e| ModelError::Protocol {
        code: "bad_distribution".into(),
        message: e.0,
        raw_body: Some(body.to_string()),
    })?;
    Ok(resp.probs)
}
