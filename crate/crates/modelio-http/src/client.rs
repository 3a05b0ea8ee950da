use std::sync::{Condvar, Mutex};
use std::time::Duration;

use ftc_core::error::ModelError;
use ftc_core::model::LabelDistribution;
use ftc_core::modelio::protocol::{
    parse_classify_response, truncate_at_stop, ClassifyRequest, Classifier, ErrorEnvelope, GenerateRequest,
    GenerateResponse, Generator,
};
use serde::{Deserialize, Serialize};

use crate::{CLASSIFY_PATH, GENERATE_PATH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub base_url: String,
    pub bearer_token: Option<String>,
    pub max_in_flight: usize,
    pub attempts: u32,
    /// Pause after the n-th failed attempt; the last entry repeats.
    pub backoff_secs: Vec<f64>,
    pub timeout_secs: f64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://127.0.0.1:8080".into(),
            bearer_token: None,
            max_in_flight: 4,
            attempts: 3,
            backoff_secs: vec![0.5, 1.0, 2.0],
            timeout_secs: 120.0,
        }
    }
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpConfig { base_url: base_url.into(), ..HttpConfig::default() }
    }
}

/// Counting semaphore.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'g>(&'g Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Gate { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Blocking protocol client implementing both [`Classifier`] and [`Generator`].
pub struct HttpClient {
    agent: ureq::Agent,
    config: HttpConfig,
    gate: Gate,
}

impl std::fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpClient").field("base_url", &self.config.base_url).finish()
    }
}

impl HttpClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .build()
            .into();
        let gate = Gate::new(config.max_in_flight);
        HttpClient { agent, config, gate }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn backoff(&self, failed_attempt: u32) -> Duration {
        let i = (failed_attempt as usize).saturating_sub(1);
        let secs = self.config.backoff_secs.get(i).or(self.config.backoff_secs.last()).copied().unwrap_or(0.0);
        Duration::from_secs_f64(secs)
    }

    fn once(&self, url: &str, body: &str) -> Result<String, ModelError> {
        let _permit = self.gate.acquire();
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = &self.config.bearer_token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| ModelError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| ModelError::Transport(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(ModelError::Transport(format!("HTTP {status}: {}", text.trim()))),
            _ => {
                let (code, message) = match serde_json::from_str::<ErrorEnvelope>(&text) {
                    Ok(env) => (env.error.code, env.error.message),
                    Err(_) => (format!("http_{status}"), format!("HTTP {status}")),
                };
                Err(ModelError::Protocol { code, message, raw_body: Some(text) })
            }
        }
    }

    /// POSTs `body` to `path`, retrying transport failures.
    pub fn post(&self, path: &str, body: &str) -> Result<String, ModelError> {
        let url = format!("{}{path}", self.config.base_url.trim_end_matches('/'));
        let attempts = self.config.attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.once(&url, body) {
                Err(e) if e.is_retryable() && attempt < attempts => {
                    log::warn!("{url}: {e}; retrying ({attempt}/{attempts})");
                    std::thread::sleep(self.backoff(attempt));
                }
                other => return other,
            }
        }
    }
}

impl Classifier for HttpClient {
    fn classify(&self, request: &ClassifyRequest) -> Result<LabelDistribution, ModelError> {
        request.validate()?;
        let body = serde_json::to_string(request).expect("request serializes");
        parse_classify_response(&self.post(CLASSIFY_PATH, &body)?)
    }
}

impl Generator for HttpClient {
    fn generate(&self, request: &GenerateRequest) -> Result<String, ModelError> {
        let body = serde_json::to_string(request).expect("request serializes");
        let text = self.post(GENERATE_PATH, &body)?;
        let resp: GenerateResponse = serde_json::from_str(&text).map_err(|e| ModelError::Protocol {
            code: "bad_response".into(),
            message: e.to_string(),
            raw_body: Some(text.clone()),
        })?;
        Ok(truncate_at_stop(&resp.text, &request.stop))
    }
}
