use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ftc_core::metrics::MetricConfig;
use ftc_core::model::{parse_instances, DatasetFormatConfig, Instance};
use ftc_core::modelio::cache::ResponseCache;
use ftc_core::modelio::mock::{MockBackend, MockConfig};
use ftc_core::modelio::protocol::{Classifier, Generator};
use ftc_core::pipeline::{PipelineOptions, UnrewritablePolicy};
use ftc_core::rewrite::fsp::FspOptions;
use ftc_core::rewrite::patterns::PatternBank;
use ftc_core::rewrite::prompt::{PromptSet, PromptTemplates};
use ftc_core::rewrite::RewriteMode;
use ftc_modelio_http::{HttpClient, HttpConfig};
use serde::Deserialize;

pub const ENV_CLASSIFIER_URL: &str = "FTC_CLASSIFIER_URL";
pub const ENV_GENERATOR_URL: &str = "FTC_GENERATOR_URL";
pub const ENV_CACHE_DIR: &str = "FTC_CACHE_DIR";

/// The `--config` file. Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub dataset_format: DatasetFormatConfig,
    pub mode: Option<RewriteMode>,
    pub classifier: Option<HttpConfig>,
    pub generator: Option<HttpConfig>,
    /// In-process mock backends, used when no endpoint URL is configured.
    pub mock: Option<MockConfig>,
    pub cache_dir: Option<PathBuf>,
    pub metric: MetricConfig,
    pub unrewritable: UnrewritablePolicy,
    pub simulatability_noise: Option<f64>,
    pub fsp: FspOptions,
    pub patterns: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub external_counterfactuals: Option<PathBuf>,
    pub human_counterfactuals: Option<PathBuf>,
    /// Condition name to explanation-set file, for `sensitivity`.
    pub explanation_sets: BTreeMap<String, PathBuf>,
    pub meteor: bool,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<RewriteMode>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                let mut cfg: RunConfig =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
                cfg.base_dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                cfg
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.check_files()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if o.mode.is_some() {
            self.mode = o.mode;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.jobs.is_some() {
            self.jobs = o.jobs;
        }
        if let Some(d) = &o.dataset {
            self.dataset = Some(std::path::absolute(d).unwrap_or_else(|_| d.clone()));
        }
        if let Ok(url) = std::env::var(ENV_CLASSIFIER_URL) {
            let base = self.classifier.take().unwrap_or_default();
            self.classifier = Some(HttpConfig { base_url: url, ..base });
        }
        if let Ok(url) = std::env::var(ENV_GENERATOR_URL) {
            let base = self.generator.take().unwrap_or_default();
            self.generator = Some(HttpConfig { base_url: url, ..base });
        }
        if let Some(d) = &o.cache_dir {
            self.cache_dir = Some(std::path::absolute(d).unwrap_or_else(|_| d.clone()));
        } else if let Ok(d) = std::env::var(ENV_CACHE_DIR) {
            self.cache_dir = Some(PathBuf::from(d));
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<()> {
        let files = [
            &self.dataset,
            &self.patterns,
            &self.prompts,
            &self.templates,
            &self.external_counterfactuals,
            &self.human_counterfactuals,
        ];
        for p in files.into_iter().flatten().chain(self.explanation_sets.values()) {
            let full = self.resolve(p);
            if !full.is_file() {
                bail!("referenced file {} does not exist", full.display());
            }
        }
        Ok(())
    }

    pub fn options(&self) -> PipelineOptions {
        PipelineOptions {
            mode: self.mode.unwrap_or_default(),
            metric: self.metric,
            unrewritable: self.unrewritable,
            simulatability_noise: self.simulatability_noise,
            fsp: self.fsp.clone(),
            jobs: self.jobs.unwrap_or(1).max(1),
        }
    }

    pub fn instances(&self) -> Result<Vec<Instance>> {
        let Some(path) = &self.dataset else { bail!("no dataset given (set `dataset` in the config or pass --dataset)") };
        let path = self.resolve(path);
        self.dataset_format.validate()?;
        let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let parsed = parse_instances(file, &self.dataset_format).with_context(|| format!("parsing {}", path.display()))?;
        for e in &parsed.row_errors {
            log::warn!("{}:{}: {}", path.display(), e.line, e.message);
        }
        Ok(parsed.instances)
    }

    pub fn read(&self, p: &Path) -> Result<String> {
        let full = self.resolve(p);
        std::fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))
    }

    pub fn rewrite_assets(&self) -> Result<(PatternBank, PromptSet, PromptTemplates)> {
        let bank = match &self.patterns {
            Some(p) => PatternBank::load(&self.resolve(p))?,
            None => PatternBank::builtin(),
        };
        let prompts = match &self.prompts {
            Some(p) => PromptSet::load(&self.resolve(p))?,
            None => PromptSet::builtin(),
        };
        let templates = match &self.templates {
            Some(p) => serde_json::from_str(&self.read(p)?).context("parsing prompt templates")?,
            None => PromptTemplates::default(),
        };
        Ok((bank, prompts, templates))
    }

    pub fn open_cache(&self) -> Result<ResponseCache> {
        match &self.cache_dir {
            Some(d) => {
                let dir = self.resolve(d);
                ResponseCache::open(&dir).with_context(|| format!("opening cache {}", dir.display()))
            }
            None => Ok(ResponseCache::in_memory()),
        }
    }

    /// Endpoint clients when configured, otherwise the in-process mock.
    pub fn model_backends(&self) -> Result<ModelBackends> {
        let mock = match &self.mock {
            Some(m) => {
                let mut m = m.clone();
                if let (Some(seed), Some(o)) = (self.seed, m.oracle.as_mut()) {
                    o.settings.seed = seed;
                }
                Some(Arc::new(MockBackend::from_config(&m, &self.base_dir)?))
            }
            None => None,
        };
        let classifier: Option<Arc<dyn Classifier>> = match (&self.classifier, &mock) {
            (Some(http), _) => Some(Arc::new(HttpClient::new(http.clone()))),
            (None, Some(m)) if m.classifier.is_some() => Some(m.clone()),
            _ => None,
        };
        let generator: Option<Arc<dyn Generator>> = match (&self.generator, &mock) {
            (Some(http), _) => Some(Arc::new(HttpClient::new(http.clone()))),
            (None, Some(m)) if !m.generator.canned().is_empty() => Some(m.clone()),
            _ => None,
        };
        Ok(ModelBackends { classifier, generator })
    }
}

pub struct ModelBackends {
    pub classifier: Option<Arc<dyn Classifier>>,
    pub generator: Option<Arc<dyn Generator>>,
}

impl ModelBackends {
    pub fn classifier(&self) -> Result<&dyn Classifier> {
        match &self.classifier {
            Some(c) => Ok(c.as_ref()),
            None => bail!("no classifier configured (set `classifier.base_url`, {ENV_CLASSIFIER_URL} or a `mock` oracle)"),
        }
    }
}
