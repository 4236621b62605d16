//! Experiment configuration, read from TOML. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tripcraft_core::ingest::SplitName;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    /// Annotated split used for planner shots, LLM-feedback shots and FAFT.
    #[serde(default)]
    pub train: Option<DataConfig>,
    #[serde(default)]
    pub scrub: ScrubConfig,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub refine: RefineConfig,
    #[serde(default)]
    pub faft: FaftConfig,
    #[serde(default)]
    pub backends: Backends,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_jobs() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "default_split")]
    pub split: SplitName,
    pub queries: PathBuf,
    pub reference: PathBuf,
    #[serde(default)]
    pub plans: Option<PathBuf>,
}

fn default_split() -> SplitName {
    SplitName::Validation
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    #[default]
    Rules,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Columns {
    /// `"all"` or `"none"`.
    Keyword(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScrubConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub extractor: Extractor,
    /// Extra columns to drop: `"all"` (the default), `"none"` or a list of names.
    #[serde(default)]
    pub columns: Option<Columns>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Direct,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default)]
    pub shots: usize,
    #[serde(default)]
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Oracle,
    Random,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    #[serde(default)]
    pub variant: Variant,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
}

fn default_iters() -> usize {
    4
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            variant: Variant::Oracle,
            max_iters: default_iters(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Sft,
    #[default]
    Faft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaftConfig {
    #[serde(default)]
    pub format: CorpusKind,
    #[serde(default)]
    pub samples_per_query: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub max_total: Option<usize>,
    #[serde(default)]
    pub shuffle_seed: u64,
}

fn default_temperature() -> f64 {
    0.7
}

impl Default for FaftConfig {
    fn default() -> Self {
        FaftConfig {
            format: CorpusKind::Faft,
            samples_per_query: 0,
            temperature: default_temperature(),
            max_total: None,
            shuffle_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Backends {
    #[serde(default)]
    pub planner: Option<BackendConfig>,
    #[serde(default)]
    pub feedback: Option<BackendConfig>,
    #[serde(default)]
    pub refiner: Option<BackendConfig>,
    #[serde(default)]
    pub scrubber: Option<BackendConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// JSONL lines of `{"stream": ..., "reply": ...}`; an empty stream feeds
    /// every prompt without a queue of its own.
    Scripted { script: PathBuf },
    Http {
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        max_attempts: Option<u32>,
        #[serde(default)]
        backoff_ms: Option<u64>,
        #[serde(default)]
        max_in_flight: Option<usize>,
        #[serde(default)]
        min_interval_ms: Option<u64>,
        #[serde(default)]
        timeout_secs: Option<u64>,
        #[serde(default)]
        temperature: Option<f64>,
        #[serde(default)]
        max_tokens: Option<u32>,
    },
    /// A transcript recorded with `--record`.
    Replay { transcript: PathBuf },
}

impl ExperimentConfig {
    /// Reads and validates a config. Relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in std::iter::once(&mut self.data).chain(self.train.as_mut()) {
            fix(&mut d.queries);
            fix(&mut d.reference);
            if let Some(p) = d.plans.as_mut() {
                fix(p);
            }
        }
        fix(&mut self.output_dir);
        for b in [
            &mut self.backends.planner,
            &mut self.backends.feedback,
            &mut self.backends.refiner,
            &mut self.backends.scrubber,
        ]
        .into_iter()
        .flatten()
        {
            match b {
                BackendConfig::Scripted { script } => fix(script),
                BackendConfig::Replay { transcript } => fix(transcript),
                BackendConfig::Http { .. } => {}
            }
        }
    }

    /// Checks that need no network or data access.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.plan.shots > tripcraft_core::gateway::MAX_PLANNER_SHOTS {
            return bad(format!(
                "plan.shots is {}, at most {} allowed",
                self.plan.shots,
                tripcraft_core::gateway::MAX_PLANNER_SHOTS
            ));
        }
        if self.plan.shots > 0 && self.train.is_none() {
            return bad("plan.shots > 0 needs a [train] split".into());
        }
        if self.refine.variant == Variant::Llm {
            if self.train.is_none() {
                return bad("refine.variant = \"llm\" needs a [train] split for shots".into());
            }
            if self.backends.feedback.is_none() {
                return bad("refine.variant = \"llm\" needs [backends.feedback]".into());
            }
        }
        if self.scrub.extractor == Extractor::Llm && self.backends.scrubber.is_none() {
            return bad("scrub.extractor = \"llm\" needs [backends.scrubber]".into());
        }
        if let Some(Columns::Keyword(k)) = &self.scrub.columns {
            if k != "all" && k != "none" {
                return bad(format!("scrub.columns must be \"all\", \"none\" or a list, got {k:?}"));
            }
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if let Some(train) = &self.train {
            if train.plans.is_none() {
                return bad("[train] needs plans".into());
            }
        }
        for (role, b) in [
            ("planner", &self.backends.planner),
            ("feedback", &self.backends.feedback),
            ("refiner", &self.backends.refiner),
            ("scrubber", &self.backends.scrubber),
        ] {
            if let Some(BackendConfig::Http { endpoint, .. }) = b {
                if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
                    return bad(format!("backends.{role}.endpoint is not an http(s) URL"));
                }
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    /// Parallelism does not change results, so `jobs` is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.jobs = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}
