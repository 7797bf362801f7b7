//! Run configuration.
//!
//! A TOML file and command-line flags both produce a [`ConfigLayer`] whose
//! fields are all optional. Layers are stacked (later wins) and then resolved
//! against built-in defaults into a validated [`RunConfig`].
//!
//! ```toml
//! model_id = "gpt-4"
//! strategy = "fdsp"
//! analyzer = "bandit"
//! eval_analyzers = ["codeql"]
//! workers = 4
//! output_dir = "runs"
//!
//! [dataset]
//! path = "data/PythonSecurityEval.jsonl"
//!
//! [strategy_cfg]
//! solutions_j = 3
//! iterations_k = 2
//!
//! [provider]
//! endpoint_url = "https://api.openai.com/v1"
//! backend = "record"
//! cassette = "cassettes/gpt4.jsonl"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::dataset::{DatasetFormat, DatasetSpec};
use crate::llm::{BackendKind, ProviderConfig, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::strategies::{BranchSeedMode, ModelParams, StrategyConfig, StrategyId};
use crate::types::AnalyzerId;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Which syntax checker gates generated code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckerKind {
    /// `python3` when it is on `PATH`, otherwise none.
    #[default]
    Auto,
    Python,
    None,
}

impl std::str::FromStr for CheckerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(CheckerKind::Auto),
            "python" => Ok(CheckerKind::Python),
            "none" => Ok(CheckerKind::None),
            other => Err(format!("unknown checker {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetLayer {
    pub path: Option<PathBuf>,
    pub format: Option<DatasetFormat>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyLayer {
    pub solutions_j: Option<u32>,
    pub iterations_k: Option<u32>,
    pub max_compile_fix_rounds: Option<u32>,
    pub branch_seed_mode: Option<BranchSeedMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderLayer {
    pub endpoint_url: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_seconds: Option<u64>,
    pub max_retries: Option<u32>,
    pub backend: Option<BackendKind>,
    pub cassette: Option<PathBuf>,
    pub requests_per_minute: Option<u32>,
    pub backoff_base_ms: Option<u64>,
}

/// One source of settings; every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub dataset: DatasetLayer,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub system_prompt: Option<String>,
    pub strategy: Option<StrategyId>,
    pub strategy_cfg: StrategyLayer,
    pub analyzer: Option<AnalyzerId>,
    pub eval_analyzers: Option<BTreeSet<AnalyzerId>>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub resume: Option<bool>,
    pub syntax_checker: Option<CheckerKind>,
    pub templates_dir: Option<PathBuf>,
    pub provider: ProviderLayer,
}

macro_rules! overlay {
    ($base:expr, $top:expr; $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ConfigLayer {
    /// Parses a TOML config. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut layer = Self::parse(&text).map_err(|reason| ConfigError::Parse {
            path: path.display().to_string(),
            reason,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        rebase(base, &mut layer.dataset.path);
        rebase(base, &mut layer.output_dir);
        rebase(base, &mut layer.templates_dir);
        rebase(base, &mut layer.provider.cassette);
        Ok(layer)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Stacks `top` over `self`: fields set in `top` win.
    pub fn overlay(mut self, top: ConfigLayer) -> Self {
        overlay!(self.dataset, top.dataset; path, format, name);
        overlay!(self, top; model_id, temperature, max_tokens, system_prompt, strategy, analyzer,
            eval_analyzers, workers, output_dir, resume, syntax_checker, templates_dir);
        overlay!(self.strategy_cfg, top.strategy_cfg;
            solutions_j, iterations_k, max_compile_fix_rounds, branch_seed_mode);
        overlay!(self.provider, top.provider; endpoint_url, api_key_env, timeout_seconds,
            max_retries, backend, cassette, requests_per_minute, backoff_base_ms);
        self
    }

    /// Applies defaults and validates.
    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let invalid = |m: &str| ConfigError::Invalid(m.to_string());
        let dataset_path = self
            .dataset
            .path
            .ok_or_else(|| invalid("no dataset given (--dataset or [dataset] path)"))?;
        let model_id = self
            .model_id
            .ok_or_else(|| invalid("no model given (--model or model_id)"))?;
        let sd = StrategyConfig::default();
        let pd = ProviderConfig::default();
        let cfg = RunConfig {
            dataset: DatasetSpec {
                path: dataset_path,
                format: self.dataset.format,
                name: self.dataset.name,
            },
            params: ModelParams {
                model_id,
                system: self.system_prompt.unwrap_or_default(),
                temperature: self.temperature.unwrap_or(DEFAULT_TEMPERATURE),
                max_tokens: self.max_tokens.unwrap_or(DEFAULT_MAX_TOKENS),
            },
            provider: ProviderConfig {
                endpoint_url: self.provider.endpoint_url.or(pd.endpoint_url),
                api_key_env: self.provider.api_key_env.unwrap_or(pd.api_key_env),
                timeout_seconds: self.provider.timeout_seconds.unwrap_or(pd.timeout_seconds),
                max_retries: self.provider.max_retries.unwrap_or(pd.max_retries),
                backend: self.provider.backend.unwrap_or(pd.backend),
                cassette: self.provider.cassette.or(pd.cassette),
                requests_per_minute: self
                    .provider
                    .requests_per_minute
                    .unwrap_or(pd.requests_per_minute),
                backoff_base_ms: self.provider.backoff_base_ms.unwrap_or(pd.backoff_base_ms),
            },
            strategy: self.strategy.unwrap_or(StrategyId::Fdsp),
            strategy_cfg: StrategyConfig {
                solutions_j: self.strategy_cfg.solutions_j.unwrap_or(sd.solutions_j),
                iterations_k: self.strategy_cfg.iterations_k.unwrap_or(sd.iterations_k),
                max_compile_fix_rounds: self
                    .strategy_cfg
                    .max_compile_fix_rounds
                    .unwrap_or(sd.max_compile_fix_rounds),
                branch_seed_mode: self
                    .strategy_cfg
                    .branch_seed_mode
                    .unwrap_or(sd.branch_seed_mode),
            },
            analyzer: self.analyzer.unwrap_or(AnalyzerId::Bandit),
            eval_analyzers: self.eval_analyzers.unwrap_or_default(),
            workers: self.workers.unwrap_or(4),
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("runs")),
            resume: self.resume.unwrap_or(true),
            syntax_checker: self.syntax_checker.unwrap_or_default(),
            templates_dir: self.templates_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fully resolved settings for one (dataset, model, strategy) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub params: ModelParams,
    pub provider: ProviderConfig,
    pub strategy: StrategyId,
    pub strategy_cfg: StrategyConfig,
    pub analyzer: AnalyzerId,
    pub eval_analyzers: BTreeSet<AnalyzerId>,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub resume: bool,
    pub syntax_checker: CheckerKind,
    pub templates_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.analyzer == AnalyzerId::CodeQL {
            return Err(ConfigError::Invalid(
                "codeql can only evaluate; refinement needs bandit or rulescan".into(),
            ));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.params.model_id.trim().is_empty() {
            return Err(ConfigError::Invalid("model id is empty".into()));
        }
        self.strategy_cfg
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.provider
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 over the settings that can change a run's results:
    /// dataset name, model parameters, strategy and its bounds, analyzers,
    /// and the prompt templates. Transport settings (backend, cassette,
    /// endpoint), worker count and paths are excluded, so recording and
    /// replaying the same run yields the same digest.
    pub fn digest(&self, template_digest: &str) -> String {
        let projection = serde_json::json!({
            "dataset": self.dataset.name(),
            "model_id": self.params.model_id,
            "system": self.params.system,
            "temperature": format!("{:.1}", self.params.temperature),
            "max_tokens": self.params.max_tokens,
            "strategy": self.strategy,
            "strategy_cfg": self.strategy_cfg,
            "analyzer": self.analyzer,
            "eval_analyzers": self.eval_analyzers,
            "templates": template_digest,
        });
        hex::encode(Sha256::digest(projection.to_string().as_bytes()))
    }

    /// Digest for generation-only output: the strategy plays no part.
    pub fn generation_digest(&self, template_digest: &str) -> String {
        let projection = serde_json::json!({
            "dataset": self.dataset.name(),
            "model_id": self.params.model_id,
            "system": self.params.system,
            "temperature": format!("{:.1}", self.params.temperature),
            "max_tokens": self.params.max_tokens,
            "max_compile_fix_rounds": self.strategy_cfg.max_compile_fix_rounds,
            "analyzer": self.analyzer,
            "templates": template_digest,
        });
        hex::encode(Sha256::digest(projection.to_string().as_bytes()))
    }

    /// Output file of this run: `{model}__{strategy}.jsonl`.
    pub fn output_file(&self) -> PathBuf {
        self.output_dir.join(format!(
            "{}__{}.jsonl",
            sanitize_model(&self.params.model_id),
            self.strategy.key()
        ))
    }

    /// Tasks whose generation failed, retried on the next resume.
    pub fn failures_file(&self) -> PathBuf {
        self.output_dir.join(format!(
            "{}__{}.failures.jsonl",
            sanitize_model(&self.params.model_id),
            self.strategy.key()
        ))
    }

    /// Output of the generation-only mode.
    pub fn generated_file(&self) -> PathBuf {
        self.output_dir.join(format!(
            "{}__generated.jsonl",
            sanitize_model(&self.params.model_id)
        ))
    }
}

/// Model ids may contain `/` or `:`; file names may not.
pub fn sanitize_model(model_id: &str) -> String {
    model_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ConfigLayer {
        ConfigLayer::parse("model_id = \"m\"\n[dataset]\npath = \"d.jsonl\"\n[provider]\nbackend = \"scripted\"\ncassette = \"s.json\"\n").unwrap()
    }

    #[test]
    fn defaults_fill_the_gaps() {
        let cfg = minimal().resolve().unwrap();
        assert_eq!(cfg.strategy, StrategyId::Fdsp);
        assert_eq!(cfg.strategy_cfg, StrategyConfig::default());
        assert_eq!(cfg.workers, 4);
        assert!(cfg.resume);
        assert_eq!(cfg.analyzer, AnalyzerId::Bandit);
        assert_eq!(cfg.params.temperature, DEFAULT_TEMPERATURE);
    }

    #[test]
    fn later_layers_win() {
        let file = ConfigLayer::parse(
            "model_id = \"file-model\"\nworkers = 2\n[strategy_cfg]\nsolutions_j = 5\niterations_k = 4\n",
        )
        .unwrap();
        let flags = ConfigLayer {
            model_id: Some("flag-model".into()),
            strategy_cfg: StrategyLayer {
                iterations_k: Some(1),
                ..Default::default()
            },
            ..Default::default()
        };
        let cfg = minimal().overlay(file).overlay(flags).resolve().unwrap();
        assert_eq!(cfg.params.model_id, "flag-model");
        assert_eq!(cfg.workers, 2);
        assert_eq!(
            (cfg.strategy_cfg.solutions_j, cfg.strategy_cfg.iterations_k),
            (5, 1)
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigLayer::parse("modle_id = \"m\"").is_err());
    }

    #[test]
    fn guards() {
        let mut l = minimal();
        l.analyzer = Some(AnalyzerId::CodeQL);
        assert!(l.resolve().is_err());
        let mut l = minimal();
        l.workers = Some(0);
        assert!(l.resolve().is_err());
        let mut l = minimal();
        l.provider.cassette = None;
        l.provider.backend = Some(BackendKind::Replay);
        assert!(l.resolve().is_err());
        let mut l = minimal();
        l.strategy_cfg.solutions_j = Some(0);
        assert!(l.resolve().is_err());
        assert!(ConfigLayer::default().resolve().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[dataset]\npath = \"data/p.jsonl\"\n").unwrap();
        let layer = ConfigLayer::load(&path).unwrap();
        assert_eq!(layer.dataset.path.unwrap(), dir.path().join("data/p.jsonl"));
    }

    #[test]
    fn digest_ignores_transport_and_tracks_results() {
        let a = minimal().resolve().unwrap();
        let mut b = a.clone();
        b.provider.backend = BackendKind::Replay;
        b.workers = 8;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.digest("t"), b.digest("t"));
        b.strategy_cfg.iterations_k = 3;
        assert_ne!(a.digest("t"), b.digest("t"));
        assert_ne!(a.digest("t"), a.digest("u"));
    }

    #[test]
    fn output_names() {
        let mut cfg = minimal().resolve().unwrap();
        cfg.params.model_id = "org/gpt-4:0613".into();
        assert!(cfg.output_file().ends_with("org_gpt-4_0613__fdsp.jsonl"));
        assert!(cfg
            .generated_file()
            .ends_with("org_gpt-4_0613__generated.jsonl"));
    }
}
