//! Run configuration: a flat key/value file with `key = value` lines,
//! overridable per-flag (flags > config file > defaults).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use maestro::backend::BackendConfig;
use maestro::protocol::DomLevel;
use maestro::subagents::AgentConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    Echo,
    Scripted,
    OpenAi,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrchestratorKind {
    Scripted,
    Chat,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dom_level: DomLevel,
    pub backend: BackendKind,
    pub backend_config: BackendConfig,
    pub transcript: Option<PathBuf>,
    pub orchestrator: OrchestratorKind,
    pub plan_library: Option<PathBuf>,
    pub template_dir: Option<PathBuf>,
    pub concurrency_limit: usize,
    pub strict_dataflow: bool,
    pub price_table_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub corpus: Option<PathBuf>,
    pub agent: AgentConfig,
    /// Raw key/value view, echoed into output file headers.
    pub echo: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            dom_level: DomLevel::High,
            backend: BackendKind::Echo,
            backend_config: BackendConfig::default(),
            transcript: None,
            orchestrator: OrchestratorKind::Scripted,
            plan_library: None,
            template_dir: None,
            concurrency_limit: 128,
            strict_dataflow: false,
            price_table_path: None,
            seed: 0,
            output_dir: PathBuf::from("out"),
            corpus: None,
            agent: AgentConfig::default(),
            echo: BTreeMap::new(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {} is not `key = value`: {raw:?}", lineno + 1);
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        let Some(path) = path else {
            return Ok(config);
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let kv = parse_kv(&text)?;
        for (key, value) in &kv {
            config.apply(key, value)?;
        }
        config.echo = kv;
        Ok(config)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dom_level" => {
                self.dom_level = DomLevel::parse(value)
                    .with_context(|| format!("unknown dom_level {value:?}"))?;
            }
            "backend" => {
                self.backend = match value.to_ascii_lowercase().as_str() {
                    "echo" => BackendKind::Echo,
                    "scripted" => BackendKind::Scripted,
                    "openai" => BackendKind::OpenAi,
                    other => bail!("unknown backend {other:?} (echo|scripted|openai)"),
                };
            }
            "endpoint" => self.backend_config.endpoint = value.to_string(),
            "model" => self.backend_config.model = value.to_string(),
            "api_key_env" => self.backend_config.api_key_env = Some(value.to_string()),
            "timeout_secs" => self.backend_config.timeout_secs = value.parse()?,
            "retries" => self.backend_config.retries = value.parse()?,
            "transcript" => self.transcript = Some(PathBuf::from(value)),
            "orchestrator" => {
                self.orchestrator = match value.to_ascii_lowercase().as_str() {
                    "scripted" => OrchestratorKind::Scripted,
                    "chat" => OrchestratorKind::Chat,
                    other => bail!("unknown orchestrator {other:?} (scripted|chat)"),
                };
            }
            "plan_library" => self.plan_library = Some(PathBuf::from(value)),
            "template_dir" => self.template_dir = Some(PathBuf::from(value)),
            "concurrency_limit" => self.concurrency_limit = value.parse()?,
            "strict_dataflow" => self.strict_dataflow = parse_bool(value)?,
            "price_table_path" => self.price_table_path = Some(PathBuf::from(value)),
            "seed" => self.seed = value.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "temperature" => self.agent.temperature = value.parse()?,
            "max_tokens" => self.agent.max_tokens = value.parse()?,
            "sc_samples" => self.agent.sc_samples = value.parse()?,
            "debate_rounds" => self.agent.debate_rounds = value.parse()?,
            "reflexion_rounds" => self.agent.reflexion_rounds = value.parse()?,
            "search_rounds" => self.agent.search_rounds = value.parse()?,
            "search_top_k" => self.agent.search_top_k = value.parse()?,
            other => bail!("unknown config key {other:?}"),
        }
        self.echo.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.concurrency_limit < 1 {
            bail!("concurrency_limit must be >= 1");
        }
        self.agent.validate().map_err(|e| anyhow::anyhow!(e))?;
        if self.backend == BackendKind::Scripted && self.transcript.is_none() {
            bail!("scripted backend requires `transcript = <path>`");
        }
        if self.orchestrator == OrchestratorKind::Scripted && self.plan_library.is_none() {
            bail!("scripted orchestrator requires `plan_library = <path>`");
        }
        for path in [&self.transcript, &self.plan_library, &self.template_dir, &self.price_table_path, &self.corpus]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                bail!("configured path does not exist: {}", path.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_kv_with_comments() {
        let kv = parse_kv("a = 1\n# comment\nb = two words # trailing\n\n").unwrap();
        assert_eq!(kv["a"], "1");
        assert_eq!(kv["b"], "two words");
        assert!(parse_kv("not a pair").is_err());
    }

    #[test]
    fn apply_overrides_defaults() {
        let mut config = RunConfig::default();
        config.apply("dom_level", "low").unwrap();
        config.apply("concurrency_limit", "4").unwrap();
        config.apply("strict_dataflow", "true").unwrap();
        assert_eq!(config.dom_level, DomLevel::Low);
        assert_eq!(config.concurrency_limit, 4);
        assert!(config.strict_dataflow);
        assert!(config.apply("mystery_key", "x").is_err());
    }
}
