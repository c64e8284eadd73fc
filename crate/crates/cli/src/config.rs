//! Endpoint settings, merged from defaults, config file, environment and
//! flags.
//!
//! Precedence, weakest first: built-in defaults, then the `[llm]` table of
//! the TOML config file, then `NLTEST_LLM_ENDPOINT` (endpoint only), then
//! command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use nltest_core::llm::LlmConfig;
use serde::Deserialize;

/// Environment variable overriding the endpoint URL.
pub const ENDPOINT_VAR: &str = "NLTEST_LLM_ENDPOINT";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub timeout_ms: Option<u64>,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
}

/// Merges all sources into the final endpoint settings.
pub fn resolve_llm(
    file: Option<&Path>,
    endpoint_flag: Option<&str>,
    model_flag: Option<&str>,
    timeout_flag: Option<u64>,
) -> Result<LlmConfig> {
    let mut cfg = LlmConfig::default();
    if let Some(path) = file {
        let section = load_file(path)?.llm;
        if let Some(e) = section.endpoint {
            cfg.endpoint = e;
        }
        if let Some(m) = section.model {
            cfg.model = m;
        }
        if let Some(t) = section.timeout_ms {
            cfg.timeout_ms = t;
        }
    }
    if let Ok(e) = std::env::var(ENDPOINT_VAR) {
        if !e.trim().is_empty() {
            cfg.endpoint = e;
        }
    }
    if let Some(e) = endpoint_flag {
        cfg.endpoint = e.to_string();
    }
    if let Some(m) = model_flag {
        cfg.model = m.to_string();
    }
    if let Some(t) = timeout_flag {
        cfg.timeout_ms = t;
    }
    Ok(cfg)
}
