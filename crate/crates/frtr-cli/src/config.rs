//! Application configuration: a TOML file with environment-variable
//! overrides. Everything is defaulted except remote credentials, which are
//! only ever read from the environment (never flags, never the file):
//!
//! - `FRTR_EMBED_ENDPOINT` / `FRTR_EMBED_DIM` / `FRTR_EMBED_API_KEY`
//! - `FRTR_GEN_ENDPOINT` / `FRTR_GEN_API_KEY`
//!
//! Setting an endpoint variable switches the corresponding component to its
//! remote client.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use frtr_core::decompose::DecomposeConfig;
use frtr_core::embed::{EmbedderSpec, RemoteConfig};
use frtr_core::index::RetrievalConfig;
use frtr_core::reason::{GenRemoteConfig, GeneratorSpec};
use frtr_core::xlsx::IngestOptions;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    /// Default index directory for commands that accept one.
    pub index_dir: Option<PathBuf>,
    /// Log filter when RUST_LOG is unset (error|warn|info|debug|trace).
    pub log: String,
    pub embedder: EmbedderSpec,
    pub generator: GeneratorSpec,
    pub retrieval: RetrievalConfig,
    pub decompose: DecomposeConfig,
    pub ingest: IngestOptions,
    /// Concurrent evaluation cases.
    pub eval_parallelism: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            index_dir: None,
            log: "info".into(),
            embedder: EmbedderSpec::default(),
            generator: GeneratorSpec::default(),
            retrieval: RetrievalConfig::default(),
            decompose: DecomposeConfig::default(),
            ingest: IngestOptions::default(),
            eval_parallelism: 1,
        }
    }
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<AppConfig> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => AppConfig::default(),
        };
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_env(&mut self) {
        if let Ok(endpoint) = std::env::var("FRTR_EMBED_ENDPOINT") {
            if !endpoint.is_empty() {
                let dim = std::env::var("FRTR_EMBED_DIM")
                    .ok()
                    .and_then(|d| d.parse().ok())
                    .unwrap_or_else(|| self.embedder.dim());
                self.embedder = EmbedderSpec::Remote(RemoteConfig {
                    endpoint,
                    dim,
                    ..RemoteConfig::default()
                });
            }
        }
        if let Ok(endpoint) = std::env::var("FRTR_GEN_ENDPOINT") {
            if !endpoint.is_empty() {
                self.generator = GeneratorSpec::Remote(GenRemoteConfig {
                    endpoint,
                    ..GenRemoteConfig::default()
                });
            }
        }
    }

    fn validate(&self) -> anyhow::Result<()> {
        self.retrieval
            .validate()
            .map_err(|e| anyhow::anyhow!("retrieval config: {e}"))?;
        self.decompose
            .validate()
            .map_err(|e| anyhow::anyhow!("decompose config: {e}"))?;
        if self.ingest.max_cells == 0 {
            anyhow::bail!("ingest.max_cells must be > 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = AppConfig::default();
        assert_eq!(cfg.retrieval.k_rrf, 60);
        assert_eq!(cfg.decompose.k_target, 100);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let text = toml::to_string_pretty(&AppConfig::default()).unwrap();
        let back: AppConfig = toml::from_str(&text).unwrap();
        back.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: AppConfig = toml::from_str(
            r#"
            log = "debug"
            [retrieval]
            k_final = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.retrieval.k_final, 5);
        assert_eq!(cfg.retrieval.k_vector, 20);
        assert_eq!(cfg.log, "debug");
    }
}
