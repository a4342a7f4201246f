use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use foampilot_core::agent::SessionPolicy;
use foampilot_core::hpc::DEFAULT_CELLS_PER_CORE;
use foampilot_core::index::DEFAULT_RETRIEVAL_K;
use foampilot_core::llm::ProviderConfig;
use foampilot_core::tools::ApprovalMode;
use serde::{Deserialize, Serialize};

pub const CONFIG_FILE: &str = "foampilot.json";
pub const DEFAULT_INDEX: &str = "foampilot-index.fpix";

pub const ENV_APPROVAL: &str = "FOAMPILOT_APPROVAL";
pub const ENV_INDEX: &str = "FOAMPILOT_INDEX";
pub const ENV_RETRIEVAL_K: &str = "FOAMPILOT_RETRIEVAL_K";
pub const ENV_CELLS_PER_CORE: &str = "FOAMPILOT_CELLS_PER_CORE";
pub const ENV_BASHRC: &str = "FOAMPILOT_BASHRC";
pub const ENV_MAX_LOOPS: &str = "FOAMPILOT_MAX_LOOPS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub provider: ProviderConfig,
    pub policy: SessionPolicy,
    pub retrieval_k: usize,
    pub cells_per_core: u64,
    pub index_path: PathBuf,
    /// Regexes auto-approved in allowlist mode.
    pub allowlist_patterns: Vec<String>,
    pub solver_name: String,
    pub default_partition_override: Option<String>,
    pub bashrc_path: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            provider: ProviderConfig::default(),
            policy: SessionPolicy::default(),
            retrieval_k: DEFAULT_RETRIEVAL_K,
            cells_per_core: DEFAULT_CELLS_PER_CORE,
            index_path: PathBuf::from(DEFAULT_INDEX),
            allowlist_patterns: Vec::new(),
            solver_name: "fireFoam".to_string(),
            default_partition_override: None,
            bashrc_path: None,
        }
    }
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct FlagOverrides {
    pub approval: Option<ApprovalMode>,
    pub index_path: Option<PathBuf>,
    pub bashrc_path: Option<PathBuf>,
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> anyhow::Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{name} has an invalid value: {value:?}"))
}

impl AppConfig {
    /// The config file to read: the explicit one, else `foampilot.json` in
    /// `cwd`, else in `home`.
    pub fn locate(explicit: Option<&Path>, cwd: &Path, home: Option<&Path>) -> anyhow::Result<Option<PathBuf>> {
        if let Some(path) = explicit {
            if !path.is_file() {
                bail!("config file not found: {}", path.display());
            }
            return Ok(Some(path.to_path_buf()));
        }
        let candidates = std::iter::once(cwd.join(CONFIG_FILE)).chain(home.map(|h| h.join(CONFIG_FILE)));
        Ok(candidates.into_iter().find(|p| p.is_file()))
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply_env<F>(&mut self, lookup: F) -> anyhow::Result<()>
    where
        F: Fn(&str) -> Option<String>,
    {
        self.provider.apply_env(&lookup)?;
        if let Some(v) = lookup(ENV_APPROVAL) {
            self.policy.approval_mode = v.parse().map_err(|e: String| anyhow::anyhow!("{ENV_APPROVAL}: {e}"))?;
        }
        if let Some(v) = lookup(ENV_INDEX) {
            self.index_path = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_RETRIEVAL_K) {
            self.retrieval_k = parse_env(ENV_RETRIEVAL_K, &v)?;
        }
        if let Some(v) = lookup(ENV_CELLS_PER_CORE) {
            self.cells_per_core = parse_env(ENV_CELLS_PER_CORE, &v)?;
        }
        if let Some(v) = lookup(ENV_BASHRC) {
            self.bashrc_path = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup(ENV_MAX_LOOPS) {
            self.policy.max_loops = parse_env(ENV_MAX_LOOPS, &v)?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, flags: &FlagOverrides) {
        if let Some(mode) = flags.approval {
            self.policy.approval_mode = mode;
        }
        if let Some(path) = &flags.index_path {
            self.index_path = path.clone();
        }
        if let Some(path) = &flags.bashrc_path {
            self.bashrc_path = Some(path.clone());
        }
    }

    /// File, then environment, then flags; later layers win.
    pub fn load<F>(
        explicit: Option<&Path>,
        cwd: &Path,
        home: Option<&Path>,
        env: F,
        flags: &FlagOverrides,
    ) -> anyhow::Result<Self>
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut config = match Self::locate(explicit, cwd, home)? {
            Some(path) => Self::from_file(&path)?,
            None => Self::default(),
        };
        config.apply_env(env)?;
        config.apply_flags(flags);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.retrieval_k == 0 {
            bail!("retrieval_k must be at least 1");
        }
        if self.cells_per_core == 0 {
            bail!("cells_per_core must be at least 1");
        }
        self.session_policy().validate()?;
        Ok(())
    }

    /// Session policy with the configured allowlist merged in.
    pub fn session_policy(&self) -> SessionPolicy {
        let mut policy = self.policy.clone();
        policy.allowlist.extend(self.allowlist_patterns.iter().cloned());
        policy
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults_without_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = AppConfig::load(None, dir.path(), None, env(&[]), &FlagOverrides::default()).unwrap();
        assert_eq!(cfg, AppConfig::default());
        assert_eq!(cfg.retrieval_k, 4);
        assert_eq!(cfg.cells_per_core, 50_000);
    }

    #[test]
    fn precedence_flag_over_env_over_file() {
        let cwd = tempfile::tempdir().unwrap();
        let home = tempfile::tempdir().unwrap();
        std::fs::write(
            home.path().join(CONFIG_FILE),
            r#"{"retrieval_k": 9, "cells_per_core": 10, "policy": {"approval_mode": "allowlist"}}"#,
        )
        .unwrap();
        let none = FlagOverrides::default();

        let cfg = AppConfig::load(None, cwd.path(), Some(home.path()), env(&[]), &none).unwrap();
        assert_eq!((cfg.retrieval_k, cfg.cells_per_core), (9, 10));
        assert_eq!(cfg.policy.approval_mode, ApprovalMode::Allowlist);

        std::fs::write(cwd.path().join(CONFIG_FILE), r#"{"retrieval_k": 5}"#).unwrap();
        let cfg = AppConfig::load(None, cwd.path(), Some(home.path()), env(&[]), &none).unwrap();
        assert_eq!((cfg.retrieval_k, cfg.cells_per_core), (5, 50_000));

        let e = env(&[(ENV_RETRIEVAL_K, "7"), (ENV_APPROVAL, "auto"), (ENV_INDEX, "/env.fpix")]);
        let cfg = AppConfig::load(None, cwd.path(), Some(home.path()), &e, &none).unwrap();
        assert_eq!(cfg.retrieval_k, 7);
        assert_eq!(cfg.policy.approval_mode, ApprovalMode::AutoApprove);

        let flags = FlagOverrides {
            approval: Some(ApprovalMode::Interactive),
            index_path: Some("/flag.fpix".into()),
            bashrc_path: None,
        };
        let cfg = AppConfig::load(None, cwd.path(), Some(home.path()), &e, &flags).unwrap();
        assert_eq!(cfg.policy.approval_mode, ApprovalMode::Interactive);
        assert_eq!(cfg.index_path, PathBuf::from("/flag.fpix"));
    }

    #[test]
    fn bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let none = FlagOverrides::default();
        assert!(AppConfig::load(Some(&dir.path().join("nope.json")), dir.path(), None, env(&[]), &none).is_err());
        assert!(AppConfig::load(None, dir.path(), None, env(&[(ENV_RETRIEVAL_K, "x")]), &none).is_err());
        assert!(AppConfig::load(None, dir.path(), None, env(&[(ENV_APPROVAL, "maybe")]), &none).is_err());
        std::fs::write(dir.path().join(CONFIG_FILE), "{not json").unwrap();
        assert!(AppConfig::load(None, dir.path(), None, env(&[]), &none).is_err());
    }

    #[test]
    fn allowlist_merges_into_policy() {
        let cfg = AppConfig {
            allowlist_patterns: vec!["ls( .*)?".into()],
            ..AppConfig::default()
        };
        assert_eq!(cfg.session_policy().allowlist, vec!["ls( .*)?".to_string()]);
    }
}
