use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use cbflow::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const KNOWN_CHECKS: &[&str] = &["barriers", "claim", "cusp", "chen", "plane", "bol", "width", "area"];

/// Whole-experiment configuration, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub out: Option<PathBuf>,
    pub checks: Vec<String>,
    pub experiment: ScenarioConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "cb".into(),
            out: None,
            checks: KNOWN_CHECKS.iter().map(|s| s.to_string()).collect(),
            experiment: ScenarioConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        cfg.validate_checks()?;
        Ok(cfg)
    }

    pub fn validate_checks(&self) -> anyhow::Result<()> {
        for c in &self.checks {
            if !KNOWN_CHECKS.contains(&c.as_str()) {
                bail!(UsageError(format!("unknown check {c:?}; known: {}", KNOWN_CHECKS.join(", "))));
            }
        }
        Ok(())
    }
}

/// Returns `forced` (created if needed) or a fresh `run-<secs>-<scenario>`
/// directory below the working directory.
pub fn output_dir(forced: Option<&Path>, scenario: &str) -> anyhow::Result<PathBuf> {
    if let Some(dir) = forced {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        return Ok(dir.to_path_buf());
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let base = format!("run-{secs}-{scenario}");
    for k in 0.. {
        let name = if k == 0 { base.clone() } else { format!("{base}-{k}") };
        let dir = PathBuf::from(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}
