//! Plain-text `key = value` run configuration.
//!
//! Unknown keys are rejected so typos fail loudly, values stay strings
//! until a stage asks for them with a type, and every referenced input
//! file must exist at load time. The resolved configuration is hashed into
//! run manifests so any output can be replayed exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::CliError;
use crate::Result;

/// Every key the tool understands. Path-valued keys get existence checks.
const KNOWN_KEYS: &[&str] = &[
    // input artifacts
    "programs",
    "students",
    "priorities",
    "rols",
    "xmat",
    "cutoffs",
    "partitions",
    "relations",
    "estimates",
    "draws",
    // outputs
    "out_dir",
    // shared parameters
    "seed",
    "threads",
    "alpha",
    "tau",
    "tau_grid",
    "method",
    "label",
    "mode",
    "n_draws",
    "tiebreak",
    // gibbs
    "gibbs_iter",
    "gibbs_burn",
    "gibbs_thin",
    "gibbs_chains",
    "normalized_type",
    // monte carlo
    "dgps",
    "mc_samples",
    "mc_students",
    "mc_cutoff_draws",
    "mc_tt_cutoff_samples",
    "mc_tt_cutoff_draws",
    // counterfactual
    "policy",
    "group_by",
    "pref_draws",
    "lottery_draws",
];

const PATH_KEYS: &[&str] = &[
    "programs",
    "students",
    "priorities",
    "rols",
    "xmat",
    "cutoffs",
    "partitions",
    "relations",
    "draws",
];

/// Resolved configuration: ordered key-value pairs.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::validation(format!(
                    "config line {}: expected key = value, got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::validation(format!(
                    "config line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            if values
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::validation(format!(
                    "config line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(RunConfig { values })
    }

    /// Loads a config file and verifies that all referenced inputs exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::dependency(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::parse(&text)?;
        // Relative paths resolve against the config file's directory.
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for key in PATH_KEYS {
            if let Some(value) = cfg.values.get_mut(*key) {
                let p = base.join(value.as_str());
                *value = p.to_string_lossy().into_owned();
            }
        }
        if let Some(value) = cfg.values.get_mut("out_dir") {
            *value = base.join(value.as_str()).to_string_lossy().into_owned();
        }
        if let Some(value) = cfg.values.get_mut("estimates") {
            *value = value
                .split(',')
                .map(|part| base.join(part.trim()).to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join(",");
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> Result<()> {
        for key in PATH_KEYS {
            if let Some(value) = self.values.get(*key) {
                if !Path::new(value).exists() {
                    return Err(CliError::dependency(format!(
                        "{key} file {value:?} does not exist"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Command-line overrides win over file values.
    pub fn set_override(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| CliError::validation(format!("missing required config key {key:?}")))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        let value = self.require(key)?;
        let path = PathBuf::from(value);
        if !path.exists() {
            return Err(CliError::dependency(format!(
                "{key} file {value:?} does not exist"
            )));
        }
        Ok(path)
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|_| {
                CliError::validation(format!("config key {key:?}: cannot parse {raw:?}"))
            }),
        }
    }

    pub fn require_value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| CliError::validation(format!("config key {key:?}: cannot parse {raw:?}")))
    }

    /// Comma-separated attention grid, e.g. `20,40,60,80,100`.
    pub fn tau_grid(&self) -> Result<Vec<u8>> {
        let raw = self.get("tau_grid").unwrap_or("20,40,60,80,100");
        raw.split(',')
            .map(|part| {
                let t: u8 = part.trim().parse().map_err(|_| {
                    CliError::validation(format!("tau_grid entry {part:?} is not in 0..=100"))
                })?;
                if t > 100 {
                    return Err(CliError::validation(format!(
                        "tau_grid entry {t} exceeds 100"
                    )));
                }
                Ok(t)
            })
            .collect()
    }

    /// Output directory, created on demand.
    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(self.get("out_dir").unwrap_or("."));
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Canonical `key = value` rendering used for hashing and manifests.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.values {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }

    /// FNV-1a hash of the canonical rendering.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        h
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg = RunConfig::parse("seed = 7\ntau_grid = 20,40 # grid\n").unwrap();
        assert_eq!(cfg.get("seed"), Some("7"));
        assert_eq!(cfg.tau_grid().unwrap(), vec![20, 40]);
        assert!(RunConfig::parse("sneed = 7").is_err());
        assert!(RunConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(RunConfig::parse("seed").is_err());
    }

    #[test]
    fn hash_is_stable_and_orders_keys() {
        let a = RunConfig::parse("seed = 7\nalpha = 0.05").unwrap();
        let b = RunConfig::parse("alpha = 0.05\nseed = 7").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::parse("alpha = 0.05\nseed = 8").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
