//! Config-file defaults: a documented `key = value` format where keys match
//! the long flag names. Flags override the file; the environment overrides
//! neither (credentials only, named by provider configs).
//!
//! ```text
//! # cape.conf
//! inventory = data/inventories/mpi-120.json
//! backend = constant:A
//! runs = 3
//! deterministic = true
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct Defaults {
    values: BTreeMap<String, String>,
}

impl Defaults {
    pub fn load(path: &Path) -> Result<Defaults> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{} line {}: expected `key = value`, got {:?}",
                    path.display(),
                    lineno + 1,
                    line
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Defaults { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(_) => bail!("config key {key}: cannot parse {raw:?}"),
            },
        }
    }

    /// Flag value, then config value, then the built-in default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        flag: Option<T>,
        key: &str,
        fallback: T,
    ) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(fallback))
    }

    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
    }
}
