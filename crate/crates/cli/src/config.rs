//! Flat `key=value` run configuration: flags override the file, the file
//! overrides defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const SNAPSHOT_FILE: &str = "run_config.txt";

#[derive(Debug, Default)]
pub struct RunConfig {
    file: BTreeMap<String, String>,
    effective: BTreeMap<String, String>,
}

pub fn parse_flat(content: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value, got {line:?}", n + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("line {}: duplicate key {key:?}", n + 1);
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let content = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                parse_flat(&content).with_context(|| format!("in config {}", p.display()))?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            effective: BTreeMap::new(),
        })
    }

    /// Resolves `key` and records the value in the snapshot.
    pub fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match (flag, self.file.remove(key)) {
            (Some(v), _) => v,
            (None, Some(text)) => text
                .parse()
                .map_err(|e| anyhow::anyhow!("config key {key}={text:?}: {e}"))?,
            (None, None) => default,
        };
        self.effective.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Records a value that is not configurable through the file.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.effective.insert(key.to_string(), value.to_string());
    }

    /// Fails on file keys that the command never asked for.
    pub fn finish(&self) -> Result<()> {
        if let Some(k) = self.file.keys().next() {
            bail!("config key {k:?} is not used by this command");
        }
        Ok(())
    }

    pub fn snapshot(&self) -> String {
        self.effective.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(SNAPSHOT_FILE);
        fs::write(&path, self.snapshot()).with_context(|| format!("writing {}", path.display()))
    }
}
