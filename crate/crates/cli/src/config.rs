//! Run configuration: defaults, then a flat TOML file, then flags.

use std::path::Path;

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Marks an error as a usage error (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Merges `S::default()`, the optional config file and the flags (only the
/// keys a flag actually set) into `S`. Unknown keys and type errors are
/// usage errors. `S` must serialize every key, so no `Option` fields.
pub fn resolve<S>(file: Option<&Path>, flags: &impl Serialize) -> anyhow::Result<S>
where
    S: Serialize + DeserializeOwned + Default,
{
    let mut table = toml::Table::try_from(S::default()).context("serializing defaults")?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let file_table: toml::Table =
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        if let Some(key) = file_table.keys().find(|k| !table.contains_key(*k)) {
            return Err(usage(format!("{}: unknown key `{key}`", path.display())));
        }
        table.extend(file_table);
    }
    let flag_table = toml::Table::try_from(flags).map_err(|e| usage(e.to_string()))?;
    table.extend(flag_table);
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| usage(e.to_string()))
}

/// Text embedded into artifacts; feeding it back through `--config`
/// reproduces the run.
pub fn render(command: &str, settings: &impl Serialize) -> anyhow::Result<String> {
    let body = toml::to_string(settings).context("serializing run config")?;
    Ok(format!("# qcomb {command}\n{body}"))
}
