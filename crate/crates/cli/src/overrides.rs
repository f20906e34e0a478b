//! `--set path=value` overrides applied to a JSON view of the configuration.

use anyhow::{anyhow, bail, Result};
use serde_json::Value;

/// Splits `a.b.0.c=value`. The value is read as JSON when it parses as JSON and
/// as a bare string otherwise.
pub fn parse(spec: &str) -> Result<(Vec<String>, Value)> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{spec}` is not of the form path=value"))?;
    let path: Vec<String> = path.trim().split('.').map(str::to_owned).collect();
    if path.iter().any(|s| s.is_empty()) {
        bail!("override `{spec}` has an empty path segment");
    }
    let value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_owned()));
    Ok((path, value))
}

/// Writes `value` at `path`. Object keys may be created; array indices must
/// already exist.
pub fn apply(root: &mut Value, path: &[String], value: Value) -> Result<()> {
    let mut node = root;
    for (depth, key) in path.iter().enumerate() {
        let last = depth + 1 == path.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(key.clone(), value);
                    return Ok(());
                }
                map.entry(key.clone())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let index: usize = key.parse().map_err(|_| {
                    anyhow!("`{}`: expected an array index, got `{key}`", path.join("."))
                })?;
                let len = items.len();
                let slot = items.get_mut(index).ok_or_else(|| {
                    anyhow!(
                        "`{}`: index {index} out of range (len {len})",
                        path.join(".")
                    )
                })?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => bail!(
                "`{}`: cannot descend into a scalar at `{key}`",
                path.join(".")
            ),
        };
    }
    unreachable!("path is non-empty")
}
