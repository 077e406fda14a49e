//! `--config FILE` support: keys of a JSON object become flags appended
//! after the command line, skipping any flag the user already passed.

use std::ffi::OsString;
use std::path::Path;

use serde_json::Value;

fn config_path(argv: &[OsString]) -> Option<OsString> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn passed(argv: &[OsString], flag: &str) -> bool {
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&format!("{flag}="))
    })
}

fn scalar(key: &str, v: &Value) -> Result<Option<String>, String> {
    match v {
        Value::String(s) => Ok(Some(s.clone())),
        Value::Number(n) => Ok(Some(n.to_string())),
        _ => Err(format!("config key {key:?}: expected a string or number")),
    }
}

/// Returns `argv` with config-derived flags appended.
pub fn expand(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some(path) = config_path(&argv) else { return Ok(argv) };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("config {}: {e}", path.display()))?;
    let Value::Object(map) = serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))? else {
        return Err(format!("config {}: expected a JSON object", path.display()));
    };
    let mut out = argv.clone();
    for (key, value) in &map {
        if key == "config" {
            return Err("config files cannot nest --config".into());
        }
        let flag = format!("--{key}");
        if passed(&argv, &flag) {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                for item in items {
                    if let Some(s) = scalar(key, item)? {
                        out.push(flag.clone().into());
                        out.push(s.into());
                    }
                }
            }
            Value::Object(_) => return Err(format!("config key {key:?}: nested objects are not flags")),
            other => {
                if let Some(s) = scalar(key, other)? {
                    out.push(flag.into());
                    out.push(s.into());
                }
            }
        }
    }
    Ok(out)
}
