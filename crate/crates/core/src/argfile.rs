//! `--config file.json` support: JSON values become command-line flags
//! unless the same flag was given explicitly.
//!
//! The file is an object keyed by subcommand (`"evaluate"`, `"ensemble"` →
//! `"blend"`, ...). Scalar entries at the top level apply to every command.
//! Keys may use `snake_case` or `kebab-case`; `true` becomes a bare flag,
//! `false` and `null` are skipped, arrays repeat the value list.

use std::path::Path;

use serde_json::{Map, Value};

use petseg::{Error, Result};

/// Subcommand names, used to find where the command path ends.
const COMMANDS: [&str; 14] = [
    "preprocess",
    "augment",
    "loss",
    "components",
    "evaluate",
    "measures",
    "ensemble",
    "plan",
    "blend",
    "average",
    "binarize",
    "rank",
    "report",
    "help",
];

/// Pull `--config PATH` (or `--config=PATH`) out of `args`.
fn take_config(args: &mut Vec<String>) -> Option<String> {
    let pos = args
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="))?;
    let arg = args.remove(pos);
    match arg.strip_prefix("--config=") {
        Some(p) => Some(p.to_string()),
        None if pos < args.len() => Some(args.remove(pos)),
        None => None,
    }
}

fn command_path(args: &[String]) -> Vec<String> {
    args.iter()
        .skip(1)
        .filter(|a| COMMANDS.contains(&a.as_str()))
        .cloned()
        .collect()
}

fn given(args: &[String], flag: &str) -> bool {
    args.iter()
        .any(|a| a == flag || a.strip_prefix(flag).is_some_and(|r| r.starts_with('=')))
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn inject(args: &mut Vec<String>, section: &Map<String, Value>, present: &[String]) -> Result<()> {
    for (key, value) in section {
        let flag = format!("--{}", key.replace('_', "-"));
        if value.is_object() || given(present, &flag) {
            continue;
        }
        match value {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null | Value::Object(_) => {}
            Value::Array(items) => {
                args.push(flag);
                for item in items {
                    args.push(scalar(item).ok_or_else(|| {
                        Error::Data(format!("config key {key:?}: array items must be strings or numbers"))
                    })?);
                }
            }
            Value::String(_) | Value::Number(_) => {
                args.push(format!("{flag}={}", scalar(value).unwrap_or_default()));
            }
        }
    }
    Ok(())
}

/// Expand `--config` into explicit flags. Returns `args` unchanged when no
/// config is given.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = take_config(&mut args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::Data(format!("config {}: {e}", path.display())))?;
    let root: Value = serde_json::from_str(&text)?;
    let Value::Object(root) = root else {
        return Err(Error::Data(format!(
            "config {} must hold a JSON object",
            path.display()
        )));
    };
    let present = args.clone();
    let mut section = &root;
    let mut sections = vec![section];
    for name in command_path(&args) {
        match section.get(&name) {
            Some(Value::Object(inner)) => {
                section = inner;
                sections.push(section);
            }
            _ => break,
        }
    }
    // most specific section first so its values win over outer ones
    let mut injected: Vec<String> = Vec::new();
    for s in sections.into_iter().rev() {
        let mut seen = present.clone();
        seen.extend(injected.iter().cloned());
        let mut extra = Vec::new();
        inject(&mut extra, s, &seen)?;
        injected.extend(extra);
    }
    args.extend(injected);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn with_config(json: &str, cmd: &str) -> Vec<String> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, json).unwrap();
        expand(argv(&format!("{cmd} --config {}", p.display()))).unwrap()
    }

    #[test]
    fn flags_win_over_config() {
        let out = with_config(r#"{"evaluate": {"jobs": 4, "bins": 7}}"#, "petseg evaluate --jobs 2");
        assert_eq!(out, argv("petseg evaluate --jobs 2 --bins=7"));
    }

    #[test]
    fn nested_sections_and_globals() {
        let out = with_config(
            r#"{"jobs": 3, "ensemble": {"overlap": 0.25, "blend": {"blend_mode": "gaussian", "overlap": 0.5}}}"#,
            "petseg ensemble blend",
        );
        assert_eq!(
            out,
            argv("petseg ensemble blend --blend-mode=gaussian --overlap=0.5 --jobs=3")
        );
    }

    #[test]
    fn bools_and_arrays() {
        let out = with_config(
            r#"{"ensemble": {"average": {"logits": true, "in": ["a", "b"], "x": false}}}"#,
            "petseg ensemble average",
        );
        assert_eq!(out, argv("petseg ensemble average --in a b --logits"));
    }

    #[test]
    fn no_config_is_identity() {
        assert_eq!(expand(argv("petseg rank --in x")).unwrap(), argv("petseg rank --in x"));
    }
}
