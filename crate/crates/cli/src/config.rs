//! Expands `--config file.json` into long flags placed ahead of the explicit
//! ones so that later occurrences override.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::CliError;

const SUBCOMMANDS: [&str; 8] = ["calibrate", "quantize", "inspect", "verify", "analyze", "simulate", "train", "report"];
const VALUED_GLOBALS: [&str; 4] = ["--seed", "--threads", "--out-dir", "--config"];

pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Config(format!("{path}: expected a JSON object")));
    };
    let mut injected = Vec::new();
    for (key, v) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        match v {
            Value::Bool(true) => injected.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                injected.push(flag);
                injected.push(parts.join(","));
            }
            other => {
                injected.push(flag);
                injected.push(scalar(&other)?);
            }
        }
    }
    let at = subcommand_index(&args).map_or(args.len(), |i| i + 1);
    let mut out: Vec<OsString> = args[..at].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}

fn scalar(v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(CliError::Config(format!("unsupported config value {other}"))),
    }
}

fn config_path(args: &[OsString]) -> Option<String> {
    let mut it = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned());
    let mut found = None;
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next();
        } else if let Some(rest) = a.strip_prefix("--config=") {
            found = Some(rest.to_string());
        }
    }
    found.filter(|p| Path::new(p).as_os_str().len() > 0)
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if VALUED_GLOBALS.contains(&a.as_ref()) {
            i += 2;
            continue;
        }
        if SUBCOMMANDS.contains(&a.as_ref()) {
            return Some(i);
        }
        i += 1;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn no_config_is_identity() {
        let a = os(&["szt", "verify", "--suite", "entropy"]);
        assert_eq!(expand(a.clone()).unwrap(), a);
    }

    #[test]
    fn config_flags_precede_explicit_ones() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"suite": "mse", "mc_samples": 10, "lr": [0.1, 0.2]}"#).unwrap();
        let a = os(&["szt", "--out-dir", "verify", "--config", p.to_str().unwrap(), "verify", "--suite", "entropy"]);
        let e: Vec<String> = expand(a).unwrap().into_iter().map(|s| s.into_string().unwrap()).collect();
        let at = e.iter().position(|s| s == "--lr").unwrap();
        assert_eq!(e[at + 1], "0.1,0.2");
        assert_eq!(e[5], "verify");
        assert!(e.iter().position(|s| s == "mse").unwrap() < e.iter().position(|s| s == "entropy").unwrap());
    }
}
