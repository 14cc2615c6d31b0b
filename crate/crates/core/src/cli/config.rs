//! Flat `key = value` run files. Keys are the long flag names of the chosen
//! subcommand; the file is spliced in front of the command-line flags, so
//! flags given explicitly win.

use crate::error::{Error, Result};
use std::path::Path;

pub fn parse_file(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key = value", origin.display(), k + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", origin.display(), k + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Position of the subcommand name and the `--config` path, if any.
fn locate(args: &[String]) -> (Option<usize>, Option<(usize, usize, String)>) {
    let sub = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1);
    let mut cfg = None;
    let mut i = 1;
    while i < args.len() {
        if args[i] == "--config" && i + 1 < args.len() {
            cfg = Some((i, 2, args[i + 1].clone()));
            break;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            cfg = Some((i, 1, p.to_string()));
            break;
        }
        i += 1;
    }
    (sub, cfg)
}

/// Expands `--config FILE` into flags. `known` lists the long names accepted
/// by the subcommand; anything else in the file is rejected.
pub fn expand(args: &[String], known: impl Fn(&str) -> Option<Vec<String>>) -> Result<Vec<String>> {
    let (sub, cfg) = locate(args);
    let Some((at, width, path)) = cfg else {
        return Ok(args.to_vec());
    };
    let sub = sub.ok_or_else(|| Error::Config("--config needs a subcommand".into()))?;
    let keys = known(&args[sub]).ok_or_else(|| Error::Config(format!("unknown subcommand {:?}", args[sub])))?;
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut spliced = Vec::new();
    for (key, value) in parse_file(&text, path)? {
        if key == "config" || !keys.contains(&key) {
            return Err(Error::Config(format!("unknown key {key:?} in {} for {}", path.display(), args[sub])));
        }
        spliced.push(format!("--{key}={value}"));
    }
    let mut out: Vec<String> = Vec::with_capacity(args.len() + spliced.len());
    for (i, a) in args.iter().enumerate() {
        if i >= at && i < at + width {
            continue;
        }
        out.push(a.clone());
        if i == sub {
            out.extend(spliced.iter().cloned());
        }
    }
    Ok(out)
}

/// `key = value` lines, the inverse of `parse_file`.
pub fn render(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}
