//! `key=value` config files, applied as flags placed before the command
//! line's own so that explicit flags win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{Context, Result};
use clap::CommandFactory;

use crate::args::Cli;
use crate::UsageError;

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<(String, String)>, UsageError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value, got '{line}'", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(UsageError(format!("config line {}: empty key", i + 1)));
        }
        pairs.push((key.replace('_', "-"), value.trim().to_string()));
    }
    Ok(pairs)
}

fn config_path(args: &[OsString]) -> Result<Option<OsString>, UsageError> {
    for (i, a) in args.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            return args
                .get(i + 1)
                .cloned()
                .map(Some)
                .ok_or_else(|| UsageError("--config needs a file".into()));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.into()));
        }
    }
    Ok(None)
}

/// Converts config entries to flags of subcommand `name`.
pub fn to_flags(name: &str, pairs: &[(String, String)]) -> Result<Vec<OsString>, UsageError> {
    let root = Cli::command();
    let sub = root
        .find_subcommand(name)
        .ok_or_else(|| UsageError(format!("unknown command '{name}'")))?;
    let mut flags = Vec::new();
    for (key, value) in pairs {
        if key == "config" {
            return Err(UsageError("config files cannot include other config files".into()));
        }
        let arg = sub
            .get_arguments()
            .chain(root.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()))
            .ok_or_else(|| UsageError(format!("unknown config key '{key}' for '{name}'")))?;
        if arg.get_action().takes_values() {
            flags.push(format!("--{key}").into());
            flags.push(value.into());
        } else {
            match value.as_str() {
                "true" => flags.push(format!("--{key}").into()),
                "false" => {}
                other => return Err(UsageError(format!("config key '{key}' expects true or false, got '{other}'"))),
            }
        }
    }
    Ok(flags)
}

/// Inserts the flags from the file named by `--config` right after the
/// subcommand name.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let names: Vec<String> = Cli::command().get_subcommands().map(|c| c.get_name().to_string()).collect();
    let Some(pos) = args
        .iter()
        .position(|a| a.to_str().is_some_and(|s| names.iter().any(|n| n == s)))
    else {
        return Ok(args);
    };
    let name = args[pos].to_str().unwrap_or_default().to_string();
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))
        .with_context(|| format!("loading {}", path.display()))?;
    let flags = to_flags(&name, &parse(&text)?)?;
    let mut out = args[..=pos].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}
