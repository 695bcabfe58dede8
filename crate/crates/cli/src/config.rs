//! `--config <FILE>` support and seed resolution.
//!
//! The file holds `key = value` lines (`#` starts a comment line). Each key
//! names a long flag of the subcommand being run, with `_` and `-`
//! interchangeable. Entries are spliced into argv directly after the
//! subcommand name, so any flag repeated on the command line overrides them.
//! Keys that belong to a different subcommand are ignored, which lets one
//! file drive a whole pipeline; keys no subcommand knows are an error.

use std::collections::BTreeMap;
use std::env;
use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::ArgAction;

use crate::cli::command;

pub const SEED_ENV: &str = "SPURPROBE_SEED";

/// Explicit flag (or config entry), then `$SPURPROBE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env::var(SEED_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(env::VarError::NotPresent) => Ok(0),
        Err(env::VarError::NotUnicode(_)) => bail!("{SEED_ENV} is not valid UTF-8"),
    }
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", i + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if out.insert(key.clone(), value.to_string()).is_some() {
            bail!("line {}: key {key:?} given twice", i + 1);
        }
    }
    Ok(out)
}

/// Removes `--config` from argv and splices the file's entries in.
pub fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut path: Option<OsString> = None;
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        let value = if s == "--config" {
            Some(it.next().ok_or_else(|| anyhow!("--config needs a file argument"))?)
        } else {
            s.strip_prefix("--config=").map(OsString::from)
        };
        match value {
            Some(v) if path.is_some() => bail!("--config given more than once (also {v:?})"),
            Some(v) => path = Some(v),
            None => rest.push(a),
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let entries = parse_config(&text).with_context(|| format!("in config {}", path.display()))?;
    inject(rest, &entries)
}

fn inject(argv: Vec<OsString>, entries: &BTreeMap<String, String>) -> Result<Vec<OsString>> {
    let root = command();
    // Walk to the innermost subcommand named on the command line.
    let mut cmd = &root;
    let mut at = None;
    for (i, a) in argv.iter().enumerate().skip(1) {
        let s = a.to_string_lossy();
        if s.starts_with('-') {
            continue;
        }
        match cmd.find_subcommand(s.as_ref()) {
            Some(sub) => {
                cmd = sub;
                at = Some(i);
                if !sub.has_subcommands() {
                    break;
                }
            }
            None => break,
        }
    }
    let Some(at) = at else {
        // No subcommand: let clap report the usage error.
        return Ok(argv);
    };

    let mut injected = Vec::new();
    for (key, value) in entries {
        if key == "config" {
            bail!("config files cannot include other config files");
        }
        match cmd.get_arguments().find(|a| a.get_long() == Some(key.as_str())) {
            Some(arg) => match arg.get_action() {
                ArgAction::SetTrue => match value.as_str() {
                    "true" => injected.push(OsString::from(format!("--{key}"))),
                    "false" => {}
                    other => bail!("config key {key:?}: expected true or false, got {other:?}"),
                },
                _ => injected.push(OsString::from(format!("--{key}={value}"))),
            },
            None if known_anywhere(&root, key) => {}
            None => bail!("unknown config key {key:?}"),
        }
    }
    let mut out = argv;
    out.splice(at + 1..at + 1, injected);
    Ok(out)
}

fn known_anywhere(cmd: &clap::Command, long: &str) -> bool {
    cmd.get_arguments().any(|a| a.get_long() == Some(long))
        || cmd.get_subcommands().any(|s| known_anywhere(s, long))
}
