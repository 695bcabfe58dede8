//! Run manifests: what was run, on which inputs, with which seeds.
//!
//! A manifest is written before any output. Everything in it except
//! `created_unix` is a function of the invocation and the input bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::ArgMatches;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    /// The flag the file was passed through, e.g. `corpus`.
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Named sub-stream seeds derived from `seed`.
    pub derived_seeds: BTreeMap<String, u64>,
    /// Every resolved flag, defaults included.
    pub config: BTreeMap<String, Value>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub created_unix: u64,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Resolved flag values as strings, keyed by flag id. `subcommand` is the
/// space-separated path used to find which ids are flags rather than groups.
fn resolved_config(subcommand: &str, matches: &ArgMatches) -> BTreeMap<String, Value> {
    let root = crate::cli::command();
    let mut cmd = &root;
    for name in subcommand.split_whitespace() {
        if let Some(sub) = cmd.find_subcommand(name) {
            cmd = sub;
        }
    }
    let flags: Vec<&str> = cmd.get_arguments().map(|a| a.get_id().as_str()).collect();
    let mut out = BTreeMap::new();
    for id in matches.ids() {
        let id = id.as_str();
        if !flags.contains(&id) || matches.value_source(id).is_none() {
            continue;
        }
        let Ok(Some(raw)) = matches.try_get_raw(id) else {
            continue;
        };
        let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let v = match vals.len() {
            1 => Value::String(vals.into_iter().next().unwrap()),
            _ => Value::Array(vals.into_iter().map(Value::String).collect()),
        };
        out.insert(id.to_string(), v);
    }
    out
}

impl RunManifest {
    pub fn new(subcommand: &str, matches: &ArgMatches, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            derived_seeds: BTreeMap::new(),
            config: resolved_config(subcommand, matches),
            inputs: Vec::new(),
            outputs: Vec::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn derived(mut self, stream: &str, value: u64) -> Self {
        self.derived_seeds.insert(stream.to_string(), value);
        self
    }

    /// Hashes `path` now and records it under `role`.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Checks every recorded input. A role in `current` is checked against
    /// the file given now for that role; other inputs are re-hashed at their
    /// recorded path.
    pub fn verify(&self, current: &[(&str, &Path)]) -> Result<()> {
        let mut problems = Vec::new();
        for rec in &self.inputs {
            let path = current
                .iter()
                .find(|(role, _)| *role == rec.role)
                .map(|(_, p)| p.to_path_buf())
                .unwrap_or_else(|| PathBuf::from(&rec.path));
            match sha256_file(&path) {
                Ok(d) if d == rec.sha256 => {}
                Ok(d) => problems.push(format!(
                    "{} ({}): digest {} does not match recorded {}",
                    rec.role,
                    path.display(),
                    d,
                    rec.sha256
                )),
                Err(e) => problems.push(format!("{} ({}): {e}", rec.role, path.display())),
            }
        }
        if !problems.is_empty() {
            bail!("manifest verification failed:\n  {}", problems.join("\n  "));
        }
        Ok(())
    }
}

/// Manifest location for a run writing into directory `out`.
pub fn dir_manifest(out: &Path) -> PathBuf {
    out.join("manifest.json")
}

/// Manifest location for a run writing the single file `out`.
pub fn file_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        fs::write(&p, "abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn verify_catches_changed_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        fs::write(&p, "one").unwrap();
        let m = crate::cli::command()
            .try_get_matches_from(["sp", "selftest"])
            .unwrap();
        let mut man = RunManifest::new("eval", &m, None);
        man.input("corpus", &p).unwrap();
        man.verify(&[]).unwrap();
        let q = dir.path().join("other.jsonl");
        fs::write(&q, "two").unwrap();
        assert!(man.verify(&[("corpus", &q)]).is_err());
        fs::write(&p, "changed").unwrap();
        assert!(man.verify(&[]).is_err());
    }

    #[test]
    fn manifest_paths() {
        assert_eq!(file_manifest(Path::new("a/b.jsonl")), Path::new("a/b.jsonl.manifest.json"));
        assert_eq!(dir_manifest(Path::new("run")), Path::new("run/manifest.json"));
    }
}
