//! Reproducibility manifest written next to every command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use medctx_core::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub config_sha256: String,
    /// Input label → digest of the file or directory.
    pub inputs: BTreeMap<String, String>,
    /// Output file (relative to the output dir) → digest.
    pub outputs: BTreeMap<String, String>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

fn files_under(root: &Path, rel: &Path, out: &mut Vec<(String, std::path::PathBuf)>) -> Result<()> {
    let dir = root.join(rel);
    let mut entries: Vec<_> = fs::read_dir(&dir)
        .map_err(|e| Error::Io { path: dir.clone(), source: e })?
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        let rel_path = rel.join(entry.file_name());
        if path.is_dir() {
            files_under(root, &rel_path, out)?;
        } else if path.is_file() {
            out.push((rel_path.to_string_lossy().replace('\\', "/"), path));
        }
    }
    Ok(())
}

/// Per-file digests of a directory tree, keyed by relative path. The
/// manifest itself is excluded.
pub fn digest_tree(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut files = Vec::new();
    files_under(dir, Path::new(""), &mut files)?;
    let mut out = BTreeMap::new();
    for (rel, path) in files {
        if rel == MANIFEST_NAME {
            continue;
        }
        let data = fs::read(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        out.insert(rel, sha256_bytes(&data));
    }
    Ok(out)
}

/// Single digest for a file or a directory tree.
pub fn digest_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut h = Sha256::new();
        for (rel, digest) in digest_tree(path)? {
            h.update(rel.as_bytes());
            h.update([0]);
            h.update(digest.as_bytes());
            h.update([b'\n']);
        }
        Ok(hex(&h.finalize()))
    } else {
        let data = fs::read(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Ok(sha256_bytes(&data))
    }
}

impl Manifest {
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        let canonical = serde_json::to_string(&config).expect("string map serializes");
        Manifest {
            tool: "medctx",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_bytes(format!("{command}\n{canonical}").as_bytes()),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.inputs.insert(label.to_string(), digest_path(path)?);
        Ok(())
    }

    /// Digests everything in `out_dir` and writes the manifest there.
    pub fn finish(mut self, out_dir: &Path) -> Result<()> {
        self.outputs = digest_tree(out_dir)?;
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&self)? + "\n";
        fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
    }
}
