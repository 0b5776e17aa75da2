use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Files under `dir`, relative and sorted, with forward slashes.
pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let p = entry.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p.strip_prefix(root).expect("walk stays under root");
                out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub const MANIFEST: &str = "manifest.json";

/// Record of one stage run: what went in, with which settings, and what
/// came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: u64,
    pub params: serde_json::Value,
    /// Input name -> SHA-256 (upstream manifests and external files).
    pub inputs: BTreeMap<String, String>,
    /// Hash over stage, version, seed, params and inputs.
    pub fingerprint: String,
    /// Output file -> SHA-256.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn fingerprint(
        stage: &str,
        seed: u64,
        params: &serde_json::Value,
        inputs: &BTreeMap<String, String>,
    ) -> String {
        let v = serde_json::json!({
            "stage": stage,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "params": params,
            "inputs": inputs,
        });
        sha256_hex(v.to_string().as_bytes())
    }

    pub fn read(dir: &Path) -> Result<Option<Manifest>> {
        let p = dir.join(MANIFEST);
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(serde_json::from_str(&text).ok())
    }

    /// True when every listed output still exists with its recorded hash.
    pub fn outputs_intact(&self, dir: &Path) -> bool {
        self.outputs
            .iter()
            .all(|(f, h)| hash_file(&dir.join(f)).is_ok_and(|x| &x == h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        assert_eq!(list_files(dir.path()).unwrap(), vec!["a/b.txt"]);
    }

    #[test]
    fn fingerprint_tracks_params_and_inputs() {
        let inputs = BTreeMap::from([("x".to_string(), "00".to_string())]);
        let p = serde_json::json!({"k": 1});
        let a = Manifest::fingerprint("stats", 1, &p, &inputs);
        assert_eq!(a, Manifest::fingerprint("stats", 1, &p, &inputs));
        assert_ne!(a, Manifest::fingerprint("stats", 2, &p, &inputs));
        assert_ne!(a, Manifest::fingerprint("stats", 1, &serde_json::json!({"k": 2}), &inputs));
        let other = BTreeMap::from([("x".to_string(), "01".to_string())]);
        assert_ne!(a, Manifest::fingerprint("stats", 1, &p, &other));
    }
}
