//! Run manifests: what was read, what was written, and with which settings.
//! Manifests carry content hashes but no timestamps, so reruns reproduce them.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::file(path, e.into()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone)]
pub struct Manifest {
    command: &'static str,
    inputs: Map<String, Value>,
    outputs: Map<String, Value>,
    fields: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            inputs: Map::new(),
            outputs: Map::new(),
            fields: Map::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let hash = hash_file(path)?;
        self.inputs.insert(
            role.to_string(),
            json!({"path": path.display().to_string(), "sha256": hash}),
        );
        Ok(())
    }

    /// Records a written file by name, hash and any extra description.
    pub fn output(&mut self, path: &Path, bytes: &[u8], extra: Value) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut entry = json!({"sha256": sha256_hex(bytes)});
        if let (Value::Object(e), Value::Object(x)) = (&mut entry, extra) {
            e.extend(x);
        }
        self.outputs.insert(name, entry);
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        out.insert("command".into(), json!(self.command));
        out.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
        out.extend(self.fields.clone());
        out.insert("inputs".into(), Value::Object(self.inputs.clone()));
        out.insert("outputs".into(), Value::Object(self.outputs.clone()));
        Value::Object(out)
    }

    /// Writes `<command>.manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(&dir.join(format!("{}.manifest.json", self.command)), &self.to_json())
    }
}

pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    write_bytes(path, &json_bytes(value))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::file(path, e.into()))
}
