//! Bit-stable file emission: '#'-prefixed provenance headers on CSV files,
//! a `provenance` object on JSON files, and 17-significant-digit floats so
//! doubles round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a hash of the canonicalized configuration text.
pub fn config_hash(text: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub resolved_config: serde_json::Value,
}

impl Provenance {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64) -> Self {
        let resolved_config =
            serde_json::to_value(config).unwrap_or(serde_json::Value::Null);
        let canonical = serde_json::to_string(&resolved_config).unwrap_or_default();
        Self {
            version: VERSION.to_string(),
            command: command.to_string(),
            config_hash: config_hash(&canonical),
            seed,
            resolved_config,
        }
    }

    pub fn csv_header(&self) -> String {
        let resolved = serde_json::to_string(&self.resolved_config).unwrap_or_default();
        format!(
            "# toplab v{}\n# command: {}\n# config-hash: {}\n# seed: {}\n# resolved-config: {}\n",
            self.version, self.command, self.config_hash, self.seed, resolved
        )
    }
}

/// 17 significant digits; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    format!("{x:.16e}")
}

pub struct CsvWriter {
    buf: String,
}

impl CsvWriter {
    pub fn new(prov: &Provenance, columns: &[&str]) -> Self {
        let mut buf = prov.csv_header();
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn write(self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(self.buf.as_bytes())
    }
}

/// JSON output with the provenance object injected at the top level.
pub fn write_json<T: Serialize>(
    path: &Path,
    prov: &Provenance,
    payload: &T,
) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut value = serde_json::to_value(payload).expect("serializable payload");
    if let serde_json::Value::Object(ref mut map) = value {
        map.insert(
            "provenance".to_string(),
            serde_json::to_value(prov).expect("serializable provenance"),
        );
    }
    let text = serde_json::to_string_pretty(&value).expect("serializable value");
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")
}
