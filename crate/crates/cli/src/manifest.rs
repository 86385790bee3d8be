use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Invariant {
    pub name: String,
    pub pass: bool,
    #[serde(serialize_with = "ser_num")]
    pub measured: f64,
    #[serde(serialize_with = "ser_num")]
    pub bound: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Invariant {
    /// `measured ≤ bound`.
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Invariant {
            name: name.into(),
            pass: measured <= bound,
            measured,
            bound,
            detail: String::new(),
        }
    }

    /// `measured ≥ bound`.
    pub fn at_least(name: &str, measured: f64, bound: f64) -> Self {
        Invariant {
            name: name.into(),
            pass: measured >= bound,
            measured,
            bound,
            detail: String::new(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: &'static str,
    /// SHA-256 of the canonical JSON of the effective config.
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub stages: Vec<Stage>,
    pub invariants: Vec<Invariant>,
    pub artifacts: Vec<String>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config_hash: None,
            seed: None,
            threads: None,
            stages: Vec::new(),
            invariants: Vec::new(),
            artifacts: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
        let t = Instant::now();
        let out = f();
        self.stages.push(Stage {
            name: name.into(),
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn failed(&self) -> Vec<&Invariant> {
        self.invariants.iter().filter(|i| !i.pass).collect()
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

/// Hash of a config value; `serde_json` maps are sorted, so key order and
/// whitespace in the source file do not matter.
pub fn config_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("JSON values always serialize");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn ser_num<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    num(*x).serialize(s)
}

/// JSON has no infinity; infinite values become the token `"inf"`.
pub fn num(x: f64) -> serde_json::Value {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        x.into()
    }
}
