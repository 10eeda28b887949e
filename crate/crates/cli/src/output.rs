//! Error classification and output files with metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub const DOMAIN: u8 = 1;
pub const USAGE: u8 = 2;

pub trait Classify<T> {
    /// Bad input: unreadable or malformed files, inconsistent arguments.
    fn usage(self) -> Result<T, Failure>;
    /// A well-formed request the model cannot satisfy.
    fn domain(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: USAGE, error: e.into() })
    }

    fn domain(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: DOMAIN, error: e.into() })
    }
}

pub fn usage_error(msg: impl Into<String>) -> Failure {
    Failure { code: USAGE, error: anyhow::anyhow!(msg.into()) }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Run context shared by every output of one invocation.
pub struct Provenance {
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub instance_hash: Option<String>,
}

impl Provenance {
    pub fn new(seed: Option<u64>, instance_hash: Option<String>) -> Self {
        Self { command_line: std::env::args().collect(), seed, instance_hash }
    }

    /// Writes `contents` to `path` and `<path>.meta.json` beside it.
    pub fn write(&self, path: &Path, contents: &str, extra: Value) -> Result<(), Failure> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).usage()?;
        }
        fs::write(path, contents).map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display())).usage()?;
        let meta = json!({
            "tool": "crashplan",
            "version": env!("CARGO_PKG_VERSION"),
            "command_line": self.command_line,
            "seed": self.seed,
            "instance_hash": self.instance_hash,
            "output": path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "run": extra,
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
        fs::write(sidecar_path(path), text).usage()?;
        Ok(())
    }
}

pub fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}
