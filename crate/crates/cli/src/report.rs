use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ctxshap_core::prompt::PROMPT_VERSION;
use ctxshap_core::{ParsedExplanation, PlotKind};
use ctxshap_gateway::{LlmResult, Mode, Usage};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A file referenced from the report; `path` is relative to the output directory
/// for outputs and the bare file name for inputs, so reports stay byte-stable.
#[derive(Debug, Clone, Serialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

impl FileRef {
    pub fn input(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Writes artifacts into the output directory and remembers what it wrote.
pub struct OutDir {
    root: PathBuf,
    pub written: BTreeMap<&'static str, FileRef>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, role: &'static str, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.insert(
            role,
            FileRef {
                path: name.to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        println!("{}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, role: &'static str, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(role, name, text.as_bytes())
    }
}

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
    pub prompt_version: &'static str,
}

impl Tool {
    pub fn current() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            prompt_version: PROMPT_VERSION,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Telemetry {
    pub mode: Mode,
    pub llm_model: String,
    pub latency_s: f64,
    pub attempts: u32,
    pub usage: Option<Usage>,
    pub estimated_cost: Option<f64>,
    pub fixture_key: String,
}

impl Telemetry {
    pub fn new(mode: Mode, llm_model: &str, result: &LlmResult) -> Self {
        Self {
            mode,
            llm_model: llm_model.to_string(),
            latency_s: result.latency_s,
            attempts: result.attempts,
            usage: result.usage,
            estimated_cost: result.estimated_cost,
            fixture_key: result.fixture_key.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub kind: PlotKind,
    pub inputs: BTreeMap<&'static str, FileRef>,
    pub artifacts: BTreeMap<&'static str, FileRef>,
    pub instances: usize,
    pub base_value: f64,
    pub max_efficiency_residual: f64,
    pub prompt_samples: usize,
    pub prompt_tokens_estimate: usize,
    pub explanation: Option<ParsedExplanation>,
    /// Names in the explanation that match no feature or alias.
    pub unmatched_features: Vec<String>,
    pub telemetry: Option<Telemetry>,
}
