use std::path::Path;

use ctxshap_core::{ModelError, PromptError, ShapError};
use ctxshap_gateway::GatewayError;

pub const EXIT_FAILED_CHECK: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_COMPAT: u8 = 3;
pub const EXIT_CAP: u8 = 4;
pub const EXIT_GATEWAY: u8 = 5;
pub const EXIT_FORMAT: u8 = 6;

/// A message plus the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::input(format!("{}: {err}", path.display()))
    }

    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Schema(_) | ModelError::Structure(_) | ModelError::Value(_) => EXIT_INPUT,
        ModelError::Width { .. } | ModelError::FeatureMismatch(_) | ModelError::EmptyBackground => EXIT_COMPAT,
    }
}

fn shap_code(e: &ShapError) -> u8 {
    match e {
        ShapError::TooManyFeatures { .. } => EXIT_CAP,
        ShapError::Row { source, .. } => shap_code(source),
        ShapError::Model(m) => model_code(m),
        _ => EXIT_COMPAT,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::new(model_code(&e), e.to_string())
    }
}

impl From<ShapError> for CliError {
    fn from(e: ShapError) -> Self {
        Self::new(shap_code(&e), e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        let code = match e {
            PromptError::Format { .. } => EXIT_FORMAT,
            PromptError::Width { .. } => EXIT_COMPAT,
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        Self::new(EXIT_GATEWAY, e.to_string())
    }
}

impl From<ctxshap_core::plot::PlotError> for CliError {
    fn from(e: ctxshap_core::plot::PlotError) -> Self {
        Self::new(EXIT_COMPAT, e.to_string())
    }
}
