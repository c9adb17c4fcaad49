use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::{GatewayError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl FromStr for Mode {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(GatewayError::Config(format!(
                "unknown mode {other:?} (expected live, record or replay)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        })
    }
}

/// Prices per 1000 tokens, in whatever currency the caller uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// Everything before `/chat/completions`, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model_name: String,
    /// Name of the variable holding the key; the key itself is never stored.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub mode: Mode,
    pub fixture_dir: Option<PathBuf>,
    /// Convert SVG plots to PNG before upload.
    pub raster: bool,
    /// First retry delay; doubles on every further retry.
    pub backoff: Duration,
    pub prices: Option<PriceTable>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "CTXSHAP_API_KEY".into(),
            timeout_s: 60.0,
            max_retries: 3,
            mode: Mode::Live,
            fixture_dir: None,
            raster: true,
            backoff: Duration::from_millis(500),
            prices: None,
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GatewayError::Config(msg));
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return bad(format!("timeout_s must be positive, got {}", self.timeout_s));
        }
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty".into());
        }
        if self.api_key_env.trim().is_empty() {
            return bad("api_key_env is empty".into());
        }
        if self.mode != Mode::Replay
            && !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://"))
        {
            return bad(format!("base_url must be http(s), got {:?}", self.base_url));
        }
        if let Some(p) = &self.prices {
            if !(p.input_per_1k >= 0.0 && p.output_per_1k >= 0.0) {
                return bad("prices must be non-negative".into());
            }
        }
        match (&self.mode, &self.fixture_dir) {
            (Mode::Replay, None) | (Mode::Record, None) => {
                bad(format!("{} mode needs a fixture directory", self.mode))
            }
            (Mode::Replay, Some(dir)) if !dir.is_dir() => {
                bad(format!("fixture directory {} does not exist", dir.display()))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }

    pub(crate) fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s)
    }
}
