//! Sends assembled prompts to a chat-completions endpoint.
//!
//! Three modes share one entry point, [`Gateway::send`]:
//! `live` talks to the endpoint, `record` does the same and stores the reply
//! as a fixture, and `replay` answers from fixtures without touching the
//! network. Fixtures are keyed by [`fixture_key`], a SHA-256 over the bundle.

mod client;
mod config;
mod fixture;
mod raster;
mod wire;

pub use client::{Gateway, LlmResult};
pub use config::{GatewayConfig, Mode, PriceTable};
pub use fixture::{fixture_key, Fixture};
pub use raster::rasterize_svg;
pub use wire::Usage;

use thiserror::Error;

pub type Result<T, E = GatewayError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid gateway configuration: {0}")]
    Config(String),
    #[error("environment variable {var} is not set")]
    MissingKey { var: String },
    #[error("endpoint rejected the credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited (HTTP 429) after {attempts} attempts")]
    RateLimit { attempts: u32 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("upstream error (HTTP {status}): {detail}")]
    Upstream { status: u16, detail: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no fixture {key}.json in {dir}")]
    FixtureMiss { key: String, dir: String },
    #[error("fixture {path}: {detail}")]
    Fixture { path: String, detail: String },
    #[error("cannot rasterize plot: {0}")]
    Raster(String),
    #[error("no token usage to price")]
    MissingPrice,
}

/// Cost of one request from per-1K-token prices.
pub fn estimate_cost(usage: Option<&Usage>, prices: &PriceTable) -> Result<f64> {
    let usage = usage.ok_or(GatewayError::MissingPrice)?;
    Ok(usage.prompt_tokens as f64 / 1000.0 * prices.input_per_1k
        + usage.completion_tokens as f64 / 1000.0 * prices.output_per_1k)
}
