use std::time::Instant;

use ctxshap_core::PromptBundle;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Serialize;

use crate::config::{GatewayConfig, Mode};
use crate::fixture::{self, fixture_key, Fixture};
use crate::wire::{self, Usage};
use crate::{estimate_cost, GatewayError, Result};

const DETAIL_LIMIT: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmResult {
    pub raw_text: String,
    pub latency_s: f64,
    pub usage: Option<Usage>,
    /// Only set when the config carries a price table and the reply reported usage.
    pub estimated_cost: Option<f64>,
    /// HTTP requests made; 0 in replay mode.
    pub attempts: u32,
    pub fixture_key: String,
}

/// Immutable and shareable across threads; every `send` is independent.
#[derive(Debug)]
pub struct Gateway {
    config: GatewayConfig,
    http: Option<Client>,
}

impl Gateway {
    /// Replay mode builds no HTTP client at all.
    pub fn new(config: GatewayConfig) -> Result<Self> {
        config.validate()?;
        let http = match config.mode {
            Mode::Replay => None,
            Mode::Live | Mode::Record => Some(
                Client::builder()
                    .timeout(config.timeout())
                    .build()
                    .map_err(|e| GatewayError::Transport(e.to_string()))?,
            ),
        };
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn send(&self, bundle: &PromptBundle) -> Result<LlmResult> {
        let key = fixture_key(bundle);
        match (&self.http, &self.config.fixture_dir) {
            (None, Some(dir)) => {
                let fx = fixture::load(dir, &key)?;
                log::debug!("replayed fixture {key}");
                Ok(self.finish(fx.raw_text, 0.0, fx.usage, 0, key))
            }
            (Some(http), dir) => {
                let secret = self.api_key()?;
                let started = Instant::now();
                let (text, usage, attempts) = self
                    .call(http, bundle, &secret)
                    .map_err(|e| redact_error(e, &secret))?;
                let latency = started.elapsed().as_secs_f64();
                if let (Mode::Record, Some(dir)) = (self.config.mode, dir) {
                    let path = fixture::store(
                        dir,
                        &Fixture {
                            key: key.clone(),
                            model: self.config.model_name.clone(),
                            raw_text: text.clone(),
                            usage,
                        },
                    )?;
                    log::info!("recorded fixture {}", path.display());
                }
                Ok(self.finish(text, latency, usage, attempts, key))
            }
            (None, None) => Err(GatewayError::Config("replay mode needs a fixture directory".into())),
        }
    }

    fn finish(&self, raw_text: String, latency_s: f64, usage: Option<Usage>, attempts: u32, key: String) -> LlmResult {
        let estimated_cost = self.config.prices.as_ref().and_then(|prices| {
            estimate_cost(usage.as_ref(), prices)
                .map_err(|e| log::warn!("cost not estimated: {e}"))
                .ok()
        });
        LlmResult {
            raw_text,
            latency_s,
            usage,
            estimated_cost,
            attempts,
            fixture_key: key,
        }
    }

    fn api_key(&self) -> Result<String> {
        let var = &self.config.api_key_env;
        match std::env::var(var) {
            Ok(value) if !value.trim().is_empty() => Ok(value),
            _ => Err(GatewayError::MissingKey { var: var.clone() }),
        }
    }

    /// POSTs the request, retrying only on 429 with exponential backoff.
    fn call(&self, http: &Client, bundle: &PromptBundle, secret: &str) -> Result<(String, Option<Usage>, u32)> {
        let body = wire::request_body(&self.config.model_name, bundle, self.config.raster)?;
        let url = self.config.endpoint();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            log::debug!("POST {url} (attempt {attempts}, model {})", self.config.model_name);
            let response = http
                .post(&url)
                .bearer_auth(secret)
                .json(&body)
                .send()
                .map_err(|e| GatewayError::Transport(e.without_url().to_string()))?;
            let status = response.status();
            let text = response
                .text()
                .map_err(|e| GatewayError::Transport(e.without_url().to_string()))?;
            match status {
                s if s.is_success() => {
                    let (reply, usage) = wire::parse_reply(&text)?;
                    return Ok((reply, usage, attempts));
                }
                StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
                    return Err(GatewayError::Auth { status: status.as_u16() })
                }
                StatusCode::TOO_MANY_REQUESTS => {
                    if attempts > self.config.max_retries {
                        return Err(GatewayError::RateLimit { attempts });
                    }
                    let delay = self.config.backoff.saturating_mul(1 << (attempts - 1).min(16));
                    log::warn!("rate limited; retrying in {delay:?}");
                    std::thread::sleep(delay);
                }
                _ => {
                    return Err(GatewayError::Upstream {
                        status: status.as_u16(),
                        detail: text.chars().take(DETAIL_LIMIT).collect(),
                    })
                }
            }
        }
    }
}

/// Endpoints sometimes echo request headers back; never let the key through.
fn redact_error(error: GatewayError, secret: &str) -> GatewayError {
    let scrub = |s: String| s.replace(secret, "[REDACTED]");
    match error {
        GatewayError::Upstream { status, detail } => GatewayError::Upstream {
            status,
            detail: scrub(detail),
        },
        GatewayError::Transport(msg) => GatewayError::Transport(scrub(msg)),
        GatewayError::Protocol(msg) => GatewayError::Protocol(scrub(msg)),
        other => other,
    }
}
