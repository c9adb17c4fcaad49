use base64::Engine;
use ctxshap_core::PromptBundle;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::raster::rasterize_svg;
use crate::{GatewayError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

fn data_url(media_type: &str, data: &[u8], raster: bool) -> Result<String> {
    let (media_type, bytes) = if raster && media_type == "image/svg+xml" {
        ("image/png", rasterize_svg(data)?)
    } else {
        (media_type, data.to_vec())
    };
    let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
    Ok(format!("data:{media_type};base64,{encoded}"))
}

/// Chat-completions request: guard as the system message, then one user
/// message holding the text part followed by one part per image.
pub(crate) fn request_body(model: &str, bundle: &PromptBundle, raster: bool) -> Result<Value> {
    let mut content = vec![json!({"type": "text", "text": bundle.user_text})];
    for image in &bundle.images {
        let url = data_url(&image.media_type, &image.data, raster)?;
        content.push(json!({"type": "image_url", "image_url": {"url": url}}));
    }
    Ok(json!({
        "model": model,
        "messages": [
            {"role": "system", "content": bundle.system_text},
            {"role": "user", "content": content},
        ],
    }))
}

#[derive(Deserialize)]
struct Reply {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

/// Text of the first choice plus token usage when reported.
pub(crate) fn parse_reply(body: &str) -> Result<(String, Option<Usage>)> {
    let reply: Reply = serde_json::from_str(body)
        .map_err(|e| GatewayError::Protocol(format!("malformed completion JSON: {e}")))?;
    let first = reply
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Protocol("response has no choices".into()))?;
    let text = first
        .message
        .content
        .ok_or_else(|| GatewayError::Protocol("first choice has no text content".into()))?;
    Ok((text, reply.usage))
}
