use std::path::{Path, PathBuf};

use ctxshap_core::PromptBundle;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::wire::Usage;
use crate::{GatewayError, Result};

const KEY_DOMAIN: &[u8] = b"ctxshap-fixture-v1";

fn field(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

/// Hex SHA-256 over the length-prefixed system text, user text and images.
///
/// Images are hashed as attached to the bundle (SVG text), before any
/// rasterization, so the key does not depend on the local font set.
pub fn fixture_key(bundle: &PromptBundle) -> String {
    let mut hasher = Sha256::new();
    field(&mut hasher, KEY_DOMAIN);
    field(&mut hasher, bundle.system_text.as_bytes());
    field(&mut hasher, bundle.user_text.as_bytes());
    hasher.update((bundle.images.len() as u64).to_le_bytes());
    for image in &bundle.images {
        field(&mut hasher, image.media_type.as_bytes());
        field(&mut hasher, &image.data);
    }
    hex::encode(hasher.finalize())
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub key: String,
    pub model: String,
    pub raw_text: String,
    #[serde(default)]
    pub usage: Option<Usage>,
}

pub(crate) fn path_for(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

pub(crate) fn load(dir: &Path, key: &str) -> Result<Fixture> {
    let path = path_for(dir, key);
    let text = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(GatewayError::FixtureMiss {
                key: key.to_string(),
                dir: dir.display().to_string(),
            })
        }
        Err(e) => return Err(fixture_error(&path, e)),
    };
    let fixture: Fixture = serde_json::from_str(&text).map_err(|e| fixture_error(&path, e))?;
    if fixture.key != key {
        return Err(fixture_error(&path, format!("records key {}", fixture.key)));
    }
    Ok(fixture)
}

pub(crate) fn store(dir: &Path, fixture: &Fixture) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| fixture_error(dir, e))?;
    let path = path_for(dir, &fixture.key);
    let mut text = serde_json::to_string_pretty(fixture).map_err(|e| fixture_error(&path, e))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| fixture_error(&path, e))?;
    Ok(path)
}

fn fixture_error(path: &Path, detail: impl std::fmt::Display) -> GatewayError {
    GatewayError::Fixture {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}
