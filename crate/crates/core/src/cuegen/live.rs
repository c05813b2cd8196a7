//! Providers for an OpenAI-compatible HTTP API.
//!
//! Configuration comes from the environment:
//!
//! | variable               | meaning                                   |
//! |------------------------|-------------------------------------------|
//! | `MNEMOCUE_API_KEY`     | bearer token (falls back to `OPENAI_API_KEY`) |
//! | `MNEMOCUE_API_BASE`    | base URL, default `https://api.openai.com/v1` |
//! | `MNEMOCUE_IMAGE_MODEL` | image model, default `dall-e-2`           |
//! | `MNEMOCUE_IMAGE_SIZE`  | image size, default `512x512`             |
//!
//! Completion-style models (`*davinci*`, `*instruct*`) go to `/completions`,
//! everything else to `/chat/completions`.

use std::env;
use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{ImageProvider, ProviderConfig, ProviderError, TextProvider};

pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
const KEY_VARS: &str = "MNEMOCUE_API_KEY or OPENAI_API_KEY";

#[derive(Debug, Clone)]
pub struct ApiEndpoint {
    pub base_url: String,
    pub api_key: String,
}

impl ApiEndpoint {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        let key = env::var("MNEMOCUE_API_KEY")
            .or_else(|_| env::var("OPENAI_API_KEY"))
            .map_err(|_| ProviderError::MissingCredentials(KEY_VARS))?;
        let base = env::var("MNEMOCUE_API_BASE").unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        Ok(Self::new(base, key))
    }
}

fn client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .expect("http client")
}

fn post(
    client: &reqwest::blocking::Client,
    endpoint: &ApiEndpoint,
    path: &str,
    body: &Value,
) -> Result<Value, ProviderError> {
    let resp = client
        .post(format!("{}{path}", endpoint.base_url))
        .bearer_auth(&endpoint.api_key)
        .json(body)
        .send()
        .map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status();
    let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
    if !status.is_success() {
        return Err(ProviderError::Api {
            status: status.as_u16(),
            body: text,
        });
    }
    serde_json::from_str(&text).map_err(|e| ProviderError::BadResponse(e.to_string()))
}

fn uses_completions_endpoint(model: &str) -> bool {
    model.contains("davinci") || model.contains("instruct")
}

#[derive(Debug, Clone)]
pub struct LiveTextProvider {
    endpoint: ApiEndpoint,
    client: reqwest::blocking::Client,
    max_tokens: u32,
}

impl LiveTextProvider {
    pub fn new(endpoint: ApiEndpoint) -> Self {
        Self {
            endpoint,
            client: client(),
            max_tokens: 80,
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        Ok(Self::new(ApiEndpoint::from_env()?))
    }
}

impl TextProvider for LiveTextProvider {
    fn complete(&self, prompt: &str, config: &ProviderConfig) -> Result<String, ProviderError> {
        let (path, body) = if uses_completions_endpoint(&config.model) {
            (
                "/completions",
                json!({
                    "model": config.model,
                    "prompt": prompt,
                    "temperature": config.temperature,
                    "max_tokens": self.max_tokens,
                }),
            )
        } else {
            (
                "/chat/completions",
                json!({
                    "model": config.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "temperature": config.temperature,
                    "max_tokens": self.max_tokens,
                }),
            )
        };
        let v = post(&self.client, &self.endpoint, path, &body)?;
        let choice = &v["choices"][0];
        choice["text"]
            .as_str()
            .or_else(|| choice["message"]["content"].as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::BadResponse(format!("no completion text in {v}")))
    }
}

#[derive(Debug, Clone)]
pub struct LiveImageProvider {
    endpoint: ApiEndpoint,
    client: reqwest::blocking::Client,
    model: String,
    size: String,
}

impl LiveImageProvider {
    pub fn new(endpoint: ApiEndpoint, model: impl Into<String>, size: impl Into<String>) -> Self {
        Self {
            endpoint,
            client: client(),
            model: model.into(),
            size: size.into(),
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        Ok(Self::new(
            ApiEndpoint::from_env()?,
            env::var("MNEMOCUE_IMAGE_MODEL").unwrap_or_else(|_| "dall-e-2".into()),
            env::var("MNEMOCUE_IMAGE_SIZE").unwrap_or_else(|_| "512x512".into()),
        ))
    }
}

impl ImageProvider for LiveImageProvider {
    fn render(&self, prompt: &str, _config: &ProviderConfig) -> Result<Vec<u8>, ProviderError> {
        let body = json!({
            "model": self.model,
            "prompt": prompt,
            "n": 1,
            "size": self.size,
            "response_format": "b64_json",
        });
        let v = post(&self.client, &self.endpoint, "/images/generations", &body)?;
        let encoded = v["data"][0]["b64_json"]
            .as_str()
            .ok_or_else(|| ProviderError::BadResponse(format!("no b64_json image in {v}")))?;
        base64::engine::general_purpose::STANDARD
            .decode(encoded)
            .map_err(|e| ProviderError::BadResponse(e.to_string()))
    }
}
