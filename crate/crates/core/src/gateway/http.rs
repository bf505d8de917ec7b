//! Blocking HTTP backend for OpenAI-compatible endpoints. Chat and legacy
//! completions formats are selected by the URL path; the instance metadata on
//! the request is not sent upstream.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde_json::json;

use crate::error::{CoreError, Result};

use super::{Backend, CompletionRequest, GatewayConfig};

pub struct HttpBackend {
    config: GatewayConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    chat: bool,
    calls: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: GatewayConfig) -> Result<Self> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                CoreError::Gateway(format!("API key environment variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| CoreError::Gateway(format!("cannot build HTTP client: {e}")))?;
        let chat = config.endpoint.contains("/chat/");
        Ok(HttpBackend {
            config,
            client,
            api_key,
            chat,
            calls: AtomicU64::new(0),
        })
    }

    fn body(&self, request: &CompletionRequest) -> serde_json::Value {
        if self.chat {
            json!({
                "model": self.config.model_id,
                "messages": [{"role": "user", "content": request.prompt}],
                "max_tokens": request.max_tokens,
                "temperature": 0,
            })
        } else {
            json!({
                "model": self.config.model_id,
                "prompt": request.prompt,
                "max_tokens": request.max_tokens,
                "temperature": 0,
            })
        }
    }

    fn extract_text(&self, value: &serde_json::Value) -> Option<String> {
        let choice = value.get("choices")?.get(0)?;
        let text = if self.chat {
            choice.get("message")?.get("content")?.as_str()?
        } else {
            choice.get("text")?.as_str()?
        };
        Some(text.to_string())
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let mut http_request = self.client.post(&self.config.endpoint).json(&self.body(request));
        if let Some(key) = &self.api_key {
            http_request = http_request.bearer_auth(key);
        }
        let response = http_request.send().map_err(|e| format!("request failed: {e}"))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(format!("HTTP {status}: {}", body.chars().take(200).collect::<String>()));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| format!("invalid JSON response: {e}"))?;
        self.extract_text(&value)
            .ok_or_else(|| "response has no completion text".to_string())
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::CompositionId;

    fn config(endpoint: &str) -> GatewayConfig {
        GatewayConfig {
            endpoint: endpoint.into(),
            model_id: "m".into(),
            ..GatewayConfig::mock("correct")
        }
    }

    fn backend(endpoint: &str) -> HttpBackend {
        HttpBackend::new(config(endpoint)).unwrap()
    }

    fn request() -> CompletionRequest {
        CompletionRequest {
            prompt: "hello".into(),
            max_tokens: 4,
            instance_id: "i".into(),
            composition_id: CompositionId(0),
            instance_label: 1,
        }
    }

    #[test]
    fn chat_format_detected_from_path() {
        let b = backend("https://api.example.com/v1/chat/completions");
        let body = b.body(&request());
        assert!(body.get("messages").is_some());
        assert!(body.get("prompt").is_none());
        assert_eq!(body["temperature"], 0);
    }

    #[test]
    fn completions_format_uses_prompt_field() {
        let b = backend("https://api.example.com/v1/completions");
        let body = b.body(&request());
        assert_eq!(body["prompt"], "hello");
        assert!(body.get("messages").is_none());
    }

    #[test]
    fn response_text_extraction() {
        let chat = backend("https://api.example.com/v1/chat/completions");
        let value = serde_json::json!({"choices": [{"message": {"content": "Yes"}}]});
        assert_eq!(chat.extract_text(&value), Some("Yes".into()));

        let legacy = backend("https://api.example.com/v1/completions");
        let value = serde_json::json!({"choices": [{"text": "No"}]});
        assert_eq!(legacy.extract_text(&value), Some("No".into()));
        assert_eq!(legacy.extract_text(&serde_json::json!({"choices": []})), None);
    }

    #[test]
    fn missing_api_key_env_errors() {
        let mut c = config("https://api.example.com/v1/completions");
        c.api_key_env = Some("DEFINITELY_UNSET_KEY_VAR_XYZ".into());
        assert!(HttpBackend::new(c).is_err());
    }
}
