//! Label collection from a completion endpoint: constrained-decoding
//! emulation over HTTP, chain-of-prompts reasoning, and a deterministic mock
//! backend for tests and dry runs.

pub mod collect;
pub mod http;
pub mod mock;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::prompt::RenderedPrompt;
use crate::space::CompositionId;

pub use collect::{collect, CollectOutcome, CollectRequest};
pub use http::HttpBackend;
pub use mock::{MockBackend, MockProfile, MockRule};

/// How the upstream answer text is turned into a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputParser {
    /// First token, punctuation-trimmed, case-insensitive label match.
    BareLabel,
    /// Parse a JSON object and match the named field's value.
    JsonField(String),
}

impl Default for OutputParser {
    fn default() -> Self {
        OutputParser::BareLabel
    }
}

fn default_labels() -> (String, String) {
    ("Yes".to_string(), "No".to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// HTTP(S) URL of an OpenAI-compatible endpoint, or `mock:<profile>`.
    pub endpoint: String,
    pub model_id: String,
    /// (positive, negative), default ("Yes", "No").
    #[serde(default = "default_labels")]
    pub allowed_labels: (String, String),
    #[serde(default = "GatewayConfig::default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "GatewayConfig::default_backoff_base_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "GatewayConfig::default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "GatewayConfig::default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub output_parser: OutputParser,
    /// Environment variable holding the API key, if the endpoint needs one.
    #[serde(default)]
    pub api_key_env: Option<String>,
}

impl GatewayConfig {
    fn default_max_retries() -> u32 {
        3
    }
    fn default_backoff_base_ms() -> u64 {
        250
    }
    fn default_timeout_ms() -> u64 {
        60_000
    }
    fn default_max_in_flight() -> usize {
        4
    }

    pub fn mock(profile: &str) -> Self {
        GatewayConfig {
            endpoint: format!("mock:{profile}"),
            model_id: "mock".into(),
            allowed_labels: default_labels(),
            max_retries: 2,
            backoff_base_ms: 0,
            timeout_ms: 1_000,
            max_in_flight: 4,
            output_parser: OutputParser::BareLabel,
            api_key_env: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.allowed_labels.0 == self.allowed_labels.1 {
            return Err(CoreError::Gateway("allowed labels must be distinct".into()));
        }
        if self.max_in_flight == 0 {
            return Err(CoreError::Gateway("max_in_flight must be positive".into()));
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint.starts_with("mock:")
    }

    pub fn label_word(&self, label: u8) -> &str {
        if label == 1 {
            &self.allowed_labels.0
        } else {
            &self.allowed_labels.1
        }
    }
}

/// One completion request handed to a backend. The instance metadata is only
/// consumed by the mock backend.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub instance_id: String,
    pub composition_id: CompositionId,
    pub instance_label: u8,
}

/// A completion source. Implementations must be shareable across the
/// collection worker threads.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, String>;

    /// Upstream calls issued so far.
    fn calls(&self) -> u64;
}

/// Choose a backend from the config endpoint. The `mock:` scheme selects the
/// deterministic mock.
pub fn backend_for(config: &GatewayConfig) -> Result<Box<dyn Backend>> {
    if let Some(profile) = config.endpoint.strip_prefix("mock:") {
        Ok(Box::new(MockBackend::new(MockProfile::parse(profile)?, config.clone())))
    } else if config.endpoint.starts_with("http://") || config.endpoint.starts_with("https://") {
        Ok(Box::new(HttpBackend::new(config.clone())?))
    } else {
        Err(CoreError::Gateway(format!(
            "unsupported endpoint '{}'",
            config.endpoint
        )))
    }
}

/// Map an upstream answer to a label. Total: every string maps to exactly one
/// of {1, 0, None}.
pub fn parse_label(raw: &str, config: &GatewayConfig) -> Option<u8> {
    let candidate = match &config.output_parser {
        OutputParser::BareLabel => raw.trim().split_whitespace().next()?.to_string(),
        OutputParser::JsonField(field) => {
            let value: serde_json::Value = serde_json::from_str(raw.trim()).ok()?;
            value.get(field)?.as_str()?.to_string()
        }
    };
    let cleaned = candidate.trim_matches(|c: char| !c.is_alphanumeric());
    if cleaned.eq_ignore_ascii_case(&config.allowed_labels.0) {
        Some(1)
    } else if cleaned.eq_ignore_ascii_case(&config.allowed_labels.1) {
        Some(0)
    } else {
        None
    }
}

fn backoff(config: &GatewayConfig, attempt: u32) {
    if config.backoff_base_ms > 0 {
        let ms = config.backoff_base_ms.saturating_mul(1u64 << attempt.min(10));
        std::thread::sleep(std::time::Duration::from_millis(ms));
    }
}

/// Issue one request with transport retries. Returns the raw completion or a
/// transport error description once retries are exhausted.
fn complete_with_retries(
    backend: &dyn Backend,
    config: &GatewayConfig,
    request: &CompletionRequest,
) -> std::result::Result<String, String> {
    let mut last_error = String::new();
    for attempt in 0..=config.max_retries {
        match backend.complete(request) {
            Ok(raw) => return Ok(raw),
            Err(e) => {
                last_error = e;
                if attempt < config.max_retries {
                    backoff(config, attempt);
                }
            }
        }
    }
    Err(last_error)
}

use crate::matrix::PredictionRecord;

fn make_record(
    request: &CompletionRequest,
    config: &GatewayConfig,
    seed: u64,
    raw_output: String,
    predicted_label: Option<u8>,
) -> PredictionRecord {
    PredictionRecord {
        instance_id: request.instance_id.clone(),
        composition_id: request.composition_id,
        model_id: config.model_id.clone(),
        seed,
        raw_output,
        predicted_label,
        correct: predicted_label.map(|l| l == request.instance_label),
    }
}

const LABEL_MAX_TOKENS: u32 = 4;
const REASONING_MAX_TOKENS: u32 = 256;

/// Classify with a label-constrained completion: minimal token budget, strict
/// parsing, and one corrective retry with an explicit label instruction.
pub fn classify(
    prompt: &RenderedPrompt,
    config: &GatewayConfig,
    backend: &dyn Backend,
    instance_id: &str,
    instance_label: u8,
    composition_id: CompositionId,
    seed: u64,
) -> Result<PredictionRecord> {
    if !prompt.reasoning_chain.is_empty() {
        return Err(CoreError::Gateway(
            "classify requires a prompt without a reasoning chain".into(),
        ));
    }
    let request = CompletionRequest {
        prompt: prompt.full_text.clone(),
        max_tokens: LABEL_MAX_TOKENS,
        instance_id: instance_id.to_string(),
        composition_id,
        instance_label,
    };
    Ok(constrained_label_call(&request, config, backend, seed))
}

fn constrained_label_call(
    request: &CompletionRequest,
    config: &GatewayConfig,
    backend: &dyn Backend,
    seed: u64,
) -> PredictionRecord {
    match complete_with_retries(backend, config, request) {
        Ok(raw) => {
            if let Some(label) = parse_label(&raw, config) {
                return make_record(request, config, seed, raw, Some(label));
            }
            // Corrective retry: re-ask with an explicit label instruction.
            let corrective = CompletionRequest {
                prompt: format!(
                    "{}\n\nAnswer only with \"{}\" or \"{}\".",
                    request.prompt, config.allowed_labels.0, config.allowed_labels.1
                ),
                ..request.clone()
            };
            match complete_with_retries(backend, config, &corrective) {
                Ok(retry_raw) => {
                    let label = parse_label(&retry_raw, config);
                    make_record(
                        request,
                        config,
                        seed,
                        format!("{raw}\n---corrective---\n{retry_raw}"),
                        label,
                    )
                }
                Err(e) => make_record(
                    request,
                    config,
                    seed,
                    format!("{raw}\n---corrective transport error: {e}"),
                    None,
                ),
            }
        }
        Err(e) => make_record(request, config, seed, format!("transport error: {e}"), None),
    }
}

/// Chain-of-prompts classification: each reasoning sub-question is answered
/// unconstrained with the growing transcript as context; only the final call
/// is label-constrained. The record's raw output is the full transcript.
pub fn classify_with_reasoning(
    prompt: &RenderedPrompt,
    config: &GatewayConfig,
    backend: &dyn Backend,
    instance_id: &str,
    instance_label: u8,
    composition_id: CompositionId,
    seed: u64,
) -> Result<PredictionRecord> {
    if prompt.reasoning_chain.is_empty() {
        return Err(CoreError::Gateway(
            "classify_with_reasoning requires a reasoning chain".into(),
        ));
    }
    let mut transcript = String::new();
    let mut context = prompt.full_text.clone();
    let steps = &prompt.reasoning_chain[..prompt.reasoning_chain.len() - 1];
    let final_prompt = &prompt.reasoning_chain[prompt.reasoning_chain.len() - 1];

    for (i, step) in steps.iter().enumerate() {
        context.push_str("\n\n");
        context.push_str(step);
        let request = CompletionRequest {
            prompt: context.clone(),
            max_tokens: REASONING_MAX_TOKENS,
            instance_id: instance_id.to_string(),
            composition_id,
            instance_label,
        };
        match complete_with_retries(backend, config, &request) {
            Ok(answer) => {
                transcript.push_str(&format!("Q{}: {step}\nA{}: {answer}\n", i + 1, i + 1));
                context.push('\n');
                context.push_str(&answer);
            }
            Err(e) => {
                // Partial transcript, null label.
                let request = CompletionRequest {
                    prompt: prompt.full_text.clone(),
                    max_tokens: LABEL_MAX_TOKENS,
                    instance_id: instance_id.to_string(),
                    composition_id,
                    instance_label,
                };
                return Ok(make_record(
                    &request,
                    config,
                    seed,
                    format!("{transcript}step {} transport error: {e}", i + 1),
                    None,
                ));
            }
        }
    }

    context.push_str("\n\n");
    context.push_str(final_prompt);
    let request = CompletionRequest {
        prompt: context,
        max_tokens: LABEL_MAX_TOKENS,
        instance_id: instance_id.to_string(),
        composition_id,
        instance_label,
    };
    let mut record = constrained_label_call(&request, config, backend, seed);
    record.raw_output = format!("{transcript}final: {}", record.raw_output);
    Ok(record)
}


#[cfg(test)]
mod tests {
    use super::test_support::ScriptedBackend;
    use super::*;

    fn config() -> GatewayConfig {
        let mut c = GatewayConfig::mock("correct");
        c.max_retries = 1;
        c
    }

    fn bare_prompt() -> RenderedPrompt {
        RenderedPrompt {
            segments: vec![],
            full_text: "prompt".into(),
            reasoning_chain: vec![],
        }
    }

    fn reasoning_prompt(steps: usize) -> RenderedPrompt {
        let mut chain: Vec<String> = (0..steps).map(|i| format!("step {i}?")).collect();
        chain.push("Answer Yes or No.".into());
        RenderedPrompt {
            segments: vec![],
            full_text: "prompt".into(),
            reasoning_chain: chain,
        }
    }

    fn run(backend: &dyn Backend, prompt: &RenderedPrompt) -> PredictionRecord {
        classify(prompt, &config(), backend, "i1", 1, CompositionId(0), 0).unwrap()
    }

    #[test]
    fn parser_fixture_suite() {
        let c = config();
        assert_eq!(parse_label("Yes", &c), Some(1));
        assert_eq!(parse_label("yes,", &c), Some(1));
        assert_eq!(parse_label("no.", &c), Some(0));
        assert_eq!(parse_label("NO", &c), Some(0));
        assert_eq!(parse_label("maybe", &c), None);
        assert_eq!(parse_label("", &c), None);
        assert_eq!(parse_label("  \"Yes\" indeed", &c), Some(1));
    }

    #[test]
    fn json_field_parser() {
        let mut c = config();
        c.output_parser = OutputParser::JsonField("isBiased".into());
        assert_eq!(parse_label(r#"{"isBiased": "yes"}"#, &c), Some(1));
        assert_eq!(parse_label(r#"{"isBiased": "No"}"#, &c), Some(0));
        assert_eq!(parse_label(r#"{"other": "yes"}"#, &c), None);
        assert_eq!(parse_label("not json", &c), None);
    }

    #[test]
    fn direct_yes_maps_to_one() {
        let backend = ScriptedBackend::new(vec![Ok("Yes".into())]);
        let record = run(&backend, &bare_prompt());
        assert_eq!(record.predicted_label, Some(1));
        assert_eq!(record.correct, Some(true));
    }

    #[test]
    fn corrective_retry_recovers() {
        let backend = ScriptedBackend::new(vec![Ok("maybe".into()), Ok("no.".into())]);
        let record = run(&backend, &bare_prompt());
        assert_eq!(record.predicted_label, Some(0));
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn exhausted_retries_give_null() {
        let backend = ScriptedBackend::new(vec![Ok("maybe".into()), Ok("maybe".into())]);
        let record = run(&backend, &bare_prompt());
        assert_eq!(record.predicted_label, None);
        assert_eq!(record.correct, None);
    }

    #[test]
    fn transport_errors_retry_then_fail() {
        let backend = ScriptedBackend::new(vec![
            Err("boom".into()),
            Err("boom".into()),
        ]);
        let record = run(&backend, &bare_prompt());
        assert_eq!(record.predicted_label, None);
        assert!(record.raw_output.contains("transport error"));
        // max_retries = 1 -> two attempts.
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn transport_recovery_within_retries() {
        let backend = ScriptedBackend::new(vec![Err("flaky".into()), Ok("Yes".into())]);
        let record = run(&backend, &bare_prompt());
        assert_eq!(record.predicted_label, Some(1));
    }

    #[test]
    fn classify_rejects_reasoning_prompts() {
        let backend = ScriptedBackend::new(vec![]);
        assert!(classify(
            &reasoning_prompt(1),
            &config(),
            &backend,
            "i1",
            1,
            CompositionId(0),
            0
        )
        .is_err());
    }

    #[test]
    fn reasoning_transcript_orders_steps() {
        let backend = ScriptedBackend::new(vec![
            Ok("answer one".into()),
            Ok("answer two".into()),
            Ok("No".into()),
        ]);
        let record = classify_with_reasoning(
            &reasoning_prompt(2),
            &config(),
            &backend,
            "i1",
            1,
            CompositionId(0),
            0,
        )
        .unwrap();
        assert_eq!(record.predicted_label, Some(0));
        let q1 = record.raw_output.find("Q1: step 0?").unwrap();
        let q2 = record.raw_output.find("Q2: step 1?").unwrap();
        assert!(q1 < q2);
        assert!(record.raw_output.contains("A1: answer one"));
    }

    #[test]
    fn final_answer_overrides_reasoning_text() {
        let backend = ScriptedBackend::new(vec![Ok("definitely biased!".into()), Ok("No".into())]);
        let record = classify_with_reasoning(
            &reasoning_prompt(1),
            &config(),
            &backend,
            "i1",
            1,
            CompositionId(0),
            0,
        )
        .unwrap();
        assert_eq!(record.predicted_label, Some(0));
    }

    #[test]
    fn failure_at_mid_step_keeps_partial_transcript() {
        // 3 reasoning steps; step 2 fails on both attempts.
        let backend = ScriptedBackend::new(vec![
            Ok("first".into()),
            Err("down".into()),
            Err("down".into()),
        ]);
        let record = classify_with_reasoning(
            &reasoning_prompt(3),
            &config(),
            &backend,
            "i1",
            1,
            CompositionId(0),
            0,
        )
        .unwrap();
        assert_eq!(record.predicted_label, None);
        assert!(record.raw_output.contains("A1: first"));
        assert!(!record.raw_output.contains("A2:"));
        assert!(record.raw_output.contains("step 2 transport error"));
    }
}
