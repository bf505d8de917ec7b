//! Deterministic mock backend selected by `mock:` endpoints. Behavior is a
//! pure function of the request plus an optional seeded failure schedule, so
//! repeated runs produce identical records.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::{CoreError, Result};

use super::{Backend, CompletionRequest, GatewayConfig};

/// Marker token prefix recognized by the marker rule inside instance texts.
pub const MARKER_PREFIX: &str = "optimal-";

#[derive(Debug, Clone, PartialEq)]
pub enum MockRule {
    /// Always answer the instance's true label.
    AlwaysCorrect,
    /// Always answer the complement of the true label.
    AlwaysIncorrect,
    /// Always answer the given label regardless of the instance.
    AlwaysLabel(u8),
    /// Answer correctly iff the prompt carries a marker token
    /// `optimal-<k>` with `k` equal to the request's composition id.
    Marker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MockProfile {
    pub rule: MockRule,
    /// Fraction of requests whose first attempt fails with a transport error.
    pub failure_rate: f64,
    pub failure_seed: u64,
}

impl MockProfile {
    /// Parse a profile string, e.g. `correct`, `marker`,
    /// `correct,fail=0.2,seed=7`.
    pub fn parse(profile: &str) -> Result<Self> {
        let mut parts = profile.split(',');
        let rule = match parts.next().unwrap_or("").trim() {
            "" | "correct" => MockRule::AlwaysCorrect,
            "incorrect" => MockRule::AlwaysIncorrect,
            "yes" => MockRule::AlwaysLabel(1),
            "no" => MockRule::AlwaysLabel(0),
            "marker" => MockRule::Marker,
            other => {
                return Err(CoreError::Gateway(format!(
                    "unknown mock profile rule '{other}'"
                )))
            }
        };
        let mut failure_rate = 0.0;
        let mut failure_seed = 0;
        for part in parts {
            let part = part.trim();
            if let Some(v) = part.strip_prefix("fail=") {
                failure_rate = v.parse::<f64>().map_err(|_| {
                    CoreError::Gateway(format!("bad mock failure rate '{v}'"))
                })?;
                if !(0.0..=1.0).contains(&failure_rate) {
                    return Err(CoreError::Gateway(format!(
                        "mock failure rate {failure_rate} outside [0, 1]"
                    )));
                }
            } else if let Some(v) = part.strip_prefix("seed=") {
                failure_seed = v.parse::<u64>().map_err(|_| {
                    CoreError::Gateway(format!("bad mock failure seed '{v}'"))
                })?;
            } else {
                return Err(CoreError::Gateway(format!(
                    "unknown mock profile option '{part}'"
                )));
            }
        }
        Ok(MockProfile {
            rule,
            failure_rate,
            failure_seed,
        })
    }
}

pub struct MockBackend {
    profile: MockProfile,
    config: GatewayConfig,
    calls: AtomicU64,
    attempts: Mutex<HashMap<u64, u32>>,
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64 ^ seed;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn find_marker(prompt: &str) -> Option<u64> {
    let start = prompt.find(MARKER_PREFIX)? + MARKER_PREFIX.len();
    let digits: String = prompt[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

impl MockBackend {
    pub fn new(profile: MockProfile, config: GatewayConfig) -> Self {
        MockBackend {
            profile,
            config,
            calls: AtomicU64::new(0),
            attempts: Mutex::new(HashMap::new()),
        }
    }

    fn should_fail(&self, request: &CompletionRequest) -> bool {
        if self.profile.failure_rate == 0.0 {
            return false;
        }
        let key = fnv1a(
            format!("{}|{}|{}", request.instance_id, request.composition_id.0, request.prompt)
                .as_bytes(),
            self.profile.failure_seed,
        );
        let fraction = (key >> 11) as f64 / (1u64 << 53) as f64;
        if fraction >= self.profile.failure_rate {
            return false;
        }
        // Only the first attempt for a given request fails, so transport
        // retries observably recover.
        let mut attempts = self.attempts.lock().unwrap();
        let count = attempts.entry(key).or_insert(0);
        *count += 1;
        *count == 1
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.should_fail(request) {
            return Err("injected mock transport failure".into());
        }
        let correct = request.instance_label;
        let label = match &self.profile.rule {
            MockRule::AlwaysCorrect => correct,
            MockRule::AlwaysIncorrect => 1 - correct,
            MockRule::AlwaysLabel(l) => *l,
            MockRule::Marker => match find_marker(&request.prompt) {
                Some(k) if k == request.composition_id.0 => correct,
                _ => 1 - correct,
            },
        };
        Ok(self.config.label_word(label).to_string())
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
