//! Completion client contract, HTTP transport and retry policy.

use std::thread;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

/// Request body sent to a completion endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_new_tokens: usize,
    /// Always true: argmax decoding, no sampling temperature.
    pub greedy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub prompt_tokens: usize,
    pub completion_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFailure(pub String);

pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, TransportFailure>;

    /// Identifies the model behind the client; part of the cache key.
    fn model_id(&self) -> &str;
}

/// Client for an HTTP endpoint accepting `{prompt, max_new_tokens, greedy}`
/// and answering `{text, prompt_tokens, completion_tokens}`.
pub struct HttpCompletionClient {
    endpoint: String,
    model_id: String,
    agent: ureq::Agent,
}

impl HttpCompletionClient {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            agent,
        }
    }
}

impl CompletionClient for HttpCompletionClient {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, TransportFailure> {
        let response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| TransportFailure(e.to_string()))?;
        response
            .into_json::<CompletionResponse>()
            .map_err(|e| TransportFailure(format!("bad response body: {e}")))
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(attempts: u32) -> Self {
        Self {
            attempts,
            base_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (1-based): base * 2^(retry-1).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry.saturating_sub(1))
    }
}

/// Calls the client up to `policy.attempts` times with exponential backoff.
/// Returns the last failure and the number of attempts made.
pub fn complete_with_retry(
    client: &dyn CompletionClient,
    request: &CompletionRequest,
    policy: RetryPolicy,
) -> Result<CompletionResponse, (TransportFailure, u32)> {
    let attempts = policy.attempts.max(1);
    let mut last = TransportFailure("no attempt made".into());
    for attempt in 1..=attempts {
        match client.complete(request) {
            Ok(r) => return Ok(r),
            Err(e) => {
                warn!("completion attempt {attempt}/{attempts} failed: {}", e.0);
                last = e;
                if attempt < attempts {
                    thread::sleep(policy.delay(attempt));
                }
            }
        }
    }
    Err((last, attempts))
}
