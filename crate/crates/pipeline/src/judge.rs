use std::time::Duration;

use cellattr_llm::retry::{retry_with_backoff, AttemptError, RetryPolicy};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::context::{as_text, AgentContext};
use crate::error::AgentError;
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub entailed: bool,
    /// Confidence in `[0, 1]`.
    pub score: f64,
}

/// Decides whether a premise entails a hypothesis.
pub trait EntailmentJudge: Send + Sync {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<Judgment, AgentError>;
}

/// Asks the chat model through the gateway.
pub struct LlmJudge<'a> {
    ctx: &'a AgentContext<'a>,
}

impl<'a> LlmJudge<'a> {
    pub fn new(ctx: &'a AgentContext<'a>) -> Self {
        LlmJudge { ctx }
    }
}

impl EntailmentJudge for LlmJudge<'_> {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<Judgment, AgentError> {
        self.ctx.ask(
            prompts::ENTAILMENT,
            &[("premise", premise), ("hypothesis", hypothesis)],
            parse_judgment,
        )
    }
}

fn parse_judgment(v: &Value) -> Result<Judgment, String> {
    let entailed = match v.get("entailed").or_else(|| v.get("entailment")) {
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "entailed" | "entailment" => true,
            "false" | "no" | "not_entailed" | "contradiction" | "neutral" => false,
            other => return Err(format!("unrecognised `entailed` value `{other}`")),
        },
        _ => match v.get("label").and_then(as_text) {
            Some(label) => label.eq_ignore_ascii_case("entailment"),
            None => return Err("missing boolean `entailed`".into()),
        },
    };
    let score = v
        .get("score")
        .and_then(Value::as_f64)
        .map(|s| s.clamp(0.0, 1.0))
        .unwrap_or(if entailed { 1.0 } else { 0.0 });
    Ok(Judgment { entailed, score })
}

/// Client for an NLI service: `POST url` with `{"premise", "hypothesis"}`,
/// answering `{"label": "entailment" | ..., "score": x}` or
/// `{"entailed": bool, "score": x}`.
pub struct NliHttpJudge {
    client: reqwest::blocking::Client,
    url: String,
    threshold: f64,
    retry: RetryPolicy,
}

impl NliHttpJudge {
    /// `threshold` is the minimum score for an `entailment` label to count.
    pub fn new(url: impl Into<String>, threshold: f64, timeout: Duration) -> Result<Self, AgentError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AgentError::Judge(e.to_string()))?;
        Ok(NliHttpJudge {
            client,
            url: url.into(),
            threshold,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl EntailmentJudge for NliHttpJudge {
    fn judge(&self, premise: &str, hypothesis: &str) -> Result<Judgment, AgentError> {
        let body = json!({"premise": premise, "hypothesis": hypothesis});
        let value: Value = retry_with_backoff(&self.retry, std::thread::sleep, |_| {
            let resp = self
                .client
                .post(&self.url)
                .json(&body)
                .send()
                .map_err(|e| AttemptError::retryable(None, e.to_string()))?;
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                return Err(AttemptError::retryable(Some(status.as_u16()), format!("HTTP {status}")));
            }
            if !status.is_success() {
                return Err(AttemptError::fatal(Some(status.as_u16()), format!("HTTP {status}")));
            }
            resp.json()
                .map_err(|e| AttemptError::fatal(Some(status.as_u16()), e.to_string()))
        })
        .map_err(|e| AgentError::Judge(e.to_string()))?;
        let mut j = parse_judgment(&value).map_err(AgentError::Judge)?;
        if j.entailed && value.get("label").is_some() && j.score < self.threshold {
            j.entailed = false;
        }
        Ok(j)
    }
}
