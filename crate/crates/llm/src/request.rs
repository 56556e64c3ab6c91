use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LlmError;

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 2048;

/// A single-turn chat completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system_prompt: String,
    pub user_prompt: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    pub tag: String,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        tag: impl Into<String>,
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
    ) -> Self {
        ChatRequest {
            model: model.into(),
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            tag: tag.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, n: u32) -> Self {
        self.max_output_tokens = n;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be a finite value >= 0, got {}",
                self.temperature
            )));
        }
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(LlmError::InvalidRequest(format!(
                "`{}` request has an empty prompt",
                self.tag
            )));
        }
        if self.model.trim().is_empty() {
            return Err(LlmError::InvalidRequest("model name is empty".into()));
        }
        Ok(())
    }

    /// Lowercase hex SHA-256 of the JSON array
    /// `[model, system_prompt, user_prompt, temperature, tag]`.
    ///
    /// `max_output_tokens` is deliberately left out so that changing the
    /// output budget does not invalidate caches or transcripts.
    pub fn hash(&self) -> String {
        let key = (
            &self.model,
            &self.system_prompt,
            &self.user_prompt,
            self.temperature,
            &self.tag,
        );
        let bytes = serde_json::to_vec(&key).expect("tuples of strings and floats serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
    /// Served from a cache or transcript rather than a live call.
    #[serde(default)]
    pub cached: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req() -> ChatRequest {
        ChatRequest::new("gpt-4o", "column_relevance", "sys", "user")
    }

    #[test]
    fn hash_is_pinned() {
        // sha256 of ["gpt-4o","sys","user",0.0,"column_relevance"], computed externally.
        assert_eq!(
            req().hash(),
            "14245a6bada92bd117b70ef254836cbf4ba4a32c3cdca465f2703e740c29d9e6"
        );
    }

    #[test]
    fn hash_ignores_output_budget_only() {
        let base = req().hash();
        assert_eq!(req().with_max_output_tokens(7).hash(), base);
        assert_ne!(req().with_temperature(0.5).hash(), base);
        let mut r = req();
        r.tag = "entailment".into();
        assert_ne!(r.hash(), base);
        let mut r = req();
        r.model = "qwen".into();
        assert_ne!(r.hash(), base);
    }

    #[test]
    fn prompt_boundaries_matter() {
        let a = ChatRequest::new("m", "t", "ab", "c");
        let b = ChatRequest::new("m", "t", "a", "bc");
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validation() {
        assert!(req().validate().is_ok());
        assert!(req().with_temperature(-0.1).validate().is_err());
        assert!(req().with_temperature(f64::NAN).validate().is_err());
        assert!(ChatRequest::new("m", "t", " ", "u").validate().is_err());
        assert!(ChatRequest::new("", "t", "s", "u").validate().is_err());
    }
}
