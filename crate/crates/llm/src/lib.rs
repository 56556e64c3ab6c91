//! Chat-completion access for the attribution agents: one OpenAI-compatible
//! HTTP backend, an on-disk response cache, transcript record/replay keyed by
//! request hash, and JSON extraction from model output.

pub mod backend;
pub mod cache;
pub mod error;
pub mod extract;
pub mod gateway;
pub mod request;
pub mod retry;
pub mod transcript;

pub use backend::{ChatBackend, HttpBackend, HttpConfig};
pub use cache::ResponseCache;
pub use error::{ExtractionError, LlmError};
pub use extract::extract_json;
pub use gateway::{Gateway, GatewayMode, GatewayStats};
pub use request::{ChatRequest, ChatResponse, Usage};
pub use retry::RetryPolicy;
pub use transcript::{Transcript, TranscriptRecord, TranscriptWriter};
