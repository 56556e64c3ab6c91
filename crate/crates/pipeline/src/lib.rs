//! Multi-agent cell attribution for table QA and the fact-based
//! reference-free FAIRScore metric.
//!
//! [`run_pipeline`] prunes the table to relevant columns and rows, breaks the
//! question into sub-questions, grounds each in cells and aligns answer
//! phrases with those cells. Every model call goes through a
//! [`cellattr_llm::Gateway`], so runs can be replayed from a transcript.

pub mod agents;
pub mod context;
pub mod error;
pub mod fairscore;
pub mod judge;
pub mod pipeline;
pub mod prompts;
pub mod types;

pub use agents::AttributionMode;
pub use context::{AgentConfig, AgentContext};
pub use error::AgentError;
pub use fairscore::{fairscore, FactCounts, FairScore, FairScoreConfig};
pub use judge::{EntailmentJudge, Judgment, LlmJudge, NliHttpJudge};
pub use pipeline::{run_batch, run_pipeline, InstanceFailure};
pub use prompts::PromptSet;
pub use types::{AttributionResult, ColumnSelection, PipelineVariant, SubAttribution, SubQuestion};
