use cellattr_core::TableError;
use cellattr_llm::LlmError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("{agent} produced unusable output after a repair attempt: {message}")]
    Output {
        agent: String,
        message: String,
        raw: String,
    },
    #[error("no evidence rows: {0}")]
    NoEvidence(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("entailment service: {0}")]
    Judge(String),
    #[error("prompt template: {0}")]
    Prompt(String),
}
