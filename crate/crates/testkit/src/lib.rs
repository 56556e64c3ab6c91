//! Test doubles for the chat gateway and shared table fixtures.

pub mod backends;
pub mod fixtures;
pub mod oracle;
pub mod random;

pub use backends::{FnBackend, ScriptedBackend};
pub use oracle::OracleBackend;
pub use random::RandomBackend;
