use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use cellattr_llm::{ChatBackend, ChatRequest, ChatResponse, LlmError, Usage};

/// Rough whitespace token counts, so usage totals are deterministic.
pub fn usage_for(request: &ChatRequest, reply: &str) -> Usage {
    let words = |s: &str| s.split_whitespace().count() as u64;
    Usage {
        prompt_tokens: words(&request.system_prompt) + words(&request.user_prompt),
        completion_tokens: words(reply),
    }
}

pub(crate) fn respond(request: &ChatRequest, text: String) -> ChatResponse {
    ChatResponse {
        usage: usage_for(request, &text),
        text,
        cached: false,
    }
}

/// Replies with queued texts per prompt tag, in order. A request whose tag
/// has nothing left fails with a protocol error.
#[derive(Default)]
pub struct ScriptedBackend {
    replies: Mutex<HashMap<String, VecDeque<String>>>,
    log: Mutex<Vec<ChatRequest>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reply(self, tag: &str, text: impl Into<String>) -> Self {
        self.push(tag, text);
        self
    }

    pub fn push(&self, tag: &str, text: impl Into<String>) {
        self.replies
            .lock()
            .unwrap()
            .entry(tag.to_string())
            .or_default()
            .push_back(text.into());
    }

    /// Every request received so far.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn calls_for(&self, tag: &str) -> Vec<ChatRequest> {
        self.calls().into_iter().filter(|r| r.tag == tag).collect()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().unwrap().values().map(VecDeque::len).sum()
    }
}

impl ChatBackend for ScriptedBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.log.lock().unwrap().push(request.clone());
        let text = self
            .replies
            .lock()
            .unwrap()
            .get_mut(&request.tag)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| LlmError::Protocol(format!("no scripted reply left for `{}`", request.tag)))?;
        Ok(respond(request, text))
    }
}

/// Computes each reply from the request.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        (self.0)(request).map(|text| respond(request, text))
    }
}
