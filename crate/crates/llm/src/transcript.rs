//! JSON-lines record of requests and their responses, replayable by request hash.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::LlmError;
use crate::request::{ChatRequest, ChatResponse, Usage};

const PREVIEW_CHARS: usize = 160;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub tag: String,
    pub model: String,
    pub temperature: f64,
    pub prompt_preview: String,
}

impl RequestSummary {
    pub fn of(request: &ChatRequest) -> Self {
        RequestSummary {
            tag: request.tag.clone(),
            model: request.model.clone(),
            temperature: request.temperature,
            prompt_preview: request.user_prompt.chars().take(PREVIEW_CHARS).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedResponse {
    pub text: String,
    #[serde(default)]
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub hash: String,
    pub request: RequestSummary,
    pub response: RecordedResponse,
}

impl TranscriptRecord {
    pub fn new(hash: String, request: &ChatRequest, response: &ChatResponse) -> Self {
        TranscriptRecord {
            hash,
            request: RequestSummary::of(request),
            response: RecordedResponse {
                text: response.text.clone(),
                usage: response.usage,
            },
        }
    }

    pub fn to_response(&self) -> ChatResponse {
        ChatResponse {
            text: self.response.text.clone(),
            usage: self.response.usage,
            cached: true,
        }
    }
}

/// Records indexed by hash. Later records win over earlier ones.
#[derive(Debug, Default, Clone)]
pub struct Transcript {
    records: HashMap<String, TranscriptRecord>,
}

impl Transcript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(LlmError::io(path))?;
        Self::from_reader(BufReader::new(file)).map_err(|e| match e {
            LlmError::Protocol(m) => LlmError::Protocol(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LlmError> {
        let mut records = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(LlmError::io("<transcript>"))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord = serde_json::from_str(&line)
                .map_err(|e| LlmError::Protocol(format!("transcript line {}: {e}", i + 1)))?;
            records.insert(rec.hash.clone(), rec);
        }
        Ok(Transcript { records })
    }

    pub fn insert(&mut self, record: TranscriptRecord) {
        self.records.insert(record.hash.clone(), record);
    }

    pub fn get(&self, hash: &str) -> Option<&TranscriptRecord> {
        self.records.get(hash)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records sorted by hash.
    pub fn records(&self) -> Vec<&TranscriptRecord> {
        let mut v: Vec<_> = self.records.values().collect();
        v.sort_by(|a, b| a.hash.cmp(&b.hash));
        v
    }
}

/// Appends records to a transcript file, one line each, skipping hashes it
/// has already written.
pub struct TranscriptWriter {
    path: PathBuf,
    inner: Mutex<(BufWriter<File>, HashSet<String>)>,
}

impl TranscriptWriter {
    /// Opens `path` for appending; hashes already in the file are not rewritten.
    pub fn append(path: &Path) -> Result<Self, LlmError> {
        let seen = if path.exists() {
            Transcript::load(path)?.records.into_keys().collect()
        } else {
            HashSet::new()
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(LlmError::io(path))?;
        Ok(TranscriptWriter {
            path: path.to_path_buf(),
            inner: Mutex::new((BufWriter::new(file), seen)),
        })
    }

    pub fn write(&self, record: &TranscriptRecord) -> Result<(), LlmError> {
        let mut guard = self.inner.lock().expect("transcript lock poisoned");
        let (out, seen) = &mut *guard;
        if !seen.insert(record.hash.clone()) {
            return Ok(());
        }
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(out, "{line}")
            .and_then(|_| out.flush())
            .map_err(LlmError::io(&self.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(hash: &str, text: &str) -> TranscriptRecord {
        let req = ChatRequest::new("m", "tag", "s", "u".repeat(500));
        let resp = ChatResponse {
            text: text.into(),
            usage: Usage {
                prompt_tokens: 3,
                completion_tokens: 4,
            },
            cached: false,
        };
        TranscriptRecord::new(hash.into(), &req, &resp)
    }

    #[test]
    fn writer_appends_and_dedupes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let w = TranscriptWriter::append(&path).unwrap();
        w.write(&record("h1", "one")).unwrap();
        w.write(&record("h1", "again")).unwrap();
        w.write(&record("h2", "two")).unwrap();
        drop(w);
        let w = TranscriptWriter::append(&path).unwrap();
        w.write(&record("h2", "dup")).unwrap();
        w.write(&record("h3", "three")).unwrap();
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let t = Transcript::load(&path).unwrap();
        assert_eq!(t.get("h1").unwrap().response.text, "one");
        assert_eq!(t.get("h1").unwrap().request.prompt_preview.chars().count(), PREVIEW_CHARS);
        let resp = t.get("h3").unwrap().to_response();
        assert!(resp.cached);
        assert_eq!(resp.usage.completion_tokens, 4);
        let hashes: Vec<_> = t.records().iter().map(|r| r.hash.as_str()).collect();
        assert_eq!(hashes, ["h1", "h2", "h3"]);
    }

    #[test]
    fn bad_lines_are_reported() {
        let err = Transcript::from_reader("{\"hash\": 1}\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
