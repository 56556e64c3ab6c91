//! On-disk response cache: `<dir>/<hash>.json`, one record per file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::LlmError;
use crate::transcript::TranscriptRecord;

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub path: PathBuf,
    pub bytes: u64,
    /// `None` when the file does not parse or its name does not match its hash.
    pub record: Option<TranscriptRecord>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, LlmError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(LlmError::io(&dir))?;
        Ok(ResponseCache { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    /// Unreadable entries count as misses.
    pub fn get(&self, hash: &str) -> Option<TranscriptRecord> {
        let text = fs::read_to_string(self.path_for(hash)).ok()?;
        match serde_json::from_str::<TranscriptRecord>(&text) {
            Ok(r) if r.hash == hash => Some(r),
            _ => {
                log::warn!("ignoring corrupt cache entry {hash}");
                None
            }
        }
    }

    /// Writes through a temporary file and rename so readers never see a
    /// partial entry.
    pub fn put(&self, record: &TranscriptRecord) -> Result<(), LlmError> {
        let path = self.path_for(&record.hash);
        let tmp = self.dir.join(format!(".{}.{}.tmp", record.hash, std::process::id()));
        let body = serde_json::to_vec_pretty(record).expect("records serialize");
        fs::write(&tmp, body).map_err(LlmError::io(&tmp))?;
        fs::rename(&tmp, &path).map_err(LlmError::io(&path))
    }

    /// All `*.json` entries, sorted by file name.
    pub fn entries(&self) -> Result<Vec<CacheEntry>, LlmError> {
        let mut out = Vec::new();
        for item in fs::read_dir(&self.dir).map_err(LlmError::io(&self.dir))? {
            let item = item.map_err(LlmError::io(&self.dir))?;
            let path = item.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let bytes = item.metadata().map(|m| m.len()).unwrap_or(0);
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let record = fs::read_to_string(&path)
                .ok()
                .and_then(|t| serde_json::from_str::<TranscriptRecord>(&t).ok())
                .filter(|r| r.hash == stem);
            out.push(CacheEntry { path, bytes, record });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }

    /// Deletes corrupt entries, leftover temporary files and, when `keep` is
    /// given, every entry whose hash it rejects. Returns the removed paths.
    pub fn gc(&self, keep: Option<&dyn Fn(&str) -> bool>) -> Result<Vec<PathBuf>, LlmError> {
        let mut removed = Vec::new();
        for item in fs::read_dir(&self.dir).map_err(LlmError::io(&self.dir))? {
            let path = item.map_err(LlmError::io(&self.dir))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with('.') && name.ends_with(".tmp") {
                fs::remove_file(&path).map_err(LlmError::io(&path))?;
                removed.push(path);
            }
        }
        for entry in self.entries()? {
            let drop = match (&entry.record, keep) {
                (None, _) => true,
                (Some(r), Some(keep)) => !keep(&r.hash),
                (Some(_), None) => false,
            };
            if drop {
                fs::remove_file(&entry.path).map_err(LlmError::io(&entry.path))?;
                removed.push(entry.path);
            }
        }
        removed.sort();
        Ok(removed)
    }
}
