//! `cache gc` and `cache inspect`.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use cellattr_llm::{ResponseCache, Transcript, TranscriptRecord};

use crate::args::CacheCommand;
use crate::config::FileConfig;
use crate::{Outcome, UsageError};

fn cache_dir(flag: &Option<PathBuf>, file: &FileConfig) -> Option<PathBuf> {
    flag.clone().or(file.gateway.cache_dir.clone())
}

/// Per-tag record counts and token totals.
fn summarize<'a>(records: impl Iterator<Item = &'a TranscriptRecord>) -> String {
    let mut tags: BTreeMap<&str, (usize, u64, u64)> = BTreeMap::new();
    for r in records {
        let e = tags.entry(r.request.tag.as_str()).or_default();
        e.0 += 1;
        e.1 += r.response.usage.prompt_tokens;
        e.2 += r.response.usage.completion_tokens;
    }
    let mut out = String::from("tag\trecords\tprompt_tokens\tcompletion_tokens\n");
    for (tag, (n, p, c)) in tags {
        out.push_str(&format!("{tag}\t{n}\t{p}\t{c}\n"));
    }
    out
}

pub fn run(cmd: &CacheCommand, file: &FileConfig) -> anyhow::Result<Outcome> {
    match cmd {
        CacheCommand::Gc { cache_dir: dir, keep } => {
            let dir = cache_dir(dir, file).ok_or_else(|| UsageError("cache gc needs --cache-dir".into()))?;
            let cache = ResponseCache::open(&dir)?;
            let mut hashes = HashSet::new();
            for t in keep {
                let t = Transcript::load(t).map_err(|e| UsageError(e.to_string()))?;
                hashes.extend(t.records().into_iter().map(|r| r.hash.clone()));
            }
            let keep_fn = |h: &str| hashes.contains(h);
            let removed = cache.gc((!keep.is_empty()).then_some(&keep_fn as &dyn Fn(&str) -> bool))?;
            for p in &removed {
                log::info!("removed {}", p.display());
            }
            println!("removed {} entries, {} remain", removed.len(), cache.entries()?.len());
            Ok(Outcome::Success)
        }
        CacheCommand::Inspect { cache_dir: dir, transcript } => {
            if let Some(t) = transcript {
                let t = Transcript::load(t).map_err(|e| UsageError(e.to_string()))?;
                print!("{}", summarize(t.records().into_iter()));
                return Ok(Outcome::Success);
            }
            let dir = cache_dir(dir, file)
                .ok_or_else(|| UsageError("cache inspect needs --cache-dir or --transcript".into()))?;
            let entries = ResponseCache::open(&dir)?.entries()?;
            let corrupt = entries.iter().filter(|e| e.record.is_none()).count();
            let bytes: u64 = entries.iter().map(|e| e.bytes).sum();
            print!("{}", summarize(entries.iter().filter_map(|e| e.record.as_ref())));
            println!("entries\t{}\tbytes\t{bytes}\tunreadable\t{corrupt}", entries.len());
            Ok(Outcome::from_problems(corrupt))
        }
    }
}
