//! Prompt templates, one per agent tag.
//!
//! A template file has a `[system]` section followed by a `[user]` section.
//! `{name}` placeholders are filled in a single pass; braces that do not name
//! a known placeholder (JSON examples, for instance) are left untouched.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::AgentError;

pub const COLUMN_RELEVANCE: &str = "column_relevance";
pub const EVIDENCE_SPAN: &str = "evidence_span";
pub const ROW_LISTING: &str = "row_listing";
pub const QUERY_DECOMPOSITION: &str = "query_decomposition";
pub const ENTAILMENT: &str = "entailment";
pub const SUBQUERY_ATTRIBUTION: &str = "subquery_attribution";
pub const FINAL_ATTRIBUTION: &str = "final_attribution";
pub const ANSWER_FACTS: &str = "answer_facts";
pub const CELL_FACTS: &str = "cell_facts";
pub const FACT_SUPPORT: &str = "fact_support";

pub const PLACEHOLDERS: &[&str] = &[
    "table",
    "question",
    "answer",
    "columns",
    "subquestions",
    "metadata",
    "cells",
    "pairs",
    "premise",
    "hypothesis",
];

const BUILTIN: &[(&str, &str)] = &[
    (COLUMN_RELEVANCE, include_str!("../prompts/column_relevance.txt")),
    (EVIDENCE_SPAN, include_str!("../prompts/evidence_span.txt")),
    (ROW_LISTING, include_str!("../prompts/row_listing.txt")),
    (QUERY_DECOMPOSITION, include_str!("../prompts/query_decomposition.txt")),
    (ENTAILMENT, include_str!("../prompts/entailment.txt")),
    (SUBQUERY_ATTRIBUTION, include_str!("../prompts/subquery_attribution.txt")),
    (FINAL_ATTRIBUTION, include_str!("../prompts/final_attribution.txt")),
    (ANSWER_FACTS, include_str!("../prompts/answer_facts.txt")),
    (CELL_FACTS, include_str!("../prompts/cell_facts.txt")),
    (FACT_SUPPORT, include_str!("../prompts/fact_support.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub system: String,
    pub user: String,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.replace("\r\n", "\n");
        let sys = text.find("[system]\n").ok_or("missing [system] section")?;
        let user = text.find("[user]\n").ok_or("missing [user] section")?;
        if user < sys {
            return Err("[user] section must follow [system]".into());
        }
        let system = text[sys + "[system]\n".len()..user].trim().to_string();
        let user = text[user + "[user]\n".len()..].trim().to_string();
        if system.is_empty() || user.is_empty() {
            return Err("empty section".into());
        }
        Ok(Template { system, user })
    }

    pub fn render(&self, vars: &[(&str, &str)]) -> (String, String) {
        (substitute(&self.system, vars), substitute(&self.user, vars))
    }
}

/// Replaces `{name}` for every `(name, value)` in `vars`, scanning the
/// template once so substituted values are never re-expanded.
pub fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let hit = after.find('}').and_then(|close| {
            let name = &after[..close];
            vars.iter().find(|(k, _)| *k == name).map(|(_, v)| (close, *v))
        });
        match hit {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone)]
pub struct PromptSet {
    templates: BTreeMap<String, Template>,
}

impl PromptSet {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(tag, text)| {
                let t = Template::parse(text).unwrap_or_else(|e| panic!("built-in prompt {tag}: {e}"));
                (tag.to_string(), t)
            })
            .collect();
        PromptSet { templates }
    }

    /// Built-in templates, overridden by any `<tag>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, AgentError> {
        let mut set = Self::builtin();
        for (tag, _) in BUILTIN {
            let path = dir.join(format!("{tag}.txt"));
            if !path.exists() {
                continue;
            }
            let text = fs::read_to_string(&path)
                .map_err(|e| AgentError::Prompt(format!("{}: {e}", path.display())))?;
            let t = Template::parse(&text)
                .map_err(|e| AgentError::Prompt(format!("{}: {e}", path.display())))?;
            log::info!("using prompt override {}", path.display());
            set.templates.insert(tag.to_string(), t);
        }
        Ok(set)
    }

    pub fn get(&self, tag: &str) -> Result<&Template, AgentError> {
        self.templates
            .get(tag)
            .ok_or_else(|| AgentError::Prompt(format!("no template for `{tag}`")))
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}
