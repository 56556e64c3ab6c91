use cellattr_core::table::{render_table, RenderFormat, Table};
use cellattr_llm::{extract_json, ChatRequest, Gateway};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::AgentError;
use crate::prompts::PromptSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub table_format: RenderFormat,
    /// Discard sub-questions whose fact the answer does not entail.
    pub drop_unverified: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            model: "gpt-4o".into(),
            temperature: 0.0,
            max_output_tokens: 2048,
            table_format: RenderFormat::Markdown,
            drop_unverified: false,
        }
    }
}

/// What every agent needs: the gateway, the prompts and the model settings.
pub struct AgentContext<'a> {
    pub gateway: &'a Gateway,
    pub prompts: &'a PromptSet,
    pub config: AgentConfig,
}

impl<'a> AgentContext<'a> {
    pub fn new(gateway: &'a Gateway, prompts: &'a PromptSet, config: AgentConfig) -> Self {
        AgentContext {
            gateway,
            prompts,
            config,
        }
    }

    pub fn request(&self, tag: &str, vars: &[(&str, &str)]) -> Result<ChatRequest, AgentError> {
        let (system, user) = self.prompts.get(tag)?.render(vars);
        Ok(ChatRequest::new(&self.config.model, tag, system, user)
            .with_temperature(self.config.temperature)
            .with_max_output_tokens(self.config.max_output_tokens))
    }

    /// Sends the `tag` prompt and interprets the JSON reply with `parse`.
    /// If extraction or `parse` fails, the prompt is re-sent once with the
    /// problem appended; a second failure is an [`AgentError::Output`].
    pub fn ask<T>(
        &self,
        tag: &str,
        vars: &[(&str, &str)],
        parse: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<T, AgentError> {
        let request = self.request(tag, vars)?;
        let first = self.gateway.complete(&request)?;
        let problem = match interpret(&first.text, &parse) {
            Ok(v) => return Ok(v),
            Err(p) => p,
        };
        log::debug!("{tag}: unusable reply ({problem}), sending repair prompt");
        let mut repair = request;
        repair.user_prompt = format!(
            "{}\n\nYour previous reply could not be used: {problem}\nReply again with only the requested JSON object.",
            repair.user_prompt
        );
        let second = self.gateway.complete(&repair)?;
        interpret(&second.text, &parse).map_err(|message| AgentError::Output {
            agent: tag.to_string(),
            message,
            raw: second.text,
        })
    }

    pub fn render(&self, table: &Table) -> String {
        render_table(table, self.config.table_format)
    }
}

fn interpret<T>(text: &str, parse: &impl Fn(&Value) -> Result<T, String>) -> Result<T, String> {
    let value = extract_json(text).map_err(|e| e.to_string())?;
    parse(&value)
}

/// `key: value` lines for non-empty metadata, or an empty string.
pub fn render_metadata(table: &Table) -> String {
    let lines: Vec<String> = table
        .metadata()
        .iter()
        .filter(|(_, v)| !v.trim().is_empty())
        .map(|(k, v)| format!("{k}: {v}"))
        .collect();
    if lines.is_empty() {
        String::new()
    } else {
        format!("Table metadata:\n{}\n", lines.join("\n"))
    }
}

/// One `index: header` line per column.
pub fn render_columns(table: &Table) -> String {
    table
        .headers()
        .iter()
        .enumerate()
        .map(|(i, h)| format!("{i}: {h}"))
        .collect::<Vec<_>>()
        .join("\n")
}

// Shape helpers shared by the agents.

pub(crate) fn field<'v>(v: &'v Value, key: &str) -> Result<&'v Value, String> {
    v.get(key).ok_or_else(|| format!("missing field `{key}`"))
}

pub(crate) fn array<'v>(v: &'v Value, what: &str) -> Result<&'v Vec<Value>, String> {
    v.as_array().ok_or_else(|| format!("`{what}` must be an array"))
}

/// An integer, accepting integral floats and numeric strings.
pub(crate) fn as_int(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// A `[row, col]` pair; `{"row": r, "col": c}` objects are accepted too.
pub(crate) fn as_pair(v: &Value) -> Option<(i64, i64)> {
    match v {
        Value::Array(a) if a.len() == 2 => Some((as_int(&a[0])?, as_int(&a[1])?)),
        Value::Object(o) => Some((
            as_int(o.get("row")?)?,
            as_int(o.get("col").or_else(|| o.get("column"))?)?,
        )),
        _ => None,
    }
}

pub(crate) fn as_text(v: &Value) -> Option<String> {
    v.as_str().map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn lenient_numbers_and_pairs() {
        assert_eq!(as_int(&json!(3)), Some(3));
        assert_eq!(as_int(&json!(3.0)), Some(3));
        assert_eq!(as_int(&json!("7")), Some(7));
        assert_eq!(as_int(&json!(2.5)), None);
        assert_eq!(as_int(&json!(-1)), Some(-1));
        assert_eq!(as_pair(&json!([1, 2])), Some((1, 2)));
        assert_eq!(as_pair(&json!({"row": 1, "column": 0})), Some((1, 0)));
        assert_eq!(as_pair(&json!([1])), None);
    }

    #[test]
    fn metadata_and_columns() {
        let mut t = Table::from_strs(&["A", "B"], &[&["1", "2"]]).unwrap();
        assert_eq!(render_metadata(&t), "");
        t.set_metadata("title", "Films");
        t.set_metadata("empty", " ");
        assert_eq!(render_metadata(&t), "Table metadata:\ntitle: Films\n");
        assert_eq!(render_columns(&t), "0: A\n1: B");
    }
}
