//! Recovers a JSON value from free-form model output.

use serde_json::Value;

use crate::error::ExtractionError;

/// Returns the first balanced JSON object or array that parses.
///
/// Fenced code blocks are tried first, in order, then the whole text. Braces
/// inside JSON strings are ignored when balancing.
pub fn extract_json(text: &str) -> Result<Value, ExtractionError> {
    for block in fenced_blocks(text) {
        if let Some(v) = first_value(block) {
            return Ok(v);
        }
    }
    first_value(text).ok_or_else(|| ExtractionError {
        message: if text.trim().is_empty() {
            "completion is empty".into()
        } else {
            "no balanced JSON object or array found".into()
        },
        raw: text.to_string(),
    })
}

fn fenced_blocks(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip the info string (`json`, `JSON`, ...) up to the end of the line.
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        match body.find("```") {
            Some(close) => {
                out.push(&body[..close]);
                rest = &body[close + 3..];
            }
            None => {
                out.push(body);
                break;
            }
        }
    }
    out
}

fn first_value(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(off) = text[start..].find(['{', '[']) {
        let s = start + off;
        if let Some(end) = balanced_end(&bytes[s..]) {
            if let Ok(v) = serde_json::from_str(&text[s..s + end]) {
                return Some(v);
            }
        }
        start = s + 1;
    }
    None
}

/// Byte length of the bracketed region starting at `bytes[0]`, if it closes.
fn balanced_end(bytes: &[u8]) -> Option<usize> {
    let mut stack = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_string {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => stack.push(b'}'),
            b'[' => stack.push(b']'),
            b'}' | b']' => {
                if stack.pop() != Some(b) {
                    return None;
                }
                if stack.is_empty() {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn fenced_object() {
        assert_eq!(
            extract_json("```json\n{\"cols\": [0,2]}\n```").unwrap(),
            json!({"cols": [0, 2]})
        );
    }

    #[test]
    fn array_inside_prose() {
        assert_eq!(
            extract_json("Here is the answer: [\"a\"] thanks").unwrap(),
            json!(["a"])
        );
    }

    #[test]
    fn no_json() {
        let e = extract_json("no json here").unwrap_err();
        assert_eq!(e.raw, "no json here");
        assert!(extract_json("").is_err());
    }

    #[test]
    fn braces_in_strings_and_bad_prefixes() {
        let text = r#"Note {this is not json}. Result: {"a": "x}y{", "b": [1, {"c": "]"}]} done"#;
        assert_eq!(
            extract_json(text).unwrap(),
            json!({"a": "x}y{", "b": [1, {"c": "]"}]})
        );
        assert_eq!(
            extract_json(r#"{"q": "say \"hi\" }"} tail"#).unwrap(),
            json!({"q": "say \"hi\" }"})
        );
    }

    #[test]
    fn unterminated_fence_and_fallback_to_text() {
        assert_eq!(extract_json("```\n[1, 2]").unwrap(), json!([1, 2]));
        assert_eq!(
            extract_json("```\nnothing\n``` then {\"k\": 1}").unwrap(),
            json!({"k": 1})
        );
    }

    #[test]
    fn unicode_around_json() {
        assert_eq!(
            extract_json("Réponse — {\"v\": \"30–45%\"} ✓").unwrap(),
            json!({"v": "30–45%"})
        );
    }
}
