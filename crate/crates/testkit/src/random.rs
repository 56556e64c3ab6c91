//! Seeded random replies: well-formed and malformed JSON, out-of-range and
//! negative coordinates, unknown columns and broken filters.

use std::sync::Mutex;

use cellattr_llm::{ChatBackend, ChatRequest, ChatResponse, LlmError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::backends::respond;

pub struct RandomBackend {
    rng: Mutex<ChaCha8Rng>,
}

impl RandomBackend {
    pub fn new(seed: u64) -> Self {
        RandomBackend {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

const FILTERS: &[&str] = &[
    "",
    "WHERE #0 != ''",
    "WHERE #1 > 2",
    "WHERE #7 = 'x'",
    "WHERE Missing_Column = 3",
    "Cost <= 50 AND Scalability >= 3",
    "WHERE ((",
    "SELECT * FROM t WHERE #0 CONTAINS 'a'",
    "NOT #0 = 'zzz'",
];

fn coord(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..10) {
        0 => json!({"row": rng.random_range(-2..12), "col": rng.random_range(-2..8)}),
        1 => json!([rng.random_range(0..4)]),
        2 => json!(["x", 1]),
        3 => json!([rng.random_range(0..4) as f64 + 0.5, 0]),
        _ => json!([rng.random_range(-3..12), rng.random_range(-3..8)]),
    }
}

fn coords(rng: &mut ChaCha8Rng) -> Vec<Value> {
    (0..rng.random_range(0..6)).map(|_| coord(rng)).collect()
}

fn ints(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Vec<Value> {
    (0..rng.random_range(0..5))
        .map(|_| {
            if rng.random_bool(0.1) {
                json!("name")
            } else {
                json!(rng.random_range(lo..hi))
            }
        })
        .collect()
}

/// Random char-aligned substring of the prompt's answer, or noise.
fn phrase(rng: &mut ChaCha8Rng, user: &str) -> String {
    let answer: Vec<char> = user
        .lines()
        .find_map(|l| l.strip_prefix("Answer: "))
        .unwrap_or_default()
        .chars()
        .collect();
    if answer.is_empty() || rng.random_bool(0.2) {
        return "not in the answer".into();
    }
    let a = rng.random_range(0..answer.len());
    let b = rng.random_range(a..=answer.len());
    answer[a..b].iter().collect()
}

fn reply(rng: &mut ChaCha8Rng, request: &ChatRequest) -> String {
    match rng.random_range(0..20) {
        0 => return "I am unable to answer.".into(),
        1 => return "{\"truncated\": [".into(),
        2 => return "[]".into(),
        _ => {}
    }
    let user = &request.user_prompt;
    let v = match request.tag.as_str() {
        "column_relevance" => json!({"explicit": ints(rng, -2, 8), "implicit": ints(rng, -2, 8)}),
        "evidence_span" => json!({"filter": FILTERS[rng.random_range(0..FILTERS.len())]}),
        "row_listing" => json!({"rows": ints(rng, -2, 12)}),
        "query_decomposition" => {
            let n = rng.random_range(0..4);
            let subqs: Vec<Value> = (0..n)
                .map(|i| {
                    if rng.random_bool(0.2) {
                        json!(format!("step {i}?"))
                    } else {
                        json!({"question": format!("step {i}?"), "fact": phrase(rng, user)})
                    }
                })
                .collect();
            json!({"subquestions": subqs})
        }
        "entailment" => json!({"entailed": rng.random_bool(0.7), "score": rng.random::<f64>()}),
        "subquery_attribution" => {
            let n = rng.random_range(0..4);
            let items: Vec<Value> = (0..n)
                .map(|_| json!({"id": rng.random_range(-1..4), "cells": coords(rng)}))
                .collect();
            json!({"attributions": items})
        }
        "final_attribution" => {
            let n = rng.random_range(0..4);
            let items: Vec<Value> = (0..n)
                .map(|_| json!({"phrase": phrase(rng, user), "cells": coords(rng)}))
                .collect();
            json!({"alignments": items})
        }
        "answer_facts" => json!({"facts": (0..rng.random_range(0..3)).map(|_| phrase(rng, user)).collect::<Vec<_>>()}),
        "cell_facts" => {
            let items: Vec<Value> = (0..rng.random_range(0..4))
                .map(|_| json!({"cell": coord(rng), "fact": "Something is true."}))
                .collect();
            json!({"facts": items})
        }
        "fact_support" => {
            let n = user.matches(". Table fact: ").count() + rng.random_range(0..2);
            let items: Vec<Value> = (0..n)
                .map(|i| json!({"id": i, "supported": rng.random_bool(0.5)}))
                .collect();
            json!({"judgments": items})
        }
        _ => json!({}),
    };
    if rng.random_bool(0.1) {
        format!("Sure, here you go:\n```json\n{v}\n```")
    } else {
        v.to_string()
    }
}

impl ChatBackend for RandomBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut rng = self.rng.lock().unwrap();
        if rng.random_range(0..50) == 0 {
            return Err(LlmError::Transport {
                attempts: 1,
                status: Some(500),
                message: "injected failure".into(),
            });
        }
        let text = reply(&mut rng, request);
        Ok(respond(request, text))
    }
}
