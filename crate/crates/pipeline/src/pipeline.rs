use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cellattr_core::table::{prune, PrunedTable};
use cellattr_core::types::QAInstance;
use serde::{Deserialize, Serialize};

use crate::agents::{
    attribute_subqueries, decompose_query, extract_evidence_rows, finalize, select_columns,
    AttributionMode, EvidenceRows,
};
use crate::context::AgentContext;
use crate::error::AgentError;
use crate::judge::EntailmentJudge;
use crate::types::{AttributionResult, ColumnSelection, PipelineVariant, SubQuestion};

/// An instance the pipeline could not finish.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFailure {
    pub instance_id: String,
    pub stage: String,
    pub error: String,
    pub diagnostics: Vec<String>,
}

struct Run<'a> {
    id: &'a str,
    diags: Vec<String>,
}

impl Run<'_> {
    fn stage<T>(&mut self, stage: &str, r: Result<T, AgentError>) -> Result<T, InstanceFailure> {
        r.map_err(|e| InstanceFailure {
            instance_id: self.id.to_string(),
            stage: stage.to_string(),
            error: e.to_string(),
            diagnostics: std::mem::take(&mut self.diags),
        })
    }
}

pub fn run_pipeline(
    ctx: &AgentContext<'_>,
    instance: &QAInstance,
    variant: PipelineVariant,
    judge: &dyn EntailmentJudge,
) -> Result<AttributionResult, InstanceFailure> {
    let table = &instance.table;
    let (q, a) = (instance.question.as_str(), instance.answer.as_str());
    let mut run = Run {
        id: &instance.id,
        diags: Vec::new(),
    };

    let early_subqs = if variant == PipelineVariant::DecomposeBeforePrune {
        let r = decompose_query(ctx, table, q, a, judge, &mut run.diags);
        Some(run.stage("query_decomposition", r)?)
    } else {
        None
    };

    let (columns, evidence, pruned) = if variant == PipelineVariant::NoPruning {
        let evidence = EvidenceRows {
            filter_text: String::new(),
            rows: table.all_rows(),
        };
        (ColumnSelection::everything(table.n_cols()), evidence, PrunedTable::identity(table))
    } else {
        let r = select_columns(ctx, table, q, a, &mut run.diags);
        let columns = run.stage("column_relevance", r)?;
        let r = extract_evidence_rows(ctx, table, &columns, q, a, &mut run.diags);
        let evidence = run.stage("evidence_span", r)?;
        let r = prune(table, &evidence.rows, &columns.all()).map_err(AgentError::from);
        let pruned = run.stage("prune", r)?;
        (columns, evidence, pruned)
    };

    let subqs = match (variant, early_subqs) {
        (_, Some(s)) => s,
        (PipelineVariant::NoDecomposition, None) => vec![SubQuestion {
            text: q.to_string(),
            derived_fact: a.to_string(),
            verified: None,
        }],
        (_, None) => {
            let r = decompose_query(ctx, pruned.view(), q, a, judge, &mut run.diags);
            run.stage("query_decomposition", r)?
        }
    };

    let mode = if variant == PipelineVariant::PerSubquery {
        AttributionMode::PerSubquery
    } else {
        AttributionMode::Joint
    };
    let r = attribute_subqueries(ctx, &pruned, &subqs, mode, q, a, &mut run.diags);
    let sub_attributions = run.stage("subquery_attribution", r)?;

    let r = finalize(ctx, table, q, a, &sub_attributions, &mut run.diags);
    let fin = run.stage("final_attribution", r)?;

    let result = AttributionResult {
        instance_id: instance.id.clone(),
        final_cells: fin.final_cells,
        phrase_alignments: fin.alignments,
        columns,
        filter_text: evidence.filter_text,
        kept_rows: evidence.rows,
        sub_attributions,
        variant,
        diagnostics: run.diags,
    };
    check_result(instance, &result).map_err(|error| InstanceFailure {
        instance_id: instance.id.clone(),
        stage: "invariant".into(),
        error,
        diagnostics: result.diagnostics.clone(),
    })?;
    Ok(result)
}

/// Every coordinate must address the original table, and aligned cells must
/// be a subset of the final cells.
pub fn check_result(instance: &QAInstance, r: &AttributionResult) -> Result<(), String> {
    let t = &instance.table;
    r.final_cells.validate(t).map_err(|e| format!("final cells: {e}"))?;
    for s in &r.sub_attributions {
        s.cells.validate(t).map_err(|e| format!("sub-attribution: {e}"))?;
    }
    for al in &r.phrase_alignments {
        if !al.cells.is_subset(&r.final_cells) {
            return Err(format!("alignment `{}` cites cells outside the final set", al.phrase.text));
        }
        al.phrase.check(&instance.answer)?;
    }
    Ok(())
}

/// Runs `instances` on `jobs` worker threads. Output is sorted by instance id.
pub fn run_batch<F>(
    instances: &[QAInstance],
    jobs: usize,
    run_one: F,
) -> Vec<Result<AttributionResult, InstanceFailure>>
where
    F: Fn(&QAInstance) -> Result<AttributionResult, InstanceFailure> + Sync,
{
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let out = Mutex::new(Vec::with_capacity(instances.len()));
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, instances.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(inst) = instances.get(i) else { break };
                let r = run_one(inst);
                if let Err(f) = &r {
                    log::warn!("{}: failed at {}: {}", f.instance_id, f.stage, f.error);
                }
                let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                if n.is_multiple_of(50) || n == instances.len() {
                    log::info!("{n}/{} instances processed", instances.len());
                }
                out.lock().expect("results lock poisoned").push((inst.id.clone(), r));
            });
        }
    });
    let mut v = out.into_inner().expect("results lock poisoned");
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v.into_iter().map(|(_, r)| r).collect()
}
