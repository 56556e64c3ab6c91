//! Running the pipeline: gateway and judge construction, instance
//! selection, and the `attribute` and `ablate` commands.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::Context;
use cellattr_core::datasets::{load_dataset, ValidationError};
use cellattr_core::types::QAInstance;
use cellattr_llm::{Gateway, GatewayMode, GatewayStats, HttpBackend, HttpConfig, ResponseCache, Transcript, TranscriptWriter};
use cellattr_pipeline::judge::{EntailmentJudge, LlmJudge, NliHttpJudge};
use cellattr_pipeline::{run_batch, run_pipeline, AgentContext, AttributionResult, InstanceFailure, PipelineVariant, PromptSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{JudgeChoice, RunConfig};
use crate::evaluate::{score_results, GroupScores};
use crate::output::{pct, write_json, write_jsonl};
use crate::{Outcome, UsageError};

pub fn build_gateway(cfg: &RunConfig) -> anyhow::Result<Gateway> {
    let http = || -> anyhow::Result<HttpBackend> {
        let key = cfg.require_api_key()?;
        Ok(HttpBackend::new(HttpConfig {
            base_url: cfg.base_url.clone(),
            api_key: Some(key.to_string()),
            ..HttpConfig::default()
        })?)
    };
    let gateway = match cfg.mode {
        GatewayMode::Replay => {
            let path = cfg.transcript.as_ref().expect("resolve checks replay has a transcript");
            let transcript = Transcript::load(path).map_err(|e| UsageError(format!("cannot load transcript: {e}")))?;
            Gateway::replay(transcript)
        }
        GatewayMode::Live => Gateway::live(http()?),
        GatewayMode::Cache => {
            let dir = cfg.cache_dir.as_ref().expect("resolve checks cache mode has a directory");
            Gateway::cached(http()?, ResponseCache::open(dir)?)
        }
    };
    let gateway = gateway.with_concurrency(cfg.jobs);
    Ok(match &cfg.record {
        Some(p) => gateway.with_recorder(TranscriptWriter::append(p)?),
        None => gateway,
    })
}

pub fn load_prompts(cfg: &RunConfig) -> anyhow::Result<PromptSet> {
    Ok(match &cfg.prompts {
        Some(dir) => PromptSet::with_overrides(dir).map_err(|e| UsageError(e.to_string()))?,
        None => PromptSet::builtin(),
    })
}

pub fn build_judge<'a>(cfg: &RunConfig, ctx: &'a AgentContext<'a>) -> anyhow::Result<Box<dyn EntailmentJudge + 'a>> {
    Ok(match cfg.judge {
        JudgeChoice::Llm => Box::new(LlmJudge::new(ctx)),
        JudgeChoice::Nli { threshold } => {
            let url = cfg.judge_url.clone().expect("resolve checks the nli url");
            Box::new(NliHttpJudge::new(url, threshold, Duration::from_secs(60))?)
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Selection {
    pub loaded: usize,
    pub selected: usize,
    pub rejected: Vec<ValidationError>,
}

/// Loads the configured split and, with `sample`, a seeded random subset in
/// id order.
pub fn select_instances(cfg: &RunConfig, path: &Path) -> anyhow::Result<(Vec<QAInstance>, Selection)> {
    let report = load_dataset(path, cfg.split)?;
    for e in &report.errors {
        log::warn!("rejected {e}");
    }
    let loaded = report.instances.len();
    let mut instances = report.instances;
    if let Some(n) = cfg.sample.filter(|&n| n < instances.len()) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        instances.shuffle(&mut rng);
        instances.truncate(n);
    }
    instances.sort_by(|a, b| a.id.cmp(&b.id));
    if instances.is_empty() {
        return Err(UsageError(format!("no instances selected from {}", path.display())).into());
    }
    let selection = Selection {
        loaded,
        selected: instances.len(),
        rejected: report.errors,
    };
    Ok((instances, selection))
}

/// Maps `f` over `items` on up to `jobs` threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                *slots[i].lock().expect("slot lock poisoned") = Some(f(item));
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock poisoned").expect("every slot is filled"))
        .collect()
}

pub struct BatchRun {
    pub results: Vec<AttributionResult>,
    pub failures: Vec<InstanceFailure>,
}

pub fn run_variant(
    ctx: &AgentContext<'_>,
    judge: &dyn EntailmentJudge,
    instances: &[QAInstance],
    variant: PipelineVariant,
    jobs: usize,
) -> BatchRun {
    let mut run = BatchRun {
        results: Vec::new(),
        failures: Vec::new(),
    };
    for r in run_batch(instances, jobs, |inst| run_pipeline(ctx, inst, variant, judge)) {
        match r {
            Ok(x) => run.results.push(x),
            Err(f) => run.failures.push(f),
        }
    }
    run
}

fn failures_by_stage(failures: &[InstanceFailure]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for f in failures {
        *m.entry(f.stage.clone()).or_insert(0) += 1;
    }
    m
}

#[derive(Serialize)]
struct AttributeReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    dataset: &'a Selection,
    succeeded: usize,
    failed: usize,
    failures_by_stage: BTreeMap<String, usize>,
    gateway: GatewayStats,
}

pub fn attribute(cfg: &RunConfig, dataset: &Path, out_dir: &Path) -> anyhow::Result<Outcome> {
    let (instances, selection) = select_instances(cfg, dataset)?;
    attribute_with(cfg, &build_gateway(cfg)?, &instances, &selection, out_dir)
}

pub fn attribute_with(
    cfg: &RunConfig,
    gateway: &Gateway,
    instances: &[QAInstance],
    selection: &Selection,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let prompts = load_prompts(cfg)?;
    let ctx = AgentContext::new(gateway, &prompts, cfg.agent_config());
    let judge = build_judge(cfg, &ctx)?;
    log::info!("attributing {} instances with {}", instances.len(), cfg.variant);
    let run = run_variant(&ctx, judge.as_ref(), instances, cfg.variant, cfg.jobs);

    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_jsonl(&out_dir.join("results.jsonl"), &run.results)?;
    write_jsonl(&out_dir.join("failures.jsonl"), &run.failures)?;
    let report = AttributeReport {
        command: "attribute",
        config: cfg,
        dataset: selection,
        succeeded: run.results.len(),
        failed: run.failures.len(),
        failures_by_stage: failures_by_stage(&run.failures),
        gateway: gateway.stats(),
    };
    write_json(&out_dir.join("report.json"), &report)?;
    println!(
        "{}: {} succeeded, {} failed, {} rejected at load",
        cfg.variant,
        run.results.len(),
        run.failures.len(),
        selection.rejected.len()
    );
    Ok(Outcome::from_problems(run.failures.len() + selection.rejected.len()))
}

#[derive(Serialize)]
struct VariantRow {
    variant: String,
    slug: &'static str,
    label: &'static str,
    succeeded: usize,
    failed: usize,
    /// Macro scores over instances with gold labels, `None` without any.
    scores: Option<GroupScores>,
}

#[derive(Serialize)]
struct AblationReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    averaging: &'static str,
    dataset: &'a Selection,
    variants: Vec<VariantRow>,
}

pub fn ablate(cfg: &RunConfig, dataset: &Path, out_dir: &Path) -> anyhow::Result<Outcome> {
    let (instances, selection) = select_instances(cfg, dataset)?;
    ablate_with(cfg, &build_gateway(cfg)?, &instances, &selection, out_dir)
}

pub fn ablate_with(
    cfg: &RunConfig,
    gateway: &Gateway,
    instances: &[QAInstance],
    selection: &Selection,
    out_dir: &Path,
) -> anyhow::Result<Outcome> {
    let prompts = load_prompts(cfg)?;
    let ctx = AgentContext::new(gateway, &prompts, cfg.agent_config());
    let judge = build_judge(cfg, &ctx)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;

    let mut rows = Vec::new();
    let mut problems = selection.rejected.len();
    for variant in PipelineVariant::ALL {
        log::info!("variant {variant}");
        let run = run_variant(&ctx, judge.as_ref(), instances, variant, cfg.jobs);
        write_jsonl(&out_dir.join(format!("results-{}.jsonl", variant.slug())), &run.results)?;
        write_jsonl(&out_dir.join(format!("failures-{}.jsonl", variant.slug())), &run.failures)?;
        problems += run.failures.len();
        let scored = score_results(&run.results, instances);
        rows.push(VariantRow {
            variant: format!("{variant:?}"),
            slug: variant.slug(),
            label: variant.label(),
            succeeded: run.results.len(),
            failed: run.failures.len(),
            scores: scored.overall,
        });
    }

    let mut tsv = String::from("variant\tsucceeded\tfailed\trow_p\trow_r\tcol_p\tcol_r\tcell_p\tcell_r\n");
    for r in &rows {
        tsv.push_str(&format!("{}\t{}\t{}", r.variant, r.succeeded, r.failed));
        match &r.scores {
            Some(s) => {
                for m in [s.row, s.col, s.cell] {
                    tsv.push_str(&format!("\t{}\t{}", pct(m.precision), pct(m.recall)));
                }
            }
            None => tsv.push_str(&"\t-".repeat(6)),
        }
        tsv.push('\n');
    }
    let report = AblationReport {
        command: "ablate",
        config: cfg,
        averaging: "macro",
        dataset: selection,
        variants: rows,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    crate::output::write_text(&out_dir.join("report.tsv"), &tsv)?;
    print!("{tsv}");
    Ok(Outcome::from_problems(problems))
}
