//! Reference-free scoring of attribution results with FAIRScore, plus
//! calibration against gold cell labels where those exist.

use std::collections::{BTreeMap, HashMap};

use cellattr_core::datasets::load_dataset;
use cellattr_core::metrics::cell_prf;
use cellattr_core::types::{Dataset, QAInstance, SplitFilter};
use cellattr_llm::{Gateway, Transcript};
use cellattr_pipeline::fairscore::{calibrate, score_instance, CalibrationRow, InstanceFairScore};
use cellattr_pipeline::{AgentContext, AttributionResult, FairScoreConfig};
use serde::Serialize;

use crate::args::FairscoreArgs;
use crate::config::RunConfig;
use crate::evaluate::Excluded;
use crate::output::{pct, read_jsonl, write_json, write_text};
use crate::runner::{build_gateway, load_prompts, par_map};
use crate::{Outcome, UsageError};

#[derive(Debug, Clone, Serialize)]
pub struct DatasetMean {
    pub dataset: Dataset,
    pub n: usize,
    pub precision: f64,
    pub recall: f64,
    /// Instances whose precision (recall) had no facts to judge.
    pub precision_vacuous: usize,
    pub recall_vacuous: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoringFailure {
    pub instance_id: String,
    pub error: String,
}

#[derive(Serialize)]
struct FairscoreReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    fairscore: FairScoreConfig,
    datasets: Vec<DatasetMean>,
    calibration: Vec<CalibrationRow>,
    failures: Vec<ScoringFailure>,
    excluded: Vec<Excluded>,
    instances: Vec<InstanceFairScore>,
}

pub fn means(scored: &[(Dataset, &InstanceFairScore)]) -> Vec<DatasetMean> {
    let mut groups: BTreeMap<Dataset, Vec<&InstanceFairScore>> = BTreeMap::new();
    for (d, s) in scored {
        groups.entry(*d).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|(dataset, xs)| {
            let n = xs.len();
            DatasetMean {
                dataset,
                n,
                precision: xs.iter().map(|s| s.score.precision).sum::<f64>() / n as f64,
                recall: xs.iter().map(|s| s.score.recall).sum::<f64>() / n as f64,
                precision_vacuous: xs.iter().filter(|s| s.score.precision_vacuous).count(),
                recall_vacuous: xs.iter().filter(|s| s.score.recall_vacuous).count(),
            }
        })
        .collect()
}

pub fn run(cfg: &RunConfig, args: &FairscoreArgs) -> anyhow::Result<Outcome> {
    let gateway = if cfg.offline_fairscore() {
        Gateway::replay(Transcript::default())
    } else {
        build_gateway(cfg)?
    };
    run_with(cfg, &gateway, args)
}

pub fn run_with(cfg: &RunConfig, gateway: &Gateway, args: &FairscoreArgs) -> anyhow::Result<Outcome> {
    let results: Vec<AttributionResult> = read_jsonl(&args.results)?;
    if results.is_empty() {
        return Err(UsageError(format!("{} contains no results", args.results.display())).into());
    }
    let loaded = load_dataset(&args.dataset, SplitFilter::All)?;
    let by_id: HashMap<&str, &QAInstance> = loaded.instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut excluded = Vec::new();
    let mut work = Vec::new();
    for r in &results {
        match by_id.get(r.instance_id.as_str()) {
            Some(i) => work.push((r, *i)),
            None => excluded.push(Excluded {
                instance_id: r.instance_id.clone(),
                reason: "not in the dataset".into(),
            }),
        }
    }
    if work.is_empty() {
        return Err(UsageError("no result matches an instance in the dataset".into()).into());
    }

    let prompts = load_prompts(cfg)?;
    let ctx = AgentContext::new(gateway, &prompts, cfg.agent_config());
    let outcomes = par_map(&work, cfg.jobs, |(r, inst)| {
        score_instance(&ctx, &inst.id, &inst.table, &inst.question, &inst.answer, &r.final_cells, cfg.fairscore)
    });

    let mut scored = Vec::new();
    let mut failures = Vec::new();
    let mut calibration_items = Vec::new();
    for (&(r, inst), outcome) in work.iter().zip(outcomes) {
        match outcome {
            Ok(s) => {
                if let Some(gold) = inst.gold_cells() {
                    calibration_items.push((inst.dataset, s.score, cell_prf(&r.final_cells, &gold)));
                }
                scored.push((inst, s));
            }
            Err(e) => {
                log::warn!("{}: {e}", inst.id);
                failures.push(ScoringFailure {
                    instance_id: inst.id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let calibration = calibrate(&calibration_items);
    let datasets = means(&scored.iter().map(|(i, s)| (i.dataset, s)).collect::<Vec<_>>());

    let mut tsv = String::from("dataset\tn\tfair_p\tfair_r\tvacuous_p\tvacuous_r\tcell_p\tcell_r\tdelta_p\tdelta_r\n");
    for m in &datasets {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            m.dataset,
            m.n,
            pct(m.precision),
            pct(m.recall),
            m.precision_vacuous,
            m.recall_vacuous
        ));
        match calibration.iter().find(|c| c.dataset == m.dataset) {
            Some(c) => tsv.push_str(&format!(
                "\t{}\t{}\t{}\t{}\n",
                pct(c.actual_precision),
                pct(c.actual_recall),
                pct(c.delta_precision),
                pct(c.delta_recall)
            )),
            None => tsv.push_str("\t-\t-\t-\t-\n"),
        }
    }

    let problems = failures.len() + excluded.len();
    let report = FairscoreReport {
        command: "fairscore",
        config: cfg,
        fairscore: cfg.fairscore,
        datasets,
        calibration,
        failures,
        excluded,
        instances: scored.into_iter().map(|(_, s)| s).collect(),
    };
    if let Some(p) = &args.output {
        write_json(p, &report)?;
    }
    if let Some(p) = &args.tsv {
        write_text(p, &tsv)?;
    }
    print!("{tsv}");
    Ok(Outcome::from_problems(problems))
}
