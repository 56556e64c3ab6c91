//! `import` and `stats`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use cellattr_core::datasets::{check_manifest, load_dataset, save_dataset, stats as corpus_stats, CorpusStats, DatasetManifest, LoadReport};
use cellattr_core::import::{import_aitqa, import_fetaqa, import_totto, read_aitqa_tables, read_annotations, Annotations};
use cellattr_core::types::SplitFilter;
use serde::Serialize;

use crate::args::{Format, ImportArgs, Source, StatsArgs};
use crate::output::{write_jsonl, write_text};
use crate::{Outcome, UsageError};

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| UsageError(format!("cannot open {}: {e}", path.display())))?;
    Ok(BufReader::new(f))
}

pub fn import(args: &ImportArgs) -> anyhow::Result<Outcome> {
    let annotations: Annotations = match &args.annotations {
        Some(p) => read_annotations(open(p)?).map_err(|e| UsageError(format!("{}: {e}", p.display())))?,
        None => Annotations::default(),
    };
    let report: LoadReport = match args.source {
        Source::Totto => import_totto(open(&args.input)?, &annotations)?,
        Source::Fetaqa => import_fetaqa(open(&args.input)?, &annotations)?,
        Source::Aitqa => {
            let tables = args
                .tables
                .as_ref()
                .ok_or_else(|| UsageError("--source aitqa needs --tables".into()))?;
            if args.annotations.is_none() {
                return Err(UsageError("--source aitqa needs --annotations".into()).into());
            }
            let tables = read_aitqa_tables(open(tables)?).map_err(UsageError)?;
            import_aitqa(open(&args.input)?, &tables, &annotations)?
        }
    };
    if report.instances.is_empty() {
        for e in &report.errors {
            eprintln!("rejected {e}");
        }
        return Err(UsageError(format!("no instances imported from {}", args.input.display())).into());
    }
    save_dataset(&args.output, &report.instances)?;
    if let Some(p) = &args.errors {
        write_jsonl(p, &report.errors)?;
    }
    for e in &report.errors {
        log::warn!("rejected {e}");
    }
    let gold = report.instances.iter().filter(|i| i.gold.is_some()).count();
    println!(
        "imported {} instances ({} gold, {} silver), rejected {}",
        report.instances.len(),
        gold,
        report.instances.len() - gold,
        report.errors.len()
    );
    Ok(Outcome::from_problems(report.errors.len()))
}

#[derive(Serialize)]
struct StatsReport<'a> {
    stats: &'a CorpusStats,
    rejected: usize,
    count_mismatches: Vec<cellattr_core::datasets::CountMismatch>,
}

pub fn stats_tsv(s: &CorpusStats) -> String {
    let mut out = String::from(
        "dataset\ttotal\tgold\tsilver\trows_mean\tcols_mean\tanswer_words_mean\tanswer_words_median\n",
    );
    for d in &s.datasets {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.1}\n",
            d.dataset,
            d.total,
            d.gold,
            d.silver,
            d.table_rows.mean,
            d.table_cols.mean,
            d.answer_words.mean,
            d.answer_words.median
        ));
    }
    out.push_str(&format!("total\t{}\n", s.total));
    out
}

pub fn stats(args: &StatsArgs) -> anyhow::Result<Outcome> {
    if args.datasets.is_empty() && args.manifest.is_none() {
        return Err(UsageError("give --dataset or --manifest".into()).into());
    }
    let mut reports = Vec::new();
    let mut mismatches = Vec::new();
    for p in &args.datasets {
        reports.push(load_dataset(p, SplitFilter::All).with_context(|| format!("loading {}", p.display()))?);
    }
    if let Some(m) = &args.manifest {
        let manifest = DatasetManifest::load(m).map_err(|e| UsageError(e.to_string()))?;
        let (r, mm) = check_manifest(&manifest)?;
        reports.extend(r);
        mismatches = mm;
    }
    let rejected: usize = reports.iter().map(|r| r.errors.len()).sum();
    for e in reports.iter().flat_map(|r| &r.errors) {
        log::warn!("rejected {e}");
    }
    let instances: Vec<_> = reports.into_iter().flat_map(|r| r.instances).collect();
    let s = corpus_stats(&instances).map_err(|e| UsageError(e.to_string()))?;
    for m in &mismatches {
        eprintln!(
            "count mismatch: {} {} expected {}, found {}",
            m.dataset, m.split, m.expected, m.found
        );
    }
    let problems = rejected + mismatches.len();
    let text = match args.format {
        Format::Tsv => stats_tsv(&s),
        Format::Json => {
            let report = StatsReport {
                stats: &s,
                rejected,
                count_mismatches: mismatches,
            };
            serde_json::to_string_pretty(&report)? + "\n"
        }
    };
    match &args.output {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::from_problems(problems))
}
