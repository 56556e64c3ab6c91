mod common;

use std::fs;
use std::path::Path;

use cellattr_core::table::AttributionSet;
use cellattr_pipeline::{AttributionResult, ColumnSelection, PipelineVariant};
use cellattr_testkit::fixtures::{films_instance, films_noisy_cells};
use serde_json::Value;

use common::{cellattr, code, fixture, stderr, stdout};

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn result_for(id: &str, cells: AttributionSet) -> AttributionResult {
    AttributionResult {
        instance_id: id.into(),
        final_cells: cells,
        phrase_alignments: Vec::new(),
        columns: ColumnSelection::default(),
        filter_text: String::new(),
        kept_rows: Default::default(),
        sub_attributions: Vec::new(),
        variant: PipelineVariant::Standard,
        diagnostics: Vec::new(),
    }
}

fn write_lines<T: serde::Serialize>(path: &Path, items: &[T]) {
    let text: String = items.iter().map(|i| serde_json::to_string(i).unwrap() + "\n").collect();
    fs::write(path, text).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn replay_attribute(out: &Path, extra: &[&str]) -> std::process::Output {
    let cfg = fixture("replay.toml");
    let corpus = fixture("corpus.jsonl");
    let mut args = vec!["--config", p(&cfg), "attribute", "--dataset", p(&corpus), "-o", p(out)];
    args.extend_from_slice(extra);
    cellattr(&args, &[])
}

#[test]
fn replayed_sample_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = replay_attribute(dir, &["--sample", "3"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let results = fs::read_to_string(a.join("results.jsonl")).unwrap();
    assert_eq!(results.lines().count(), 3);
    assert_eq!(results, fs::read_to_string(b.join("results.jsonl")).unwrap());
    assert_eq!(
        fs::read(a.join("report.json")).unwrap(),
        fs::read(b.join("report.json")).unwrap()
    );
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["dataset"]["selected"], 3);
    assert_eq!(report["config"]["mode"], "replay");
    assert_eq!(report["config"]["seed"], 7);
}

#[test]
fn sampling_depends_on_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let ids = |dir: &Path| -> Vec<String> {
        fs::read_to_string(dir.join("results.jsonl"))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<Value>(l).unwrap()["instance_id"].as_str().unwrap().to_string())
            .collect()
    };
    let seeds = ["1", "2", "3", "4"];
    let mut picks = Vec::new();
    for s in seeds {
        let dir = tmp.path().join(s);
        assert_eq!(code(&replay_attribute(&dir, &["--sample", "4", "--seed", s])), 0);
        picks.push(ids(&dir));
    }
    assert!(picks.iter().all(|ids| ids.len() == 4 && ids.windows(2).all(|w| w[0] < w[1])));
    assert!(picks.windows(2).any(|w| w[0] != w[1]), "{picks:?}");
}

#[test]
fn live_mode_without_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let corpus = fixture("corpus.jsonl");
    let out = cellattr(
        &["attribute", "--mode", "live", "--dataset", p(&corpus), "-o", p(&out_dir)],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("LLM_API_KEY"), "{}", stderr(&out));
    assert!(!out_dir.exists());

    let cache = tmp.path().join("cache");
    let out = cellattr(
        &["attribute", "--mode", "cache", "--cache-dir", p(&cache), "--dataset", p(&corpus), "-o", p(&out_dir)],
        &[],
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn replay_without_transcript_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus.jsonl");
    let out = cellattr(
        &["attribute", "--mode", "replay", "--dataset", p(&corpus), "-o", p(tmp.path())],
        &[],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--transcript"));
}

#[test]
fn variant_flag_reaches_the_results() {
    let tmp = tempfile::tempdir().unwrap();
    let out = replay_attribute(tmp.path(), &["--variant", "no-decomposition", "--sample", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for line in fs::read_to_string(tmp.path().join("results.jsonl")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["variant"], "NoDecomposition");
        assert_eq!(v["sub_attributions"].as_array().unwrap().len(), 1);
    }
    let bad = replay_attribute(tmp.path(), &["--variant", "bogus"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn replay_misses_are_partial_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = replay_attribute(tmp.path(), &["--model", "some-other-model", "--sample", "2"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let failures = fs::read_to_string(tmp.path().join("failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 2);
    let report = read_json(&tmp.path().join("report.json"));
    assert_eq!(report["failed"], 2);
    assert_eq!(report["config"]["model"], "some-other-model");
}

#[test]
fn flags_beat_env_beat_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "[model]\nname = \"file-model\"\ntemperature = 0.5\n\n[gateway]\nmode = \"replay\"\ntranscript = \"{}\"\n",
            p(&fixture("transcript.jsonl"))
        ),
    )
    .unwrap();
    let corpus = fixture("corpus.jsonl");
    let run = |dir: &str, flags: &[&str], env: &[(&str, &str)]| -> Value {
        let out_dir = tmp.path().join(dir);
        let mut args = vec!["--config", p(&cfg), "attribute", "--dataset", p(&corpus), "--sample", "1", "-o", p(&out_dir)];
        args.extend_from_slice(flags);
        let out = cellattr(&args, env);
        assert_ne!(code(&out), 2, "{}", stderr(&out));
        read_json(&out_dir.join("report.json"))["config"].clone()
    };
    let c = run("file", &[], &[]);
    assert_eq!((c["model"].as_str(), c["temperature"].as_f64()), (Some("file-model"), Some(0.5)));
    let c = run("env", &[], &[("LLM_MODEL", "env-model")]);
    assert_eq!(c["model"], "env-model");
    let c = run("lite", &["--preset", "lite"], &[("LLM_MODEL", "env-model")]);
    assert_eq!(c["model"], "Qwen/Qwen2.5-7B-Instruct");
    let c = run("flag", &["--model", "flag-model", "--temperature", "0", "--preset", "lite"], &[("LLM_MODEL", "env-model")]);
    assert_eq!((c["model"].as_str(), c["temperature"].as_f64()), (Some("flag-model"), Some(0.0)));
    assert!(c.get("api_key").is_none());
}

#[test]
fn bad_config_files_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus.jsonl");
    for (name, text) in [
        ("unknown.toml", "[model]\nnmae = \"x\"\n"),
        ("temp.toml", "[model]\ntemperature = 3.0\n"),
        ("nli.toml", "[judge]\nbackend = \"nli\"\n"),
        ("syntax.toml", "[model\n"),
    ] {
        let cfg = tmp.path().join(name);
        fs::write(&cfg, text).unwrap();
        let out = cellattr(
            &["--config", p(&cfg), "attribute", "--mode", "replay", "--transcript", p(&fixture("transcript.jsonl")), "--dataset", p(&corpus), "-o", p(tmp.path())],
            &[],
        );
        assert_eq!(code(&out), 2, "{name}: {}", stderr(&out));
    }
    let missing = cellattr(&["--config", "/nonexistent/run.toml", "stats", "--dataset", p(&corpus)], &[]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn evaluate_reports_the_films_example() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("films.jsonl");
    write_lines(&dataset, &[films_instance()]);
    let results = tmp.path().join("results.jsonl");
    write_lines(&results, &[result_for("fetaqa-films", films_noisy_cells())]);
    let report = tmp.path().join("eval.json");
    let out = cellattr(&["evaluate", "--results", p(&results), "--dataset", p(&dataset), "--output", p(&report)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(&report);
    let o = &v["overall"];
    assert_eq!(v["averaging"], "macro");
    assert!((o["cell"]["precision"].as_f64().unwrap() - 5.0 / 9.0).abs() < 1e-12);
    assert!((o["row"]["precision"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((o["col"]["precision"].as_f64().unwrap() - 3.0 / 4.0).abs() < 1e-12);
    for g in ["cell", "row", "col"] {
        assert_eq!(o[g]["recall"], 1.0);
    }
    assert!(stdout(&out).contains("FetaQA\tgold\t1\t66.67\t100.00\t75.00\t100.00\t55.56\t100.00"));
}

#[test]
fn evaluate_perfect_predictions_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture("corpus.jsonl");
    let instances = cellattr_core::datasets::load_dataset(&corpus, cellattr_core::types::SplitFilter::All)
        .unwrap()
        .instances;
    let perfect: Vec<_> = instances.iter().map(|i| result_for(&i.id, i.gold_cells().unwrap())).collect();
    let results = tmp.path().join("results.jsonl");
    write_lines(&results, &perfect);
    let report = tmp.path().join("eval.json");
    let out = cellattr(&["evaluate", "--results", p(&results), "--dataset", p(&corpus), "--output", p(&report)], &[]);
    assert_eq!(code(&out), 0);
    let v = read_json(&report);
    for g in ["row", "col", "cell"] {
        assert_eq!(v["overall"][g]["precision"], 1.0);
        assert_eq!(v["overall"][g]["recall"], 1.0);
    }
    assert_eq!(v["overall"]["n"], 20);
}

#[test]
fn evaluate_itemizes_mismatched_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("films.jsonl");
    write_lines(&dataset, &[films_instance()]);
    let results = tmp.path().join("results.jsonl");
    write_lines(
        &results,
        &[result_for("fetaqa-films", films_noisy_cells()), result_for("ghost", AttributionSet::new())],
    );
    let report = tmp.path().join("eval.json");
    let out = cellattr(&["evaluate", "--results", p(&results), "--dataset", p(&dataset), "--output", p(&report)], &[]);
    assert_eq!(code(&out), 1);
    let v = read_json(&report);
    assert_eq!(v["excluded"][0]["instance_id"], "ghost");
    assert_eq!(v["overall"]["n"], 1);

    fs::write(&results, "").unwrap();
    let out = cellattr(&["evaluate", "--results", p(&results), "--dataset", p(&dataset)], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no results"));
}

#[test]
fn offline_fairscore_flags_vacuous_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("films.jsonl");
    write_lines(&dataset, &[films_instance()]);
    let results = tmp.path().join("results.jsonl");
    write_lines(&results, &[result_for("fetaqa-films", AttributionSet::new())]);
    let report = tmp.path().join("fs.json");
    let out = cellattr(
        &[
            "fairscore", "--results", p(&results), "--dataset", p(&dataset), "--cell-facts", "template",
            "--answer-facts", "clauses", "--support", "lexical", "--output", p(&report),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(&report);
    let inst = &v["instances"][0];
    assert_eq!(inst["score"]["precision_vacuous"], true);
    assert_eq!(inst["score"]["precision"], 1.0);
    assert_eq!(inst["score"]["recall"], 0.0);
    assert_eq!(v["datasets"][0]["precision_vacuous"], 1);
    assert_eq!(v["calibration"][0]["actual_recall"], 0.0);
}

#[test]
fn offline_fairscore_on_the_films_example() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("films.jsonl");
    write_lines(&dataset, &[films_instance()]);
    let results = tmp.path().join("results.jsonl");
    write_lines(&results, &[result_for("fetaqa-films", films_noisy_cells())]);
    let report = tmp.path().join("fs.json");
    let out = cellattr(
        &[
            "fairscore", "--results", p(&results), "--dataset", p(&dataset), "--cell-facts", "template",
            "--answer-facts", "clauses", "--support", "lexical", "--output", p(&report),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = read_json(&report);
    let counts = &v["instances"][0]["counts"];
    assert_eq!((counts["c"].as_u64(), counts["d"].as_u64()), (Some(5), Some(4)));
    let cal = &v["calibration"][0];
    assert!((cal["actual_precision"].as_f64().unwrap() - 5.0 / 9.0).abs() < 1e-12);
    assert!(cal["delta_precision"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn ablate_writes_one_result_set_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("replay.toml");
    let corpus = fixture("corpus.jsonl");
    let ab = tmp.path().join("ablate");
    let out = cellattr(&["--config", p(&cfg), "ablate", "--dataset", p(&corpus), "-o", p(&ab)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&ab.join("report.json"));
    let names: Vec<&str> = report["variants"].as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap()).collect();
    assert_eq!(names, ["Standard", "DecomposeBeforePrune", "PerSubquery", "NoPruning", "NoDecomposition"]);
    for v in PipelineVariant::ALL {
        let text = fs::read_to_string(ab.join(format!("results-{}.jsonl", v.slug()))).unwrap();
        assert_eq!(text.lines().count(), 20);
        let tag = format!("\"variant\":\"{v:?}\"");
        assert!(text.lines().all(|l| l.contains(&tag)));
    }
    let at = tmp.path().join("attr");
    assert_eq!(code(&replay_attribute(&at, &[])), 0);
    assert_eq!(
        fs::read_to_string(ab.join("results-standard.jsonl")).unwrap(),
        fs::read_to_string(at.join("results.jsonl")).unwrap()
    );
    assert!(stdout(&out).starts_with("variant\tsucceeded"));
}

#[test]
fn import_and_stats_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let native = tmp.path().join("feta.jsonl");
    let good = serde_json::json!({
        "feta_id": 7,
        "table_array": [["Year", "Film"], ["2012", "Pizza"], ["2013", "Swamy Ra Ra"]],
        "highlighted_cell_ids": [[1, 1]],
        "question": "Which film came out in 2012?",
        "answer": "Pizza came out in 2012."
    });
    fs::write(&native, format!("{good}\n{{\"feta_id\": 8}}\n")).unwrap();
    let out_file = tmp.path().join("fetaqa.jsonl");
    let errors = tmp.path().join("errors.jsonl");
    let out = cellattr(
        &["import", "--source", "fetaqa", "--input", p(&native), "--output", p(&out_file), "--errors", p(&errors)],
        &[],
    );
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(&out_file).unwrap().lines().count(), 1);
    assert!(fs::read_to_string(&errors).unwrap().contains("\"line\":2"));

    let out = cellattr(&["stats", "--dataset", p(&out_file)], &[]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("FetaQA\t1\t0\t1\t"), "{}", stdout(&out));

    let corrupted = fixture("corrupted.jsonl");
    assert_eq!(code(&cellattr(&["stats", "--dataset", p(&corrupted)], &[])), 2);
    assert_eq!(code(&cellattr(&["stats", "--dataset", p(&corrupted), "--dataset", p(&out_file)], &[])), 1);

    let aitqa = cellattr(
        &["import", "--source", "aitqa", "--input", p(&native), "--output", p(&out_file)],
        &[],
    );
    assert_eq!(code(&aitqa), 2);
}

#[test]
fn cache_inspect_and_gc() {
    let tmp = tempfile::tempdir().unwrap();
    let transcript = fixture("transcript.jsonl");
    let out = cellattr(&["cache", "inspect", "--transcript", p(&transcript)], &[]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for tag in ["column_relevance", "final_attribution", "fact_support", "answer_facts"] {
        assert!(text.contains(&format!("\n{tag}\t")), "{text}");
    }

    let dir = tmp.path().join("cache");
    fs::create_dir_all(&dir).unwrap();
    let record = fs::read_to_string(&transcript).unwrap().lines().next().unwrap().to_string();
    let hash = serde_json::from_str::<Value>(&record).unwrap()["hash"].as_str().unwrap().to_string();
    fs::write(dir.join(format!("{hash}.json")), &record).unwrap();
    fs::write(dir.join("deadbeef.json"), "{not json").unwrap();
    fs::write(dir.join(".x.tmp"), "").unwrap();
    let out = cellattr(&["cache", "inspect", "--cache-dir", p(&dir)], &[]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    let out = cellattr(&["cache", "gc", "--cache-dir", p(&dir), "--keep-transcript", p(&transcript)], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("removed 2 entries, 1 remain"), "{}", stdout(&out));
    assert_eq!(code(&cellattr(&["cache", "gc"], &[])), 2);
}
