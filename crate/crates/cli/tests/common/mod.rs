#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cellattr_cli::args::{FairscoreArgs, GatewayArgs};
use cellattr_cli::config::RunConfig;
use cellattr_cli::fairscore_cmd;
use cellattr_llm::Gateway;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Runs the binary with the model env vars cleared unless given in `env`.
pub fn cellattr(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cellattr"));
    cmd.args(args)
        .env_remove("LLM_API_KEY")
        .env_remove("LLM_BASE_URL")
        .env_remove("LLM_MODEL")
        .env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn fairscore_with(cfg: &RunConfig, gateway: &Gateway, results: &Path, dataset: &Path) {
    let args = FairscoreArgs {
        results: results.to_path_buf(),
        dataset: dataset.to_path_buf(),
        gateway: GatewayArgs::default(),
        cell_facts: None,
        answer_facts: None,
        support: None,
        output: None,
        tsv: None,
    };
    fairscore_cmd::run_with(cfg, gateway, &args).expect("fairscore runs");
}
