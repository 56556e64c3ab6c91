//! The `cellattr` command-line tool. Each subcommand is a plain function so
//! tests can drive it in-process; [`run`] maps outcomes to exit codes.

pub mod args;
pub mod cache_cmd;
pub mod config;
pub mod data;
pub mod evaluate;
pub mod fairscore_cmd;
pub mod output;
pub mod runner;

use std::fmt;

use args::{Cli, Command};
use config::{FileConfig, RunConfig};

/// Bad flags, configuration or inputs. Exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Some instances failed or were rejected.
    Partial,
}

impl Outcome {
    pub fn from_problems(n: usize) -> Self {
        if n == 0 {
            Outcome::Success
        } else {
            Outcome::Partial
        }
    }

    pub fn and(self, other: Outcome) -> Outcome {
        if self == Outcome::Success {
            other
        } else {
            self
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Partial => 1,
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Import(a) => data::import(&a),
        Command::Stats(a) => data::stats(&a),
        Command::Attribute(a) => {
            let cfg = RunConfig::resolve(&file, &a.gateway, Some(&a.select), a.variant.as_deref())?;
            runner::attribute(&cfg, &a.select.dataset, &a.output)
        }
        Command::Evaluate(a) => evaluate::run(&a),
        Command::Fairscore(a) => {
            let mut cfg = RunConfig::resolve(&file, &a.gateway, None, None)?;
            cfg.apply_fairscore_flags(a.cell_facts, a.answer_facts, a.support);
            fairscore_cmd::run(&cfg, &a)
        }
        Command::Ablate(a) => {
            let cfg = RunConfig::resolve(&file, &a.gateway, Some(&a.select), None)?;
            runner::ablate(&cfg, &a.select.dataset, &a.output)
        }
        Command::Cache(c) => cache_cmd::run(&c, &file),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcomes_map_to_exit_codes() {
        assert_eq!(Outcome::from_problems(0).exit_code(), 0);
        assert_eq!(Outcome::from_problems(3).exit_code(), 1);
        assert_eq!(Outcome::Success.and(Outcome::Partial), Outcome::Partial);
        assert_eq!(Outcome::Partial.and(Outcome::Success), Outcome::Partial);
    }
}
