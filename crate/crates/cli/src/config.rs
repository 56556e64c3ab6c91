//! Run configuration: built-in defaults, then the TOML file, then the
//! `LLM_*` environment variables, then command-line flags.
//!
//! ```toml
//! [model]
//! name = "gpt-4o"
//! base_url = "https://api.openai.com/v1"
//! temperature = 0.0
//! max_output_tokens = 2048
//!
//! [gateway]
//! mode = "replay"            # live | cache | replay
//! transcript = "runs/transcript.jsonl"
//! record = "runs/new.jsonl"
//! cache_dir = ".cache/llm"
//!
//! [run]
//! jobs = 4
//! variant = "standard"
//! split = "all"              # gold | silver | all
//! seed = 0
//! prompts = "prompts/"
//! table_format = "markdown"  # markdown | delimited
//! drop_unverified = false
//!
//! [judge]
//! backend = "llm"            # llm | nli
//! url = "http://localhost:8000/nli"
//! threshold = 0.5
//!
//! [fairscore]
//! cell_facts = "template"    # template | llm
//! answer_facts = "llm"       # llm | clauses
//! support = "llm"            # llm | lexical
//! ```
//!
//! Relative paths in the file resolve against the file's directory. The API
//! key is read from `LLM_API_KEY` only.

use std::path::{Path, PathBuf};

use cellattr_core::table::RenderFormat;
use cellattr_core::types::SplitFilter;
use cellattr_llm::backend::{non_empty_env, DEFAULT_BASE_URL, ENV_API_KEY, ENV_BASE_URL, ENV_MODEL};
use cellattr_llm::GatewayMode;
use cellattr_pipeline::fairscore::{AnswerFactMode, CellFactMode, FairScoreConfig, SupportMode};
use cellattr_pipeline::{AgentConfig, PipelineVariant};
use serde::{Deserialize, Serialize};

use crate::args::{
    AnswerFactsArg, CellFactsArg, GatewayArgs, JudgeArg, ModeArg, PresetArg, SelectArgs, SplitArg, SupportArg,
};
use crate::UsageError;

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const LITE_MODEL: &str = "Qwen/Qwen2.5-7B-Instruct";
pub const DEFAULT_JOBS: usize = 4;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub gateway: GatewaySection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub judge: JudgeSection,
    #[serde(default)]
    pub fairscore: FairscoreSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: Option<String>,
    pub base_url: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySection {
    pub mode: Option<String>,
    pub transcript: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub jobs: Option<usize>,
    pub variant: Option<String>,
    pub split: Option<String>,
    pub seed: Option<u64>,
    pub prompts: Option<PathBuf>,
    pub table_format: Option<String>,
    pub drop_unverified: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    pub backend: Option<String>,
    pub url: Option<String>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FairscoreSection {
    pub cell_facts: Option<String>,
    pub answer_facts: Option<String>,
    pub support: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.gateway.transcript,
            &mut cfg.gateway.record,
            &mut cfg.gateway.cache_dir,
            &mut cfg.run.prompts,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase", tag = "backend")]
pub enum JudgeChoice {
    Llm,
    Nli { threshold: f64 },
}

/// Fully resolved settings. Serialized into report headers, so it holds no
/// secrets and no output locations.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub model: String,
    pub base_url: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub mode: GatewayMode,
    pub transcript: Option<PathBuf>,
    #[serde(skip)]
    pub record: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub jobs: usize,
    pub variant: PipelineVariant,
    pub split: SplitFilter,
    pub seed: u64,
    pub sample: Option<usize>,
    pub prompts: Option<PathBuf>,
    pub table_format: RenderFormat,
    pub drop_unverified: bool,
    pub judge: JudgeChoice,
    #[serde(skip)]
    pub judge_url: Option<String>,
    pub fairscore: FairScoreConfig,
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn parse_enum<T>(what: &str, value: &str, options: &[(&str, T)]) -> Result<T, UsageError>
where
    T: Copy,
{
    let v = value.trim().to_ascii_lowercase();
    options.iter().find(|(k, _)| *k == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
        UsageError(format!("invalid {what} `{value}` (expected one of {})", names.join(", ")))
    })
}

impl RunConfig {
    /// Resolves settings for a command. `select` is absent for commands that
    /// read existing results rather than a dataset selection.
    pub fn resolve(
        file: &FileConfig,
        gw: &GatewayArgs,
        select: Option<&SelectArgs>,
        variant: Option<&str>,
    ) -> Result<Self, UsageError> {
        let env_model = non_empty_env(ENV_MODEL);
        let model = gw
            .model
            .clone()
            .or(gw.preset.map(|PresetArg::Lite| LITE_MODEL.to_string()))
            .or(env_model)
            .or(file.model.name.clone())
            .unwrap_or_else(|| DEFAULT_MODEL.to_string());
        let base_url = gw
            .base_url
            .clone()
            .or(non_empty_env(ENV_BASE_URL))
            .or(file.model.base_url.clone())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        let temperature = gw.temperature.or(file.model.temperature).unwrap_or(0.0);
        if !(0.0..=2.0).contains(&temperature) {
            return Err(UsageError(format!("temperature {temperature} outside [0, 2]")));
        }
        let max_output_tokens = file.model.max_output_tokens.unwrap_or(2048);

        let modes = [
            ("live", GatewayMode::Live),
            ("cache", GatewayMode::Cache),
            ("replay", GatewayMode::Replay),
        ];
        let mode = match (gw.mode, &file.gateway.mode) {
            (Some(m), _) => match m {
                ModeArg::Live => GatewayMode::Live,
                ModeArg::Cache => GatewayMode::Cache,
                ModeArg::Replay => GatewayMode::Replay,
            },
            (None, Some(m)) => parse_enum("gateway mode", m, &modes)?,
            (None, None) => GatewayMode::Live,
        };
        let transcript = gw.transcript.clone().or(file.gateway.transcript.clone());
        let record = gw.record.clone().or(file.gateway.record.clone());
        let cache_dir = gw.cache_dir.clone().or(file.gateway.cache_dir.clone());
        let api_key = non_empty_env(ENV_API_KEY);
        match mode {
            GatewayMode::Replay if transcript.is_none() => {
                return Err(UsageError("replay mode needs --transcript (or gateway.transcript in the config)".into()))
            }
            GatewayMode::Cache if cache_dir.is_none() => {
                return Err(UsageError("cache mode needs --cache-dir (or gateway.cache_dir in the config)".into()))
            }
            _ => {}
        }

        let jobs = gw.jobs.or(file.run.jobs).unwrap_or(DEFAULT_JOBS);
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()));
        }
        let variant = match variant.map(str::to_string).or(file.run.variant.clone()) {
            Some(v) => v.parse().map_err(UsageError)?,
            None => PipelineVariant::Standard,
        };
        let splits = [
            ("gold", SplitFilter::Gold),
            ("silver", SplitFilter::Silver),
            ("all", SplitFilter::All),
        ];
        let split = match (select.and_then(|s| s.split), &file.run.split) {
            (Some(SplitArg::Gold), _) => SplitFilter::Gold,
            (Some(SplitArg::Silver), _) => SplitFilter::Silver,
            (Some(SplitArg::All), _) => SplitFilter::All,
            (None, Some(s)) => parse_enum("split", s, &splits)?,
            (None, None) => SplitFilter::All,
        };
        let seed = select.and_then(|s| s.seed).or(file.run.seed).unwrap_or(DEFAULT_SEED);
        let sample = select.and_then(|s| s.sample);
        let formats = [("markdown", RenderFormat::Markdown), ("delimited", RenderFormat::Delimited)];
        let table_format = match &file.run.table_format {
            Some(f) => parse_enum("table format", f, &formats)?,
            None => RenderFormat::Markdown,
        };

        let judge_url = gw.nli_url.clone().or(file.judge.url.clone());
        let threshold = file.judge.threshold.unwrap_or(0.5);
        let judge = match (gw.judge, &file.judge.backend) {
            (Some(JudgeArg::Llm), _) => JudgeChoice::Llm,
            (Some(JudgeArg::Nli), _) => JudgeChoice::Nli { threshold },
            (None, Some(b)) => parse_enum(
                "judge backend",
                b,
                &[("llm", JudgeChoice::Llm), ("nli", JudgeChoice::Nli { threshold })],
            )?,
            (None, None) => JudgeChoice::Llm,
        };
        if matches!(judge, JudgeChoice::Nli { .. }) && judge_url.is_none() {
            return Err(UsageError("the nli judge needs --nli-url (or judge.url in the config)".into()));
        }

        let fs = &file.fairscore;
        let fairscore = FairScoreConfig {
            cell_facts: match &fs.cell_facts {
                Some(v) => parse_enum("cell_facts", v, &[("template", CellFactMode::Template), ("llm", CellFactMode::Llm)])?,
                None => FairScoreConfig::default().cell_facts,
            },
            answer_facts: match &fs.answer_facts {
                Some(v) => parse_enum(
                    "answer_facts",
                    v,
                    &[("llm", AnswerFactMode::Llm), ("clauses", AnswerFactMode::Clauses)],
                )?,
                None => FairScoreConfig::default().answer_facts,
            },
            support: match &fs.support {
                Some(v) => parse_enum("support", v, &[("llm", SupportMode::Llm), ("lexical", SupportMode::Lexical)])?,
                None => FairScoreConfig::default().support,
            },
        };

        Ok(RunConfig {
            model,
            base_url,
            temperature,
            max_output_tokens,
            mode,
            transcript,
            record,
            cache_dir,
            jobs,
            variant,
            split,
            seed,
            sample,
            prompts: gw.prompts.clone().or(file.run.prompts.clone()),
            table_format,
            drop_unverified: file.run.drop_unverified.unwrap_or(false),
            judge,
            judge_url,
            fairscore,
            api_key,
        })
    }

    pub fn apply_fairscore_flags(
        &mut self,
        cell: Option<CellFactsArg>,
        answer: Option<AnswerFactsArg>,
        support: Option<SupportArg>,
    ) {
        if let Some(c) = cell {
            self.fairscore.cell_facts = match c {
                CellFactsArg::Template => CellFactMode::Template,
                CellFactsArg::Llm => CellFactMode::Llm,
            };
        }
        if let Some(a) = answer {
            self.fairscore.answer_facts = match a {
                AnswerFactsArg::Llm => AnswerFactMode::Llm,
                AnswerFactsArg::Clauses => AnswerFactMode::Clauses,
            };
        }
        if let Some(s) = support {
            self.fairscore.support = match s {
                SupportArg::Llm => SupportMode::Llm,
                SupportArg::Lexical => SupportMode::Lexical,
            };
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            model: self.model.clone(),
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            table_format: self.table_format,
            drop_unverified: self.drop_unverified,
        }
    }

    /// Live and cache modes call the model API and need a key.
    pub fn require_api_key(&self) -> Result<&str, UsageError> {
        match (&self.api_key, self.mode) {
            (Some(k), _) => Ok(k),
            (None, GatewayMode::Replay) => Ok(""),
            (None, mode) => Err(UsageError(format!(
                "{mode} mode calls the model API; set {ENV_API_KEY}, or use --mode replay with a transcript"
            ))),
        }
    }

    /// True when scoring needs no model calls at all.
    pub fn offline_fairscore(&self) -> bool {
        self.fairscore.cell_facts == CellFactMode::Template
            && self.fairscore.answer_facts == AnswerFactMode::Clauses
            && self.fairscore.support == SupportMode::Lexical
    }
}
