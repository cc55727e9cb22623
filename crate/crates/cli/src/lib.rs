//! `benchlens` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 search budget exceeded. Failures are reported on stderr as one JSON
//! object `{"stage", "error", "message"}`.

pub mod config;
pub mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use config::{Flags, PipelineConfig, OUT_ENV};
use stages::Output;

#[derive(Debug, Parser)]
#[command(name = "benchlens", version, about = "Benchmark characterization from hardware counters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Parse raw counter dumps into the canonical store
    Ingest,
    /// Derive per-run metrics and the metric availability report
    Derive,
    /// Build the normalized (metric, machine) feature matrix per suite
    Featurize,
    /// Principal components, explained variance and loading report
    Pca,
    /// Hierarchical clustering in PC space, dendrogram and optional cut
    Cluster,
    /// Medoid representatives and their score accuracy
    Subset,
    /// Per-metric comparison of two suites on one machine
    Compare,
    /// Rolling round-robin blend or mix search against a target
    Proxy,
    /// Run the whole pipeline
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Derive => "derive",
            Command::Featurize => "featurize",
            Command::Pca => "pca",
            Command::Cluster => "cluster",
            Command::Subset => "subset",
            Command::Compare => "compare",
            Command::Proxy => "proxy",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{message}")]
    Data {
        stage: &'static str,
        kind: String,
        message: String,
    },
    #[error("{message}")]
    Budget { stage: &'static str, message: String },
}

/// Name of the enum variant in a `Debug` rendering, e.g. `MissingScore`.
fn variant_name(debug: &str) -> String {
    debug
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or("Error")
        .to_string()
}

impl CliError {
    pub fn data<E: std::fmt::Debug + std::fmt::Display>(stage: &'static str, e: &E) -> Self {
        // Transparent wrappers (e.g. a cluster error inside a subset error)
        // report the inner variant.
        let debug = format!("{e:?}");
        let mut kind = variant_name(&debug);
        if let Some(inner) = debug.strip_prefix(&format!("{kind}(")) {
            let inner_kind = variant_name(inner);
            if !inner_kind.is_empty() && inner_kind.chars().next().is_some_and(char::is_uppercase) {
                kind = inner_kind;
            }
        }
        CliError::Data {
            stage,
            kind,
            message: e.to_string(),
        }
    }

    pub fn io(stage: &'static str, path: &Path, e: std::io::Error) -> Self {
        CliError::Data {
            stage,
            kind: "Io".into(),
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data { .. } => 2,
            CliError::Budget { .. } => 3,
        }
    }

    pub fn to_json(&self, stage: &str) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            stage: &'a str,
            error: &'a str,
            message: String,
        }
        let (stage, error) = match self {
            CliError::Usage(_) => ("cli", "UsageError"),
            CliError::Config(_) => (stage, "ConfigError"),
            CliError::Data { stage, kind, .. } => (*stage, kind.as_str()),
            CliError::Budget { stage, .. } => (*stage, "BudgetExceeded"),
        };
        serde_json::to_string(&Report {
            stage,
            error,
            message: self.to_string(),
        })
        .expect("plain strings serialize")
    }
}

pub fn dispatch(command: Command, cfg: &PipelineConfig) -> Result<String, CliError> {
    let mut out = Output::new(cfg);
    match command {
        Command::Ingest => stages::ingest(cfg, &mut out),
        Command::Derive => stages::derive(cfg, &mut out),
        Command::Featurize => stages::featurize(cfg, &mut out),
        Command::Pca => stages::pca(cfg, &mut out),
        Command::Cluster => stages::cluster(cfg, &mut out),
        Command::Subset => stages::subset(cfg, &mut out),
        Command::Compare => stages::compare(cfg, &mut out),
        Command::Proxy => stages::proxy(cfg, &mut out),
        Command::Report => stages::report(cfg, &mut out),
    }
}

/// Parses arguments, runs one command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stage = cli.command.name();
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let result = PipelineConfig::resolve(&cli.flags, env_out).and_then(|cfg| dispatch(cli.command, &cfg));
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json(stage));
            e.exit_code()
        }
    }
}
