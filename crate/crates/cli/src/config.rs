//! Pipeline configuration: a TOML file merged with command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use benchlens::cluster::Linkage;
use benchlens::metrics::Metric;
use benchlens::reduce::Retention;
use clap::Args;
use serde::Deserialize;

use crate::CliError;

pub const OUT_ENV: &str = "BENCHLENS_OUT";
pub const DEFAULT_OUT: &str = "benchlens-out";

/// Every key may also be given as a flag of the same name (`_` becomes `-`).
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub counter_maps: Option<PathBuf>,
    pub machine: Option<String>,
    pub suite: Option<Vec<String>>,
    pub linkage: Option<String>,
    pub pcs: Option<usize>,
    pub variance: Option<f64>,
    pub threshold: Option<f64>,
    pub groups: Option<usize>,
    pub subset_k: Option<usize>,
    pub mix_k: Option<usize>,
    pub top: Option<usize>,
    pub budget: Option<u128>,
    pub out: Option<PathBuf>,
    pub format: Option<Vec<String>>,
    pub suite_a: Option<String>,
    pub suite_b: Option<String>,
    pub mix: Option<PathBuf>,
    pub target: Option<String>,
    pub pool: Option<String>,
    pub copies: Option<usize>,
    pub weights: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Canonical measurement store (CSV)
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Per-run scores and wallclock times (CSV)
    #[arg(long, global = true)]
    pub scores: Option<PathBuf>,
    /// Directory of raw counter dumps laid out as MACHINE/SUITE/WORKLOAD.csv
    #[arg(long, global = true)]
    pub raw: Option<PathBuf>,
    /// Counter-map manifest (TOML)
    #[arg(long, global = true)]
    pub counter_maps: Option<PathBuf>,
    #[arg(long, global = true)]
    pub machine: Option<String>,
    /// Restrict to these suites (repeatable)
    #[arg(long, global = true)]
    pub suite: Vec<String>,
    /// ward, average, complete or single
    #[arg(long, global = true)]
    pub linkage: Option<String>,
    /// Number of principal components to keep
    #[arg(long, global = true, conflicts_with = "variance")]
    pub pcs: Option<usize>,
    /// Keep components up to this cumulative explained-variance fraction
    #[arg(long, global = true)]
    pub variance: Option<f64>,
    /// Cut the dendrogram at this height
    #[arg(long, global = true, conflicts_with = "groups")]
    pub threshold: Option<f64>,
    /// Cut the dendrogram into this many groups
    #[arg(long, global = true)]
    pub groups: Option<usize>,
    /// Subset size when no cut is given
    #[arg(long, global = true)]
    pub subset_k: Option<usize>,
    /// Largest proxy mix to search
    #[arg(long, global = true)]
    pub mix_k: Option<usize>,
    /// Metrics per component in the loading report
    #[arg(long, global = true)]
    pub top: Option<usize>,
    /// Maximum number of candidates for exhaustive searches
    #[arg(long, global = true)]
    pub budget: Option<u128>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output formats to write: csv, md, svg (repeatable or comma-separated)
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Vec<String>,
    #[arg(long, global = true)]
    pub suite_a: Option<String>,
    #[arg(long, global = true)]
    pub suite_b: Option<String>,
    /// Proxy mix file: one `workload [duration]` per line
    #[arg(long, global = true)]
    pub mix: Option<PathBuf>,
    /// Proxy target as SUITE/WORKLOAD
    #[arg(long, global = true)]
    pub target: Option<String>,
    /// Suite whose workloads form the proxy search pool
    #[arg(long, global = true)]
    pub pool: Option<String>,
    /// Staggered copies in a proxy schedule
    #[arg(long, global = true)]
    pub copies: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Md,
    Svg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cut {
    Threshold(f64),
    Groups(usize),
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub store: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub raw: Option<PathBuf>,
    pub counter_maps: Option<PathBuf>,
    pub machine: Option<String>,
    pub suites: Vec<String>,
    pub linkage: Linkage,
    pub retention: Retention,
    pub cut: Option<Cut>,
    pub subset_k: Option<usize>,
    pub mix_k: Option<usize>,
    pub top: usize,
    pub budget: u128,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub suite_a: Option<String>,
    pub suite_b: Option<String>,
    pub mix: Option<PathBuf>,
    pub target: Option<(String, String)>,
    pub pool: Option<String>,
    pub copies: Option<usize>,
    pub weights: BTreeMap<Metric, f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

impl PipelineConfig {
    /// Flags win over the file; `out` falls back to the environment.
    pub fn resolve(flags: &Flags, env_out: Option<PathBuf>) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        // Relative paths in the file are taken from the file's directory.
        let base = flags
            .config
            .as_deref()
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let rel = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });
        let pick = |flag: &Option<PathBuf>, file: Option<PathBuf>| flag.clone().or_else(|| rel(file));

        let linkage = match flags.linkage.clone().or(file.linkage) {
            Some(s) => s.parse().map_err(|e: benchlens::cluster::ClusterError| config_err(e.to_string()))?,
            None => Linkage::default(),
        };

        let (pcs, variance) = match (flags.pcs, flags.variance) {
            (None, None) => (file.pcs, file.variance),
            flags => flags,
        };
        let retention = match (pcs, variance) {
            (Some(_), Some(_)) => return Err(config_err("`pcs` and `variance` are mutually exclusive")),
            (Some(0), None) => return Err(config_err("`pcs` must be at least 1")),
            (Some(k), None) => Retention::Components(k),
            (None, Some(f)) if f > 0.0 && f <= 1.0 => Retention::VarianceTarget(f),
            (None, Some(f)) => return Err(config_err(format!("`variance` {f} must lie in (0, 1]"))),
            (None, None) => Retention::default(),
        };

        let (threshold, groups) = match (flags.threshold, flags.groups) {
            (None, None) => (file.threshold, file.groups),
            flags => flags,
        };
        let cut = match (threshold, groups) {
            (Some(_), Some(_)) => return Err(config_err("`threshold` and `groups` are mutually exclusive")),
            (Some(h), None) if h.is_finite() && h >= 0.0 => Some(Cut::Threshold(h)),
            (Some(h), None) => return Err(config_err(format!("`threshold` {h} must be finite and >= 0"))),
            (None, Some(0)) => return Err(config_err("`groups` must be at least 1")),
            (None, Some(g)) => Some(Cut::Groups(g)),
            (None, None) => None,
        };

        let positive = |name: &str, v: Option<usize>| match v {
            Some(0) => Err(config_err(format!("`{name}` must be at least 1"))),
            v => Ok(v),
        };
        let subset_k = positive("subset_k", flags.subset_k.or(file.subset_k))?;
        let mix_k = positive("mix_k", flags.mix_k.or(file.mix_k))?;
        let copies = positive("copies", flags.copies.or(file.copies))?;
        let top = positive("top", flags.top.or(file.top))?.unwrap_or(4);

        let format_names = if flags.format.is_empty() {
            file.format.unwrap_or_default()
        } else {
            flags.format.clone()
        };
        let mut formats = format_names
            .iter()
            .map(|f| match f.trim().to_ascii_lowercase().as_str() {
                "csv" => Ok(Format::Csv),
                "md" | "markdown" => Ok(Format::Md),
                "svg" => Ok(Format::Svg),
                other => Err(config_err(format!("unknown format `{other}` (expected csv, md or svg)"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if formats.is_empty() {
            formats = vec![Format::Csv, Format::Md, Format::Svg];
        }
        formats.sort();
        formats.dedup();

        let target = match flags.target.clone().or(file.target) {
            Some(t) => match t.split_once('/') {
                Some((s, w)) if !s.is_empty() && !w.is_empty() => Some((s.to_string(), w.to_string())),
                _ => return Err(config_err(format!("`target` must be SUITE/WORKLOAD, got `{t}`"))),
            },
            None => None,
        };

        let weights = match file.weights {
            Some(w) => w
                .into_iter()
                .map(|(k, v)| {
                    let m = Metric::from_key(&k).ok_or_else(|| config_err(format!("unknown metric `{k}` in weights")))?;
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(config_err(format!("weight for `{k}` must be finite and >= 0")));
                    }
                    Ok((m, v))
                })
                .collect::<Result<_, _>>()?,
            None => benchlens::proxy::uniform_weights(),
        };

        let out = flags
            .out
            .clone()
            .or_else(|| rel(file.out))
            .or(env_out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

        Ok(PipelineConfig {
            store: pick(&flags.store, file.store),
            scores: pick(&flags.scores, file.scores),
            raw: pick(&flags.raw, file.raw),
            counter_maps: pick(&flags.counter_maps, file.counter_maps),
            machine: flags.machine.clone().or(file.machine),
            suites: if flags.suite.is_empty() {
                file.suite.unwrap_or_default()
            } else {
                flags.suite.clone()
            },
            linkage,
            retention,
            cut,
            subset_k,
            mix_k,
            top,
            budget: flags.budget.or(file.budget).unwrap_or(benchlens::subset::DEFAULT_BUDGET),
            out,
            formats,
            suite_a: flags.suite_a.clone().or(file.suite_a),
            suite_b: flags.suite_b.clone().or(file.suite_b),
            mix: pick(&flags.mix, file.mix),
            target,
            pool: flags.pool.clone().or(file.pool),
            copies,
            weights,
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
