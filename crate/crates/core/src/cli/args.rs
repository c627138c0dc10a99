use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::meta_opt::Estimator;
use crate::metrics::Axis;
use crate::poset::PosetKind;
use crate::prompt::PromptStyle;

/// `N`, `A..B` or `A-B`, inclusive.
pub fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad number {x:?} in {s:?}"));
    let (a, b) = match s.split_once("..").or_else(|| s.split_once('-')) {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let n = num(s)?;
            (n, n)
        }
    };
    if a == 0 || a > b {
        return Err(format!("range {s:?} must satisfy 1 <= start <= end"));
    }
    Ok(a..=b)
}

/// `KxC`: `k ∈ 1..=K`, `c ∈ 1..=C`.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (k, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid {s:?} is not KxC"))?;
    let k: usize = k.parse().map_err(|_| format!("bad grid {s:?}"))?;
    let c: usize = c.parse().map_err(|_| format!("bad grid {s:?}"))?;
    if k == 0 || c == 0 {
        return Err(format!("grid {s:?} must be at least 1x1"));
    }
    Ok((k, c))
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| format!("bad list entry {x:?}")))
        .collect()
}

#[derive(Debug, Parser)]
#[command(name = "poset-icl", version, about = "In-context learning experiments on partially ordered sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit k-shot c-complex prompts as JSON Lines
    Gen(GenArgs),
    /// Sweep a (k, c) grid against an endpoint or the mock model
    Run(RunArgs),
    /// Per-record accuracy table from a record stream
    Score(ScoreArgs),
    /// Mean cumulative accuracy series
    Mca(McaArgs),
    /// Kendall's coefficient of concordance of a rank table
    Kendall(KendallArgs),
    /// Rank of the in-context update across demonstration counts
    Theorem1(Theorem1Args),
    /// Query risk against the number of demonstrations
    Saturate(SaturateArgs),
    /// t-SNE projections and cluster separation of task vectors
    Tsne(TsneArgs),
    /// Merge CSV files into one table with a source column
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long)]
    pub kind: PosetKind,
    /// Evaluation points per prompt [default: 50 for LO/LOBIN, 30 for DIV]
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "standard")]
    pub style: PromptStyle,
}

impl PromptArgs {
    pub fn count(&self) -> usize {
        self.count.unwrap_or(self.kind.default_task_count())
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Shots: `N`, `A..B` or `A-B`
    #[arg(long, value_parser = parse_range)]
    pub k: RangeInclusive<usize>,
    /// Complexity: `N`, `A..B` or `A-B`
    #[arg(long, value_parser = parse_range)]
    pub c: RangeInclusive<usize>,
    /// Write rendered prompt text instead of JSON
    #[arg(long)]
    pub text: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// `KxC`, shorthand for `--k 1..K --c 1..C`
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range, conflicts_with = "grid")]
    pub k: Option<RangeInclusive<usize>>,
    #[arg(long, value_parser = parse_range, conflicts_with = "grid")]
    pub c: Option<RangeInclusive<usize>>,
    /// Answer from ground truth instead of calling an endpoint
    #[arg(long)]
    pub mock: bool,
    #[arg(long, default_value_t = 0.0, requires = "mock")]
    pub error_rate: f64,
    /// Seed of the mock's error draws [default: --seed]
    #[arg(long, requires = "mock")]
    pub mock_seed: Option<u64>,
    #[arg(long, default_value = "http://localhost:11434")]
    pub base_url: String,
    #[arg(long, default_value = "llama3")]
    pub model: String,
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub api_key_env: String,
    #[arg(long, default_value_t = 1024)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 120.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 4)]
    pub max_in_flight: usize,
    #[arg(long, default_value_t = 3)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 500)]
    pub backoff_ms: u64,
    /// Refuse prompts longer than this many characters
    #[arg(long)]
    pub context_budget: Option<usize>,
    /// Response cache (JSON Lines)
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Record stream (JSON Lines); existing cells are skipped
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct McaArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "complexity")]
    pub axis: Axis,
    /// Highest level reported [default: largest level in the records]
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KendallArgs {
    /// JSON rank table `{judges: [{name, weight}], items: [...], ranks: [[...]]}`
    #[arg(long)]
    pub table: PathBuf,
    /// Weight judges by their normalized weights
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Debug, Args)]
pub struct Theorem1Args {
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 32)]
    pub kmax: usize,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SaturateArgs {
    /// Analytic in-context learner
    #[arg(long)]
    pub ols: bool,
    /// Trained linear-attention read-out
    #[arg(long)]
    pub linattn: bool,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Query tasks per seed and per k
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluated k are 1..=kmax unless --k-list is given
    #[arg(long, default_value_t = 32)]
    pub kmax: usize,
    #[arg(long, value_parser = parse_list)]
    pub k_list: Option<Vec<usize>>,
    #[arg(long, default_value = "posterior")]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum EstimatorArg {
    Posterior,
    MinNorm,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Posterior => Estimator::Posterior,
            EstimatorArg::MinNorm => Estimator::MinNorm,
        }
    }
}

#[derive(Debug, Args)]
pub struct TsneArgs {
    /// Task vectors as JSON Lines `{label, vector, layer?}`
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub perplexity: f64,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 200.0)]
    pub learning_rate: f64,
    /// Runs seeds 0..N
    #[arg(long, default_value_t = 41)]
    pub seeds: u64,
    /// Explicit seed list, overrides --seeds
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Also draw the lowest-KL projection as SVG
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
