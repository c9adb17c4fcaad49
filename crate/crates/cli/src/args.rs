use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxshap_core::shap::DEFAULT_CAP;
use ctxshap_gateway::Mode;

#[derive(Debug, Parser)]
#[command(name = "ctxshap", version, about = "Exact SHAP values for tree ensembles, with plots and plain-language explanations")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute attributions and write attributions.json.
    Shap(Selection),
    /// Attributions, plot, prompt and (unless --no-llm) an explanation report.
    Explain(ExplainArgs),
    /// Check a model file and print a PASS/FAIL/WARN table.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Bar,
    Waterfall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Record,
    Replay,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Live => Mode::Live,
            ModeArg::Record => Mode::Record,
            ModeArg::Replay => Mode::Replay,
        }
    }
}

#[derive(Debug, Args)]
pub struct Selection {
    /// CSV of instances to explain (header row, columns matched by feature name).
    #[arg(long)]
    pub instances: Option<PathBuf>,
    /// Zero-based row of --instances to use on its own.
    #[arg(long)]
    pub index: Option<usize>,
    /// One instance inline: a JSON array in model feature order, or an object keyed by feature name.
    #[arg(long, conflicts_with_all = ["instances", "index"])]
    pub instance_json: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[command(flatten)]
    pub selection: Selection,
    /// Largest number of bars or steps drawn before the rest are folded together.
    #[arg(long, default_value_t = 9)]
    pub max_display: usize,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Model JSON file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Background CSV used to fit node covers; without it the model's own covers are used.
    #[arg(long, global = true)]
    pub background: Option<PathBuf>,
    /// Context JSON (aliases, descriptions, background text, language, reader).
    #[arg(long, global = true)]
    pub context: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "ctxshap-out")]
    pub out: PathBuf,
    /// Token budget for the user prompt.
    #[arg(long, global = true, default_value_t = 4096)]
    pub budget: usize,
    /// Maximum number of features for exact enumeration.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    pub cap: usize,
    /// Stop after writing the plot and the prompt.
    #[arg(long, global = true)]
    pub no_llm: bool,
    #[arg(long, global = true, value_enum, default_value = "live")]
    pub mode: ModeArg,
    /// Fixture directory for record and replay modes.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true, default_value = "https://api.openai.com/v1")]
    pub base_url: String,
    #[arg(long, global = true, default_value = "gpt-4o")]
    pub llm_model: String,
    /// Name of the environment variable holding the API key.
    #[arg(long, global = true, default_value = "CTXSHAP_API_KEY")]
    pub api_key_env: String,
    /// Request timeout in seconds.
    #[arg(long, global = true, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, global = true, default_value_t = 3)]
    pub max_retries: u32,
    /// Send plots as SVG instead of PNG.
    #[arg(long, global = true)]
    pub no_raster: bool,
    /// Price per 1000 prompt tokens; with --price-output enables cost estimates.
    #[arg(long, global = true, requires = "price_output")]
    pub price_input: Option<f64>,
    /// Price per 1000 completion tokens.
    #[arg(long, global = true, requires = "price_input")]
    pub price_output: Option<f64>,
}
