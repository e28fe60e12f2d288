//! `forestquiz`: train a forest from a community corpus, compile it into a
//! quiz, serve it, and score the answers.

mod commands;
mod failure;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "forestquiz", version, about)]
pub struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build features, train the forest and run leave-one-out validation.
    Train(TrainArgs),
    /// Leave-one-out validation only; writes loocv.json.
    Loocv(TrainArgs),
    /// Turn a forest into quiz.json.
    CompileQuiz(CompileArgs),
    /// Check that a quiz covers exactly the decision nodes of a forest.
    ValidateQuiz(ValidateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Simulate respondents and write records.jsonl.
    Simulate(SimulateArgs),
    /// Accuracy, engagement and demographic reports from records.
    Eval(EvalArgs),
    /// Write a synthetic corpus.jsonl and labels.csv.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormalizationArg {
    RelativeFrequency,
    RawCount,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CriterionArg {
    Gini,
    InfoGain,
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Directory for every artifact and report.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Posts, one `{"community", "text"}` object per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// CSV with header `community,overweight_rate`.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hashtags a post must carry to be admitted, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "#breakfast,#brunch,#lunch,#dinner,#supper,#snack,#meal")]
    pub hashtags: Vec<String>,
    /// Label the community exactly at the median as positive.
    #[arg(long)]
    pub median_tie_positive: bool,
    /// Tokens seen fewer times than this are dropped.
    #[arg(long, default_value_t = 3)]
    pub min_count: usize,
    #[arg(long, value_enum, default_value = "relative-frequency")]
    pub normalization: NormalizationArg,
    /// LDA topic count; 0 disables topic features.
    #[arg(long, default_value_t = 50)]
    pub topics: usize,
    /// Dirichlet prior on document topics; defaults to 50/topics.
    #[arg(long)]
    pub lda_alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub lda_beta: f64,
    #[arg(long, default_value_t = 500)]
    pub lda_iterations: usize,
    #[arg(long, default_value_t = 7)]
    pub trees: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    /// Candidate features per split; defaults to ceil(sqrt(features)).
    #[arg(long)]
    pub feature_subsample: Option<usize>,
    /// Train every tree on all rows instead of a bootstrap sample.
    #[arg(long)]
    pub no_bootstrap: bool,
    #[arg(long, value_enum, default_value = "gini")]
    pub criterion: CriterionArg,
    /// Skip leave-one-out validation (train only).
    #[arg(long)]
    pub no_loocv: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub forest: PathBuf,
    /// Feature space from `train`; lets topic questions name their top words.
    #[arg(long)]
    pub featurespace: Option<PathBuf>,
    /// Question templates; the bundled bank is used when omitted.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Human edits keyed by feature id.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub quiz: PathBuf,
    #[arg(long)]
    pub forest: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long)]
    pub quiz: PathBuf,
    /// Also require the quiz to match this forest at startup.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    /// Holds the event log.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// BMI at or above which a respondent counts as overweight.
    #[arg(long, default_value_t = 28.7)]
    pub cutoff: f64,
    /// Admin token for the export endpoint; export is disabled when unset.
    #[arg(long, env = "FORESTQUIZ_ADMIN_TOKEN", hide_env_values = true)]
    pub admin_token: Option<String>,
    /// Salt for handle hashes and exported respondent ids.
    #[arg(long, env = "FORESTQUIZ_EXPORT_SALT", hide_env_values = true)]
    pub export_salt: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub quiz: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// `uniform`, `always-<0|1|2>` or `weighted:<a>,<b>,<c>`.
    #[arg(long, default_value = "uniform")]
    pub policy: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 28.7)]
    pub cutoff: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Records from `simulate`.
    #[arg(long, conflicts_with = "export", required_unless_present = "export")]
    pub records: Option<PathBuf>,
    /// Anonymized export from the service; demographics tables are skipped.
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long, default_value_t = 28.7)]
    pub cutoff: f64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 51)]
    pub communities: usize,
    /// Tokens whose frequency tracks the community rate (at most 10 are food words).
    #[arg(long, default_value_t = 10)]
    pub planted: usize,
    #[arg(long, default_value_t = 200)]
    pub noise: usize,
    #[arg(long, default_value_t = 150)]
    pub docs: usize,
    #[arg(long, default_value_t = 12)]
    pub tokens_per_doc: usize,
    /// Log-weight change of planted tokens per standard deviation of the rate.
    #[arg(long, default_value_t = 1.5)]
    pub signal: f64,
    #[command(flatten)]
    pub out: OutDir,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.render().to_string();
            return Failure::usage(msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ")).report();
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
