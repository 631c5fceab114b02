mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const SCHEMAS: &str = "\
File formats:
  transcripts.jsonl   one JSON object per line: id, dimension, stubbornness, seed,
                      messages [{speaker, stage, text}], outcome {changed, reasoning, valid},
                      backend_meta {..}
  estimates.csv       dimension,stubbornness,n,k,p_hat,ci_low,ci_high
  lengths.csv         dimension,stubbornness,stratum,n,mean_words,std_words
  tally matrix CSV    dimension,<id>,<id>,...   row i, column j = judgments preferring i over j
  pair votes CSV      pair_id,first,second,first_votes,second_votes
  judgments CSV       worker,pair,choice,order,timestamp,is_control
                      choice is the side picked on screen (left|right); order tells whether the
                      stored pair was shown as is (original) or mirrored (swapped); timestamp is
                      milliseconds since the Unix epoch
  scores CSV          argument_id,dimension,score,word_count[,source]
                      source is the strategy that produced the argument (defaults to dimension)
  embeddings CSV      argument_id,v0,v1,...

Dimension ids: knowledge power status trust support similarity identity fun conflict baseline
Stubbornness ids: soft moderate hard

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid config or input.";

#[derive(Parser)]
#[command(name = "persuasion", version, about = "Persuasion-dialogue experiments, annotation and analysis")]
#[command(after_long_help = SCHEMAS)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dialogue grid and write transcripts and estimates.
    Run(RunArgs),
    /// Persuasion probabilities with Wilson 95% intervals from transcripts.
    Estimate(EstimateArgs),
    /// Argument word counts per cell, split by outcome.
    Lengths(TranscriptsIn),
    /// Fit Bradley-Terry strengths; writes strengths.csv and probabilities.csv.
    BtFit(BtFitArgs),
    /// Fleiss kappa over pair judgments, before and after worker gating.
    Kappa(JudgmentsIn),
    /// Rankings at agreement thresholds 0.50, 0.55, ..., 0.90.
    Sweep(SweepArgs),
    /// Welch t-tests of each dimension's length-discounted scores against baseline.
    Ttest(TtestArgs),
    /// Mean cosine similarity between baseline and each dimension's embeddings.
    Similarity(SimilarityArgs),
    /// Odds ratio of a 2x2 table, with 0.5 correction when a cell is zero.
    Odds(OddsArgs),
    /// Sample argument pairs and controls for annotation; writes tasks.json.
    SamplePairs(SamplePairsArgs),
    /// Serve the annotation HTTP API.
    Serve(ServeArgs),
    /// Gate workers and export votes, tally and worker table from a judgment log.
    Export(ExportArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Use the offline mock backend regardless of the config.
    #[arg(long)]
    mock: bool,
    /// Root seed; a random one is drawn and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Override output_dir.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override dialogues_per_cell.
    #[arg(long)]
    per_cell: Option<u32>,
    /// Override parallelism.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
pub struct TranscriptsIn {
    #[arg(long)]
    transcripts: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    io: TranscriptsIn,
    /// Also write mean relative changes across stubbornness levels to this CSV.
    #[arg(long)]
    changes: Option<PathBuf>,
}

#[derive(Args)]
pub struct JudgmentsIn {
    /// Judgment log or pair votes CSV.
    #[arg(long)]
    judgments: PathBuf,
    /// Task set for a judgment log; defaults to tasks.json next to it.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[command(flatten)]
    gating: GatingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
pub struct GatingArgs {
    #[arg(long, default_value_t = 10)]
    min_pairs: usize,
    #[arg(long, default_value_t = 0.25)]
    max_control_fail_rate: f64,
}

#[derive(Args)]
pub struct BtFitArgs {
    /// Tally matrix or pair votes CSV.
    #[arg(long, conflicts_with = "judgments")]
    tally: Option<PathBuf>,
    /// Judgment log (gated before fitting).
    #[arg(long)]
    judgments: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Minimum agreement fraction for a pair to count (pair votes and judgments only).
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    gating: GatingArgs,
    #[arg(long, default_value_t = persuasion_core::stats::DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = persuasion_core::stats::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    input: JudgmentsIn,
    /// Comma-separated thresholds; defaults to 0.50..0.90 in steps of 0.05.
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
}

#[derive(Args)]
pub struct TtestArgs {
    #[arg(long)]
    scores: PathBuf,
    /// log1p_words (raw / ln(1 + words)), per_word or none.
    #[arg(long, default_value = "log1p_words")]
    discount: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    embeddings: PathBuf,
    /// CSV with argument_id and dimension columns (a scores file works).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OddsArgs {
    /// Successes with the dimension.
    a: u64,
    /// Successes without it.
    b: u64,
    /// Failures with it.
    c: u64,
    /// Failures without it.
    d: u64,
}

#[derive(Args)]
pub struct SamplePairsArgs {
    #[arg(long)]
    transcripts: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    per_pair: usize,
    /// Dimensions left out of the comparison, comma-separated.
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
    #[arg(long, default_value_t = 0.10)]
    control_fraction: f64,
    /// Control corpus TOML; the bundled corpus otherwise.
    #[arg(long)]
    controls: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    redundancy: u32,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    /// Append judgments to this CSV; an existing log is replayed first.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    gating: GatingArgs,
}

#[derive(Args)]
pub struct ExportArgs {
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    #[command(flatten)]
    gating: GatingArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose {
            tracing::Level::INFO
        } else {
            tracing::Level::WARN
        })
        .init();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Lengths(a) => commands::lengths(a),
        Command::BtFit(a) => commands::bt_fit(a),
        Command::Kappa(a) => commands::kappa(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Ttest(a) => commands::ttest(a),
        Command::Similarity(a) => commands::similarity(a),
        Command::Odds(a) => commands::odds(a),
        Command::SamplePairs(a) => commands::sample_pairs(a),
        Command::Serve(a) => commands::serve(a),
        Command::Export(a) => commands::export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

