//! `kbstab`: snapshot diffing, change-cause criteria, stability filters,
//! feature extraction, change prediction, and inter-change-time densities
//! behind one binary.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O or parse error.
//! Every report is written atomically and accompanied by a run manifest.

mod commands;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbstab_core::Error;

#[derive(Parser)]
#[command(name = "kbstab", version, about = "Temporal KB stability toolkit")]
struct Cli {
    /// Optional key=value defaults file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cap on worker threads (accepted for forward compatibility; current
    /// subcommands run single-threaded).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Diff two snapshots and classify every changed pair.
    Analyze(AnalyzeArgs),
    /// Score the change-cause criteria against gold labels.
    EvalCriteria(EvalCriteriaArgs),
    /// Flag entities made inherently stable by terminating properties.
    FilterEntities(FilterEntitiesArgs),
    /// Apply the 5% property-filtering heuristic over an entity class.
    FilterProperties(FilterPropertiesArgs),
    /// Build a feature matrix of one kind.
    ExtractFeatures(ExtractFeaturesArgs),
    /// Train a per-property change classifier.
    Train(TrainArgs),
    /// Score entities with a trained model.
    Predict(PredictArgs),
    /// Evaluate a trained model on the held-out split.
    Eval(EvalArgs),
    /// Rank a model's strongest positive and negative features.
    InspectModel(InspectModelArgs),
    /// Histogram and kernel density of inter-change times.
    Kde(KdeArgs),
    /// Generate a synthetic snapshot pair with gold labels and articles.
    Gen(GenArgs),
    /// Convert a Wikidata-style entity dump into a snapshot file.
    ConvertWikidata(ConvertWikidataArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Earlier snapshot file.
    #[arg(long)]
    t1: PathBuf,
    /// Later snapshot file.
    #[arg(long)]
    t2: PathBuf,
    /// Criterion deciding real-world vs completion for additions.
    #[arg(long, default_value = "timestamp")]
    criterion: String,
    /// Restrict the timestamp criterion to records added in the interval.
    #[arg(long)]
    timestamp_added_only: bool,
    /// Include transaction times in record identity.
    #[arg(long)]
    strict_identity: bool,
    /// Change-record report (line-delimited).
    #[arg(long)]
    out: PathBuf,
    /// Cause-distribution CSV; defaults to `<out>.summary.csv`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct EvalCriteriaArgs {
    #[arg(long)]
    t1: PathBuf,
    #[arg(long)]
    t2: PathBuf,
    /// Gold cause-label file covering every changed pair.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterEntitiesArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Comma-separated terminating properties (falls back to the config key
    /// `terminating_properties`).
    #[arg(long)]
    terminating: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterPropertiesArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// File listing the entity class, one id per line.
    #[arg(long)]
    class: PathBuf,
    /// Comma-separated properties to assess; defaults to all in the snapshot.
    #[arg(long)]
    properties: Option<String>,
    /// Change-count measure: kb_edits, objects, or timestamps.
    #[arg(long, default_value = "objects")]
    measure: String,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Edit log, required by the kb_edits measure.
    #[arg(long)]
    edit_log: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractFeaturesArgs {
    /// Feature kind: structured, text-delta, age, embedding, or knn.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// File listing entities to featurize, one id per line.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Property being predicted (excluded from structured features).
    #[arg(long)]
    target: Option<String>,
    /// Article files for the text-delta kind.
    #[arg(long)]
    articles_old: Option<PathBuf>,
    #[arg(long)]
    articles_new: Option<PathBuf>,
    #[arg(long)]
    min_df: Option<usize>,
    #[arg(long, default_value_t = 3)]
    ngram_max: usize,
    /// Birth-date property for the age kind.
    #[arg(long)]
    birth_property: Option<String>,
    /// Reference date for the age kind, e.g. `2019-09-01|d`.
    #[arg(long)]
    as_of: Option<String>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Entity/changed-flag file for the knn kind (TSV: id, 0 or 1).
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Persist the fitted vocabulary for reuse.
    #[arg(long)]
    vocab_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature matrix files, concatenated in order.
    #[arg(long, num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    /// Gold label file; an entity counts as changed when its label is not
    /// `none`.
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    property: String,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Held-out metrics CSV; defaults to `<out>.metrics.csv`.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    property: String,
    #[arg(long)]
    test_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectModelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 30)]
    top: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KdeArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    property: String,
    /// Restrict pooling to these subjects (file, one id per line).
    #[arg(long)]
    entities: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Override the Silverman bandwidth.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    entities: usize,
    /// real_world,completion,correction,none rates, summing to 1.
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    rates: String,
    /// Signal rate for the generated article corpus.
    #[arg(long)]
    signal_rate: Option<f64>,
    /// Skip article generation.
    #[arg(long)]
    no_articles: bool,
}

#[derive(Args)]
struct ConvertWikidataArgs {
    /// Entity-per-line dump file.
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated property allowlist.
    #[arg(long)]
    properties: String,
    /// Snapshot sampling time, e.g. `2019-09-01|d`.
    #[arg(long)]
    sampled_at: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" that should exit 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    let config = match util::AppConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return report(e),
    };

    let result = match &cli.command {
        Command::Analyze(args) => commands::analyze(args, &config, cli.config.as_deref()),
        Command::EvalCriteria(args) => commands::eval_criteria(args, &config, cli.config.as_deref()),
        Command::FilterEntities(args) => commands::filter_entities(args, &config, cli.config.as_deref()),
        Command::FilterProperties(args) => commands::filter_properties(args, &config, cli.config.as_deref()),
        Command::ExtractFeatures(args) => commands::extract_features(args, &config, cli.config.as_deref()),
        Command::Train(args) => commands::train(args, &config, cli.config.as_deref()),
        Command::Predict(args) => commands::predict(args, &config, cli.config.as_deref()),
        Command::Eval(args) => commands::eval(args, &config, cli.config.as_deref()),
        Command::InspectModel(args) => commands::inspect_model(args, &config, cli.config.as_deref()),
        Command::Kde(args) => commands::kde(args, &config, cli.config.as_deref()),
        Command::Gen(args) => commands::gen(args, &config, cli.config.as_deref()),
        Command::ConvertWikidata(args) => commands::convert_wikidata(args, &config, cli.config.as_deref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::Parse { .. } | Error::Io { .. } => 2,
        _ => 1,
    };
    ExitCode::from(code)
}
