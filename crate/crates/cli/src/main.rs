mod bench;
mod commands;
mod exit;
mod search;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metadist::Approach;
use metadist_bench::{Arch, Metric, Size, Task};

/// Hierarchical mixed-variable domains, the meta distance, and the HPD benchmark.
#[derive(Parser)]
#[command(name = "metadist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain spec. Prints one line per violation; exit 4 if any.
    Validate {
        /// Domain spec (JSON).
        spec: PathBuf,
    },
    /// Pairwise distance matrix of the points in a dataset file, as CSV.
    Distance {
        /// Domain spec (JSON).
        spec: PathBuf,
        /// Distance config, or a `tune` result file.
        config: PathBuf,
        /// CSV with one column per variable; `target` and `split` are optional.
        points: PathBuf,
        /// Which distance to compute.
        #[arg(long, default_value = "meta")]
        approach: Approach,
    },
    /// Fit IDW or KNN on a training file and predict the rows of a query file.
    FitPredict(FitPredict),
    /// Tune distance and model parameters on a dataset.
    Tune(Tune),
    /// Drive the tuner with objective values supplied over stdin.
    Search(Search),
    /// HPD benchmark.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct ModelArgs {
    /// idw (regression) or knn (classification).
    #[arg(long, default_value = "idw")]
    model: Task,
    /// meta, sub or hybrid.
    #[arg(long, default_value = "meta")]
    approach: Approach,
    /// Partition variable for the hybrid approach. Defaults to the first
    /// categorical meta variable that controls inclusion.
    #[arg(long)]
    key: Option<String>,
    /// IDW power.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// KNN: number of equal-width bins the [0, 100] targets are cut into.
    #[arg(long, default_value_t = 5)]
    bins: usize,
}

#[derive(Args)]
struct FitPredict {
    /// Domain spec (JSON).
    spec: PathBuf,
    /// Distance config, or a `tune` result file (one config per route).
    config: PathBuf,
    /// Training data with a `target` column.
    train: PathBuf,
    /// Query points; a `target` column is ignored.
    query: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// KNN neighbours. Taken from a `tune` result file when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct Tune {
    /// Domain spec (JSON).
    spec: PathBuf,
    /// Dataset; without a `split` column a stratified 50/25/25 split is drawn.
    dataset: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Evaluation budget per tuned parameter.
    #[arg(long, default_value_t = 100)]
    budget_mult: usize,
    /// Seeds the split (when the dataset has none) and the tuner.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start weights, offsets and categorical scales from this config.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Result file: space, trace and tuned configs.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing result file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct Search {
    /// Parameter space (JSON `{"dims": [...]}`), or a `tune` result file.
    space: PathBuf,
    /// Total number of objective evaluations.
    #[arg(long)]
    budget: usize,
    /// Seeds the Latin hypercube and the search restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Sample surrogate instances, tune every approach and write results.
    Run(BenchRun),
    /// Data profile from the traces of a finished run.
    Profile(BenchProfile),
    /// Test RMSE against the number of training points.
    AggregateCurve(BenchCurve),
}

#[derive(Args)]
struct BenchRun {
    /// Variant list: `1..5`, `3,5` or a mix.
    #[arg(long, default_value = "1..5")]
    variants: String,
    /// Dataset sizes.
    #[arg(long, value_delimiter = ',', default_value = "VS,S,M,L")]
    sizes: Vec<Size>,
    /// Surrogate architectures.
    #[arg(long, value_delimiter = ',', default_value = "MLP,CNN")]
    arch: Vec<Arch>,
    /// Approaches to tune on every instance.
    #[arg(long, value_delimiter = ',', default_value = "sub,hybrid,meta")]
    approaches: Vec<Approach>,
    /// Replicates per variant, size and architecture.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Evaluation budget per tuned parameter.
    #[arg(long, default_value_t = 200)]
    budget_mult: usize,
    /// Master seed for sampling, splits and tuners.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// regression (IDW) or classification (KNN).
    #[arg(long, default_value = "regression")]
    task: Task,
    /// IDW power.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Label bins for classification.
    #[arg(long, default_value_t = 5)]
    bins: usize,
    /// Instances tuned concurrently.
    #[arg(long, env = "METADIST_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite files of an earlier run.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BenchProfile {
    /// Tolerance: solved once within tau of the start-to-best gap.
    #[arg(long, default_value_t = 0.005)]
    tau: f64,
    /// Output directory of `bench run`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV (kappa, approach, fraction).
    #[arg(long)]
    out: PathBuf,
    /// Profile the validation or the test RMSE.
    #[arg(long, default_value = "test")]
    metric: Metric,
    /// Grid points on the budget axis.
    #[arg(long, default_value_t = metadist_bench::run::PROFILE_POINTS)]
    points: usize,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BenchCurve {
    /// HPD variant, 1 to 5.
    #[arg(long, default_value_t = 3)]
    variant: u8,
    /// Dataset size.
    #[arg(long, default_value = "L")]
    size: Size,
    /// Surrogate architecture.
    #[arg(long, default_value = "MLP")]
    arch: Arch,
    /// Approaches to trace.
    #[arg(long, value_delimiter = ',', default_value = "sub,hybrid,meta")]
    approaches: Vec<Approach>,
    /// Replicates averaged per point of the curve.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// IDW power.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing output file.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("usage error"));
            return ExitCode::from(exit::USAGE);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Validate { spec } => commands::validate(&spec),
        Command::Distance { spec, config, points, approach } => commands::distance(&spec, &config, &points, approach),
        Command::FitPredict(a) => commands::fit_predict(a),
        Command::Tune(a) => commands::tune(a),
        Command::Search(a) => search::run(a),
        Command::Bench(BenchCommand::Run(a)) => bench::run(a),
        Command::Bench(BenchCommand::Profile(a)) => bench::profile(a),
        Command::Bench(BenchCommand::AggregateCurve(a)) => bench::curve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("metadist: {}", diagnostic(&e));
            ExitCode::from(exit::code(&e))
        }
    }
}

/// The error chain on one line. Library errors often repeat their source in
/// their own message, so causes already quoted are skipped.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg.replace('\n', " ")
}
