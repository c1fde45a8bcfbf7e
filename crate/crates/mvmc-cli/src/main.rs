//! `mvmc` binary: transductive multi-label classification over multi-view
//! data.
//!
//! Subcommands: `synth` (generate a dataset directory), `run` (execute a
//! configured experiment), `eval` (score stored predictions), `complete`
//! (standalone matrix completion of one stacked label/feature matrix).
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver
//! failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ndarray::{s, Array2};

use mvmc_cli::config::load_config;
use mvmc_cli::dataset_io;
use mvmc_cli::error::{CliError, CliResult};
use mvmc_cli::runner;
use mvmc_cli::synth::SyntheticSpec;
use mvmc_core::{build_stacked, evaluate_split, fpc_solve, Label, LabelMatrix, McParams};

#[derive(Parser)]
#[command(
    name = "mvmc",
    version,
    about = "Transductive multi-label classification over multi-view data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view dataset directory.
    Synth(SynthArgs),
    /// Run a configured experiment and write report files.
    Run(RunArgs),
    /// Score a stored prediction matrix against ground-truth labels.
    Eval(EvalArgs),
    /// Complete one stacked label/feature matrix by low-rank completion.
    Complete(CompleteArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory (created if absent).
    #[arg(long)]
    out: PathBuf,
    /// Number of feature views.
    #[arg(long)]
    views: usize,
    /// Number of samples.
    #[arg(long)]
    samples: usize,
    /// Number of labels.
    #[arg(long)]
    labels: usize,
    /// Latent rank (must exceed the number of labels).
    #[arg(long)]
    rank: usize,
    /// Noise scale.
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    /// Per-view informativeness between 0 and 1, comma separated (one per view).
    #[arg(long, value_delimiter = ',')]
    informativeness: Vec<f64>,
    /// Probability of each feature cell being missing.
    #[arg(long, default_value_t = 0.0)]
    missing_rate: f64,
    /// Fraction of samples assigned the test role.
    #[arg(long, default_value_t = 0.5)]
    test_fraction: f64,
    /// Labeled samples drawn per label class.
    #[arg(long, default_value_t = 10)]
    n_labeled: usize,
    /// Generator seed.
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Score matrix file (matrix text format, labels × samples).
    #[arg(long)]
    predictions: PathBuf,
    /// Complete ground-truth label matrix file.
    #[arg(long)]
    truth: PathBuf,
    /// Optional split file (splits/seed_N.json from a run).
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Subset of the split file to score.
    #[arg(long, value_parser = ["labeled", "unlabeled", "validation", "final-test"], requires = "splits")]
    subset: Option<String>,
    /// Decision threshold for Hamming loss.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Args)]
struct CompleteArgs {
    /// Stacked matrix file: label rows first, then feature rows. Label
    /// entries are 1/-1 (0 or NaN = unknown); feature NaNs are missing.
    #[arg(long)]
    input: PathBuf,
    /// Number of leading label rows.
    #[arg(long)]
    label_rows: usize,
    /// Label-loss weight.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Logistic sharpness.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Output file for the completed matrix (stdout if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() {
    // Threaded BLAS kernels may pick different execution paths run to run;
    // one BLAS thread keeps reports byte-reproducible and avoids
    // oversubscribing the job-level worker pool.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth(args),
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Complete(args) => complete(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn synth(args: SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        views: args.views,
        samples: args.samples,
        labels: args.labels,
        rank: args.rank,
        noise_sigma: args.noise_sigma,
        informativeness: args.informativeness,
        missing_feature_rate: args.missing_rate,
        test_fraction: args.test_fraction,
        seed: args.seed,
    };
    spec.validate().map_err(CliError::config)?;
    if args.n_labeled == 0 {
        return Err(CliError::config("--n-labeled must be at least 1"));
    }
    let stored = runner::stored_from_synthetic(&spec, args.n_labeled)?;
    dataset_io::write_dataset(&args.out, &stored)?;
    println!(
        "wrote {} views, {} labels, {} samples to {}",
        stored.views.len(),
        stored.truth.num_labels(),
        stored.truth.num_samples(),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> CliResult<()> {
    let config = load_config(&args.config)?;
    let outputs = runner::run_experiment(&config)?;
    runner::write_outputs(&config.output_dir, &outputs)?;
    print!("{}", mvmc_cli::report::human_report(&outputs.report));
    println!("report written to {}", config.output_dir.display());
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult<()> {
    let predictions = dataset_io::read_matrix(&args.predictions)?;
    let truth = dataset_io::read_labels(&args.truth, true)?;
    let indices: Vec<usize> = match (&args.splits, &args.subset) {
        (Some(path), subset) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            let split: runner::SplitIndices = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            match subset.as_deref() {
                Some("labeled") => split.labeled,
                Some("unlabeled") => split.unlabeled,
                Some("validation") => split.validation,
                Some("final-test") | None => split.final_test,
                Some(other) => {
                    return Err(CliError::config(format!("unknown subset '{other}'")))
                }
            }
        }
        (None, _) => (0..truth.num_samples()).collect(),
    };
    if !args.threshold.is_finite() {
        return Err(CliError::config("--threshold must be finite"));
    }
    let metrics = evaluate_split(&predictions, &truth, &indices, args.threshold)
        .map_err(CliError::from_data_stage)?;
    let json = serde_json::to_string_pretty(&metrics)
        .map_err(|e| CliError::data(format!("metric serialization failed: {e}")))?;
    println!("{json}");
    Ok(())
}

fn complete(args: CompleteArgs) -> CliResult<()> {
    let matrix = dataset_io::read_matrix(&args.input)?;
    let (rows, n) = matrix.dim();
    let m = args.label_rows;
    if m == 0 || m >= rows {
        return Err(CliError::config(format!(
            "--label-rows must lie in [1, {}), got {m}",
            rows
        )));
    }

    let mut labels = LabelMatrix::unknown(m, n);
    for t in 0..m {
        for j in 0..n {
            let value = matrix[(t, j)];
            let label = if value.is_nan() || value == 0.0 {
                Label::Unknown
            } else if value == 1.0 {
                Label::Pos
            } else if value == -1.0 {
                Label::Neg
            } else {
                return Err(CliError::data(format!(
                    "label entry ({t}, {j}) must be 1, -1, 0, or NaN, got {value}"
                )));
            };
            labels.set(t, j, label);
        }
    }
    let features = dataset_io::matrix_to_feature(matrix.slice(s![m.., ..]).to_owned())?;

    let params = McParams {
        lambda: args.lambda,
        gamma: args.gamma,
        ..McParams::default()
    };
    params.validate().map_err(CliError::from_data_stage)?;
    let system = build_stacked(&features, &labels).map_err(CliError::from_data_stage)?;
    let solution = fpc_solve(&system, &params).map_err(CliError::from_solver_stage)?;

    // Emit the completed matrix without the internal all-ones row.
    let full = solution.z.matrix();
    let completed: Array2<f64> = full.slice(s![..rows, ..]).to_owned();
    let text = dataset_io::format_matrix(&completed);
    match &args.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}
