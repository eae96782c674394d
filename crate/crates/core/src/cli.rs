//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::boruta::{BorutaConfig, TrialGranularity};
use crate::correlation::block_correlation;
use crate::data::{load_blocks, load_csv, write_blocks, FeatureTable, PreliminaryBlocks};
use crate::models::{grouped_kfold, ClassifierKind, ClassifierSpec, Hyperparameters};
use crate::partition::{solve, PartitionProblem, DEFAULT_TAU};
use crate::pipeline::{classifier_labels, evaluate_reduced, run_study, ConsensusRule, ReducedEvaluation, SCHEMA_VERSION};
use crate::synthetic::{generate, RelevantBlock, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "blockboruta", version, about = "Block-based Boruta feature selection")]
struct Cli {
    /// Worker threads; 0 uses every available core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Group correlated blocks, run Boruta per classifier and build the consensus report.
    Select(SelectArgs),
    /// Print the correlation-based grouping of blocks.
    Partition(PartitionArgs),
    /// Print the max-pooled block correlation matrix.
    Correlate(CorrelateArgs),
    /// Write a synthetic dataset, its block mapping and the relevant block names.
    Synth(SynthArgs),
    /// Compare full-set and reduced-set AUC for an explicit list of blocks.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Feature table CSV with `group_id` and `label` columns.
    #[arg(long)]
    input: PathBuf,
    /// Block mapping JSON; unmapped features become singleton blocks.
    #[arg(long)]
    blocks: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Granularity {
    PerComparison,
    PerIteration,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Consensus {
    Unanimous,
    Majority,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Comma-separated classifiers: rf, et, gbt, logreg.
    #[arg(long, value_delimiter = ',', default_value = "rf,et,gbt,logreg")]
    classifiers: Vec<ClassifierKind>,
    /// Trees per forest.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Boosting rounds.
    #[arg(long, default_value_t = 300)]
    rounds: usize,
    /// Boosting learning rate.
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn specs(&self) -> Vec<ClassifierSpec> {
        self.classifiers
            .iter()
            .map(|&kind| {
                let mut spec = ClassifierSpec::new(kind, self.seed);
                match &mut spec.params {
                    Hyperparameters::Forest(p) => p.n_trees = self.trees,
                    Hyperparameters::Boosting(p) => {
                        p.n_rounds = self.rounds;
                        p.learning_rate = self.learning_rate;
                    }
                    Hyperparameters::Logistic(_) => {}
                }
                spec
            })
            .collect()
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Correlation threshold for grouping blocks.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// FDR level for accepting or rejecting a block.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Maximum Boruta iterations.
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Grouped cross-validation folds.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Permutation repeats per fold.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// What counts as one binomial trial.
    #[arg(long, value_enum, default_value_t = Granularity::PerComparison)]
    granularity: Granularity,
    /// Rule defining the reduced block set.
    #[arg(long, value_enum, default_value_t = Consensus::Unanimous)]
    consensus: Consensus,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Correlation threshold for grouping blocks.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory for data.csv, blocks.json and truth.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of groups.
    #[arg(long, default_value_t = 250)]
    groups: usize,
    /// Rows per group.
    #[arg(long, default_value_t = 2)]
    obs_per_group: usize,
    /// Number of relevant blocks.
    #[arg(long, default_value_t = 5)]
    relevant: usize,
    /// Number of noise blocks.
    #[arg(long, default_value_t = 10)]
    noise: usize,
    /// Columns per block.
    #[arg(long, default_value_t = 3)]
    block_size: usize,
    /// Signal strength of each relevant block.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Correlation between columns of one block.
    #[arg(long, default_value_t = 0.8)]
    correlation: f64,
    /// Probability of flipping each label.
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated names of the blocks to keep.
    #[arg(long, value_delimiter = ',', required = true)]
    keep: Vec<String>,
    /// Grouped cross-validation folds (seeded with seed + 1).
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    output: OutputArgs,
}

type Failure = Box<dyn std::error::Error + Send + Sync>;

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code: 0 on success, 1 on usage errors, 2 on data or
/// validation errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Select(a) => select(a),
        Command::Partition(a) => partition(a),
        Command::Correlate(a) => correlate(a),
        Command::Synth(a) => synth(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn load_input(input: &InputArgs) -> Result<(FeatureTable, PreliminaryBlocks), Failure> {
    let table = load_csv(&input.input)?;
    let blocks = match &input.blocks {
        Some(path) => load_blocks(path, &table)?,
        None => PreliminaryBlocks::singletons(&table),
    };
    Ok((table, blocks))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn select(a: SelectArgs) -> Result<(), Failure> {
    let (table, prelim) = load_input(&a.input)?;
    let config = BorutaConfig {
        max_iterations: a.iterations,
        repeats_per_fold: a.repeats,
        k_folds: a.folds,
        alpha: a.alpha,
        seed: a.model.seed,
        trial_granularity: match a.granularity {
            Granularity::PerComparison => TrialGranularity::PerComparison,
            Granularity::PerIteration => TrialGranularity::PerIteration,
        },
    };
    let rule = match a.consensus {
        Consensus::Unanimous => ConsensusRule::Unanimous,
        Consensus::Majority => ConsensusRule::Majority,
    };
    let report = run_study(&table, &prelim, &a.model.specs(), &config, a.tau, rule)?;
    let text = match a.output.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    emit(a.output.out.as_deref(), &text)
}

#[derive(Serialize)]
struct PartitionOutput {
    groups: Vec<Vec<String>>,
    objective: f64,
    exact: bool,
    tau: f64,
}

fn partition(a: PartitionArgs) -> Result<(), Failure> {
    let (table, prelim) = load_input(&a.input)?;
    let matrix = block_correlation(&table, &prelim)?;
    let p = solve(&PartitionProblem::new(matrix, a.tau)?);
    emit(a.out.as_deref(), &to_json(&PartitionOutput { groups: p.groups, objective: p.objective, exact: p.exact, tau: a.tau }))
}

fn correlate(a: CorrelateArgs) -> Result<(), Failure> {
    let (table, prelim) = load_input(&a.input)?;
    emit(a.out.as_deref(), &to_json(&block_correlation(&table, &prelim)?))
}

#[derive(Serialize)]
struct Truth {
    relevant: Vec<String>,
    spec: SyntheticSpec,
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        n_groups: a.groups,
        obs_per_group: a.obs_per_group,
        relevant_blocks: vec![RelevantBlock { size: a.block_size, beta: a.beta }; a.relevant],
        noise_blocks: vec![a.block_size; a.noise],
        within_block_correlation: a.correlation,
        label_noise: a.label_noise,
        seed: a.seed,
    };
    let data = generate(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| format!("cannot create {}: {e}", a.out.display()))?;
    data.table.write_csv(&a.out.join("data.csv"))?;
    write_blocks(&a.out.join("blocks.json"), &data.blocks.blocks)?;
    let truth_path = a.out.join("truth.json");
    fs::write(&truth_path, to_json(&Truth { relevant: data.relevant, spec }))
        .map_err(|e| format!("cannot write {}: {e}", truth_path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationOutput {
    schema: u32,
    folds: usize,
    fold_seed: u64,
    fold_plan: Vec<Vec<String>>,
    evaluation: ReducedEvaluation,
}

fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    let (table, prelim) = load_input(&a.input)?;
    let specs = a.model.specs();
    let fold_seed = a.model.seed.wrapping_add(1);
    let plan = grouped_kfold(table.group_ids(), a.folds, fold_seed)?;
    let evaluation =
        evaluate_reduced(&table, &prelim.blocks, &a.keep, &specs, &classifier_labels(&specs), &plan, None)?;
    let text = match a.output.format {
        Format::Json => to_json(&EvaluationOutput {
            schema: SCHEMA_VERSION,
            folds: a.folds,
            fold_seed,
            fold_plan: plan.fold_groups,
            evaluation,
        }),
        Format::Text => {
            let mut s = format!("{:<10}  {:>17}  {:>17}  {:>8}\n", "classifier", "full", "reduced", "p");
            for c in &evaluation.comparisons {
                s.push_str(&format!(
                    "{:<10}  {:>8.4} +/- {:.4}  {:>8.4} +/- {:.4}  {:>8.4}\n",
                    c.classifier, c.full.mean, c.full.sd, c.reduced.mean, c.reduced.sd, c.paired_t.p_value
                ));
            }
            s
        }
    };
    emit(a.output.out.as_deref(), &text)
}
