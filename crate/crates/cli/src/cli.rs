use std::path::PathBuf;

use clap::{ArgGroup, Args, CommandFactory, Parser, Subcommand};
use spurprobe_core::cartography::{Source, DEFAULT_AMBIGUOUS_Q, DEFAULT_HARD_Q};
use spurprobe_core::clustering::{SampleMode, WithinOrder};
use spurprobe_core::corruption::{Strategy, DEFAULT_WORD_RATE};
use spurprobe_core::LabelScheme;

#[derive(Debug, Parser)]
#[command(
    name = "spurprobe",
    version,
    about = "Probe NLI models for reliance on spurious features",
    after_help = "Any subcommand accepts --config <FILE>: flat key=value lines whose keys are \
                  that subcommand's long flag names. Flags given on the command line win.\n\
                  Seeds default to $SPURPROBE_SEED, then 0."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// The clap command with every subcommand letting a repeated flag replace the
/// earlier value, which is how command-line flags override config entries.
pub fn command() -> clap::Command {
    fn overridable(cmd: clap::Command) -> clap::Command {
        cmd.args_override_self(true).mut_subcommands(overridable)
    }
    overridable(Cli::command())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a TSV or JSONL corpus to canonical JSONL.
    Convert(ConvertArgs),
    /// Confidence, variability and correctness per example from a dynamics log.
    Cartography(CartographyArgs),
    /// Split a data map into easy, ambiguous and hard regions.
    Partition(PartitionArgs),
    /// Build an easy-warmup-then-hard curriculum from a partition.
    Curriculum(CurriculumArgs),
    /// Cluster embedding rows with k-means.
    Kmeans(KmeansArgs),
    /// Nested diverse or random subsamples.
    Sample(SampleArgs),
    /// Train a probe on fixed embeddings and log its training dynamics.
    TrainProbe(TrainProbeArgs),
    /// Train a HEX head that projects out a naive model's logits.
    HexTrain(HexTrainArgs),
    /// Inject character-level noise into content words.
    Corrupt(CorruptArgs),
    /// Score predictions against a corpus.
    Eval(EvalArgs),
    /// Render and combine evaluation reports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Run the built-in invariant checks.
    Selftest,
    /// Generate a synthetic corpus with a planted spurious feature.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// `.tsv` with a header row (premise, hypothesis, label[, heuristic]) or JSONL.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value = "three_class")]
    pub scheme: LabelScheme,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CartographyArgs {
    #[arg(long, value_name = "FILE")]
    pub dynamics: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["map", "dynamics"])))]
pub struct PartitionArgs {
    /// Data map CSV from `cartography`.
    #[arg(long, value_name = "FILE")]
    pub map: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub dynamics: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HARD_Q)]
    pub hard_q: f64,
    #[arg(long, default_value_t = DEFAULT_AMBIGUOUS_Q)]
    pub ambiguous_q: f64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EasyPickArg {
    Top,
    Random,
}

#[derive(Debug, Args)]
pub struct CurriculumArgs {
    #[arg(long, value_name = "FILE")]
    pub partition: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    pub easy_fraction: f64,
    #[arg(long, default_value_t = 2)]
    pub easy_epochs: usize,
    /// Comma-separated, strictly increasing.
    #[arg(long, default_value = "0.01,0.05,0.10,0.17,0.25,0.33,0.50,0.75")]
    pub fractions: String,
    #[arg(long, default_value = "hard", value_parser = parse_source)]
    pub source: Source,
    #[arg(long, value_enum, default_value = "top")]
    pub easy_pick: EasyPickArg,
    /// Prepend the warmup slice to every later phase.
    #[arg(long)]
    pub include_easy: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn parse_source(s: &str) -> Result<Source, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct KmeansArgs {
    #[arg(long, value_name = "FILE")]
    pub emb: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub k: usize,
    /// Keep the lowest-inertia fit over this many seeds.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// L2-normalize rows before clustering.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("population").required(true).args(["clusters", "emb"])))]
pub struct SampleArgs {
    /// `clusters.json` from `kmeans`.
    #[arg(long, value_name = "FILE")]
    pub clusters: Option<PathBuf>,
    /// Embedding file; only its ids are used (random mode).
    #[arg(long, value_name = "FILE")]
    pub emb: Option<PathBuf>,
    #[arg(long, default_value = "diverse", value_parser = parse_mode)]
    pub mode: SampleMode,
    #[arg(long, default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub fractions: String,
    #[arg(long, default_value = "random", value_parser = parse_within)]
    pub within: WithinOrder,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

fn parse_mode(s: &str) -> Result<SampleMode, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_within(s: &str) -> Result<WithinOrder, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("features").required(true).args(["emb", "premise_emb"])))]
pub struct TrainProbeArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, default_value = "three_class")]
    pub scheme: LabelScheme,
    /// One pooled vector per pair.
    #[arg(long, value_name = "FILE")]
    pub emb: Option<PathBuf>,
    /// Siamese input: premise vectors, combined as [u, v, u-v, u*v].
    #[arg(long, value_name = "FILE", requires = "hypothesis_emb")]
    pub premise_emb: Option<PathBuf>,
    #[arg(long, value_name = "FILE", requires = "premise_emb")]
    pub hypothesis_emb: Option<PathBuf>,
    /// Comma-separated hidden widths; empty for a linear probe.
    #[arg(long, default_value = "512")]
    pub hidden: String,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Put a residual adapter with this reduction factor on the input.
    #[arg(long)]
    pub adapter_reduction: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub eval_corpus: Option<PathBuf>,
    /// Defaults to --scheme.
    #[arg(long)]
    pub eval_scheme: Option<LabelScheme>,
    #[arg(long, value_name = "FILE")]
    pub eval_emb: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub eval_premise_emb: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub eval_hypothesis_emb: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HexTrainArgs {
    #[arg(long, value_name = "FILE")]
    pub main_emb: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, default_value = "three_class")]
    pub scheme: LabelScheme,
    #[arg(long, default_value_t = spurprobe_core::hex::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long)]
    pub fixed_lambda: bool,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    /// Width of the hashed bag-of-words naive input.
    #[arg(long, default_value_t = spurprobe_core::hex::DEFAULT_NAIVE_DIM)]
    pub naive_dim: usize,
    /// Weight of the auxiliary loss on the naive-only logits.
    #[arg(long, default_value_t = 5.0)]
    pub naive_weight: f64,
    #[arg(long, value_name = "FILE", requires = "eval_main_emb")]
    pub eval_corpus: Option<PathBuf>,
    #[arg(long)]
    pub eval_scheme: Option<LabelScheme>,
    #[arg(long, value_name = "FILE", requires = "eval_corpus")]
    pub eval_main_emb: Option<PathBuf>,
    /// Predict from the projected logits F_L (whole split as one batch)
    /// instead of the main branch alone.
    #[arg(long)]
    pub infer_projected: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[arg(long, default_value = "three_class")]
    pub scheme: LabelScheme,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    /// Fraction of content words to corrupt.
    #[arg(long, default_value_t = DEFAULT_WORD_RATE)]
    pub rate: f64,
    /// Characters used by insert and substitute.
    #[arg(long)]
    pub charset: Option<String>,
    /// File of ids (one per line); only these examples are corrupted and written.
    #[arg(long, value_name = "FILE")]
    pub subset: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-word edit log (JSONL).
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub preds: PathBuf,
    #[arg(long, default_value = "three_class")]
    pub scheme: LabelScheme,
    /// File of ids (one per line) to restrict evaluation to.
    #[arg(long, value_name = "FILE")]
    pub subset: Option<PathBuf>,
    /// Refuse to evaluate unless the inputs recorded in this manifest still
    /// hash to their recorded digests.
    #[arg(long, value_name = "MANIFEST")]
    pub verify: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Also write the JSON report (and its manifest) here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Per-class accuracy deltas as a corruption x label x model table.
    /// The i-th --strategy, --column, --before and --after form one cell.
    Diff(DiffArgs),
    /// Mean and standard deviation over runs.
    Aggregate(AggregateArgs),
    /// Print one report as an aligned text table.
    Show(ShowArgs),
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long, required = true, value_name = "NAME")]
    pub strategy: Vec<String>,
    #[arg(long, required = true, value_name = "NAME")]
    pub column: Vec<String>,
    #[arg(long, required = true, value_name = "REPORT")]
    pub before: Vec<PathBuf>,
    #[arg(long, required = true, value_name = "REPORT")]
    pub after: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(long = "report", required = true, num_args = 1.., value_name = "REPORT")]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    #[arg(long, value_name = "REPORT")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    /// Probability that the spurious coordinate agrees with the label.
    #[arg(long, default_value_t = 0.95)]
    pub bias: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn later_flag_wins() {
        let m = command()
            .try_get_matches_from(["spurprobe", "kmeans", "--emb", "a", "--out", "o", "--k", "3", "--k", "5"])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<usize>("k"), Some(&5));
    }
}
