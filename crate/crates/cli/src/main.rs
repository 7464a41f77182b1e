//! `astprobe`: attention alignment, structural probing and tree induction over
//! dumped model tensors.
//!
//! Exit codes: 0 on success, 1 on internal errors, 2 on bad input (including
//! an empty corpus).

mod cmd;
mod data;
mod output;
mod settings;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::Settings;

/// Error caused by the caller's input; maps to exit code 2.
#[derive(Debug)]
pub struct BadInput(pub String);

impl fmt::Display for BadInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadInput {}

#[derive(Parser, Debug)]
#[command(name = "astprobe", version, about = "Probe code models for syntax structure")]
struct Cli {
    /// Corpus manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Directory for reports and artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks one per core. Never changes outputs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// `key = value` settings file; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Alignment of high-confidence attention with the AST parent relation.
    Align(AlignArgs),
    /// Input variability of attention heads.
    Variability(VariabilityArgs),
    /// Train a structural probe on one hidden layer.
    ProbeTrain(ProbeTrainArgs),
    /// Evaluate a saved probe.
    ProbeEval(ProbeEvalArgs),
    /// Induce binary trees from syntactic distances and score them.
    Induce(InduceArgs),
    /// Score structural baseline trees.
    Baselines(BaselineArgs),
    /// Write a synthetic corpus with known answers.
    SynthGen(SynthArgs),
    /// Summarize the reports in the output directory.
    Report,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Word budget per snippet.
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Args, Debug)]
struct AlignArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Attention weights strictly above this are high-confidence.
    #[arg(long)]
    threshold: Option<f32>,
    /// Heads with fewer high-confidence weights report no proportion.
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    include_diagonal: Option<bool>,
    /// Rescale word-level attention rows to sum to one.
    #[arg(long)]
    renormalize_rows: Option<bool>,
    /// Leading words compared by the variability measure.
    #[arg(long)]
    prefix_len: Option<usize>,
}

#[derive(Args, Debug)]
struct VariabilityArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    renormalize_rows: Option<bool>,
    #[arg(long)]
    prefix_len: Option<usize>,
}

#[derive(Args, Debug)]
struct ProbeTrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Hidden layer to probe (0 = embeddings).
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Longest training snippet, in words.
    #[arg(long)]
    max_code_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_halvings: Option<usize>,
    /// Evaluate on this corpus instead of a held-out split.
    #[arg(long)]
    eval_manifest: Option<PathBuf>,
    /// Name stored in the probe metadata.
    #[arg(long)]
    model_name: Option<String>,
}

#[derive(Args, Debug)]
struct ProbeEvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Probe file written by probe-train.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InduceArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// `attention` or `hidden`.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    layer: Option<usize>,
    /// Head index or `avg` (attention only).
    #[arg(long)]
    head: Option<String>,
    /// L1, L2 (hidden) or JSD, HEL (attention).
    #[arg(long = "fn")]
    function: Option<String>,
    /// Right-skew bias strength.
    #[arg(long)]
    lambda: Option<f64>,
    /// `ramp` or `literal`.
    #[arg(long)]
    bias: Option<String>,
    /// `leftmost` or `random` right-hand leaf choice for pairs.
    #[arg(long)]
    pair_mode: Option<String>,
    /// Comma-separated AST labels for per-label recall.
    #[arg(long)]
    labels: Option<String>,
    /// Add structural baseline rows.
    #[arg(long)]
    baselines: Option<bool>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[arg(long)]
    pair_mode: Option<String>,
    #[arg(long)]
    labels: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// `nary` or `binary`.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    max_words: Option<usize>,
    /// Probability that a word is split into two subwords.
    #[arg(long)]
    split_prob: Option<f64>,
}

fn path_str(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Command {
    fn apply(&self, s: &mut Settings) {
        match self {
            Command::Align(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("threshold", a.threshold);
                s.set("min_count", a.min_count);
                s.set("include_diagonal", a.include_diagonal);
                s.set("renormalize_rows", a.renormalize_rows);
                s.set("prefix_len", a.prefix_len);
            }
            Command::Variability(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("renormalize_rows", a.renormalize_rows);
                s.set("prefix_len", a.prefix_len);
            }
            Command::ProbeTrain(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("layer", a.layer);
                s.set("rank", a.rank);
                s.set("max_code_len", a.max_code_len);
                s.set("epochs", a.epochs);
                s.set("batch_size", a.batch_size);
                s.set("learning_rate", a.learning_rate);
                s.set("max_halvings", a.max_halvings);
                s.set("eval_manifest", path_str(&a.eval_manifest));
                s.set("model_name", a.model_name.as_ref());
            }
            Command::ProbeEval(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("model", path_str(&a.model));
            }
            Command::Induce(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("source", a.source.as_ref());
                s.set("layer", a.layer);
                s.set("head", a.head.as_ref());
                s.set("fn", a.function.as_ref());
                s.set("lambda", a.lambda);
                s.set("bias", a.bias.as_ref());
                s.set("pair_mode", a.pair_mode.as_ref());
                s.set("labels", a.labels.as_ref());
                s.set("baselines", a.baselines);
            }
            Command::Baselines(a) => {
                s.set("max_len", a.corpus.max_len);
                s.set("pair_mode", a.pair_mode.as_ref());
                s.set("labels", a.labels.as_ref());
            }
            Command::SynthGen(a) => {
                s.set("family", a.family.as_ref());
                s.set("count", a.count);
                s.set("min_words", a.min_words);
                s.set("max_words", a.max_words);
                s.set("split_prob", a.split_prob);
            }
            Command::Report => {}
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut settings = Settings::from_file(cli.config.as_deref())?;
    settings.set("manifest", path_str(&cli.manifest));
    settings.set("out_dir", path_str(&cli.out_dir));
    settings.set("seed", cli.seed);
    settings.set("workers", cli.workers);
    cli.command.apply(&mut settings);

    let workers = settings.get("workers", 0usize)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
    let out_dir = PathBuf::from(settings.get("out_dir", "out".to_string())?);

    match &cli.command {
        Command::Align(_) => cmd::align::align(&settings, &out_dir),
        Command::Variability(_) => cmd::align::variability(&settings, &out_dir),
        Command::ProbeTrain(_) => cmd::probe::train(&settings, &out_dir),
        Command::ProbeEval(_) => cmd::probe::eval(&settings, &out_dir),
        Command::Induce(_) => cmd::induce::induce(&settings, &out_dir),
        Command::Baselines(_) => cmd::induce::baselines(&settings, &out_dir),
        Command::SynthGen(_) => cmd::synth::synth_gen(&settings, &out_dir),
        Command::Report => cmd::summary::report(&out_dir),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<BadInput>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<astprobe::Error>() {
            return if e.is_bad_input() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
