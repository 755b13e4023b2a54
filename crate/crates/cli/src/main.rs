mod commands;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use legal_ner::align::Scheme;
use legal_ner::conll::{ColumnMode, Separator};
use legal_ner::folds::{StratifyOn, DEFAULT_SEED};
use legal_ner::metrics::BaselineColumn;
use legal_ner::{ChunkPolicy, Granularity, ParseMode, ReadOptions};

#[derive(Parser, Debug)]
#[command(name = "legal-ner", version, about = "German legal NER corpus tools")]
struct Cli {
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
struct ReadArgs {
    /// Tag granularity of the input files.
    #[arg(long, default_value = "fine")]
    granularity: Granularity,
    /// Keep unknown class codes instead of rejecting them; split columns on
    /// any whitespace and take the last one as the tag.
    #[arg(long)]
    lenient: bool,
    /// Columns are tab-separated.
    #[arg(long)]
    tab: bool,
}

impl ReadArgs {
    fn options(&self) -> ReadOptions {
        let mut opts = ReadOptions::new(self.granularity);
        if self.lenient {
            opts.tags = ParseMode::Lenient;
            opts.columns = ColumnMode::Lenient;
        }
        if self.tab {
            opts.separator = Separator::Tab;
        }
        opts
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check files line by line and report every problem.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        read: ReadArgs,
        /// Segmentation file (JSONL of piece counts) to check against a single input.
        #[arg(long)]
        segmentation: Option<PathBuf>,
    },
    /// Token, sentence and entity counts per source file.
    Stats {
        /// Files or directories; each file is one source, named after its stem.
        paths: Vec<PathBuf>,
        #[command(flatten)]
        read: ReadArgs,
        /// JSON object mapping source ids to document counts.
        #[arg(long)]
        provenance: Option<PathBuf>,
    },
    /// Build a stratified k-fold manifest.
    Split {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "fine")]
        stratify: StratifyOn,
        /// Write the manifest even when label proportions are out of tolerance.
        #[arg(long)]
        allow_skew: bool,
        /// Manifest output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write fold-<i>/train.conll and fold-<i>/validation.conll here.
        #[arg(long)]
        materialize: Option<PathBuf>,
    },
    /// Entity-level precision, recall and F1 of predictions against gold.
    Score {
        /// Gold file; repeat together with --pred for several folds.
        #[arg(long, required = true)]
        gold: Vec<PathBuf>,
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long, default_value = "conlleval")]
        policy: ChunkPolicy,
        /// Score at this granularity (fine input can be scored coarse).
        #[arg(long)]
        at: Option<Granularity>,
        #[arg(long, value_enum, default_value_t = AggregateArg::Pooled)]
        aggregate: AggregateArg,
        /// Compare per-class F1 with a published column.
        #[arg(long)]
        baseline: Option<BaselineColumn>,
        #[arg(long)]
        json_out: Option<PathBuf>,
        #[arg(long)]
        text_out: Option<PathBuf>,
    },
    /// Rewrite a fine-grained file with coarse tags.
    MapCoarse {
        input: PathBuf,
        /// Output path; stdout when absent.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tab: bool,
    },
    /// Print the entity spans of every sentence.
    Chunk {
        input: PathBuf,
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long, default_value = "conlleval")]
        policy: ChunkPolicy,
    },
    /// Project word tags onto subword pieces.
    Project {
        input: PathBuf,
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long)]
        segmentation: PathBuf,
        #[arg(long, value_enum, default_value_t = SchemeArg::FirstPiece)]
        scheme: SchemeArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregateArg {
    Pooled,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    FirstPiece,
    Propagate,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::FirstPiece => Scheme::FirstPiece,
            SchemeArg::Propagate => Scheme::Propagate,
        }
    }
}

/// Failure with its exit status: 1 for data problems, 2 for misuse.
#[derive(Debug)]
enum Failure {
    Data(anyhow::Error),
    Usage(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
