use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use urbanvqa_core::dataset::Ratios;
use urbanvqa_core::Subtype;

mod commands;
mod io;

#[derive(Parser)]
#[command(name = "urbanvqa", version, about = "Urban-scene VQA corpus generation and evaluation")]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every metadata record; exits 1 if any is invalid.
    Validate {
        metadata: PathBuf,
    },
    /// Generate the base QA corpus from metadata.
    Generate(GenerateArgs),
    /// Generate chain-of-thought rationales for a QA corpus.
    Cot(CotArgs),
    /// Split a corpus into train/val/test by image.
    Split {
        corpus: PathBuf,
        #[arg(long, default_value = "7:2:1")]
        ratios: Ratios,
        #[arg(long)]
        seed: u64,
        /// Output directory for train.jsonl, val.jsonl and test.jsonl.
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Per-category and per-subtype counts.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Draw a category-stratified sample into a review CSV.
    SampleReview {
        corpus: PathBuf,
        #[arg(short, default_value_t = 500)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// CoT JSONL whose rationales fill the `cot` column.
        #[arg(long)]
        cot: Option<PathBuf>,
        #[arg(short, long, default_value = "review.csv")]
        output: PathBuf,
    },
    /// Parse model outputs and score them against a gold corpus.
    ParseEval {
        predictions: PathBuf,
        gold: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the per-subtype table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        parse_config: Option<PathBuf>,
    },
    /// Percent change per subtype between two metric reports.
    Compare {
        before: PathBuf,
        after: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Drop repeated qa_ids, keeping the first.
    Dedup {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write random valid metadata records.
    Synth {
        #[arg(short)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct GenerateArgs {
    metadata: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Comma-separated subtypes to emit (default: all).
    #[arg(long, value_delimiter = ',')]
    subtypes: Vec<Subtype>,
    /// Per-record cap, as `subtype=n`. Repeatable.
    #[arg(long = "cap", value_parser = parse_cap)]
    caps: Vec<(Subtype, usize)>,
    /// Generation config JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Composite-statement catalog JSON.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Manifest path (default: <output>.manifest.json).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClientKind {
    Mock,
    Http,
}

#[derive(Args)]
struct CotArgs {
    corpus: PathBuf,
    metadata: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    client: ClientKind,
    #[arg(short, long)]
    output: PathBuf,
    /// Invalid records (default: <output>.quarantine.jsonl).
    #[arg(long)]
    quarantine: Option<PathBuf>,
    /// Maximum concurrent client calls.
    #[arg(long, default_value_t = 8)]
    in_flight: usize,
    /// HTTP timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long)]
    parse_config: Option<PathBuf>,
}

fn parse_cap(s: &str) -> Result<(Subtype, usize), String> {
    let (subtype, n) = s.split_once('=').ok_or("expected subtype=n")?;
    let subtype = subtype.trim().parse::<Subtype>().map_err(|e| e.to_string())?;
    let n = n.trim().parse().map_err(|e| format!("bad cap `{n}`: {e}"))?;
    Ok((subtype, n))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
