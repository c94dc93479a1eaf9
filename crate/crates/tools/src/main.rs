use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use skg_core::{load_snapshot, parse_query, save_snapshot, IndexSnapshot, IndexWriter, Schema, ScorerKind, TraversalRequest};
use skg_tools::*;

/// Semantic knowledge graph tools. Every verb reads or writes a snapshot file
/// given with `--index`; results go to standard output.
#[derive(Debug, Parser)]
#[command(name = "skg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Index a JSONL corpus and write a snapshot.
    Ingest {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        index: PathBuf,
    },
    /// Run a traversal request (JSON file, or `-` for stdin).
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        request: PathBuf,
    },
    /// Score co-term pairs and emit keep/blacklist verdicts as TSV.
    Cleanse {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Also write the blacklisted pairs here.
        #[arg(long)]
        blacklist: Option<PathBuf>,
    },
    /// Rank a document's phrases by relatedness to its topic.
    Summarize {
        #[arg(long)]
        index: PathBuf,
        /// One phrase per line.
        #[arg(long)]
        phrases: PathBuf,
        #[arg(long)]
        field: String,
        /// Topic query; defaults to the top tf-idf phrases of the document.
        #[arg(long)]
        foreground: Option<String>,
        #[arg(long, default_value_t = DEFAULT_TFIDF_K)]
        tfidf_k: usize,
    },
    /// Predict values of a recency-tagged field with rule confidences.
    Predict {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long)]
        target: String,
        #[arg(long, default_value = "consequent")]
        scorer: ScorerKind,
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        #[arg(long, default_value_t = 10)]
        limit: u64,
    },
}

fn open_index(path: &Path) -> anyhow::Result<IndexSnapshot> {
    load_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()))
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(line.trim().to_string());
        }
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Ingest { schema, input, index } => {
            let schema = Schema::from_json(&fs::read_to_string(&schema)?)?;
            let mut writer = IndexWriter::new(schema);
            let count = ingest_file(&mut writer, &input).with_context(|| format!("ingesting {}", input.display()))?;
            save_snapshot(&writer.snapshot(), &index)?;
            writeln!(out, "{}", serde_json::json!({ "indexed": count, "index": index }))?;
        }
        Command::Query { index, request } => {
            let snapshot = open_index(&index)?;
            let text = if request.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                s
            } else {
                fs::read_to_string(&request)?
            };
            let request: TraversalRequest = serde_json::from_str(&text).context("parsing traversal request")?;
            let response = skg_core::traverse(&snapshot, &request)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&response)?)?;
        }
        Command::Cleanse {
            index,
            pairs,
            field,
            threshold,
            blacklist,
        } => {
            let snapshot = open_index(&index)?;
            let pairs = read_pairs(BufReader::new(fs::File::open(&pairs)?))?;
            let scored = cleanse_pairs(&snapshot, &field, &pairs, threshold)?;
            for p in &scored {
                writeln!(out, "{}", p.to_tsv())?;
            }
            if let Some(path) = blacklist {
                let mut f = io::BufWriter::new(fs::File::create(path)?);
                for p in scored.iter().filter(|p| p.verdict == Verdict::Blacklisted) {
                    writeln!(f, "{}\t{}", p.term_a, p.term_b)?;
                }
            }
            let blacklisted = scored.iter().filter(|p| p.verdict == Verdict::Blacklisted).count();
            eprintln!(
                "blacklisted {blacklisted} of {} pairs ({:.1}%) at threshold {threshold}",
                scored.len(),
                100.0 * blacklist_fraction(&scored)
            );
        }
        Command::Summarize {
            index,
            phrases,
            field,
            foreground,
            tfidf_k,
        } => {
            let snapshot = open_index(&index)?;
            let phrases = read_lines(&phrases)?;
            let fg = foreground.as_deref().map(parse_query).transpose()?;
            let summary = summarize_document(&snapshot, &field, &phrases, fg.as_ref(), tfidf_k)?;
            if let Some(w) = &summary.warning {
                eprintln!("warning: {w}");
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        Command::Predict {
            index,
            start,
            target,
            scorer,
            min_count,
            limit,
        } => {
            let snapshot = open_index(&index)?;
            let values = predict(&snapshot, &start, &target, scorer, min_count, limit)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&values)?)?;
        }
    }
    Ok(())
}
