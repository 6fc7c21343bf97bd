//! Command-line front end.
//!
//! Everything on standard output is data and is byte-identical across runs
//! on identical inputs; progress, warnings and errors go to standard
//! error. Exit codes: 0 success, 1 domain error (bad input data, or a
//! missing word under --strict), 2 usage error.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperdepth::config::RunConfig;
use hyperdepth::corpus::{read_corpus, write_corpus, Corpus};
use hyperdepth::depth::{lambda_word, TopologyKind};
use hyperdepth::error::Error;
use hyperdepth::eval::{detection_eval, direction_eval, load_dataset, EvalReport, TieMode};
use hyperdepth::headings::{extract_headings, EmbeddingTable, SimMethod};
use hyperdepth::index::{build_index, file_sha256, load_or_build, top_k_articles, write_index, InvertedIndex};
use hyperdepth::ingest::ingest_dump_file;
use hyperdepth::scoring::{score_pairs, PairScore, ScoreContext};

#[derive(Parser)]
#[command(name = "hyperdepth", version, about = "Hypernym direction and detection from article structure")]
struct Cli {
    /// Cap worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CorpusArg {
    /// Corpus file (JSON lines).
    #[arg(long, env = "HYPERDEPTH_CORPUS", value_name = "FILE")]
    corpus: PathBuf,
}

#[derive(Args, Clone)]
struct IndexedArgs {
    #[command(flatten)]
    corpus: CorpusArg,

    /// Index sidecar (default: the corpus path plus ".idx"). A missing or
    /// stale sidecar is rebuilt here.
    #[arg(long, env = "HYPERDEPTH_INDEX", value_name = "FILE")]
    index: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a MediaWiki XML dump into a corpus file.
    Ingest {
        /// Dump file (uncompressed XML export).
        #[arg(long, value_name = "FILE")]
        dump: PathBuf,
        /// Corpus file to write.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Build the retrieval index, or query it.
    Index(IndexCmd),
    /// Structural depth of one word across its retrieved articles.
    Depth {
        #[arg(long)]
        word: String,
        #[command(flatten)]
        io: IndexedArgs,
        #[arg(long, value_enum, default_value_t = TopologyKind::Star)]
        topology: TopologyKind,
        /// Retrieval depth.
        #[arg(long, default_value_t = 1000)]
        k: usize,
        /// Also print one line per retrieved article.
        #[arg(long)]
        verbose: bool,
        /// Exit 1 when the word has no retrievable occurrences.
        #[arg(long)]
        strict: bool,
    },
    /// Heading meaning sets for one word.
    Headings {
        #[arg(long)]
        word: String,
        #[command(flatten)]
        corpus: CorpusArg,
        /// Cap on successive disambiguation expansions.
        #[arg(long, default_value_t = 2)]
        max_hops: u32,
        /// Keep boilerplate headings (references, see also, …).
        #[arg(long)]
        no_stoplist: bool,
        /// Exit 1 when the word has no meanings.
        #[arg(long)]
        strict: bool,
    },
    /// Score word pairs from a TSV file (w1, w2 per line).
    Score {
        /// Pair file: two tab-separated words per line.
        #[arg(long, value_name = "FILE")]
        pairs: PathBuf,
        #[command(flatten)]
        io: IndexedArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Strip trailing -n/-v/-j part-of-speech markers.
        #[arg(long)]
        strip_pos: bool,
        /// Exit 1 when any word of any pair is missing from the corpus.
        #[arg(long)]
        strict: bool,
    },
    /// Evaluate against a labelled dataset.
    Eval(EvalCmd),
}

#[derive(Args)]
struct IndexCmd {
    #[command(subcommand)]
    action: Option<IndexAction>,

    /// Corpus to index (build mode).
    #[arg(long, env = "HYPERDEPTH_CORPUS", value_name = "FILE")]
    corpus: Option<PathBuf>,

    /// Sidecar file to write (build mode).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum IndexAction {
    /// Rank the articles containing a word, best first.
    Query {
        #[arg(long)]
        word: String,
        #[arg(long, default_value_t = 1000)]
        k: usize,
        #[command(flatten)]
        io: IndexedArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = TopologyKind::Star)]
    topology: TopologyKind,
    /// Retrieval depth per word.
    #[arg(long, default_value_t = 1000)]
    k: usize,
    /// Heading similarity method.
    #[arg(long, value_enum, default_value_t = SimMethod::Jaccard)]
    sim: SimMethod,
    /// Word vectors in text format; required for --sim cosine.
    #[arg(long, env = "HYPERDEPTH_EMBEDDINGS", value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Cap on successive disambiguation expansions.
    #[arg(long, default_value_t = 2)]
    max_hops: u32,
    /// Keep boilerplate headings (references, see also, …).
    #[arg(long)]
    no_stoplist: bool,
}

impl RunArgs {
    fn to_config(&self, tie: TieMode) -> RunConfig {
        RunConfig {
            topology: self.topology,
            k: self.k,
            sim: self.sim,
            embeddings: self.embeddings.clone(),
            max_disambig_hops: self.max_hops,
            use_stoplist: !self.no_stoplist,
            tie,
        }
    }
}

#[derive(Args)]
struct EvalCmd {
    #[command(subcommand)]
    protocol: EvalProtocol,
}

#[derive(Subcommand)]
enum EvalProtocol {
    /// Directionality precision over the hypernym pairs of a dataset.
    Direction {
        /// 4-column TSV: w1, w2, True|False, relation.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        #[command(flatten)]
        io: IndexedArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Strip trailing -n/-v/-j part-of-speech markers.
        #[arg(long)]
        strip_pos: bool,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Detection: hypernym pairs ranked against negatives, average
    /// precision.
    Detect {
        /// 4-column TSV: w1, w2, True|False, relation.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Negative relation to rank against, or "all".
        #[arg(long, default_value = "all", value_name = "RELATION")]
        vs: String,
        /// Tie handling in the ranking.
        #[arg(long, value_enum, default_value_t = TieMode::Stable)]
        tie: TieMode,
        #[command(flatten)]
        io: IndexedArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Strip trailing -n/-v/-j part-of-speech markers.
        #[arg(long)]
        strip_pos: bool,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

enum AppError {
    Usage(String),
    Domain(Error),
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        AppError::Domain(e)
    }
}

type AppResult<T> = Result<T, AppError>;

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// The sidecar lives next to the corpus unless told otherwise.
fn index_path(io: &IndexedArgs) -> PathBuf {
    io.index.clone().unwrap_or_else(|| {
        let mut os = io.corpus.corpus.clone().into_os_string();
        os.push(".idx");
        PathBuf::from(os)
    })
}

/// Load corpus and index, rebuilding a missing or stale sidecar.
fn load_corpus_and_index(io: &IndexedArgs) -> AppResult<(Corpus, InvertedIndex)> {
    let corpus = read_corpus(&io.corpus.corpus)?;
    let sidecar = index_path(io);
    let (index, rebuilt) = load_or_build(&corpus, &io.corpus.corpus, &sidecar)?;
    if rebuilt {
        eprintln!("index: rebuilt {}", sidecar.display());
    }
    Ok((corpus, index))
}

fn load_embeddings(config: &RunConfig) -> AppResult<Option<EmbeddingTable>> {
    match (&config.sim, &config.embeddings) {
        (SimMethod::EmbeddingCosine, Some(path)) => Ok(Some(EmbeddingTable::load(path)?)),
        _ => Ok(None),
    }
}

fn validated(run: &RunArgs, tie: TieMode) -> AppResult<RunConfig> {
    let config = run.to_config(tie);
    config.validate().map_err(usage)?;
    Ok(config)
}

/// Two-or-more-column TSV; only the first two columns are read.
fn load_pairs(path: &Path, strip_pos: bool) -> Result<Vec<(String, String)>, Error> {
    let file = File::open(path).map_err(Error::io_at(path))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(Error::io_at(path))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "expected at least two tab-separated words".into(),
            });
        }
        let strip = |w: &str| -> String {
            let w = w.trim();
            if strip_pos {
                for suffix in ["-n", "-v", "-j"] {
                    if let Some(s) = w.strip_suffix(suffix) {
                        if !s.is_empty() {
                            return s.to_string();
                        }
                    }
                }
            }
            w.to_string()
        };
        pairs.push((strip(fields[0]), strip(fields[1])));
    }
    Ok(pairs)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "NA".to_string(),
    }
}

fn missing_flags(s: &PairScore) -> &'static str {
    match (s.w1_missing, s.w2_missing) {
        (false, false) => "-",
        (true, false) => "w1",
        (false, true) => "w2",
        (true, true) => "w1,w2",
    }
}

fn print_report(report: &EvalReport, as_json: bool) -> AppResult<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if as_json {
        let json = serde_json::to_string_pretty(report)
            .expect("report serialization cannot fail");
        writeln!(out, "{json}").map_err(|e| AppError::Domain(Error::Io { path: "<stdout>".into(), source: e }))?;
        return Ok(());
    }
    writeln!(
        out,
        "{:<24} {:<8} {:<10} {:>6} {:>6} {:>7}  {:<28} {:>8}",
        "dataset", "topology", "similarity", "total", "scored", "missing", "metric", "value"
    )
    .ok();
    writeln!(
        out,
        "{:<24} {:<8} {:<10} {:>6} {:>6} {:>7}  {:<28} {:>8.5}",
        report.dataset,
        report.topology,
        report.similarity,
        report.total,
        report.scored,
        report.missing,
        report.metric,
        report.value
    )
    .ok();
    Ok(())
}

fn dataset_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run(command: Command) -> AppResult<()> {
    match command {
        Command::Ingest { dump, out } => {
            let (corpus, stats) = ingest_dump_file(&dump)?;
            write_corpus(&corpus, &out)?;
            eprintln!(
                "ingest: {} pages -> {} articles ({} non-main namespace, {} empty, {} duplicate, {} unusable)",
                stats.pages_seen,
                stats.articles,
                stats.skipped_namespace,
                stats.skipped_empty,
                stats.skipped_duplicate,
                stats.skipped_invalid,
            );
            Ok(())
        }
        Command::Index(cmd) => run_index(cmd),
        Command::Depth { word, io, topology, k, verbose, strict } => {
            if k == 0 {
                return Err(usage("k must be at least 1"));
            }
            let (corpus, index) = load_corpus_and_index(&io)?;
            let profile = lambda_word(&word, &corpus, &index, topology, k)?;
            if strict && profile.aggregate.is_none() {
                return Err(AppError::Domain(Error::MissingWord(word)));
            }
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            if verbose {
                for (id, lambda) in &profile.per_article {
                    writeln!(out, "{id}\t{lambda:.6}").ok();
                }
            }
            writeln!(out, "aggregate\t{}", fmt_opt(profile.aggregate)).ok();
            Ok(())
        }
        Command::Headings { word, corpus, max_hops, no_stoplist, strict } => {
            let corpus = read_corpus(&corpus.corpus)?;
            let sets = extract_headings(&word, &corpus, max_hops, !no_stoplist);
            if strict && sets.is_empty() {
                return Err(AppError::Domain(Error::MissingWord(word)));
            }
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for (source, headings) in &sets.meanings {
                let mut line = source.clone();
                for h in headings {
                    line.push('\t');
                    line.push_str(h);
                }
                writeln!(out, "{line}").ok();
            }
            Ok(())
        }
        Command::Score { pairs, io, run, strip_pos, strict } => {
            let config = validated(&run, TieMode::Stable)?;
            let word_pairs = load_pairs(&pairs, strip_pos)?;
            let (corpus, index) = load_corpus_and_index(&io)?;
            let table = load_embeddings(&config)?;
            let ctx = ScoreContext {
                corpus: &corpus,
                index: &index,
                topology: config.topology,
                k: config.k,
                method: config.sim,
                table: table.as_ref(),
                max_disambig_hops: config.max_disambig_hops,
                use_stoplist: config.use_stoplist,
            };
            let scores = score_pairs(&ctx, &word_pairs)?;
            if strict {
                if let Some(bad) = scores.iter().find(|s| s.w1_missing || s.w2_missing) {
                    let word = if bad.w1_missing { &bad.w1 } else { &bad.w2 };
                    return Err(AppError::Domain(Error::MissingWord(word.clone())));
                }
            }
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(
                out,
                "w1\tw2\tlambda1\tlambda2\tdepth_term\tsim\tcombined\tdirection\tmissing"
            )
            .ok();
            for s in &scores {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}",
                    s.w1,
                    s.w2,
                    fmt_opt(s.lambda1),
                    fmt_opt(s.lambda2),
                    fmt_opt(s.depth_term),
                    s.sim,
                    s.combined,
                    s.direction,
                    missing_flags(s),
                )
                .ok();
            }
            Ok(())
        }
        Command::Eval(cmd) => run_eval(cmd),
    }
}

fn run_index(cmd: IndexCmd) -> AppResult<()> {
    match cmd.action {
        Some(IndexAction::Query { word, k, io }) => {
            if k == 0 {
                return Err(usage("k must be at least 1"));
            }
            let (_, index) = load_corpus_and_index(&io)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for id in top_k_articles(&index, &word, k) {
                writeln!(out, "{id}").ok();
            }
            Ok(())
        }
        None => {
            let corpus_path = cmd
                .corpus
                .ok_or_else(|| usage("index: --corpus is required to build"))?;
            let out_path = cmd
                .out
                .ok_or_else(|| usage("index: --out is required to build"))?;
            let corpus = read_corpus(&corpus_path)?;
            let index = build_index(&corpus);
            let hash = file_sha256(&corpus_path)?;
            write_index(&index, hash, &out_path)?;
            eprintln!(
                "index: {} articles -> {}",
                index.doc_count(),
                out_path.display()
            );
            Ok(())
        }
    }
}

fn run_eval(cmd: EvalCmd) -> AppResult<()> {
    match cmd.protocol {
        EvalProtocol::Direction { dataset, io, run, strip_pos, json } => {
            let config = validated(&run, TieMode::Stable)?;
            let pairs = load_dataset(&dataset, strip_pos)?;
            let (corpus, index) = load_corpus_and_index(&io)?;
            // direction never uses similarity, so no embeddings load
            let ctx = ScoreContext {
                corpus: &corpus,
                index: &index,
                topology: config.topology,
                k: config.k,
                method: config.sim,
                table: None,
                max_disambig_hops: config.max_disambig_hops,
                use_stoplist: config.use_stoplist,
            };
            let report = direction_eval(&pairs, &ctx, &dataset_name(&dataset))?;
            print_report(&report, json)
        }
        EvalProtocol::Detect { dataset, vs, tie, io, run, strip_pos, json } => {
            let config = validated(&run, tie)?;
            let pairs = load_dataset(&dataset, strip_pos)?;
            let (corpus, index) = load_corpus_and_index(&io)?;
            let table = load_embeddings(&config)?;
            let ctx = ScoreContext {
                corpus: &corpus,
                index: &index,
                topology: config.topology,
                k: config.k,
                method: config.sim,
                table: table.as_ref(),
                max_disambig_hops: config.max_disambig_hops,
                use_stoplist: config.use_stoplist,
            };
            let report = detection_eval(&pairs, &vs, config.tie, &ctx, &dataset_name(&dataset))?;
            print_report(&report, json)
        }
    }
}
