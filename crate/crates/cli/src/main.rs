//! `nlx`: fuzzy text search over noisy OCR corpora.
//!
//! Subcommands: `gen` (synthetic corpus), `index` (build a searchable
//! index), `train` (fit the CCA model), `query` (rank candidates), and
//! `eval` (folded retrieval protocol with t-tests).
//!
//! Exit codes: 0 success, 2 input/validation error, 3 I/O error,
//! 4 numerical failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlx_core::corpus::{self, IndexFile};
use nlx_core::eval::{self, FoldPlan, Method, ProtocolConfig};
use nlx_core::lexicon;
use nlx_core::noise::{self, NoiseChannel};
use nlx_core::phoc::PhocConfig;
use nlx_core::ranking::{self, Metric};
use nlx_core::subspace::{self, CcaError, TrainingPairSet};

const EXIT_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "nlx", version, about = "Fuzzy text search for noisy OCR corpora")]
struct Cli {
    /// Worker threads (also via NLX_THREADS); defaults to available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corrupted corpus (tokens + alignments TSV).
    Gen(GenArgs),
    /// Build a searchable index from a token file.
    Index(IndexArgs),
    /// Fit the common-subspace model from tokens and alignments.
    Train(TrainArgs),
    /// Rank index candidates against a query string.
    Query(QueryArgs),
    /// Run the folded retrieval evaluation protocol.
    Eval(EvalArgs),
}

#[derive(Args)]
struct PhocArgs {
    /// Character set for the PHOC encoding (default: built-in 96-char set).
    #[arg(long)]
    charset: Option<String>,
    /// Pyramid levels, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8])]
    levels: Vec<usize>,
    /// Fold case before charset lookup.
    #[arg(long)]
    case_insensitive: bool,
}

impl PhocArgs {
    fn build(&self) -> Result<PhocConfig, CliError> {
        match &self.charset {
            Some(charset) => {
                PhocConfig::new(charset, &self.levels, !self.case_insensitive)
                    .map_err(|e| CliError::input(format!("invalid PHOC config: {e}")))
            }
            None => {
                if self.levels == [1, 2, 4, 8] && !self.case_insensitive {
                    Ok(PhocConfig::default_96())
                } else {
                    PhocConfig::new(
                        nlx_core::phoc::DEFAULT_CHARSET,
                        &self.levels,
                        !self.case_insensitive,
                    )
                    .map_err(|e| CliError::input(format!("invalid PHOC config: {e}")))
                }
            }
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 18)]
    pages: usize,
    #[arg(long, default_value_t = 238)]
    words_per_page: usize,
    /// Corruption profile: clean, default, or heavy.
    #[arg(long, default_value = "default")]
    noise_profile: String,
    /// Override the profile's substitution rate.
    #[arg(long)]
    sub_rate: Option<f64>,
    #[arg(long)]
    del_rate: Option<f64>,
    #[arg(long)]
    ins_rate: Option<f64>,
    /// Lexicon file (word<TAB>frequency per line); default: built-in German list.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output path for the token TSV.
    #[arg(long)]
    tokens: PathBuf,
    /// Output path for the alignment TSV.
    #[arg(long)]
    alignments: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Trained model file; identity projection when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// CSLS neighbour count for precomputed penalties.
    #[arg(long, default_value_t = ranking::DEFAULT_K)]
    k: usize,
    #[command(flatten)]
    phoc: PhocArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Covariance regularization.
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    /// Projection dimension; default keeps min(d, pairs - 1).
    #[arg(long)]
    p: Option<usize>,
    #[command(flatten)]
    phoc: PhocArgs,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// The query word.
    #[arg(long)]
    query: String,
    /// cosine, csls, or edit.
    #[arg(long, default_value = "csls")]
    metric: String,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    /// Comma-separated subset of edit, cosine, csls, cca+cosine, cca+csls.
    #[arg(long, value_delimiter = ',', default_values_t = vec![
        "edit".to_string(),
        "cosine".to_string(),
        "csls".to_string(),
        "cca+cosine".to_string(),
        "cca+csls".to_string(),
    ])]
    methods: Vec<String>,
    #[arg(long, default_value_t = FoldPlan::DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = ranking::DEFAULT_K)]
    k: usize,
    /// Score occurrences instead of unique tokens.
    #[arg(long)]
    occurrence_relevance: bool,
    /// Directory for records.jsonl and timing.tsv.
    #[arg(long, default_value = ".")]
    report_dir: PathBuf,
    /// Also write (noise-rate, method, mAP) rows to plot.tsv.
    #[arg(long)]
    emit_plot_data: bool,
    #[command(flatten)]
    phoc: PhocArgs,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<corpus::CorpusError> for CliError {
    fn from(e: corpus::CorpusError) -> Self {
        match e {
            corpus::CorpusError::Io(io) => CliError::io(io.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<corpus::IndexIoError> for CliError {
    fn from(e: corpus::IndexIoError) -> Self {
        match e {
            corpus::IndexIoError::Io(io) => CliError::io(io.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<CcaError> for CliError {
    fn from(e: CcaError) -> Self {
        match e {
            CcaError::IllConditioned { .. } | CcaError::BadProjectionDim { .. } => {
                CliError::numerical(e.to_string())
            }
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<eval::EvalError> for CliError {
    fn from(e: eval::EvalError) -> Self {
        match e {
            eval::EvalError::Cca(inner) => inner.into(),
            eval::EvalError::Corpus(inner) => inner.into(),
            other => CliError::input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("NLX_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: could not configure {n} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }

    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Index(args) => cmd_index(args),
        Command::Train(args) => cmd_train(args),
        Command::Query(args) => cmd_query(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn load_lexicon(path: &Option<PathBuf>) -> Result<Vec<(String, u32)>, CliError> {
    match path {
        None => Ok(lexicon::default_lexicon()),
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
            let lex = lexicon::load_lexicon(BufReader::new(file))
                .map_err(|e| CliError::input(format!("bad lexicon {}: {e}", path.display())))?;
            if lex.is_empty() {
                return Err(CliError::input("lexicon file contains no words"));
            }
            Ok(lex)
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let lex = load_lexicon(&args.lexicon)?;
    let alphabet: Vec<char> = lexicon::charset_of(&lex).chars().collect();
    let mut channel = match args.noise_profile.as_str() {
        "clean" => NoiseChannel::clean(alphabet, args.seed),
        "default" => NoiseChannel::ocr_default(alphabet, args.seed)
            .map_err(|e| CliError::input(e.to_string()))?,
        "heavy" => NoiseChannel::ocr_heavy(alphabet, args.seed)
            .map_err(|e| CliError::input(e.to_string()))?,
        other => {
            return Err(CliError::input(format!(
                "unknown noise profile {other:?} (expected clean, default, heavy)"
            )))
        }
    };
    if let Some(rate) = args.sub_rate {
        channel.sub_rate = rate;
    }
    if let Some(rate) = args.del_rate {
        channel.del_rate = rate;
    }
    if let Some(rate) = args.ins_rate {
        channel.ins_rate = rate;
    }
    // Re-validate after overrides.
    let channel = NoiseChannel::new(
        channel.sub_rate,
        channel.del_rate,
        channel.ins_rate,
        channel.alphabet,
        channel.confusion,
        channel.seed,
    )
    .map_err(|e| CliError::input(e.to_string()))?;

    let corpus = noise::generate_corpus(&lex, args.pages, args.words_per_page, &channel)
        .map_err(|e| CliError::input(e.to_string()))?;
    std::fs::write(&args.tokens, corpus.tokens_tsv)
        .map_err(|e| CliError::io(format!("writing {}: {e}", args.tokens.display())))?;
    std::fs::write(&args.alignments, corpus.alignments_tsv)
        .map_err(|e| CliError::io(format!("writing {}: {e}", args.alignments.display())))?;
    println!(
        "wrote {} pages x {} words to {} and {}",
        args.pages,
        args.words_per_page,
        args.tokens.display(),
        args.alignments.display()
    );
    Ok(())
}

fn read_tokens(path: &Path) -> Result<corpus::ParsedTokens, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
    Ok(corpus::parse_tokens(BufReader::new(file))?)
}

fn read_alignments(path: &Path) -> Result<corpus::ParsedAlignments, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
    Ok(corpus::parse_alignments(BufReader::new(file))?)
}

/// Write the per-line error report and produce the exit-2 error.
fn report_line_errors(
    errors: &[corpus::LineError],
    source: &Path,
    report_path: PathBuf,
) -> Result<CliError, CliError> {
    let mut out = String::new();
    for e in errors {
        out.push_str(&format!("{e}\n"));
    }
    std::fs::write(&report_path, out)
        .map_err(|e| CliError::io(format!("writing error report: {e}")))?;
    Ok(CliError::input(format!(
        "{} malformed lines in {}; report written to {}",
        errors.len(),
        source.display(),
        report_path.display()
    )))
}

fn cmd_index(args: IndexArgs) -> Result<(), CliError> {
    let parsed = read_tokens(&args.tokens)?;
    if !parsed.errors.is_empty() {
        let report = args.out.with_extension("errors.txt");
        return Err(report_line_errors(&parsed.errors, &args.tokens, report)?);
    }
    if parsed.candidates.is_empty() {
        return Err(CliError::input(format!(
            "{} contains no candidates",
            args.tokens.display()
        )));
    }
    let config = args.phoc.build()?;
    let model = match &args.model {
        Some(path) => Some(corpus::load_model(path)?),
        None => None,
    };
    let built = IndexFile::build(config, model, &parsed.candidates, args.k).map_err(|e| {
        match e {
            corpus::BuildError::Corpus(inner) => inner.into(),
            corpus::BuildError::Rank(inner) => CliError::input(inner.to_string()),
            other => CliError::input(other.to_string()),
        }
    })?;
    built.save(&args.out)?;
    println!(
        "indexed {} unique tokens ({} dimensions) into {}",
        built.index.len(),
        built.index.dimension(),
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let tokens = read_tokens(&args.tokens)?;
    if !tokens.errors.is_empty() {
        let report = args.out.with_extension("errors.txt");
        return Err(report_line_errors(&tokens.errors, &args.tokens, report)?);
    }
    let alignments = read_alignments(&args.alignments)?;
    if !alignments.errors.is_empty() {
        let report = args.out.with_extension("errors.txt");
        return Err(report_line_errors(&alignments.errors, &args.alignments, report)?);
    }
    let dangling = corpus::validate_alignments(&tokens.candidates, &alignments.records);
    if !dangling.is_empty() {
        let listed: Vec<String> = dangling.iter().take(10).cloned().collect();
        return Err(CliError::input(format!(
            "{} dangling alignment references:\n  {}",
            dangling.len(),
            listed.join("\n  ")
        )));
    }

    let config = args.phoc.build()?;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut skipped = 0usize;
    for record in &alignments.records {
        match (
            nlx_core::phoc::encode(&record.gold_text, &config),
            nlx_core::phoc::encode(&record.ocr_text, &config),
        ) {
            (Ok(gold), Ok(ocr)) => pairs.push((gold.to_f64(), ocr.to_f64())),
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        eprintln!("warning: {skipped} alignment pairs skipped (not encodable)");
    }
    if pairs.len() < 2 {
        return Err(CliError::input(format!(
            "need at least two encodable training pairs, got {}",
            pairs.len()
        )));
    }
    let p = args
        .p
        .unwrap_or_else(|| subspace::default_projection_dim(config.dimension(), pairs.len()));
    let set = TrainingPairSet::from_columns(&pairs).map_err(CliError::from)?;
    let fitted = subspace::fit(&set, args.lambda, p)?;
    corpus::save_model(&fitted.model, &args.out)?;

    let shown = fitted.correlations.len().min(8);
    let head: Vec<String> = fitted.correlations[..shown]
        .iter()
        .map(|r| format!("{r:.4}"))
        .collect();
    let mean: f64 =
        fitted.correlations.iter().sum::<f64>() / fitted.correlations.len() as f64;
    println!(
        "trained on {} pairs: d={}, p={}, lambda={}",
        pairs.len(),
        config.dimension(),
        p,
        args.lambda
    );
    println!(
        "canonical correlations: [{}{}] mean {mean:.4}",
        head.join(", "),
        if fitted.correlations.len() > shown {
            ", ..."
        } else {
            ""
        }
    );
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<(), CliError> {
    let file = IndexFile::load(&args.index)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.metric.as_str() {
        "edit" => {
            let vocab = file.index.vocab();
            let ranked = nlx_core::editdist::rank_by_edit_distance(
                &args.query,
                vocab,
                args.top.min(vocab.len()),
            );
            for (j, distance) in ranked {
                let hit = ranking::SearchHit {
                    index: j,
                    token: vocab[j].clone(),
                    score: distance as f64,
                    occurrences: file.index.postings(j).to_vec(),
                };
                writeln!(out, "{}", hit.to_record("edit"))?;
            }
        }
        metric => {
            let metric: Metric = metric
                .parse()
                .map_err(|e: String| CliError::input(format!("{e}; expected cosine, csls or edit")))?;
            let hits = ranking::search(
                &args.query,
                &file.index,
                Some(&file.model),
                &file.config,
                metric,
                args.top,
            )
            .map_err(|e| CliError::input(e.to_string()))?;
            for hit in hits {
                writeln!(out, "{}", hit.to_record(&metric.to_string()))?;
            }
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let tokens = read_tokens(&args.tokens)?;
    if !tokens.errors.is_empty() {
        let report = args.report_dir.join("input.errors.txt");
        return Err(report_line_errors(&tokens.errors, &args.tokens, report)?);
    }
    let alignments = read_alignments(&args.alignments)?;
    if !alignments.errors.is_empty() {
        let report = args.report_dir.join("input.errors.txt");
        return Err(report_line_errors(&alignments.errors, &args.alignments, report)?);
    }
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_, String>>()
        .map_err(CliError::input)?;

    let mut pages: Vec<String> = tokens
        .candidates
        .iter()
        .map(|c| c.page_id.clone())
        .collect();
    pages.sort();
    pages.dedup();
    let plan = FoldPlan::random(&pages, args.folds, args.seed)?;

    let mut cfg = ProtocolConfig::new(args.phoc.build()?);
    cfg.lambda = args.lambda;
    cfg.p = args.p;
    cfg.k = args.k;
    cfg.occurrence_relevance = args.occurrence_relevance;

    let report = eval::run_protocol(
        &tokens.candidates,
        &alignments.records,
        &methods,
        &plan,
        &cfg,
    )?;

    print!("{}", report.render_text());

    std::fs::create_dir_all(&args.report_dir)
        .map_err(|e| CliError::io(format!("creating {}: {e}", args.report_dir.display())))?;
    let records_path = args.report_dir.join("records.jsonl");
    let mut records = BufWriter::new(File::create(&records_path)?);
    report.write_records(&mut records)?;
    records.flush()?;
    let timing_path = args.report_dir.join("timing.tsv");
    let mut timing = BufWriter::new(File::create(&timing_path)?);
    report.write_timing(&mut timing)?;
    timing.flush()?;
    if args.emit_plot_data {
        let plot_path = args.report_dir.join("plot.tsv");
        let mut plot = BufWriter::new(File::create(&plot_path)?);
        report.write_plot_data(&mut plot)?;
        plot.flush()?;
    }
    eprintln!(
        "records: {} (deterministic), timing: {} (wall clock)",
        records_path.display(),
        timing_path.display()
    );
    Ok(())
}
