//! `star` — build, query, and analyze semantic text indexes from the
//! command line.
//!
//! One subcommand per pipeline stage: `build` and `add` create and grow an
//! index, `query`/`neighbors` rank documents and terms, and the analysis
//! commands (`cluster`, `summarize`, `compare`, `usage`, `noise`, `stats`)
//! expose the rest of the library. Tables print as TSV with a `#`-prefixed
//! header row; `--json` switches the format. Given the same index and
//! flags, every command writes identical bytes to stdout whatever the
//! worker count; timing chatter goes to stderr.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use star_core::analytics::{
    compare_portfolios, cut_clusters, cut_into, hcluster, summarize, word_usage_table,
    ClusterCut, Linkage, SummaryUnit,
};
use star_core::corpus::{
    build_vocabulary, paragraph_texts, read_corpus, sentence_texts, update_vocabulary,
    RawDocument, SignificanceConfig, TokenizeOptions, TokenizedDocument,
};
use star_core::embedder::{
    add_documents, build_space, document_vectors, ContextMode, DocumentVector, EmbedOptions,
    SemanticSpace,
};
use star_core::seedspace::{estimate_noise, quasi_orthogonality_report, SeedConfig};
use star_core::simeng::{orthogonalize, top_k, word_overlap_similarity, Candidate};
use star_core::store::{load_index, save_index, DocRecord, IndexBundle};
use star_core::Error;

// --------------------------------------------------------------------------
// Error handling and exit codes
// --------------------------------------------------------------------------

/// Exit codes: 0 success, 2 input error, 3 domain error, 4 I/O error.
enum CliError {
    Core(Error),
    Input(String),
    Domain(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Input(m) | CliError::Domain(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Core(e) => match e {
                Error::EmptyCorpus | Error::ConfigInvalid(_) | Error::InvalidCorpus(_) => 2,
                Error::Io(_)
                | Error::ChecksumMismatch { .. }
                | Error::VersionMismatch { .. }
                | Error::HashFunctionMismatch { .. }
                | Error::InconsistentBundle(_) => 4,
                _ => 3,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

// --------------------------------------------------------------------------
// Argument surface
// --------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "star", version, about = "Semantic text indexing and retrieval")]
struct Cli {
    /// Worker threads (default: all cores). Never changes output bytes.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct IndexArg {
    /// Index directory.
    #[arg(long, env = "STAR_INDEX")]
    index: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index from a corpus (JSONL file or directory of .txt files).
    Build(BuildArgs),
    /// Rank indexed documents against free text.
    Query(QueryArgs),
    /// Rank terms around a term, optionally after removing sense anchors.
    Neighbors(NeighborsArgs),
    /// Fold more documents into an existing index.
    Add(AddArgs),
    /// Cluster the indexed documents agglomeratively.
    Cluster(ClusterArgs),
    /// Pick the most representative paragraphs or sentences of a document.
    Summarize(SummarizeArgs),
    /// Match two document portfolios against each other.
    Compare(CompareArgs),
    /// Contrast how two documents use their vocabulary.
    Usage(UsageArgs),
    /// Measure the noise floor of the seed-vector geometry.
    Noise(NoiseArgs),
    /// Print an index's configuration and corpus statistics.
    Stats(StatsArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Corpus path: JSONL file or directory of .txt files.
    #[arg(long)]
    corpus: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Count of +1 (and of -1) coordinates per seed vector.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Seed shared by every term; indexes agree on vectors iff it matches.
    #[arg(long, default_value_t = 0)]
    global_seed: u64,
    /// Drop terms appearing in more than this fraction of documents.
    #[arg(long, default_value_t = 0.10)]
    max_df_ratio: f64,
    /// Drop terms occurring fewer than this many times in total.
    #[arg(long, default_value_t = 3)]
    min_count: u64,
    /// Co-occurrence context: "sentence", "window" or "window:N".
    #[arg(long, default_value = "sentence")]
    context: String,
    /// Weight in-context occurrences by idf.
    #[arg(long)]
    context_idf: bool,
    /// Do not fold titles in as leading paragraphs.
    #[arg(long)]
    no_titles: bool,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Query text (alternatively, use --file).
    #[arg(required_unless_present = "file", conflicts_with = "file")]
    text: Option<String>,
    /// Read the query text from a file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Number of results.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NeighborsArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Term whose neighborhood to list.
    #[arg(long)]
    term: String,
    /// Number of results.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Remove this sense anchor first (repeatable, applied in order).
    #[arg(long = "orthogonal-to")]
    orthogonal_to: Vec<String>,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AddArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Corpus of documents to add.
    #[arg(long)]
    corpus: PathBuf,
    /// Do not fold titles in as leading paragraphs.
    #[arg(long)]
    no_titles: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkageArg {
    Average,
    Complete,
    Single,
}

impl From<LinkageArg> for Linkage {
    fn from(l: LinkageArg) -> Linkage {
        match l {
            LinkageArg::Average => Linkage::Average,
            LinkageArg::Complete => Linkage::Complete,
            LinkageArg::Single => Linkage::Single,
        }
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Linkage rule for merging clusters.
    #[arg(long, value_enum, default_value_t = LinkageArg::Average)]
    linkage: LinkageArg,
    /// Report subtrees whose merges all reach this similarity (default 0.7).
    #[arg(long, conflicts_with = "clusters")]
    threshold: Option<f64>,
    /// Cut into exactly this many groups instead of using a threshold.
    #[arg(long)]
    clusters: Option<usize>,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Paragraph,
    Sentence,
}

impl From<UnitArg> for SummaryUnit {
    fn from(u: UnitArg) -> SummaryUnit {
        match u {
            UnitArg::Paragraph => SummaryUnit::Paragraph,
            UnitArg::Sentence => SummaryUnit::Sentence,
        }
    }
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Summarize this indexed document; --corpus supplies its text.
    #[arg(long, requires = "corpus", conflicts_with = "file", required_unless_present = "file")]
    doc: Option<String>,
    /// Corpus containing the document named by --doc.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Summarize a standalone text file against the index.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Units to keep.
    #[arg(long, default_value_t = 6)]
    n_keep: usize,
    /// Unit of extraction.
    #[arg(long, value_enum, default_value_t = UnitArg::Paragraph)]
    unit: UnitArg,
    /// Do not fold titles in as leading paragraphs.
    #[arg(long)]
    no_titles: bool,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Left portfolio: a file of document ids (one per line), or "all".
    a: String,
    /// Right portfolio: a file of document ids (one per line), or "all".
    b: String,
    /// Minimum similarity for a match.
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    /// Also print the word-overlap baseline; --corpus supplies the texts.
    #[arg(long, requires = "corpus")]
    baseline: bool,
    /// Corpus with the documents' texts (needed for --baseline).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Do not fold titles in as leading paragraphs.
    #[arg(long)]
    no_titles: bool,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct UsageArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Corpus containing both documents' texts.
    #[arg(long)]
    corpus: PathBuf,
    /// First document id.
    #[arg(long)]
    doc_a: String,
    /// Second document id.
    #[arg(long)]
    doc_b: String,
    /// Rows to keep per column.
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Do not fold titles in as leading paragraphs.
    #[arg(long)]
    no_titles: bool,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct NoiseArgs {
    /// Dimension to measure (repeatable: --d 500 --d 2000).
    #[arg(long = "d", default_values_t = vec![1000usize])]
    d: Vec<usize>,
    /// Count of +1 (and of -1) coordinates per seed vector.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Random vector pairs per dimension.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Seed of the sampling stream.
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
    /// Global seed used for the --angles report.
    #[arg(long, default_value_t = 0)]
    global_seed: u64,
    /// Also report pairwise angles between deterministic term seeds.
    #[arg(long)]
    angles: bool,
    /// Seed vectors to draw for the --angles report.
    #[arg(long, default_value_t = 1000)]
    vectors: usize,
    /// Band half-width (degrees) around 90 for the --angles report.
    #[arg(long, default_value_t = 15.0)]
    epsilon: f64,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    index: IndexArg,
    /// Emit JSON instead of TSV.
    #[arg(long)]
    json: bool,
}

// --------------------------------------------------------------------------
// Shared plumbing
// --------------------------------------------------------------------------

/// Write to stdout, treating a closed pipe as a normal early exit so
/// piping into `head` and friends stays quiet.
fn emit(out: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(out.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(4);
    }
}

/// Escape a field so TSV rows never contain raw tabs or line breaks.
fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn sig4(x: f64) -> String {
    format!("{x:.4}")
}

fn parse_context(arg: &str) -> CliResult<ContextMode> {
    if arg == "sentence" {
        return Ok(ContextMode::Sentence);
    }
    if arg == "window" {
        return Ok(ContextMode::Window(5));
    }
    if let Some(n) = arg.strip_prefix("window:") {
        let w: usize = n
            .parse()
            .map_err(|_| CliError::Input(format!("invalid context window size {n:?}")))?;
        return Ok(ContextMode::Window(w));
    }
    Err(CliError::Input(format!(
        "invalid context mode {arg:?}: expected \"sentence\", \"window\" or \"window:N\""
    )))
}

fn render_context(mode: ContextMode) -> String {
    match mode {
        ContextMode::Sentence => "sentence".to_string(),
        ContextMode::Window(w) => format!("window:{w}"),
    }
}

fn tokenize_all(raw: &[RawDocument], options: &TokenizeOptions) -> Vec<TokenizedDocument> {
    raw.iter().map(|r| TokenizedDocument::from_raw(r, options)).collect()
}

/// Document table rows for saving: corpus order, vectors where embedding
/// succeeded. Titles are kept as metadata even when not folded into the text.
fn doc_records(raw: &[RawDocument], vectors: &[DocumentVector]) -> Vec<DocRecord> {
    let by_id: HashMap<&str, &DocumentVector> =
        vectors.iter().map(|v| (v.doc_id.as_str(), v)).collect();
    raw.iter()
        .map(|r| DocRecord {
            doc_id: r.id.clone(),
            title: r.title.clone(),
            vector: by_id.get(r.id.as_str()).map(|v| (v.vec.clone(), v.term_count)),
        })
        .collect()
}

/// The embedded documents of a loaded index, in index order.
fn embedded_docs(bundle: &IndexBundle) -> Vec<DocumentVector> {
    bundle
        .docs
        .iter()
        .filter_map(|r| {
            r.vector.as_ref().map(|(vec, term_count)| DocumentVector {
                doc_id: r.doc_id.clone(),
                vec: vec.clone(),
                term_count: *term_count,
            })
        })
        .collect()
}

/// Term vectors for every significant term that has a usable (non-zero)
/// accumulator, in term order.
fn term_candidates(space: &SemanticSpace) -> CliResult<Vec<(String, Vec<f32>)>> {
    let mut out = Vec::new();
    for term in space.terms() {
        match space.term_vector(term) {
            Ok(vec) => out.push((term.clone(), vec)),
            Err(Error::ZeroVector(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn find_raw<'a>(raw: &'a [RawDocument], id: &str) -> CliResult<&'a RawDocument> {
    raw.iter()
        .find(|r| r.id == id)
        .ok_or_else(|| CliError::Domain(format!("document {id:?} not found in corpus")))
}

// --------------------------------------------------------------------------
// Commands
// --------------------------------------------------------------------------

fn cmd_build(args: BuildArgs) -> CliResult<()> {
    let start = Instant::now();
    let context_mode = parse_context(&args.context)?;
    let raw = read_corpus(&args.corpus)?;
    let options = TokenizeOptions { include_title: !args.no_titles };
    let docs = tokenize_all(&raw, &options);
    let significance =
        SignificanceConfig { max_df_ratio: args.max_df_ratio, min_count: args.min_count };
    let (vocab, stats) = build_vocabulary(&docs, significance)?;
    let seed_config = SeedConfig { dim: args.d, k: args.k, global_seed: args.global_seed };
    let embed = EmbedOptions { context_mode, context_idf: args.context_idf };
    let space = build_space(&docs, vocab, stats, seed_config, embed)?;
    let (vectors, skipped) = document_vectors(&space, &docs)?;
    save_index(&space, &doc_records(&raw, &vectors), &args.index.index)?;
    eprintln!(
        "indexed {} documents ({} embedded, {} without significant terms), \
         {} significant terms in {:.2}s on {} workers",
        stats.documents,
        vectors.len(),
        skipped.len(),
        stats.significant_terms,
        start.elapsed().as_secs_f64(),
        rayon::current_num_threads()
    );
    emit(&format!("{}\n", args.index.index.display()));
    Ok(())
}

fn cmd_query(args: QueryArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let text = match &args.file {
        Some(path) => std::fs::read_to_string(path).map_err(Error::from)?,
        None => args.text.clone().expect("clap requires text or --file"),
    };
    let probe = TokenizedDocument::new("query", &text);
    let composed = bundle.space.compose_vector(&probe.term_bag())?;
    let docs = embedded_docs(&bundle);
    let titles: HashMap<&str, &str> = bundle
        .docs
        .iter()
        .filter_map(|r| r.title.as_deref().map(|t| (r.doc_id.as_str(), t)))
        .collect();
    let candidates: Vec<Candidate> =
        docs.iter().map(|d| Candidate { id: &d.doc_id, vec: &d.vec }).collect();
    let hits = top_k(&composed.vec, &candidates, args.k)?;
    if args.json {
        let rows: Vec<serde_json::Value> = hits
            .iter()
            .enumerate()
            .map(|(i, n)| {
                serde_json::json!({
                    "rank": i + 1,
                    "sigma": n.similarity,
                    "id": n.id,
                    "title": titles.get(n.id.as_str()),
                })
            })
            .collect();
        emit(&format!("{}\n", serde_json::to_string_pretty(&rows).expect("serializable rows")));
    } else {
        let mut out = String::from("# rank\tsigma\tid\ttitle\n");
        for (i, n) in hits.iter().enumerate() {
            let title = titles.get(n.id.as_str()).copied().unwrap_or("");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i + 1,
                sig4(n.similarity),
                escape(&n.id),
                escape(title)
            ));
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_neighbors(args: NeighborsArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let mut vec = bundle.space.term_vector(&args.term)?;
    for anchor in &args.orthogonal_to {
        let a = bundle.space.term_vector(anchor)?;
        vec = orthogonalize(&vec, &a)?;
    }
    let terms = term_candidates(&bundle.space)?;
    let candidates: Vec<Candidate> =
        terms.iter().map(|(id, v)| Candidate { id, vec: v }).collect();
    let hits = top_k(&vec, &candidates, args.k)?;
    if args.json {
        let rows: Vec<serde_json::Value> = hits
            .iter()
            .map(|n| serde_json::json!({ "term": n.id, "sigma": n.similarity }))
            .collect();
        emit(&format!("{}\n", serde_json::to_string_pretty(&rows).expect("serializable rows")));
    } else {
        let mut out = String::from("# term\tsigma\n");
        for n in &hits {
            out.push_str(&format!("{}\t{}\n", escape(&n.id), sig4(n.similarity)));
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_add(args: AddArgs) -> CliResult<()> {
    let start = Instant::now();
    let bundle = load_index(&args.index.index)?;
    let raw = read_corpus(&args.corpus)?;
    let options = TokenizeOptions { include_title: !args.no_titles };
    let new_docs = tokenize_all(&raw, &options);
    let (vocab, stats) =
        update_vocabulary(bundle.space.vocab(), bundle.space.stats(), &new_docs)?;
    let space = add_documents(bundle.space, &new_docs, vocab, stats)?;
    let (vectors, skipped) = document_vectors(&space, &new_docs)?;
    let mut records = bundle.docs;
    records.extend(doc_records(&raw, &vectors));
    save_index(&space, &records, &args.index.index)?;
    let partial = space.iter_accumulators().filter(|(_, a)| a.partial).count();
    eprintln!(
        "added {} documents ({} embedded, {} without significant terms); index now holds \
         {} documents and {} significant terms ({} partial) after {:.2}s on {} workers",
        new_docs.len(),
        vectors.len(),
        skipped.len(),
        space.stats().documents,
        space.stats().significant_terms,
        partial,
        start.elapsed().as_secs_f64(),
        rayon::current_num_threads()
    );
    emit(&format!("{}\n", args.index.index.display()));
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let docs = embedded_docs(&bundle);
    let tree = hcluster(&docs, args.linkage.into())?;
    let cut: ClusterCut = match args.clusters {
        Some(m) => cut_into(&tree, m),
        None => cut_clusters(&tree, args.threshold.unwrap_or(0.7)),
    };
    if args.json {
        emit(&format!("{}\n", serde_json::to_string_pretty(&cut).expect("serializable cut")));
    } else {
        let mut out = String::from("# cluster\tsplit_at\tdoc_id\n");
        for (idx, cluster) in cut.clusters.iter().enumerate() {
            for member in &cluster.members {
                out.push_str(&format!(
                    "{}\t{}\t{}\n",
                    idx + 1,
                    sig4(cluster.split_at),
                    escape(member)
                ));
            }
        }
        out.push_str(&format!("# singletons\t{}\n", cut.singletons));
        emit(&out);
    }
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let options = TokenizeOptions { include_title: !args.no_titles };
    let (id, text) = match (&args.doc, &args.file) {
        (Some(doc_id), None) => {
            let corpus = args.corpus.as_ref().expect("clap ties --doc to --corpus");
            let raw = read_corpus(corpus)?;
            let doc = find_raw(&raw, doc_id)?;
            (doc.id.clone(), doc.effective_text(&options).into_owned())
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".to_string());
            (id, text)
        }
        _ => unreachable!("clap enforces exactly one of --doc and --file"),
    };
    let tokenized = TokenizedDocument::new(id.clone(), &text);
    let unit: SummaryUnit = args.unit.into();
    let summary = summarize(&tokenized, &bundle.space, args.n_keep, unit)?;
    let texts = match unit {
        SummaryUnit::Paragraph => paragraph_texts(&text),
        SummaryUnit::Sentence => sentence_texts(&text),
    };
    let total_units = match unit {
        SummaryUnit::Paragraph => tokenized.paragraphs.len(),
        SummaryUnit::Sentence => tokenized.sentences.len(),
    };
    if args.json {
        let kept: Vec<serde_json::Value> = summary
            .kept
            .iter()
            .zip(&summary.scores)
            .map(|(&idx, &sigma)| {
                serde_json::json!({
                    "index": idx,
                    "sigma": sigma,
                    "text": texts.get(idx).map(String::as_str).unwrap_or(""),
                })
            })
            .collect();
        let obj = serde_json::json!({
            "doc_id": summary.doc_id,
            "unit": match unit {
                SummaryUnit::Paragraph => "paragraph",
                SummaryUnit::Sentence => "sentence",
            },
            "total_units": total_units,
            "kept": kept,
        });
        emit(&format!("{}\n", serde_json::to_string_pretty(&obj).expect("serializable summary")));
    } else {
        // Ellipsis rows mark runs of skipped units, leading and trailing
        // gaps included.
        let mut out = String::from("# unit\tsigma\ttext\n");
        let mut next_expected = 0usize;
        for (&idx, &sigma) in summary.kept.iter().zip(&summary.scores) {
            if idx > next_expected {
                out.push_str("...\n");
            }
            let unit_text = texts.get(idx).map(String::as_str).unwrap_or("");
            out.push_str(&format!("{}\t{}\t{}\n", idx, sig4(sigma), escape(unit_text)));
            next_expected = idx + 1;
        }
        if next_expected < total_units {
            out.push_str("...\n");
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let docs = embedded_docs(&bundle);
    let by_id: HashMap<&str, &DocumentVector> =
        docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let resolve = |selector: &str| -> CliResult<Vec<DocumentVector>> {
        if selector == "all" {
            return Ok(docs.clone());
        }
        let listing = std::fs::read_to_string(selector).map_err(Error::from)?;
        let mut side = Vec::new();
        for line in listing.lines() {
            let id = line.trim();
            if id.is_empty() {
                continue;
            }
            let doc = by_id.get(id).ok_or_else(|| {
                CliError::Domain(format!("document {id:?} is not embedded in the index"))
            })?;
            side.push((*doc).clone());
        }
        Ok(side)
    };
    let side_a = resolve(&args.a)?;
    let side_b = resolve(&args.b)?;
    let report = compare_portfolios(&side_a, &side_b, args.threshold)?;

    // The word-overlap baseline needs the documents' bags, hence the corpus.
    let bags: Option<HashMap<String, std::collections::BTreeMap<String, u64>>> =
        if args.baseline {
            let corpus = args.corpus.as_ref().expect("clap ties --baseline to --corpus");
            let raw = read_corpus(corpus)?;
            let options = TokenizeOptions { include_title: !args.no_titles };
            Some(
                raw.iter()
                    .map(|r| {
                        (r.id.clone(), TokenizedDocument::from_raw(r, &options).term_bag())
                    })
                    .collect(),
            )
        } else {
            None
        };
    let overlap = |a: &str, b: &str| -> CliResult<f64> {
        let bags = bags.as_ref().expect("caller checked baseline mode");
        let bag_of = |id: &str| {
            bags.get(id)
                .ok_or_else(|| CliError::Domain(format!("document {id:?} not found in corpus")))
        };
        Ok(word_overlap_similarity(&bundle.space, bag_of(a)?, bag_of(b)?)?)
    };

    if args.json {
        let mut rows: Vec<serde_json::Value> = Vec::new();
        for entry in &report.entries {
            for m in &entry.matches {
                let mut row = serde_json::json!({
                    "a": entry.doc_id,
                    "b": m.id,
                    "sigma": m.similarity,
                });
                if args.baseline {
                    row["sigma_bow"] = overlap(&entry.doc_id, &m.id)?.into();
                }
                rows.push(row);
            }
        }
        emit(&format!("{}\n", serde_json::to_string_pretty(&rows).expect("serializable rows")));
    } else {
        let mut out = String::new();
        out.push_str(if args.baseline {
            "# a\tb\tsigma\tsigma_bow\n"
        } else {
            "# a\tb\tsigma\n"
        });
        for entry in &report.entries {
            for m in &entry.matches {
                out.push_str(&format!(
                    "{}\t{}\t{}",
                    escape(&entry.doc_id),
                    escape(&m.id),
                    sig4(m.similarity)
                ));
                if args.baseline {
                    out.push_str(&format!("\t{}", sig4(overlap(&entry.doc_id, &m.id)?)));
                }
                out.push('\n');
            }
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_usage(args: UsageArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let raw = read_corpus(&args.corpus)?;
    let options = TokenizeOptions { include_title: !args.no_titles };
    let doc_a = TokenizedDocument::from_raw(find_raw(&raw, &args.doc_a)?, &options);
    let doc_b = TokenizedDocument::from_raw(find_raw(&raw, &args.doc_b)?, &options);
    let table = word_usage_table(&doc_a, &doc_b, &bundle.space, args.top)?;
    if args.json {
        emit(&format!("{}\n", serde_json::to_string_pretty(&table).expect("serializable table")));
    } else {
        let mut out = String::from("# side\tdoc_id\tterm\tcount\tsigma\tshared\n");
        for (side, column) in [("a", &table.a), ("b", &table.b)] {
            for row in &column.rows {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    side,
                    escape(&column.doc_id),
                    escape(&row.term),
                    row.count,
                    sig4(row.similarity),
                    row.shared
                ));
            }
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> CliResult<()> {
    let mut estimates = Vec::new();
    let mut angle_reports = Vec::new();
    for &d in &args.d {
        let config = SeedConfig { dim: d, k: args.k, global_seed: args.global_seed };
        estimates.push(estimate_noise(&config, args.samples, args.sample_seed)?);
        if args.angles {
            angle_reports.push(quasi_orthogonality_report(args.vectors, &config, args.epsilon)?);
        }
    }
    if args.json {
        let obj = if args.angles {
            serde_json::json!({ "noise": estimates, "angles": angle_reports })
        } else {
            serde_json::json!({ "noise": estimates })
        };
        emit(&format!("{}\n", serde_json::to_string_pretty(&obj).expect("serializable reports")));
    } else {
        let mut out = String::from("# d\tk\tsamples\tmean\tstd\n");
        for e in &estimates {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.8}\t{:.8}\n",
                e.dim, e.k, e.samples, e.mean, e.std_dev
            ));
        }
        if args.angles {
            out.push_str(
                "# d\tk\tvectors\tpairs\tmean_angle\tmin_angle\tmax_angle\twithin_band\n",
            );
            for r in &angle_reports {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.6}\n",
                    r.dim,
                    r.k,
                    r.vectors,
                    r.pairs,
                    r.mean_angle_deg,
                    r.min_angle_deg,
                    r.max_angle_deg,
                    r.fraction_within
                ));
            }
        }
        emit(&out);
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> CliResult<()> {
    let bundle = load_index(&args.index.index)?;
    let manifest = &bundle.manifest;
    let embedded = bundle.docs.iter().filter(|r| r.vector.is_some()).count();
    let partial =
        bundle.space.iter_accumulators().filter(|(_, a)| a.partial).count();
    if args.json {
        let obj = serde_json::json!({
            "format_version": manifest.format_version,
            "hash_function": manifest.hash_function,
            "created_unix": manifest.created_unix,
            "documents": manifest.stats.documents,
            "embedded_documents": embedded,
            "significant_terms": manifest.stats.significant_terms,
            "partial_terms": partial,
            "total_tokens": manifest.stats.total_tokens,
            "d": manifest.seed_config.dim,
            "k": manifest.seed_config.k,
            "global_seed": manifest.seed_config.global_seed,
            "max_df_ratio": manifest.significance.max_df_ratio,
            "min_count": manifest.significance.min_count,
            "context_mode": render_context(manifest.embed_options.context_mode),
            "context_idf": manifest.embed_options.context_idf,
        });
        emit(&format!("{}\n", serde_json::to_string_pretty(&obj).expect("serializable stats")));
    } else {
        let rows: Vec<(&str, String)> = vec![
            ("format_version", manifest.format_version.to_string()),
            ("hash_function", manifest.hash_function.clone()),
            ("created_unix", manifest.created_unix.to_string()),
            ("documents", manifest.stats.documents.to_string()),
            ("embedded_documents", embedded.to_string()),
            ("significant_terms", manifest.stats.significant_terms.to_string()),
            ("partial_terms", partial.to_string()),
            ("total_tokens", manifest.stats.total_tokens.to_string()),
            ("d", manifest.seed_config.dim.to_string()),
            ("k", manifest.seed_config.k.to_string()),
            ("global_seed", manifest.seed_config.global_seed.to_string()),
            ("max_df_ratio", manifest.significance.max_df_ratio.to_string()),
            ("min_count", manifest.significance.min_count.to_string()),
            ("context_mode", render_context(manifest.embed_options.context_mode)),
            ("context_idf", manifest.embed_options.context_idf.to_string()),
        ];
        let mut out = String::from("# key\tvalue\n");
        for (key, value) in rows {
            out.push_str(&format!("{}\t{}\n", key, escape(&value)));
        }
        emit(&out);
    }
    Ok(())
}

// --------------------------------------------------------------------------

fn run(cli: Cli) -> CliResult<()> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Input("--workers must be at least 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size worker pool: {e}")))?;
    }
    match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Query(args) => cmd_query(args),
        Command::Neighbors(args) => cmd_neighbors(args),
        Command::Add(args) => cmd_add(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Usage(args) => cmd_usage(args),
        Command::Noise(args) => cmd_noise(args),
        Command::Stats(args) => cmd_stats(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
