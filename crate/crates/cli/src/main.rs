//! The `bnet` command line: survey preprocessing, score-based structure
//! learning, graph queries, exact inference, and Dirichlet posterior
//! simulation, all over plain files (CSV + schema, pipeline scripts,
//! network documents in JSON, DOT exports).
//!
//! Every command is deterministic given its flags and reads its inputs
//! without modifying them. Exit codes: 0 success, 2 bad invocation or
//! unreadable input, 3 data that cannot support the request, 4 internal
//! error.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bnet::dataset::{apply_pipeline, format_schema_file, parse_pipeline, parse_schema_file};
use bnet::document::{constraints_digest, DocumentError, NetworkDocument, Provenance};
use bnet::graph::GraphError;
use bnet::params::{fit_bayes, fit_mle, ParamError};
use bnet::posterior::{evidence_from_labels, posterior_from_query, PosteriorError};
use bnet::scoring::ScoreError;
use bnet::search::{hill_climb, SearchError};
use bnet::{
    ArcConstraints, DataError, Dataset, Evidence, Factor, InferenceError, McConfig, Network,
    ScoreSpec, SearchConfig,
};

#[derive(Parser)]
#[command(
    name = "bnet",
    version,
    about = "Discrete Bayesian networks for categorical survey data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a preprocessing pipeline to a CSV dataset.
    Preprocess(PreprocessArgs),
    /// Learn a network from data and fit its probability tables.
    Learn(LearnArgs),
    /// Print the structural summary of a saved network.
    Summarize(SummarizeArgs),
    /// Test whether two variable sets are d-separated.
    Dsep(DsepArgs),
    /// Print the Markov blanket of one node.
    Mb(MbArgs),
    /// Compute an exact conditional probability table.
    Query(QueryArgs),
    /// Simulate the Dirichlet posterior of a two-way table.
    Posterior(PosteriorArgs),
    /// Write DOT or model-string views of a saved network.
    Export(ExportArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Schema file describing the input columns.
    #[arg(long)]
    schema: PathBuf,
    /// Pipeline script, one operation per line.
    #[arg(long)]
    pipeline: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Output schema path; defaults to the output CSV with extension
    /// `.schema`.
    #[arg(long)]
    out_schema: Option<PathBuf>,
    /// Token that marks a missing cell.
    #[arg(long, default_value = "NA")]
    missing: String,
}

#[derive(Args)]
struct LearnArgs {
    /// Training CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Schema file describing the columns.
    #[arg(long)]
    schema: PathBuf,
    /// Token that marks a missing cell.
    #[arg(long, default_value = "NA")]
    missing: String,
    /// Network score to maximize.
    #[arg(long, value_enum, default_value_t = ScoreArg::Bic)]
    score: ScoreArg,
    /// Imaginary sample size for --score bdeu (default 10).
    #[arg(long)]
    iss: Option<f64>,
    /// Arc blacklist file: one `FROM TO` pair per line, `*` matching
    /// every node, `#` starting a comment.
    #[arg(long)]
    blacklist: Option<PathBuf>,
    /// Arc whitelist file, same format as the blacklist.
    #[arg(long)]
    whitelist: Option<PathBuf>,
    /// Where to save the learned network document.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the learned graph in DOT format.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Also write the learning report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Estimator for the conditional probability tables.
    #[arg(long, value_enum, default_value_t = FitArg::Mle)]
    fit: FitArg,
    /// Imaginary sample size for --fit bayes (default 1).
    #[arg(long)]
    fit_iss: Option<f64>,
    /// Minimum score improvement for a move to be applied.
    #[arg(long)]
    eps: Option<f64>,
    /// Cap on the number of hill-climbing moves.
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreArg {
    Bic,
    Aic,
    Bdeu,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitArg {
    Mle,
    Bayes,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Network document to summarize.
    #[arg(long)]
    net: PathBuf,
}

#[derive(Args)]
struct DsepArgs {
    /// Network document to query.
    #[arg(long)]
    net: PathBuf,
    /// First variable set, comma separated.
    #[arg(long)]
    x: String,
    /// Second variable set, comma separated.
    #[arg(long)]
    y: String,
    /// Conditioning set, comma separated; may be empty.
    #[arg(long, default_value = "")]
    z: String,
}

#[derive(Args)]
struct MbArgs {
    /// Network document to query.
    #[arg(long)]
    net: PathBuf,
    /// Node whose Markov blanket to print.
    #[arg(long)]
    node: String,
}

#[derive(Args)]
struct QueryArgs {
    /// Network document to query.
    #[arg(long)]
    net: PathBuf,
    /// Target variables, comma separated.
    #[arg(long)]
    targets: String,
    /// Evidence as VAR=LEVEL pairs, comma separated.
    #[arg(long)]
    given: Option<String>,
    /// Emit the distribution as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PosteriorArgs {
    /// CSV file holding the observed rows.
    #[arg(long)]
    data: PathBuf,
    /// Schema file describing the columns.
    #[arg(long)]
    schema: PathBuf,
    /// Token that marks a missing cell.
    #[arg(long, default_value = "NA")]
    missing: String,
    /// Row filter as VAR=LEVEL pairs, comma separated.
    #[arg(long)]
    filter: Option<String>,
    /// The two variables spanning the table, comma separated.
    #[arg(long)]
    vars: String,
    /// Prior weight per cell; overrides --alpha-mode and --iss.
    #[arg(long, conflicts_with_all = ["alpha_mode", "iss"])]
    alpha: Option<f64>,
    /// How to derive the per-cell prior weight from --iss.
    #[arg(long, value_enum, default_value_t = AlphaModeArg::IssCells)]
    alpha_mode: AlphaModeArg,
    /// Imaginary sample size feeding --alpha-mode.
    #[arg(long, default_value_t = 10.0)]
    iss: f64,
    /// Network document; required by --alpha-mode footnote12 to read
    /// the second variable's parents.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Number of independent chains.
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Draws per chain.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Random seed; reruns with the same seed are byte-identical.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability mass of each HPD interval.
    #[arg(long, default_value_t = 0.95)]
    hpd: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlphaModeArg {
    /// iss divided by the number of table cells.
    IssCells,
    /// iss divided by the first variable's level count times the joint
    /// parent state count of the second variable, read from --net.
    Footnote12,
}

#[derive(Args)]
struct ExportArgs {
    /// Network document to export.
    #[arg(long)]
    net: PathBuf,
    /// Write the graph in DOT format to this file.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Print the model string to standard output.
    #[arg(long)]
    model: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Learn(args) => cmd_learn(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Dsep(args) => cmd_dsep(args),
        Command::Mb(args) => cmd_mb(args),
        Command::Query(args) => cmd_query(args),
        Command::Posterior(args) => cmd_posterior(args),
        Command::Export(args) => cmd_export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

/// Failure classes carrying the exit code: bad invocations and
/// unreadable or ill-formed input files are usage errors, well-formed
/// data that cannot support the request is a data error, and anything
/// that indicates a bug is internal.
enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

/// Classifies a dataset error: problems with the observed rows are data
/// errors, everything else (schemas, headers, scripts, lookups) is a
/// usage error.
fn from_data_error(e: DataError) -> Failure {
    match e {
        DataError::MissingData { .. }
        | DataError::RowWidth { .. }
        | DataError::BadCell { .. }
        | DataError::StateSpaceTooLarge { .. }
        | DataError::UnknownLabel { row: Some(_), .. } => Failure::Data(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn from_param_error(e: ParamError) -> Failure {
    match e {
        ParamError::Data(d) => from_data_error(d),
        ParamError::BadIss(_) => Failure::Usage(e.to_string()),
        ParamError::Graph(_) => Failure::Usage(e.to_string()),
        ParamError::Inconsistent(_) => Failure::Internal(e.to_string()),
    }
}

fn from_search_error(e: SearchError) -> Failure {
    match e {
        SearchError::Score(ScoreError::Data(d)) => from_data_error(d),
        SearchError::Constraint(_) | SearchError::Config(_) => Failure::Usage(e.to_string()),
        SearchError::Score(_) | SearchError::Graph(_) => Failure::Usage(e.to_string()),
    }
}

fn from_inference_error(e: InferenceError) -> Failure {
    match e {
        InferenceError::ZeroProbabilityEvidence | InferenceError::StateSpaceTooLarge { .. } => {
            Failure::Data(e.to_string())
        }
        InferenceError::Shape(_) => Failure::Internal(e.to_string()),
        InferenceError::Param(p) => from_param_error(p),
        _ => Failure::Usage(e.to_string()),
    }
}

fn from_posterior_error(e: PosteriorError) -> Failure {
    match e {
        PosteriorError::EmptySubset => Failure::Data(e.to_string()),
        PosteriorError::Data(d) => from_data_error(d),
        PosteriorError::Shape(_) => Failure::Internal(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn from_document_error(e: DocumentError) -> Failure {
    Failure::Usage(e.to_string())
}

fn from_graph_error(e: GraphError) -> Failure {
    Failure::Usage(e.to_string())
}

/// Writes a command's full standard output in one call, so concurrent
/// stderr notes can never interleave with it. A pipe closed downstream
/// (e.g. `bnet query ... | head`) ends the program quietly instead of
/// failing.
fn emit(text: &str) -> Result<(), Failure> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(Failure::Internal(format!("writing to stdout: {e}"))),
    }
}

fn read_file(path: &PathBuf) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(data: &PathBuf, schema: &PathBuf, missing: &str) -> Result<Dataset, Failure> {
    let schemas = parse_schema_file(&read_file(schema)?).map_err(|e| {
        Failure::Usage(format!("schema file {}: {e}", schema.display()))
    })?;
    match Dataset::load_csv(data, schemas, missing) {
        Ok(ds) => Ok(ds),
        Err(e) => Err(match from_data_error(e) {
            Failure::Usage(m) => Failure::Usage(format!("data file {}: {m}", data.display())),
            Failure::Data(m) => Failure::Data(format!("data file {}: {m}", data.display())),
            other => other,
        }),
    }
}

fn load_network(path: &PathBuf) -> Result<Network, Failure> {
    let doc = NetworkDocument::load(path).map_err(|e| {
        Failure::Usage(format!("network document {}: {e}", path.display()))
    })?;
    doc.to_network().map_err(from_document_error)
}

fn code_refs(codes: &[String]) -> Vec<&str> {
    codes.iter().map(String::as_str).collect()
}

fn pair_refs(pairs: &[(String, String)]) -> Vec<(&str, &str)> {
    pairs.iter().map(|(f, t)| (f.as_str(), t.as_str())).collect()
}

/// Splits a comma-separated code list, ignoring empty items so that an
/// empty string denotes the empty set.
fn parse_codes(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Parses `VAR=LEVEL` pairs separated by commas.
fn parse_pairs(list: &str, flag: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut pairs = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (var, level) = item.split_once('=').ok_or_else(|| {
            Failure::Usage(format!("{flag}: expected VAR=LEVEL, got `{item}`"))
        })?;
        if var.is_empty() || level.is_empty() {
            return Err(Failure::Usage(format!(
                "{flag}: expected VAR=LEVEL, got `{item}`"
            )));
        }
        pairs.push((var.trim().to_string(), level.trim().to_string()));
    }
    Ok(pairs)
}

/// `x` with `digits` significant digits: plain decimal in moderate
/// ranges, scientific notation with a two-digit exponent outside them.
fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&exp) {
        let raw = format!("{:.*e}", digits.saturating_sub(1), x);
        let (mantissa, e) = raw.split_once('e').expect("{:e} always contains e");
        let e: i32 = e.parse().expect("exponent is an integer");
        return format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let dp = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{x:.dp$}")
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<(), Failure> {
    let data = load_dataset(&args.data, &args.schema, &args.missing)?;
    let ops = parse_pipeline(&read_file(&args.pipeline)?).map_err(|e| {
        Failure::Usage(format!("pipeline {}: {e}", args.pipeline.display()))
    })?;
    let rows_before = data.n_rows();
    let out = apply_pipeline(&data, &ops).map_err(from_data_error)?;

    let mut csv_bytes = Vec::new();
    out.save_csv(&mut csv_bytes, &args.missing)
        .map_err(|e| Failure::Internal(format!("serializing output rows: {e}")))?;
    let csv_text = String::from_utf8(csv_bytes)
        .map_err(|e| Failure::Internal(format!("output rows are not UTF-8: {e}")))?;
    write_file(&args.out, &csv_text)?;

    let schema_out = args
        .out_schema
        .unwrap_or_else(|| args.out.with_extension("schema"));
    write_file(&schema_out, &format_schema_file(out.schemas()))?;

    emit(&format!(
        "rows before: {rows_before}\nrows after: {}\nvariables: {}\n",
        out.n_rows(),
        out.schemas().len()
    ))
}

/// Reads an arc constraint file and expands `*` wildcards against the
/// variable codes, skipping self arcs.
fn parse_constraint_file(
    path: &PathBuf,
    codes: &[String],
) -> Result<Vec<(String, String)>, Failure> {
    let known: BTreeSet<&str> = codes.iter().map(String::as_str).collect();
    let text = read_file(path)?;
    let mut pairs = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Failure::Usage(format!(
                "{} line {}: expected `FROM TO`, got `{line}`",
                path.display(),
                idx + 1
            )));
        }
        let expand = |field: &str| -> Result<Vec<String>, Failure> {
            if field == "*" {
                Ok(codes.to_vec())
            } else if known.contains(field) {
                Ok(vec![field.to_string()])
            } else {
                Err(Failure::Usage(format!(
                    "{} line {}: unknown variable `{field}`",
                    path.display(),
                    idx + 1
                )))
            }
        };
        for from in expand(fields[0])? {
            for to in expand(fields[1])? {
                if from != to {
                    pairs.insert((from.clone(), to));
                }
            }
        }
    }
    Ok(pairs.into_iter().collect())
}

fn cmd_learn(args: LearnArgs) -> Result<(), Failure> {
    let data = load_dataset(&args.data, &args.schema, &args.missing)?;
    let incomplete = data.incomplete_variables();
    if !incomplete.is_empty() {
        let listing: Vec<String> = incomplete
            .iter()
            .map(|(v, c)| format!("`{v}` ({c} cells)"))
            .collect();
        return Err(Failure::Data(format!(
            "complete data required; missing values in {}",
            listing.join(", ")
        )));
    }

    let spec = match args.score {
        ScoreArg::Bic | ScoreArg::Aic if args.iss.is_some() => {
            return Err(Failure::Usage(
                "--iss only applies to --score bdeu".to_string(),
            ));
        }
        ScoreArg::Bic => ScoreSpec::Bic,
        ScoreArg::Aic => ScoreSpec::Aic,
        ScoreArg::Bdeu => ScoreSpec::Bdeu {
            iss: args.iss.unwrap_or(10.0),
        },
    };
    if args.fit == FitArg::Mle && args.fit_iss.is_some() {
        return Err(Failure::Usage(
            "--fit-iss only applies to --fit bayes".to_string(),
        ));
    }

    let codes: Vec<String> = data.schemas().iter().map(|s| s.code.clone()).collect();
    let blacklist = match &args.blacklist {
        Some(path) => parse_constraint_file(path, &codes)?,
        None => Vec::new(),
    };
    let whitelist = match &args.whitelist {
        Some(path) => parse_constraint_file(path, &codes)?,
        None => Vec::new(),
    };
    let constraints = ArcConstraints::new(&pair_refs(&blacklist), &pair_refs(&whitelist))
        .map_err(from_search_error)?;

    let config = SearchConfig {
        eps: args.eps.unwrap_or(SearchConfig::default().eps),
        max_iter: args.max_iter.unwrap_or(SearchConfig::default().max_iter),
    };
    let report = hill_climb(&data, spec, &constraints, &config).map_err(from_search_error)?;
    let report_text = report.text();
    emit(&report_text)?;
    if let Some(path) = &args.report {
        write_file(path, &report_text)?;
    }

    let (net, fit_name, fit_iss) = match args.fit {
        FitArg::Mle => {
            let (net, uniform_rows) = fit_mle(&data, &report.dag).map_err(from_param_error)?;
            let mut per_node: BTreeMap<&str, usize> = BTreeMap::new();
            for (node, _) in &uniform_rows {
                *per_node.entry(node.as_str()).or_default() += 1;
            }
            for (node, count) in per_node {
                eprintln!(
                    "note: {count} parent configurations of `{node}` never occur; \
                     their rows were fitted uniformly"
                );
            }
            (net, "mle", None)
        }
        FitArg::Bayes => {
            let iss = args.fit_iss.unwrap_or(1.0);
            let net = fit_bayes(&data, &report.dag, iss).map_err(from_param_error)?;
            (net, "bayes", Some(iss))
        }
    };

    let provenance = Provenance {
        score: match args.score {
            ScoreArg::Bic => "bic".to_string(),
            ScoreArg::Aic => "aic".to_string(),
            ScoreArg::Bdeu => "bdeu".to_string(),
        },
        iss: match spec {
            ScoreSpec::Bdeu { iss } => Some(iss),
            _ => None,
        },
        n: data.n_rows() as u64,
        constraints_digest: constraints_digest(&constraints),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        fit: fit_name.to_string(),
        fit_iss,
    };
    let doc = NetworkDocument::from_network(&net, provenance);
    if let Some(path) = &args.out {
        doc.save(path).map_err(|e| {
            Failure::Usage(format!("cannot write {}: {e}", path.display()))
        })?;
    }
    if let Some(path) = &args.dot {
        write_file(path, &net.dag().to_dot())?;
    }
    Ok(())
}

/// Splits a model string into lines of at most 77 columns, breaking
/// only between blocks.
fn wrap_model(model: &str) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = String::new();
    for block in model.split(' ') {
        if !current.is_empty() && current.len() + 1 + block.len() > 77 {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(block);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

fn cmd_summarize(args: SummarizeArgs) -> Result<(), Failure> {
    let doc = NetworkDocument::load(&args.net).map_err(|e| {
        Failure::Usage(format!("network document {}: {e}", args.net.display()))
    })?;
    let net = doc.to_network().map_err(from_document_error)?;
    let summary = net.dag().summary();

    let mut out = String::from("Bayesian network\n\n");
    out.push_str("  model:\n");
    for line in wrap_model(&net.dag().to_model_string()) {
        out.push_str("   ");
        out.push_str(&line);
        out.push('\n');
    }
    let mut field = |label: &str, value: String| {
        out.push_str(&format!("  {label:<40}{value}\n"));
    };
    field("nodes:", summary.nodes.to_string());
    field("arcs:", summary.arcs.to_string());
    let mut sub = |label: &str, value: String| {
        out.push_str(&format!("    {label:<38}{value}\n"));
    };
    sub("undirected arcs:", "0".to_string());
    sub("directed arcs:", summary.arcs.to_string());
    let mut field = |label: &str, value: String| {
        out.push_str(&format!("  {label:<40}{value}\n"));
    };
    field(
        "average markov blanket size:",
        format!("{:.2}", summary.avg_markov_blanket),
    );
    field(
        "average neighbourhood size:",
        format!("{:.2}", summary.avg_neighbourhood),
    );
    field(
        "average branching factor:",
        format!("{:.2}", summary.avg_branching),
    );
    out.push('\n');
    let p = &doc.provenance;
    let mut field = |label: &str, value: String| {
        out.push_str(&format!("  {label:<40}{value}\n"));
    };
    field("score:", p.score.clone());
    if let Some(iss) = p.iss {
        field("imaginary sample size:", sig(iss, 6));
    }
    field("training rows:", p.n.to_string());
    field("parameter fit:", p.fit.clone());
    if let Some(iss) = p.fit_iss {
        field("fit imaginary sample size:", sig(iss, 6));
    }
    if !p.constraints_digest.is_empty() {
        field("constraints digest:", p.constraints_digest.clone());
    }
    field("tool version:", p.tool_version.clone());
    emit(&out)
}

fn cmd_dsep(args: DsepArgs) -> Result<(), Failure> {
    let net = load_network(&args.net)?;
    let x = parse_codes(&args.x);
    let y = parse_codes(&args.y);
    let z = parse_codes(&args.z);
    if x.is_empty() {
        return Err(Failure::Usage("--x lists no variables".to_string()));
    }
    if y.is_empty() {
        return Err(Failure::Usage("--y lists no variables".to_string()));
    }
    for (a, b, first, second) in [
        (&x, &y, "--x", "--y"),
        (&x, &z, "--x", "--z"),
        (&y, &z, "--y", "--z"),
    ] {
        let set: BTreeSet<&String> = a.iter().collect();
        if let Some(shared) = b.iter().find(|code| set.contains(code)) {
            return Err(Failure::Usage(format!(
                "`{shared}` appears in both {first} and {second}"
            )));
        }
    }
    let separated = net
        .dag()
        .d_separated(&code_refs(&x), &code_refs(&y), &code_refs(&z))
        .map_err(from_graph_error)?;
    emit(if separated { "TRUE\n" } else { "FALSE\n" })
}

fn cmd_mb(args: MbArgs) -> Result<(), Failure> {
    let net = load_network(&args.net)?;
    let blanket = net
        .dag()
        .markov_blanket(&args.node)
        .map_err(from_graph_error)?;
    let codes: Vec<&str> = blanket.iter().map(String::as_str).collect();
    emit(&format!("{}\n", codes.join(" ")))
}

/// Lays out the queried distribution: a flat assignment list in scope
/// order, except for two targets where a two-way matrix (first target
/// on rows) reads better.
fn render_factor(factor: &Factor, net: &Network) -> Result<String, Failure> {
    let levels_of = |var: &str| -> Result<&[String], Failure> {
        net.schema(var)
            .map(|s| s.levels.as_slice())
            .map_err(from_param_error)
    };
    let scope = factor.scope();
    let cards = factor.cards();
    let values = factor.values();
    let mut out = String::new();

    if scope.len() == 2 {
        let rows = levels_of(&scope[0])?;
        let cols = levels_of(&scope[1])?;
        let row_labels: Vec<String> = rows.iter().map(|l| format!("{}={l}", scope[0])).collect();
        let col_labels: Vec<String> = cols.iter().map(|l| format!("{}={l}", scope[1])).collect();
        let cells: Vec<Vec<String>> = (0..rows.len())
            .map(|r| {
                (0..cols.len())
                    .map(|c| sig(values[r * cols.len() + c], 7))
                    .collect()
            })
            .collect();
        let label_width = row_labels.iter().map(String::len).max().unwrap_or(0);
        let col_widths: Vec<usize> = (0..cols.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|row| row[c].len())
                    .chain([col_labels[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        out.push_str(&" ".repeat(label_width));
        for (c, label) in col_labels.iter().enumerate() {
            out.push_str(&format!("  {label:>width$}", width = col_widths[c]));
        }
        out.push('\n');
        for (r, row) in cells.iter().enumerate() {
            out.push_str(&format!("{:<label_width$}", row_labels[r]));
            for (c, cell) in row.iter().enumerate() {
                out.push_str(&format!("  {cell:>width$}", width = col_widths[c]));
            }
            out.push('\n');
        }
        return Ok(out);
    }

    // Mixed-radix decode, first scope variable most significant.
    let level_sets: Vec<&[String]> = scope
        .iter()
        .map(|v| levels_of(v))
        .collect::<Result<_, _>>()?;
    let mut assignments = Vec::with_capacity(values.len());
    for mut idx in 0..values.len() {
        let mut parts = vec![String::new(); scope.len()];
        for pos in (0..scope.len()).rev() {
            parts[pos] = format!("{}={}", scope[pos], level_sets[pos][idx % cards[pos]]);
            idx /= cards[pos];
        }
        assignments.push(parts.join(" "));
    }
    let width = assignments.iter().map(String::len).max().unwrap_or(0);
    for (assignment, value) in assignments.iter().zip(values) {
        out.push_str(&format!("{assignment:<width$}  {}\n", sig(*value, 7)));
    }
    Ok(out)
}

fn factor_json(
    factor: &Factor,
    net: &Network,
    targets: &[String],
    given: &[(String, String)],
) -> Result<serde_json::Value, Failure> {
    let scope = factor.scope();
    let cards = factor.cards();
    let values = factor.values();
    let level_sets: Vec<&[String]> = scope
        .iter()
        .map(|v| {
            net.schema(v)
                .map(|s| s.levels.as_slice())
                .map_err(from_param_error)
        })
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::with_capacity(values.len());
    for (i, value) in values.iter().enumerate() {
        let mut idx = i;
        let mut assignment = serde_json::Map::new();
        for pos in (0..scope.len()).rev() {
            assignment.insert(
                scope[pos].clone(),
                serde_json::Value::String(level_sets[pos][idx % cards[pos]].clone()),
            );
            idx /= cards[pos];
        }
        cells.push(serde_json::json!({ "levels": assignment, "p": value }));
    }
    let given_map: serde_json::Map<String, serde_json::Value> = given
        .iter()
        .map(|(v, l)| (v.clone(), serde_json::Value::String(l.clone())))
        .collect();
    Ok(serde_json::json!({
        "targets": targets,
        "given": given_map,
        "cells": cells,
    }))
}

fn cmd_query(args: QueryArgs) -> Result<(), Failure> {
    let net = load_network(&args.net)?;
    let targets = parse_codes(&args.targets);
    if targets.is_empty() {
        return Err(Failure::Usage("--targets lists no variables".to_string()));
    }
    let given = match &args.given {
        Some(list) => parse_pairs(list, "--given")?,
        None => Vec::new(),
    };
    let evidence = Evidence::from_labels(&net, &pair_refs(&given)).map_err(from_inference_error)?;
    let target_refs = code_refs(&targets);
    let factor =
        bnet::inference::query(&net, &target_refs, &evidence).map_err(from_inference_error)?;

    if args.json {
        let value = factor_json(&factor, &net, &targets, &given)?;
        let text = serde_json::to_string_pretty(&value)
            .map_err(|e| Failure::Internal(format!("serializing the result: {e}")))?;
        emit(&format!("{text}\n"))?;
        return Ok(());
    }

    let title = if given.is_empty() {
        format!("P({})", targets.join(", "))
    } else {
        let clauses: Vec<String> = given.iter().map(|(v, l)| format!("{v} = {l}")).collect();
        format!("P({} | {})", targets.join(", "), clauses.join(", "))
    };
    emit(&format!("{title}\n\n{}", render_factor(&factor, &net)?))
}

fn cmd_posterior(args: PosteriorArgs) -> Result<(), Failure> {
    let data = load_dataset(&args.data, &args.schema, &args.missing)?;
    let vars = parse_codes(&args.vars);
    if vars.len() != 2 {
        return Err(Failure::Usage(format!(
            "--vars needs exactly two variables, got {}",
            vars.len()
        )));
    }
    let (a, b) = (vars[0].as_str(), vars[1].as_str());

    let filter_pairs = match &args.filter {
        Some(list) => parse_pairs(list, "--filter")?,
        None => Vec::new(),
    };
    let filter =
        evidence_from_labels(&data, &pair_refs(&filter_pairs)).map_err(from_posterior_error)?;

    let card = |var: &str| -> Result<usize, Failure> {
        data.schema(var)
            .map(|s| s.cardinality())
            .map_err(|e| Failure::Usage(e.to_string()))
    };
    let alpha = match args.alpha {
        Some(alpha) => alpha,
        None => match args.alpha_mode {
            AlphaModeArg::IssCells => args.iss / (card(a)? * card(b)?) as f64,
            AlphaModeArg::Footnote12 => {
                let path = args.net.as_ref().ok_or_else(|| {
                    Failure::Usage("--alpha-mode footnote12 requires --net".to_string())
                })?;
                let net = load_network(path)?;
                let parents = net.dag().parents(b).map_err(from_graph_error)?.clone();
                let mut denom = net
                    .schema(a)
                    .map_err(from_param_error)?
                    .cardinality() as f64;
                for parent in &parents {
                    denom *= net.schema(parent).map_err(from_param_error)?.cardinality() as f64;
                }
                args.iss / denom
            }
        },
    };

    let posterior =
        posterior_from_query(&data, &filter, a, b, alpha).map_err(from_posterior_error)?;
    let cfg = McConfig {
        chains: args.chains,
        samples_per_chain: args.samples,
        seed: args.seed,
        hpd_prob: args.hpd,
    };
    let draws = posterior.sample(&cfg).map_err(from_posterior_error)?;
    let summary = draws.summarize(&cfg).map_err(from_posterior_error)?;

    let mut out = String::new();
    for (k, (cell, count)) in posterior.cells().iter().zip(posterior.counts()).enumerate() {
        out.push_str(&format!("pi.{} = {cell}, n = {count}\n", k + 1));
    }
    out.push_str(&format!(
        "rows in subset: {}\n",
        posterior.counts().iter().sum::<u64>()
    ));
    out.push_str(&format!("prior weight per cell: {}\n\n", sig(alpha, 6)));
    out.push_str(&summary.text());
    emit(&out)
}

fn cmd_export(args: ExportArgs) -> Result<(), Failure> {
    let net = load_network(&args.net)?;
    if args.dot.is_none() && !args.model {
        return Err(Failure::Usage(
            "nothing to export: pass --dot and/or --model".to_string(),
        ));
    }
    if let Some(path) = &args.dot {
        write_file(path, &net.dag().to_dot())?;
    }
    if args.model {
        emit(&format!("{}\n", net.dag().to_model_string()))?;
    }
    Ok(())
}
