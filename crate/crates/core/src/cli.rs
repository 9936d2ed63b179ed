//! The `crts` command line.
//!
//! Exit codes: 0 success, 1 invalid document or no applicable recommendation,
//! 2 usage error or bad query, 3 I/O or parse failure.

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::eval::{match_recommendation, MatchConfig, MatchResult, TruthValue};
use crate::index::{build_index, parse_query, read_index, write_index, IndexError, RecommendationIndex};
use crate::model::{build_expr_graph, normalize_to_dnf, validate, ExprTree, Issue, Recommendation, ValidationReport};
use crate::serial::{parse_document, parse_patient_json, write_document, Format, ParseMode, ParseWarning, SerialError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "crts", version, about = "Validate, convert, match and index clinical recommendation documents")]
pub struct Cli {
    /// Reject unknown elements and attributes (default)
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,
    /// Skip unknown elements and attributes with a warning
    #[arg(long, global = true)]
    lenient: bool,
    /// Output style
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Xml,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check documents against the schema and the document invariants
    Validate {
        /// Files, or directories of .xml/.json files
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Re-emit a document in canonical XML or JSON
    Convert {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Xml)]
        to: Target,
    },
    /// Decide which recommendations apply to a patient
    Match {
        #[arg(required = true)]
        recs: Vec<PathBuf>,
        /// Patient record JSON
        #[arg(long)]
        patient: PathBuf,
        /// Treat conditions and interventions missing from the record as absent
        #[arg(long)]
        closed_world: bool,
        /// Print the value of every population criterion
        #[arg(long)]
        trace: bool,
    },
    /// List the documents of a corpus matching a facet query
    Query {
        corpus_dir: PathBuf,
        query: String,
        /// Index file to load, or to create when missing
        #[arg(long)]
        index: Option<PathBuf>,
    },
    /// Print the disjunctive normal form of a document's population logic
    Dnf { file: PathBuf },
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    mode: ParseMode,
    json: bool,
    color: bool,
}

/// A failure that ends a command with a specific exit code.
struct Fail {
    code: i32,
    message: String,
}

impl Fail {
    fn io(path: &Path, e: std::io::Error) -> Self {
        Fail { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }

    fn parse(path: &Path, e: &SerialError) -> Self {
        Fail { code: EXIT_IO, message: format!("{}: {} {e}", path.display(), e.code()) }
    }
}

/// Runs the CLI on the process arguments and standard streams.
pub fn run() -> i32 {
    let color = std::io::stdout().is_terminal() && std::env::var("CRTS_COLOR").map_or(true, |v| v != "0");
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock(), color)
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, color: bool) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mode = if cli.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let mut ctx = Ctx { out, err, mode, json: cli.format == OutputFormat::Json, color };
    let result = match cli.command {
        Command::Validate { paths } => cmd_validate(&mut ctx, &paths),
        Command::Convert { input, to } => cmd_convert(&mut ctx, &input, to),
        Command::Match { recs, patient, closed_world, trace } => {
            cmd_match(&mut ctx, &recs, &patient, closed_world, trace)
        }
        Command::Query { corpus_dir, query, index } => cmd_query(&mut ctx, &corpus_dir, &query, index.as_deref()),
        Command::Dnf { file } => cmd_dnf(&mut ctx, &file),
    };
    let code = match result {
        Ok(code) => code,
        Err(fail) => {
            let _ = writeln!(ctx.err, "crts: {}", fail.message);
            fail.code
        }
    };
    let _ = ctx.out.flush();
    code
}

/// Expands directories into their `.xml` and `.json` files; the result is sorted.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Fail> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(corpus_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, Fail> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Fail::io(dir, e))? {
        let path = entry.map_err(|e| Fail::io(dir, e))?.path();
        let wanted = path.extension().is_some_and(|x| x == "xml" || x == "json");
        if wanted && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read(path: &Path) -> Result<Vec<u8>, Fail> {
    std::fs::read(path).map_err(|e| Fail::io(path, e))
}

fn load(ctx: &mut Ctx, path: &Path) -> Result<Recommendation, Fail> {
    let bytes = read(path)?;
    let parsed = parse_document(&bytes, ctx.mode).map_err(|e| Fail::parse(path, &e))?;
    for w in &parsed.warnings {
        let _ = writeln!(ctx.err, "crts: {}: warning {}: {}", path.display(), w.path, w.message);
    }
    Ok(parsed.recommendation)
}

fn paint(color: bool, code: &str, text: &str) -> String {
    if color {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_owned()
    }
}

fn issue_json(i: &Issue) -> Value {
    json!({ "code": i.code.as_str(), "path": i.path, "message": i.message })
}

fn warning_json(w: &ParseWarning) -> Value {
    json!({ "code": "UNKNOWN_CONTENT", "path": w.path, "message": w.message })
}

fn print_json(ctx: &mut Ctx, v: &Value) -> Result<(), Fail> {
    let text = serde_json::to_string_pretty(v).expect("values always serialize");
    writeln!(ctx.out, "{text}").map_err(|e| Fail::io(Path::new("<stdout>"), e))
}

fn emit(ctx: &mut Ctx, line: std::fmt::Arguments) -> Result<(), Fail> {
    writeln!(ctx.out, "{line}").map_err(|e| Fail::io(Path::new("<stdout>"), e))
}

fn cmd_validate(ctx: &mut Ctx, paths: &[PathBuf]) -> Result<i32, Fail> {
    let files = expand(paths)?;
    let mut code = EXIT_OK;
    let mut reports = Vec::new();
    for path in &files {
        let shown = path.display().to_string();
        let parsed = match std::fs::read(path) {
            Ok(bytes) => parse_document(&bytes, ctx.mode),
            Err(e) => {
                code = EXIT_IO;
                if ctx.json {
                    reports.push(json!({ "path": shown, "status": "error", "error": { "code": "IO", "message": e.to_string() } }));
                } else {
                    emit(ctx, format_args!("{shown}: {} IO {e}", paint(ctx.color, "31", "error")))?;
                }
                continue;
            }
        };
        let parsed = match parsed {
            Ok(p) => p,
            Err(e) => {
                code = EXIT_IO;
                if ctx.json {
                    reports.push(json!({ "path": shown, "status": "error", "error": { "code": e.code(), "message": e.to_string() } }));
                } else {
                    emit(ctx, format_args!("{shown}: {} {} {e}", paint(ctx.color, "31", "error"), e.code()))?;
                }
                continue;
            }
        };
        let report = validate(&parsed.recommendation);
        if !report.is_valid() && code == EXIT_OK {
            code = EXIT_NEGATIVE;
        }
        if ctx.json {
            let mut warnings: Vec<Value> = parsed.warnings.iter().map(warning_json).collect();
            warnings.extend(report.warnings.iter().map(issue_json));
            reports.push(json!({
                "path": shown,
                "status": if report.is_valid() { "valid" } else { "invalid" },
                "errors": report.errors.iter().map(issue_json).collect::<Vec<_>>(),
                "warnings": warnings,
            }));
        } else {
            print_report(ctx, &shown, &report, &parsed.warnings)?;
        }
    }
    if ctx.json {
        print_json(ctx, &Value::Array(reports))?;
    }
    Ok(code)
}

fn print_report(ctx: &mut Ctx, shown: &str, report: &ValidationReport, warnings: &[ParseWarning]) -> Result<(), Fail> {
    let status = if report.is_valid() { paint(ctx.color, "32", "valid") } else { paint(ctx.color, "31", "invalid") };
    emit(ctx, format_args!("{shown}: {status}"))?;
    for i in &report.errors {
        emit(ctx, format_args!("  error {} {}: {}", i.code.as_str(), i.path, i.message))?;
    }
    for w in warnings {
        emit(ctx, format_args!("  warning UNKNOWN_CONTENT {}: {}", w.path, w.message))?;
    }
    for i in &report.warnings {
        emit(ctx, format_args!("  warning {} {}: {}", i.code.as_str(), i.path, i.message))?;
    }
    Ok(())
}

fn cmd_convert(ctx: &mut Ctx, input: &Path, to: Target) -> Result<i32, Fail> {
    let rec = load(ctx, input)?;
    let format = match to {
        Target::Xml => Format::Xml,
        Target::Json => Format::Json,
    };
    match write_document(&rec, format) {
        Ok(text) => {
            ctx.out.write_all(text.as_bytes()).map_err(|e| Fail::io(Path::new("<stdout>"), e))?;
            Ok(EXIT_OK)
        }
        Err(SerialError::InvalidDocument(report)) => {
            let shown = input.display().to_string();
            print_report(ctx, &shown, &report, &[])?;
            Ok(EXIT_NEGATIVE)
        }
        Err(e) => Err(Fail::parse(input, &e)),
    }
}

fn verdict_color(v: TruthValue) -> &'static str {
    match v {
        TruthValue::True => "32",
        TruthValue::False => "31",
        TruthValue::Unknown => "33",
    }
}

fn match_json(shown: &str, r: &MatchResult, trace: bool) -> Value {
    let mut v = json!({
        "path": shown,
        "verdict": r.verdict.verdict(),
        "value": r.verdict,
        "suggestion": r.suggestion_summary,
    });
    if trace {
        v["trace"] = serde_json::to_value(&r.trace).expect("trace always serializes");
    }
    v
}

fn print_match(ctx: &mut Ctx, shown: &str, r: &MatchResult, trace: bool) -> Result<(), Fail> {
    let verdict = paint(ctx.color, verdict_color(r.verdict), r.verdict.verdict());
    emit(ctx, format_args!("{shown}: {verdict}"))?;
    if trace {
        for t in &r.trace {
            emit(ctx, format_args!("  {} {}: {}", t.block_id, t.value, t.reason))?;
        }
    }
    if let Some(s) = &r.suggestion_summary {
        emit(ctx, format_args!("  suggestion {}", s.expression))?;
        for i in &s.interventions {
            let mut line = format!("    {} {}", i.id, i.name);
            if let Some(c) = &i.concept {
                line.push_str(&format!(" [{c}]"));
            }
            if let Some(m) = &i.modifier {
                line.push_str(&format!(" \"{m}\""));
            }
            if let Some(g) = &i.grade {
                line.push_str(&format!(" grade {g}"));
            }
            emit(ctx, format_args!("{line}"))?;
        }
    }
    Ok(())
}

fn cmd_match(ctx: &mut Ctx, recs: &[PathBuf], patient: &Path, closed_world: bool, trace: bool) -> Result<i32, Fail> {
    let bytes = read(patient)?;
    let record = parse_patient_json(&bytes).map_err(|e| Fail::parse(patient, &e))?;
    let cfg = MatchConfig { closed_world_override: closed_world.then_some(true), ..MatchConfig::default() };
    let files = expand(recs)?;
    let mut docs = Vec::with_capacity(files.len());
    for path in &files {
        docs.push(load(ctx, path)?);
    }

    let mut applies = false;
    let mut results = Vec::new();
    for (path, rec) in files.iter().zip(&docs) {
        let shown = path.display().to_string();
        match match_recommendation(rec, &record, &cfg) {
            Ok(r) => {
                applies |= r.verdict == TruthValue::True;
                if ctx.json {
                    results.push(match_json(&shown, &r, trace));
                } else {
                    print_match(ctx, &shown, &r, trace)?;
                }
            }
            Err(e) => {
                if ctx.json {
                    results.push(json!({ "path": shown, "error": { "code": e.code(), "message": e.to_string() } }));
                } else {
                    emit(ctx, format_args!("{shown}: {} {e}", e.code()))?;
                }
            }
        }
    }
    if ctx.json {
        print_json(ctx, &Value::Array(results))?;
    }
    Ok(if applies { EXIT_OK } else { EXIT_NEGATIVE })
}

fn index_fail(e: IndexError) -> Fail {
    let code = match e {
        IndexError::QuerySyntax(_) | IndexError::UnknownFacet { .. } => EXIT_USAGE,
        IndexError::Format(_) => EXIT_IO,
        IndexError::DuplicateDocId(_) | IndexError::InvalidDocument { .. } => EXIT_NEGATIVE,
    };
    Fail { code, message: format!("{} {e}", e.code()) }
}

fn cmd_query(ctx: &mut Ctx, corpus_dir: &Path, text: &str, index_path: Option<&Path>) -> Result<i32, Fail> {
    let query = parse_query(text).map_err(index_fail)?;
    let index = match index_path {
        Some(p) if p.exists() => {
            let raw = std::fs::read_to_string(p).map_err(|e| Fail::io(p, e))?;
            read_index(&raw).map_err(|e| Fail { code: EXIT_IO, message: format!("{}: {} {e}", p.display(), e.code()) })?
        }
        _ => {
            let index = load_corpus(ctx, corpus_dir)?;
            if let Some(p) = index_path {
                std::fs::write(p, write_index(&index)).map_err(|e| Fail::io(p, e))?;
            }
            index
        }
    };
    let hits = index.query(&query).map_err(index_fail)?;
    if ctx.json {
        print_json(ctx, &json!({ "query": text, "results": hits }))?;
    } else {
        for id in &hits {
            emit(ctx, format_args!("{id}"))?;
        }
    }
    Ok(EXIT_OK)
}

fn load_corpus(ctx: &mut Ctx, dir: &Path) -> Result<RecommendationIndex, Fail> {
    if !dir.is_dir() {
        return Err(Fail { code: EXIT_IO, message: format!("{}: not a directory", dir.display()) });
    }
    let mut docs = Vec::new();
    for path in corpus_files(dir)? {
        docs.push(load(ctx, &path)?);
    }
    build_index(docs).map_err(index_fail)
}

/// Conjuncts of a DNF tree, each a list of leaf ids.
fn disjuncts(tree: Option<&ExprTree>) -> Vec<Vec<String>> {
    fn conjunct(t: &ExprTree) -> Vec<String> {
        match t {
            ExprTree::Leaf(id) => vec![id.to_string()],
            ExprTree::Op(_, children) => children.iter().flat_map(conjunct).collect(),
        }
    }
    match tree {
        None => vec![Vec::new()],
        Some(ExprTree::Op(crate::model::ExprType::Or, children)) => children.iter().map(conjunct).collect(),
        Some(t) => vec![conjunct(t)],
    }
}

fn cmd_dnf(ctx: &mut Ctx, file: &Path) -> Result<i32, Fail> {
    let rec = load(ctx, file)?;
    let report = validate(&rec);
    let shown = file.display().to_string();
    if !report.is_valid() {
        print_report(ctx, &shown, &report, &[])?;
        return Ok(EXIT_NEGATIVE);
    }
    let graph = build_expr_graph(&rec.population).and_then(|g| normalize_to_dnf(&g));
    let dnf = match graph {
        Ok(g) => g,
        Err(e) => {
            let _ = writeln!(ctx.err, "crts: {shown}: {} {e}", e.code());
            return Ok(EXIT_NEGATIVE);
        }
    };
    let tree = dnf.to_tree();
    if ctx.json {
        print_json(ctx, &json!({ "path": shown, "dnf": dnf.to_string(), "disjuncts": disjuncts(tree.as_ref()) }))?;
    } else {
        emit(ctx, format_args!("{dnf}"))?;
    }
    Ok(EXIT_OK)
}
