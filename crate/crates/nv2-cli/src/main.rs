//! `nv2`: command-line driver for exact computations in the
//! higher-dimensional Thompson group 2V.
//!
//! Subcommands cover canonical forms (`nf`), group operations (`mul`, `inv`,
//! `eval`), word-length certification (`len`, `ball`), generator-table
//! inspection (`gen`), and the divergence experiments (`divpath`,
//! `divmeasure`).
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a budget error.
//! Every failure prints a single `error[CODE]: message` line on stderr.
//! All output is deterministic for a fixed configuration.

use clap::{Parser, Subcommand};
use nv2::cantor::DyadicRect;
use nv2::divergence::{self, DivergenceError, DivergenceParams};
use nv2::element::{Element, ElementError};
use nv2::genset::{self, GeneratorTable, GensetError, GroupWord, Provenance};
use nv2::gridform;
use nv2::metric::{self, BallTable, MetricError};
use serde_json::json;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

// ---------------------------------------------------------------------------
// Failure plumbing: stable codes, exit statuses.
// ---------------------------------------------------------------------------

/// A terminal failure with a stable machine-parsable code.
struct Failure {
    code: &'static str,
    message: String,
    exit: u8,
}

impl Failure {
    fn domain(code: &'static str, message: impl Into<String>) -> Self {
        Failure { code, message: message.into(), exit: 1 }
    }

    fn budget(message: impl Into<String>) -> Self {
        Failure { code: "E_BUDGET", message: message.into(), exit: 2 }
    }
}

impl From<GensetError> for Failure {
    fn from(e: GensetError) -> Self {
        let code = match &e {
            GensetError::UnknownSymbol(_) | GensetError::IndexOutOfRange(_) => "E_SYMBOL",
            GensetError::ParseError(_) => "E_PARSE",
            _ => "E_TABLE",
        };
        Failure::domain(code, e.to_string())
    }
}

impl From<ElementError> for Failure {
    fn from(e: ElementError) -> Self {
        let code = match &e {
            ElementError::PrefixTooShort => "E_DOMAIN",
            _ => "E_PARSE",
        };
        Failure::domain(code, e.to_string())
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match &e {
            MetricError::ResourceBudgetExceeded(_) => Failure::budget(e.to_string()),
            MetricError::NotWithinRadius(_) => Failure::domain("E_RADIUS", e.to_string()),
        }
    }
}

impl From<DivergenceError> for Failure {
    fn from(e: DivergenceError) -> Self {
        match e {
            DivergenceError::ResourceBudgetExceeded(_) => Failure::budget(e.to_string()),
            DivergenceError::BadParams(_) => Failure::domain("E_PARSE", e.to_string()),
            DivergenceError::IncompleteTable(_) => Failure::domain("E_TABLE", e.to_string()),
            DivergenceError::NotWithinRadius => Failure::domain("E_RADIUS", e.to_string()),
            DivergenceError::Genset(g) => g.into(),
            other => Failure::domain("E_DOMAIN", other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::domain("E_IO", e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Command line.
// ---------------------------------------------------------------------------

const FORMATS: [&str; 3] = ["text", "csv", "json-lines"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Csv,
    JsonLines,
}

impl Format {
    fn parse(s: &str) -> Result<Self, Failure> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json-lines" => Ok(Format::JsonLines),
            other => Err(Failure::domain(
                "E_PARSE",
                format!("unknown format {other:?}; expected one of {FORMATS:?}"),
            )),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "nv2",
    version,
    about = "Exact computations in the higher-dimensional Thompson group 2V",
    max_term_width = 100
)]
struct Cli {
    /// Generator definition file (overrides the NV_GENERATORS variable).
    #[arg(long, global = true, value_name = "FILE")]
    generators: Option<PathBuf>,

    /// Output format: text, csv, or json-lines.
    #[arg(long, global = true, default_value = "text", value_name = "FMT")]
    format: String,

    /// Seed for randomized suites. Reserved; every current subcommand is
    /// fully deterministic, so the seed never changes the output bytes.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the reduced-grid-diagram normal form of an element.
    Nf {
        /// Word over the generator symbols, e.g. "x0 B1^-2 pi_0".
        #[arg(long, conflicts_with = "element")]
        word: Option<String>,
        /// Element: path to a pair-list file, or an inline word.
        #[arg(long)]
        element: Option<String>,
    },
    /// Multiply two elements (the left factor acts first) and print the
    /// normal form of the product.
    Mul {
        /// Left factor: pair-list file or inline word.
        #[arg(long)]
        left: String,
        /// Right factor: pair-list file or inline word.
        #[arg(long)]
        right: String,
    },
    /// Invert an element and print the normal form of the inverse.
    Inv {
        /// Element: pair-list file or inline word.
        #[arg(long)]
        element: String,
    },
    /// Apply an element to a dyadic point prefix.
    Eval {
        /// Element: pair-list file or inline word.
        #[arg(long)]
        element: String,
        /// Point prefix "u1,u2" (binary words; "-" for empty).
        #[arg(long)]
        point: String,
    },
    /// Certify the word length of an element by breadth-first search.
    Len {
        /// Word over the generator symbols.
        #[arg(long, conflicts_with = "element")]
        word: Option<String>,
        /// Element: pair-list file or inline word.
        #[arg(long)]
        element: Option<String>,
        /// Search radius.
        #[arg(long, default_value_t = 3)]
        radius: u32,
        /// Node budget for the search.
        #[arg(long, value_name = "N")]
        node_cap: Option<usize>,
    },
    /// Enumerate the exact metric ball around the identity as CSV.
    Ball {
        #[arg(long)]
        radius: u32,
        /// Node budget for the search.
        #[arg(long, value_name = "N")]
        node_cap: Option<usize>,
        /// Write records to a file instead of stdout.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Inspect the generator table.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Build and check a linear-divergence path certificate.
    Divpath {
        /// Starting element: pair-list file or inline word. A word doubles
        /// as the length witness; a file needs --ball-radius.
        #[arg(long)]
        element: String,
        /// Pulse multiplier (at least 100).
        #[arg(long = "M", default_value_t = 100)]
        m: u64,
        /// Avoidance scale (at least 48 M).
        #[arg(long = "Q", default_value_t = 4800)]
        q: u64,
        /// Cap staircase exponents for replay at reduced depth.
        #[arg(long, value_name = "K")]
        cap_exponents: Option<u64>,
        /// Radius for exact length certification (omit to use the witness
        /// word length as a certified upper bound).
        #[arg(long, value_name = "R")]
        ball_radius: Option<u32>,
        /// Node budget for the certification search.
        #[arg(long, value_name = "N")]
        node_cap: Option<usize>,
    },
    /// Measure the empirical divergence value at sphere radius x.
    Divmeasure {
        /// Sphere radius (positive).
        #[arg(long)]
        x: u32,
        /// Avoidance fraction; only "1/64" is supported.
        #[arg(long, default_value = "1/64")]
        delta: String,
        /// Working radius for the complement search (default x + 1).
        #[arg(long, value_name = "R")]
        radius: Option<u32>,
        /// Node budget for the search.
        #[arg(long, value_name = "N")]
        node_cap: Option<usize>,
    },
}

#[derive(Subcommand)]
enum GenCmd {
    /// List the loaded generator symbols.
    List,
    /// Print one generator; family members like B3 or C2 resolve
    /// dynamically.
    Show { symbol: String },
    /// Check the table for completeness and report warnings.
    Validate,
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

fn load_table(cli: &Cli) -> Result<GeneratorTable, Failure> {
    match &cli.generators {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Ok(genset::load_generators(&text)?)
        }
        None => Ok(genset::load_default()?),
    }
}

/// Resolve an element argument: an existing file parses as a pair list,
/// anything else parses as a word (whose letters double as a witness).
fn element_from(
    input: &str,
    table: &GeneratorTable,
) -> Result<(Element, Option<GroupWord>), Failure> {
    let p = Path::new(input);
    if p.is_file() {
        let text = fs::read_to_string(p)?;
        return Ok((Element::parse(&text)?, None));
    }
    let w = GroupWord::parse(input)?;
    let g = genset::word_to_element(&w, table)?;
    Ok((g, Some(w)))
}

fn word_element(word: &str, table: &GeneratorTable) -> Result<(Element, GroupWord), Failure> {
    let w = GroupWord::parse(word)?;
    let g = genset::word_to_element(&w, table)?;
    Ok((g, w))
}

fn csv_quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// Print an element in the chosen format. Text is the pair-list
/// serialization; csv emits one domain/range row per rectangle pair;
/// json-lines emits one object per pair.
fn print_element(g: &Element, format: Format) {
    match format {
        Format::Text => print!("{}", g.to_text()),
        Format::Csv => {
            println!("dom1,dom2,ran1,ran2");
            for (d, r) in g.pairs() {
                println!("{d},{r}");
            }
        }
        Format::JsonLines => {
            for (d, r) in g.pairs() {
                println!("{}", json!({ "dom": d.to_string(), "ran": r.to_string() }));
            }
        }
    }
}

fn print_canonical(g: &Element, format: Format) {
    let canon = gridform::normal_form(g).to_element();
    print_element(&canon, format);
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Textual => "textual",
        Provenance::Figure => "figure",
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

fn cmd_len(
    table: &GeneratorTable,
    format: Format,
    word: Option<&str>,
    element: Option<&str>,
    radius: u32,
    node_cap: Option<usize>,
) -> Result<(), Failure> {
    let (g, w) = match (word, element) {
        (Some(s), None) => {
            let (g, w) = word_element(s, table)?;
            (g, Some(w))
        }
        (None, Some(s)) => element_from(s, table)?,
        _ => {
            return Err(Failure::domain("E_USAGE", "len needs exactly one of --word or --element"))
        }
    };
    let cap = node_cap.unwrap_or(metric::DEFAULT_NODE_CAP);
    let ball = metric::ball_with_cap(radius, table, cap)?;
    let cert = metric::certify(&ball, &g, w.as_ref());
    // Prefer a geodesic witness; fall back to the given word.
    let witness = ball.witness(&g).or(w);
    let upper = cert.upper.map_or_else(|| "-".to_string(), |u| u.to_string());
    let wtext = witness.as_ref().map(ToString::to_string);
    match format {
        Format::Text => {
            println!("lower: {}", cert.lower);
            println!("upper: {upper}");
            println!("exact: {}", cert.exact);
            println!("witness: {}", wtext.as_deref().unwrap_or("-"));
        }
        Format::Csv => {
            println!("lower,upper,exact,witness");
            println!(
                "{},{},{},{}",
                cert.lower,
                upper,
                cert.exact,
                csv_quote(wtext.as_deref().unwrap_or(""))
            );
        }
        Format::JsonLines => {
            println!(
                "{}",
                json!({
                    "lower": cert.lower,
                    "upper": cert.upper,
                    "exact": cert.exact,
                    "witness": wtext,
                })
            );
        }
    }
    Ok(())
}

fn cmd_ball(
    table: &GeneratorTable,
    format: Format,
    radius: u32,
    node_cap: Option<usize>,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let cap = node_cap.unwrap_or(metric::DEFAULT_NODE_CAP);
    let ball: BallTable = metric::ball_with_cap(radius, table, cap)?;
    let mut rows: Vec<(u32, u128)> = ball.entries().map(|(k, d)| (d, k)).collect();
    rows.sort_unstable();
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(std::io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(std::io::BufWriter::new(std::io::stdout())),
    };
    if format != Format::JsonLines {
        writeln!(sink, "key,distance,witness")?;
    }
    for (d, k) in rows {
        let w = ball.witness_for_key(k).map(|w| w.to_string()).unwrap_or_default();
        match format {
            Format::JsonLines => {
                writeln!(sink, "{}", json!({ "key": format!("{k:032x}"), "distance": d, "witness": w }))?;
            }
            _ => writeln!(sink, "{k:032x},{d},{}", csv_quote(&w))?,
        }
    }
    sink.flush()?;
    Ok(())
}

fn cmd_gen(table: &GeneratorTable, format: Format, cmd: &GenCmd) -> Result<(), Failure> {
    match cmd {
        GenCmd::List => {
            if format == Format::Csv {
                println!("symbol,rects,provenance");
            }
            for sym in table.symbols() {
                let def = table.get(sym).expect("listed symbol");
                let rects = def.element.rect_count();
                let prov = provenance_name(def.provenance);
                match format {
                    Format::Text => println!("{sym} rects={rects} provenance={prov}"),
                    Format::Csv => println!("{sym},{rects},{prov}"),
                    Format::JsonLines => println!(
                        "{}",
                        json!({ "symbol": sym, "rects": rects, "provenance": prov })
                    ),
                }
            }
            Ok(())
        }
        GenCmd::Show { symbol } => {
            let g = table.resolve(symbol)?;
            print_element(&g.reduce_pair(), format);
            Ok(())
        }
        GenCmd::Validate => {
            println!("symbols: {}", table.len());
            println!("dimension: {}", table.dimension);
            println!("source_hash: {}", table.source_hash);
            let missing = table.missing();
            println!("complete: {}", missing.is_empty());
            for m in &missing {
                println!("missing: {m}");
            }
            for w in table.warnings() {
                println!("warning: {w}");
            }
            if missing.is_empty() {
                Ok(())
            } else {
                Err(Failure::domain(
                    "E_TABLE",
                    format!("generator table incomplete, missing: {missing:?}"),
                ))
            }
        }
    }
}

fn cmd_divpath(
    table: &GeneratorTable,
    format: Format,
    element: &str,
    m: u64,
    q: u64,
    cap_exponents: Option<u64>,
    ball_radius: Option<u32>,
    node_cap: Option<usize>,
) -> Result<(), Failure> {
    let (g, witness) = element_from(element, table)?;
    let params = DivergenceParams::new(m, q)?;
    let cap = node_cap.unwrap_or(metric::DEFAULT_NODE_CAP);
    let ball = match ball_radius {
        Some(r) => Some(metric::ball_with_cap(r, table, cap)?),
        None => None,
    };
    if witness.is_none() && ball.is_none() {
        return Err(Failure::domain(
            "E_USAGE",
            "an element file carries no witness word; pass --ball-radius to certify its length",
        ));
    }
    let cert = divergence::build_path(&g, witness.as_ref(), &params, table, ball.as_ref(), cap_exponents)?;
    let verdict = if cert.ok() { "PASS" } else { "FAIL" };
    match format {
        Format::Text => print!("{}", cert.to_text()),
        Format::Csv => {
            println!("verdict,n_hat,letters,endpoint_ok,endpoint_mode,min_lower,margin_ok,length_ok,tracker_complete");
            println!(
                "{verdict},{},{},{},{},{},{},{},{}",
                cert.n_hat,
                cert.word.len(),
                cert.endpoint_ok,
                cert.endpoint_mode,
                cert.min_lower,
                cert.margin_ok,
                cert.length_ok,
                cert.tracker_complete
            );
        }
        Format::JsonLines => println!(
            "{}",
            json!({
                "verdict": verdict,
                "n_hat": cert.n_hat,
                "letters": cert.word.len(),
                "endpoint_ok": cert.endpoint_ok,
                "endpoint_mode": cert.endpoint_mode,
                "min_lower": cert.min_lower,
                "margin_ok": cert.margin_ok,
                "length_ok": cert.length_ok,
                "tracker_complete": cert.tracker_complete,
            })
        ),
    }
    if cert.ok() {
        Ok(())
    } else {
        Err(Failure::domain("E_VERDICT", "certificate checks failed; see the printed report"))
    }
}

fn cmd_divmeasure(
    table: &GeneratorTable,
    format: Format,
    x: u32,
    delta: &str,
    radius: Option<u32>,
    node_cap: Option<usize>,
) -> Result<(), Failure> {
    let (dn, dd) = DivergenceParams::DELTA;
    if delta.trim() != format!("{dn}/{dd}") {
        return Err(Failure::domain(
            "E_PARSE",
            format!("the avoidance fraction is fixed at {dn}/{dd}"),
        ));
    }
    let r = radius.unwrap_or(x + 1);
    let cap = node_cap.unwrap_or(metric::DEFAULT_NODE_CAP);
    let sample = divergence::empirical_divergence(x, table, r, cap)?;
    let phi = sample.value.map_or_else(|| "unreachable".to_string(), |v| v.to_string());
    let (wa, wb) = match &sample.witness {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (String::new(), String::new()),
    };
    match format {
        Format::JsonLines => println!(
            "{}",
            json!({
                "x": x,
                "phi": phi,
                "witness_a": wa,
                "witness_b": wb,
                "pairs": sample.pairs,
                "working_radius": sample.working_radius,
            })
        ),
        // The measurement is a CSV artifact in both text and csv modes.
        _ => {
            println!("x,phi,witness_a,witness_b");
            println!("{x},{phi},{},{}", csv_quote(&wa), csv_quote(&wb));
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let format = Format::parse(&cli.format)?;
    let table = load_table(cli)?;
    match &cli.cmd {
        Cmd::Nf { word, element } => {
            let g = match (word, element) {
                (Some(s), None) => word_element(s, &table)?.0,
                (None, Some(s)) => element_from(s, &table)?.0,
                _ => {
                    return Err(Failure::domain(
                        "E_USAGE",
                        "nf needs exactly one of --word or --element",
                    ))
                }
            };
            print_canonical(&g, format);
            Ok(())
        }
        Cmd::Mul { left, right } => {
            let (a, _) = element_from(left, &table)?;
            let (b, _) = element_from(right, &table)?;
            print_canonical(&a.compose(&b), format);
            Ok(())
        }
        Cmd::Inv { element } => {
            let (g, _) = element_from(element, &table)?;
            print_canonical(&g.inverse(), format);
            Ok(())
        }
        Cmd::Eval { element, point } => {
            let (g, _) = element_from(element, &table)?;
            let rect =
                DyadicRect::parse(point).map_err(|e| Failure::domain("E_PARSE", e))?;
            let (v1, v2) = g.evaluate(&rect.w1, &rect.w2)?;
            let image = DyadicRect::new(v1, v2);
            match format {
                Format::Text => println!("{image}"),
                Format::Csv => {
                    println!("in1,in2,out1,out2");
                    println!("{rect},{image}");
                }
                Format::JsonLines => println!(
                    "{}",
                    json!({ "point": rect.to_string(), "image": image.to_string() })
                ),
            }
            Ok(())
        }
        Cmd::Len { word, element, radius, node_cap } => {
            cmd_len(&table, format, word.as_deref(), element.as_deref(), *radius, *node_cap)
        }
        Cmd::Ball { radius, node_cap, out } => {
            cmd_ball(&table, format, *radius, *node_cap, out.as_ref())
        }
        Cmd::Gen(sub) => cmd_gen(&table, format, sub),
        Cmd::Divpath { element, m, q, cap_exponents, ball_radius, node_cap } => cmd_divpath(
            &table,
            format,
            element,
            *m,
            *q,
            *cap_exponents,
            *ball_radius,
            *node_cap,
        ),
        Cmd::Divmeasure { x, delta, radius, node_cap } => {
            cmd_divmeasure(&table, format, *x, delta, *radius, *node_cap)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error[E_USAGE]: invalid command line");
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    // The seed is part of the stable interface; current subcommands are
    // deterministic without it.
    let _ = cli.seed;
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.exit)
        }
    }
}
