//! Command-line front end. JSON reports are the reference form; text and
//! CSV render the same content.
//!
//! Exit codes: 0 pass, 1 fail, 2 usage or input error, 3 indeterminate.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::entanglement::{verify_oes, verify_oges, CheckReport};
use crate::nonlocality::{
    deduce_fixpoint, strongest_groups, summarize, GroupReport, MeasurementGroup, Rule,
};
use crate::states::{build_a18, build_b, build_bbar4, Construction, StateSet};
use crate::{Error, Result, DEFAULT_TOL};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INDETERMINATE: i32 = 3;

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(
    name = "strongnl",
    version,
    about = "Construct and verify strongly nonlocal sets of entangled states"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,

    /// Relative tolerance for rank and null-space decisions.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    /// Write the report here (atomically) instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a construction and write it as JSON.
    Construct {
        #[command(flatten)]
        source: SetArgs,
    },
    /// Run orthogonality, entanglement and nonlocality checks.
    Verify {
        #[command(flatten)]
        source: SetArgs,
        /// Orthogonal entangled set check.
        #[arg(long)]
        oes: bool,
        /// Orthogonal genuinely entangled set check.
        #[arg(long)]
        oges: bool,
        /// Strongest-nonlocality check over the groups that leave out one party.
        #[arg(long)]
        strongest: bool,
        /// With --strongest, check every nonempty proper subset of parties.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Derive a rule-based certificate for one measuring group.
    Prove {
        #[command(flatten)]
        source: SetArgs,
        /// 1-based party left out of the measuring group.
        #[arg(long)]
        group: usize,
    },
    /// Sizes of strongly nonlocal product and genuinely entangled sets.
    Table {
        /// Local dimension or inclusive range, e.g. `3` or `2-6`.
        #[arg(long, default_value = "2-6", value_parser = parse_range)]
        d: (usize, usize),
    },
}

#[derive(Debug, Args)]
pub struct SetArgs {
    #[arg(long = "set", value_parser = parse_construction)]
    pub set: Option<Construction>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Read the set from a JSON file instead of building it.
    #[arg(long, conflicts_with = "set")]
    pub input: Option<PathBuf>,
}

fn parse_construction(s: &str) -> std::result::Result<Construction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let bad = || format!("expected a dimension or range like 2-6, got {s:?}");
    let (lo, hi) = match s.split_once('-') {
        Some((a, b)) => (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        ),
        None => {
            let v = s.trim().parse().map_err(|_| bad())?;
            (v, v)
        }
    };
    if lo < 2 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match execute(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Indeterminate { .. } => EXIT_INDETERMINATE,
        Error::Precondition(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("STRONGNL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("STRONGNL_THREADS must be a positive integer, got {raw:?}"))?;
    // A pool may already exist when running inside tests.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

pub fn execute(cfg: &RunConfig) -> Result<i32> {
    if !(cfg.tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            cfg.tol
        )));
    }
    match &cfg.command {
        Command::Construct { source } => cmd_construct(cfg, source),
        Command::Verify {
            source,
            oes,
            oges,
            strongest,
            exhaustive,
        } => {
            let none = !(*oes || *oges || *strongest);
            let checks = Checks {
                oes: *oes || none,
                oges: *oges || none,
                strongest: *strongest || none,
            };
            cmd_verify(cfg, source, checks, *exhaustive)
        }
        Command::Prove { source, group } => cmd_prove(cfg, source, *group),
        Command::Table { d } => cmd_table(cfg, *d),
    }
}

pub fn load_set(src: &SetArgs) -> Result<StateSet> {
    if let Some(path) = &src.input {
        return StateSet::read(path);
    }
    let kind = src
        .set
        .ok_or_else(|| Error::Domain("either --set or --input is required".into()))?;
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| Error::Domain(format!("--set {kind} requires {flag}")))
    };
    match kind {
        Construction::B => build_b(need(src.d, "--d")?, need(src.n, "--N")?),
        Construction::Bbar4 => {
            if src.n.is_some_and(|n| n != 4) {
                return Err(Error::Domain(
                    "--set Bbar4 is four-partite; --N must be 4".into(),
                ));
            }
            build_bbar4(need(src.d, "--d")?)
        }
        Construction::A18 => {
            if src.d.is_some_and(|d| d != 3) || src.n.is_some_and(|n| n != 3) {
                return Err(Error::Domain("--set A18 is fixed at d=3, N=3".into()));
            }
            Ok(build_a18())
        }
    }
}

#[derive(Serialize)]
struct Conventions {
    parties: &'static str,
    basis_order: &'static str,
    orbit_order: &'static str,
    hermitian_coordinates: &'static str,
}

const CONVENTIONS: Conventions = Conventions {
    parties: "1-based in reports, 0-based in index tuples",
    basis_order: "lexicographic, lowest-numbered party most significant",
    orbit_order: "left cyclic shift iterated from the lexicographic minimum",
    hermitian_coordinates:
        "m real diagonal entries, then (re, im) of each strict-upper entry in row-major order",
};

#[derive(Serialize)]
struct SetSummary {
    label: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    states: usize,
    families: usize,
}

impl SetSummary {
    fn of(set: &StateSet) -> Self {
        SetSummary {
            label: set.label.clone(),
            d: set.d,
            n: set.n,
            states: set.len(),
            families: set.families.len(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    tolerance: f64,
    conventions: &'a Conventions,
    #[serde(skip_serializing_if = "Option::is_none")]
    set: Option<SetSummary>,
    result: T,
}

fn envelope<T: Serialize>(
    cfg: &RunConfig,
    command: &'static str,
    set: Option<&StateSet>,
    result: T,
) -> Result<String> {
    let env = Envelope {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        tolerance: cfg.tol,
        conventions: &CONVENTIONS,
        set: set.map(SetSummary::of),
        result,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

/// Writes to `--out` via a temporary file in the same directory, or to
/// standard output.
fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, content.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Domain(format!("csv encoding: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct TermRow {
    family: String,
    row: usize,
    index: String,
    re: f64,
    im: f64,
}

fn cmd_construct(cfg: &RunConfig, source: &SetArgs) -> Result<i32> {
    let set = load_set(source)?;
    let summary = format!(
        "{} d={} N={}: {} states in {} families",
        set.label,
        set.d,
        set.n,
        set.len(),
        set.families.len()
    );
    let body = match cfg.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for fam in &set.families {
                for (s, state) in fam.states().iter().enumerate() {
                    for (x, z) in state.terms() {
                        rows.push(TermRow {
                            family: fam.representative().to_string(),
                            row: s,
                            index: x.to_string(),
                            re: z.re,
                            im: z.im,
                        });
                    }
                }
            }
            to_csv(&rows)?
        }
        Format::Json | Format::Text => set.to_json()? + "\n",
    };
    emit(cfg.out.as_deref(), &body)?;
    if cfg.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(EXIT_PASS)
}

#[derive(Clone, Copy, Debug)]
struct Checks {
    oes: bool,
    oges: bool,
    strongest: bool,
}

#[derive(Serialize)]
struct VerifyResult {
    pass: bool,
    checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    groups: Vec<GroupReport>,
}

#[derive(Serialize)]
struct CheckRow<'a> {
    check: &'a str,
    pass: bool,
    worst_residual: f64,
    witnesses: usize,
}

fn cmd_verify(cfg: &RunConfig, source: &SetArgs, checks: Checks, exhaustive: bool) -> Result<i32> {
    let set = load_set(source)?;
    let mut reports = Vec::new();
    if checks.oes {
        reports.push(verify_oes(&set, cfg.tol)?);
    }
    if checks.oges {
        reports.push(verify_oges(&set, cfg.tol)?);
    }
    let mut groups = Vec::new();
    if checks.strongest {
        groups = strongest_groups(&set, cfg.tol, exhaustive)?;
        let mut summary = summarize(&groups);
        if exhaustive {
            summary.check = "strongest_exhaustive".into();
        }
        reports.push(summary);
    }
    let pass = reports.iter().all(|r| r.pass);
    let result = VerifyResult {
        pass,
        checks: reports,
        groups,
    };
    let body = match cfg.format {
        Format::Json => envelope(cfg, "verify", Some(&set), &result)?,
        Format::Csv => to_csv(
            &result
                .checks
                .iter()
                .map(|r| CheckRow {
                    check: &r.check,
                    pass: r.pass,
                    worst_residual: r.worst_residual,
                    witnesses: r.witnesses.len(),
                })
                .collect::<Vec<_>>(),
        )?,
        Format::Text => verify_text(cfg, &set, &result),
    };
    emit(cfg.out.as_deref(), &body)?;
    Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
}

fn verify_text(cfg: &RunConfig, set: &StateSet, result: &VerifyResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} d={} N={} ({} states), tol {:e}",
        set.label,
        set.d,
        set.n,
        set.len(),
        cfg.tol
    );
    for r in &result.checks {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{:<22} {verdict}  worst residual {:.3e}",
            r.check, r.worst_residual
        );
        for w in &r.witnesses {
            let _ = writeln!(s, "    {}", serde_json::to_string(w).unwrap_or_default());
        }
    }
    for g in &result.groups {
        let _ = writeln!(
            s,
            "  group {:<12} null dim {}  smallest kept {}  largest discarded {}",
            g.group.to_string(),
            g.null_dimension,
            fmt_opt(g.smallest_kept),
            fmt_opt(g.largest_discarded),
        );
    }
    let _ = writeln!(s, "overall {}", if result.pass { "PASS" } else { "FAIL" });
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    rule: &'static str,
    families: String,
    zeros_added: String,
    diagonals_merged: String,
}

fn cmd_prove(cfg: &RunConfig, source: &SetArgs, party: usize) -> Result<i32> {
    let set = load_set(source)?;
    if party == 0 || party > set.n {
        return Err(Error::Domain(format!(
            "--group must be a party in 1..={}, got {party}",
            set.n
        )));
    }
    let group = MeasurementGroup::all_but(set.n, party - 1)?;
    let outcome = deduce_fixpoint(&set, &group)?;
    let log = outcome.proof_log();
    let body = match cfg.format {
        Format::Json => envelope(
            cfg,
            "prove",
            Some(&set),
            serde_json::json!({ "group": group, "proof": log }),
        )?,
        Format::Csv => {
            let rows: Vec<StepRow> = log
                .steps
                .iter()
                .enumerate()
                .map(|(k, a)| StepRow {
                    step: k + 1,
                    rule: rule_name(a.rule),
                    families: a
                        .families
                        .iter()
                        .map(ToString::to_string)
                        .collect::<Vec<_>>()
                        .join(" "),
                    zeros_added: a
                        .zeros_added
                        .iter()
                        .map(|(r, s)| format!("{r}~{s}"))
                        .collect::<Vec<_>>()
                        .join(" "),
                    diagonals_merged: a.diagonals_merged.join("="),
                })
                .collect();
            to_csv(&rows)?
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{} d={} N={}, measuring group {group}",
                set.label, set.d, set.n
            );
            for (k, a) in log.steps.iter().enumerate() {
                let fams: Vec<String> = a.families.iter().map(ToString::to_string).collect();
                let _ = write!(
                    s,
                    "{:>4}. {:<7} {}",
                    k + 1,
                    rule_name(a.rule),
                    fams.join(" ")
                );
                if !a.zeros_added.is_empty() {
                    let z: Vec<String> = a
                        .zeros_added
                        .iter()
                        .map(|(r, t)| format!("a[{r},{t}]"))
                        .collect();
                    let _ = write!(s, "  zero: {}", z.join(" "));
                }
                if !a.diagonals_merged.is_empty() {
                    let _ = write!(s, "  equal: {}", a.diagonals_merged.join(" = "));
                }
                s.push('\n');
            }
            let _ = writeln!(
                s,
                "{}: {}/{} off-diagonal entries zero, {} diagonal class(es)",
                log.status, log.zeros, log.off_diagonal_total, log.diagonal_classes
            );
            s
        }
    };
    emit(cfg.out.as_deref(), &body)?;
    if !outcome.is_proved() {
        eprintln!("deduction stuck for group {group}; partial certificate written");
        return Ok(EXIT_FAIL);
    }
    Ok(EXIT_PASS)
}

fn rule_name(r: Rule) -> &'static str {
    match r {
        Rule::Zero => "zero",
        Rule::Trivial => "trivial",
    }
}

/// One line of the size comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub system: String,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    /// Size of the known strongly nonlocal product set, where one is known.
    pub ops_size: Option<u64>,
    pub ops_formula: String,
    pub oges_size: u64,
    pub oges_formula: String,
}

fn system_name(d: usize, n: usize) -> String {
    vec![format!("C^{d}"); n].join("⊗")
}

/// Rows for three and four parties at each `d` in range, plus the fixed
/// 18-state row when `d = 3` is included.
pub fn table_rows(d_lo: usize, d_hi: usize) -> Vec<TableRow> {
    let pow = |b: usize, e: u32| (b as u64).pow(e);
    let mut rows = Vec::new();
    for d in d_lo..=d_hi {
        if d == 3 {
            rows.push(TableRow {
                system: system_name(3, 3),
                d: 3,
                n: 3,
                ops_size: Some(19),
                ops_formula: "unextendible product basis".into(),
                oges_size: build_a18().len() as u64,
                oges_formula: "A18".into(),
            });
        }
        rows.push(TableRow {
            system: system_name(d, 3),
            d,
            n: 3,
            ops_size: (d >= 3).then(|| 6 * pow(d - 1, 2)),
            ops_formula: "6(d-1)^2".into(),
            oges_size: pow(d, 3) - pow(d - 1, 3) + 1,
            oges_formula: "d^3-(d-1)^3+1".into(),
        });
        rows.push(TableRow {
            system: system_name(d, 4),
            d,
            n: 4,
            ops_size: (d >= 3).then(|| pow(d, 4) - pow(d - 2, 4)),
            ops_formula: "d^4-(d-2)^4".into(),
            oges_size: pow(d, 4) - pow(d - 1, 4) + 1,
            oges_formula: "d^4-(d-1)^4+1".into(),
        });
    }
    rows
}

fn cmd_table(cfg: &RunConfig, (lo, hi): (usize, usize)) -> Result<i32> {
    let rows = table_rows(lo, hi);
    let body = match cfg.format {
        Format::Json => envelope(cfg, "table", None, &rows)?,
        Format::Csv => to_csv(&rows)?,
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "{:<18} {:>8}  {:<28} {:>9}  {}",
                "system", "OPS", "", "OGES", ""
            );
            for r in &rows {
                let ops = r.ops_size.map_or_else(|| "-".into(), |v| v.to_string());
                let _ = writeln!(
                    s,
                    "{:<18} {:>8}  {:<28} {:>9}  {}",
                    r.system, ops, r.ops_formula, r.oges_size, r.oges_formula
                );
            }
            s
        }
    };
    emit(cfg.out.as_deref(), &body)?;
    Ok(EXIT_PASS)
}
