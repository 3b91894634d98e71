//! `lia`: run the inductor, audit markets, evaluate feature programs, list plausible worlds,
//! and export diagnostic reports as CSV.
//!
//! Exit status: 0 on success, 1 on a runtime or assertion failure, 2 on a usage, config or
//! input-format error.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lia_core::config::RunConfig;
use lia_core::diagnostics::{
    calibration_stats, coherence_report, conditional_market, diagonal_prices, expectation,
    exploitation_audit, firm_audit, history_from_rows, parse_csv, price_rows, render_csv,
    CoherenceTargets, CsvRow,
};
use lia_core::inductor::{
    load_snapshot, reverify, save_snapshot, Inductor, InductorError, InductorState, SnapshotStatus,
};
use lia_core::logic::{ScriptedProcess, DEFAULT_ATOM_CAP};
use lia_core::rational::{self, parse_rational};
use lia_core::traders::{build_traders, Ect, SentenceSeq, StepPoly};
use lia_core::{
    Atom, DeductivePrefix, DeductiveProcess, FeatureProgram, Rational, Sentence, ValuationHistory,
};

#[derive(Parser)]
#[command(
    name = "lia",
    version,
    about = "Logical induction over propositional sentences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the inductor and write a snapshot, the prices and the firm audit.
    Run(RunArgs),
    /// Play one trader against a fixed market and report its plausible net worth per day.
    Audit(AuditArgs),
    /// Evaluate a feature program on a price history.
    Eval(EvalArgs),
    /// List the plausible worlds of D_n.
    Worlds(WorldsArgs),
    /// Diagnostic reports over a committed market.
    Report(ReportArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Last day to commit; defaults to `run.horizon` from the config.
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory for the snapshot and CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Continue from a snapshot made with the same config.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Worker cap. The day loop is sequential, so any value gives the same output.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    threads: u32,
    /// Print one progress line per committed day to stderr.
    #[arg(long, short)]
    verbose: bool,
}

/// Where a market and its deductive process come from.
#[derive(clap::Args)]
struct MarketArgs {
    /// Price history: a `.lia` snapshot or a CSV in the export format.
    #[arg(long)]
    market: PathBuf,
    /// Deductive process: a run config (`.toml`) or a scripted process file. Optional when the
    /// market is a snapshot, whose theorem sets are then used.
    #[arg(long)]
    process: Option<PathBuf>,
    /// Atoms declared for a scripted process file.
    #[arg(long, value_delimiter = ',')]
    atoms: Vec<String>,
    /// Atom cap for world enumeration; a config's `process.atom_cap` takes precedence.
    #[arg(long)]
    atom_cap: Option<usize>,
    /// Days to report; defaults to the market length.
    #[arg(long)]
    horizon: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AuditArgs {
    #[command(flatten)]
    market: MarketArgs,
    /// Catalog entry, e.g. `coherence(phi="a", start=1, which=1)` or `program:<file>`.
    #[arg(long)]
    trader: String,
    /// Step polynomial coefficients, constant term first.
    #[arg(long, value_delimiter = ',')]
    step_poly: Vec<u64>,
    /// Fail (exit 1) unless every audited trader ends with min ≥ this value.
    #[arg(long)]
    expect_min: Option<String>,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Feature program text file.
    #[arg(long)]
    program: PathBuf,
    /// Price history CSV; days the file omits are empty pricings.
    #[arg(long)]
    history: PathBuf,
}

#[derive(clap::Args)]
struct WorldsArgs {
    /// A run config (`.toml`) or a scripted process file.
    #[arg(long)]
    process: PathBuf,
    #[arg(long)]
    day: usize,
    /// Extra atoms to enumerate besides atoms(D_n).
    #[arg(long, value_delimiter = ',')]
    atoms: Vec<String>,
    /// Prices for a reflective process (snapshot or CSV).
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long)]
    atom_cap: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Coherence,
    Calibration,
    Conditional,
    Expectation,
    Diagonal,
    Prices,
    Verify,
}

#[derive(clap::Args)]
struct ReportArgs {
    #[arg(long, value_enum)]
    kind: ReportKind,
    /// Committed market (`.lia` snapshot or CSV).
    #[arg(long, alias = "snapshot")]
    market: PathBuf,
    #[arg(long)]
    process: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    atoms: Vec<String>,
    /// Run config; supplies the diagnostics section and is required by `verify`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    atom_cap: Option<usize>,
    /// coherence: tracked theorem (repeatable).
    #[arg(long)]
    theorem: Vec<String>,
    /// coherence: tracked refuted sentence (repeatable).
    #[arg(long)]
    refuted: Vec<String>,
    /// coherence: exclusive pair `phi;psi` (repeatable).
    #[arg(long)]
    pair: Vec<String>,
    /// diagonal/calibration: φ_n, cycled; expectation: threshold sentences in order;
    /// conditional: the conditioned sentences.
    #[arg(long)]
    sentence: Vec<String>,
    /// conditional: the sentence ψ conditioned on.
    #[arg(long)]
    given: Option<String>,
    /// calibration: open price band `lo,hi`.
    #[arg(long, value_delimiter = ',')]
    band: Vec<String>,
    /// calibration: indicator width δ, shared by every day.
    #[arg(long, default_value = "1/100")]
    width: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Config and input-format problems are the caller's to fix; everything else is a runtime
/// failure.
fn inductor_error(e: InductorError) -> CliError {
    match e {
        InductorError::Config(_)
        | InductorError::Snapshot { .. }
        | InductorError::Checksum
        | InductorError::Version(_)
        | InductorError::Fingerprint { .. }
        | InductorError::Io { .. } => usage(e),
        _ => runtime(e),
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Worlds(a) => cmd_worlds(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lia: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rat(text: &str, what: &str) -> Result<Rational> {
    parse_rational(text).map_err(|e| usage(format!("{what}: {e}")))
}

fn sentence(text: &str) -> Result<Sentence> {
    Sentence::parse(text).map_err(|e| usage(format!("`{text}`: {e}")))
}

fn sentences(texts: &[String]) -> Result<Vec<Sentence>> {
    texts.iter().map(|t| sentence(t)).collect()
}

fn atoms(names: &[String]) -> Result<BTreeSet<Atom>> {
    names
        .iter()
        .map(|a| Atom::new(a.trim()).map_err(usage))
        .collect()
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config).map_err(usage)?;
    let horizon = a.horizon.unwrap_or_else(|| cfg.horizon());
    let out = cfg.file.output.clone();
    std::fs::create_dir_all(&a.out).map_err(|e| runtime(format!("{}: {e}", a.out.display())))?;
    let mut ind = match &a.resume {
        Some(p) => {
            let (state, _) = load_snapshot(p).map_err(inductor_error)?;
            Inductor::resume(cfg, state).map_err(inductor_error)?
        }
        None => Inductor::new(cfg).map_err(inductor_error)?,
    };
    let mut failure = None;
    while ind.state().day() < horizon {
        match ind.step() {
            Ok(rec) if a.verbose => {
                let range = match &rec.firm_range {
                    Some((lo, hi)) => format!(
                        "firm [{}, {}]",
                        rational::fmt_decimal(lo, 6),
                        rational::fmt_decimal(hi, 6)
                    ),
                    None => "PC(D) empty".to_string(),
                };
                eprintln!("day {}: C_n = {}, {range}", rec.day, rec.c_n);
            }
            Ok(_) => {}
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let state = ind.state();
    let status = if failure.is_some() {
        SnapshotStatus::Partial
    } else {
        SnapshotStatus::Complete
    };
    write_run_outputs(state, status, &a.out, &out)?;
    if let Some(e) = failure {
        return Err(runtime(format!(
            "day {}: {e}; partial snapshot of {} days written",
            state.day() + 1,
            state.day()
        )));
    }
    let verified = state.records.iter().filter(|r| r.verified).count();
    println!(
        "committed {} days ({} verified) to {}",
        state.day(),
        verified,
        a.out.join(&out.snapshot).display()
    );
    Ok(())
}

fn write_run_outputs(
    state: &InductorState,
    status: SnapshotStatus,
    dir: &Path,
    names: &lia_core::config::OutputSection,
) -> Result<()> {
    save_snapshot(state, &dir.join(&names.snapshot), status).map_err(runtime)?;
    write_out(
        Some(&dir.join(&names.prices_csv)),
        &render_csv(&price_rows(&state.history)),
    )?;
    let mut rows = firm_audit(state).rows();
    for r in &state.records {
        rows.push(CsvRow::new(
            r.day,
            "c_n",
            Some(rational::int(r.c_n.min(i64::MAX as u64) as i64)),
        ));
        rows.push(CsvRow::new(
            r.day,
            "verified",
            Some(rational::int(r.verified as i64)),
        ));
    }
    rows.sort_by_key(|r| r.day);
    write_out(Some(&dir.join(&names.audit_csv)), &render_csv(&rows))
}

/// A price history from a snapshot or a CSV file, with the snapshot's theorem sets if any.
fn load_market(path: &Path) -> Result<(ValuationHistory, Option<DeductivePrefix>)> {
    if path.extension().is_some_and(|e| e == "csv") {
        let rows = parse_csv(&read(path)?).map_err(usage)?;
        return Ok((history_from_rows(&rows, 0).map_err(usage)?, None));
    }
    let (state, _) = load_snapshot(path).map_err(inductor_error)?;
    Ok((state.history, Some(state.prefix)))
}

/// A deductive process and its atom cap from a run config or a scripted process file.
fn load_process(
    path: &Path,
    declared: &[String],
    cap: Option<usize>,
) -> Result<(Box<dyn DeductiveProcess>, usize)> {
    if path.extension().is_some_and(|e| e == "toml") {
        let cfg = RunConfig::load(path).map_err(usage)?;
        let p = cfg.build_process().map_err(usage)?;
        return Ok((p, cfg.atom_cap()));
    }
    let p = ScriptedProcess::parse(&read(path)?, &atoms(declared)?).map_err(usage)?;
    Ok((Box::new(p), cap.unwrap_or(DEFAULT_ATOM_CAP)))
}

/// D_1..D_days, each day's process query seeing the prices of the days before it.
fn replay(
    process: &mut dyn DeductiveProcess,
    history: &ValuationHistory,
    days: usize,
) -> Result<DeductivePrefix> {
    let mut prefix = DeductivePrefix::new();
    for m in 1..=days {
        let seen = history.truncated((m - 1).min(history.len()));
        prefix.advance(process, &seen).map_err(runtime)?;
    }
    Ok(prefix)
}

struct Market {
    history: ValuationHistory,
    prefix: DeductivePrefix,
    cap: usize,
    horizon: usize,
}

fn open_market(
    market: &Path,
    process: Option<&Path>,
    declared: &[String],
    cap: Option<usize>,
    horizon: Option<usize>,
) -> Result<Market> {
    let (history, stored) = load_market(market)?;
    let horizon = horizon.unwrap_or(history.len());
    if horizon > history.len() {
        return Err(usage(format!(
            "horizon {horizon} exceeds the market's {} days",
            history.len()
        )));
    }
    let (prefix, cap) = match (process, stored) {
        (Some(p), _) => {
            let (mut proc_, cap_) = load_process(p, declared, cap)?;
            (replay(proc_.as_mut(), &history, horizon)?, cap_)
        }
        (None, Some(prefix)) => (prefix, cap.unwrap_or(DEFAULT_ATOM_CAP)),
        (None, None) => return Err(usage("a CSV market needs --process")),
    };
    if prefix.len() < horizon {
        return Err(usage(format!(
            "horizon {horizon} exceeds the {} days of theorem sets",
            prefix.len()
        )));
    }
    Ok(Market {
        history,
        prefix,
        cap,
        horizon,
    })
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let m = &a.market;
    let mk = open_market(
        &m.market,
        m.process.as_deref(),
        &m.atoms,
        m.atom_cap,
        m.horizon,
    )?;
    let traders = build_traders(&a.trader, Path::new(".")).map_err(usage)?;
    let poly = if a.step_poly.is_empty() {
        StepPoly::default()
    } else {
        StepPoly::new(a.step_poly.clone())
    };
    let threshold = a
        .expect_min
        .as_deref()
        .map(|t| rat(t, "--expect-min"))
        .transpose()?;
    let single = traders.len() == 1;
    let mut rows = Vec::new();
    let mut below = Vec::new();
    for (label, t) in traders {
        let ect = Ect::new(t, poly.clone());
        let (trace, issues) = exploitation_audit(&ect, &mk.history, &mk.prefix, mk.horizon, mk.cap)
            .map_err(runtime)?;
        for (day, msg) in issues {
            eprintln!("{label}: day {day}: emission replaced by zero ({msg})");
        }
        for mut r in trace.rows() {
            if !single {
                r.key = format!("{label}:{}", r.key);
            }
            rows.push(r);
        }
        if let (Some(q), true) = (&threshold, mk.horizon > 0) {
            match trace.min(mk.horizon) {
                Some(lo) if lo >= q => {}
                other => below.push(format!(
                    "{label}: final min {}",
                    other.map_or("undefined".into(), rational::fmt_exact)
                )),
            }
        }
    }
    rows.sort_by_key(|r| r.day);
    write_out(m.out.as_deref(), &render_csv(&rows))?;
    if !below.is_empty() {
        return Err(runtime(format!("below --expect-min: {}", below.join("; "))));
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let program = FeatureProgram::parse(&read(&a.program)?).map_err(usage)?;
    let rows = parse_csv(&read(&a.history)?).map_err(usage)?;
    let history = history_from_rows(&rows, program.rank()).map_err(usage)?;
    let v = program.eval(&history).map_err(runtime)?;
    println!(
        "{} ({})",
        rational::fmt_exact(&v),
        rational::fmt_decimal(&v, 6)
    );
    Ok(())
}

fn cmd_worlds(a: WorldsArgs) -> Result<()> {
    if a.day == 0 {
        return Err(usage("--day starts at 1"));
    }
    let (mut process, cap) = load_process(&a.process, &[], a.atom_cap)?;
    let history = match &a.market {
        Some(p) => load_market(p)?.0,
        None => ValuationHistory::new(),
    };
    let prefix = replay(process.as_mut(), &history, a.day)?;
    let d = prefix.get(a.day);
    let extra = atoms(&a.atoms)?;
    let worlds = d.plausible_worlds(&extra, cap).map_err(runtime)?;
    let over: BTreeSet<String> = d.atoms().union(&extra).map(|x| x.to_string()).collect();
    eprintln!(
        "{} plausible worlds of D_{} over {{{}}}",
        worlds.len(),
        a.day,
        over.into_iter().collect::<Vec<_>>().join(", ")
    );
    if worlds.is_empty() {
        println!("∅");
    }
    for w in worlds {
        println!("{w}");
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let cfg = a
        .config
        .as_deref()
        .map(RunConfig::load)
        .transpose()
        .map_err(usage)?;
    if let ReportKind::Verify = a.kind {
        let cfg = cfg.ok_or_else(|| usage("--kind verify needs --config"))?;
        let (state, status) = load_snapshot(&a.market).map_err(inductor_error)?;
        reverify(cfg, &state).map_err(inductor_error)?;
        let status = match status {
            SnapshotStatus::Complete => "complete",
            SnapshotStatus::Partial => "partial",
        };
        println!("{} days reverified ({status} snapshot)", state.day());
        return Ok(());
    }
    let process = a
        .process
        .clone()
        .or_else(|| a.config.clone().filter(|_| !is_snapshot(&a.market)));
    let mk = open_market(
        &a.market,
        process.as_deref(),
        &a.atoms,
        a.atom_cap.or(cfg.as_ref().map(|c| c.atom_cap())),
        a.horizon,
    )?;
    let rows = match a.kind {
        ReportKind::Coherence => {
            let targets = coherence_targets(&a, cfg.as_ref())?;
            coherence_report(&mk.history, &mk.prefix, &targets, mk.horizon, mk.cap)
                .map_err(runtime)?
                .rows()
        }
        ReportKind::Diagonal => {
            let seq = diagonal_seq(&a, cfg.as_ref())?;
            let prices = diagonal_prices(&mk.history, &seq, mk.horizon).map_err(runtime)?;
            prices
                .into_iter()
                .enumerate()
                .map(|(i, (s, p))| CsvRow::new(i + 1, &s.to_string(), Some(p)))
                .collect()
        }
        ReportKind::Calibration => {
            let seq = diagonal_seq(&a, cfg.as_ref())?;
            let phis = (1..=mk.horizon)
                .map(|n| seq.get(n))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(usage)?;
            if a.band.len() != 2 {
                return Err(usage("--kind calibration needs --band lo,hi"));
            }
            let lo = rat(&a.band[0], "--band")?;
            let hi = rat(&a.band[1], "--band")?;
            let delta = rat(&a.width, "--width")?;
            let truth = mk.prefix.get(mk.horizon);
            let deltas = vec![delta; phis.len()];
            calibration_stats(&phis, &mk.history, truth, (&lo, &hi), &deltas, mk.cap)
                .map_err(runtime)?
                .into_iter()
                .enumerate()
                .map(|(i, v)| CsvRow::new(i + 1, "calibration", v))
                .collect()
        }
        ReportKind::Conditional => {
            let psi = sentence(
                a.given
                    .as_deref()
                    .ok_or_else(|| usage("--kind conditional needs --given"))?,
            )?;
            let phis = sentences(&a.sentence)?;
            if phis.is_empty() {
                return Err(usage("--kind conditional needs at least one --sentence"));
            }
            let h = mk.history.truncated(mk.horizon);
            let cond = conditional_market(&h, &psi, &phis).map_err(runtime)?;
            // Explicit rows: a conditional price of 0 is off the pricing's support.
            let mut rows = Vec::new();
            for (i, p) in cond.days().iter().enumerate() {
                for phi in &phis {
                    rows.push(CsvRow::new(i + 1, &phi.to_string(), Some(p.price(phi))));
                }
            }
            rows
        }
        ReportKind::Expectation => {
            let thresholds = sentences(&a.sentence)?;
            if thresholds.is_empty() {
                return Err(usage(
                    "--kind expectation needs threshold --sentence values",
                ));
            }
            (1..=mk.horizon)
                .map(|n| {
                    let e = expectation(&mk.history, n, &thresholds).map_err(runtime)?;
                    Ok(CsvRow::new(n, "expectation", Some(e)))
                })
                .collect::<Result<Vec<_>>>()?
        }
        ReportKind::Prices => price_rows(&mk.history.truncated(mk.horizon)),
        ReportKind::Verify => unreachable!("handled above"),
    };
    write_out(a.out.as_deref(), &render_csv(&rows))
}

fn is_snapshot(path: &Path) -> bool {
    !path.extension().is_some_and(|e| e == "csv")
}

/// Flags win over the config's diagnostics section.
fn coherence_targets(a: &ReportArgs, cfg: Option<&RunConfig>) -> Result<CoherenceTargets> {
    if !(a.theorem.is_empty() && a.refuted.is_empty() && a.pair.is_empty()) {
        let mut pairs = Vec::new();
        for p in &a.pair {
            let (l, r) = p
                .split_once(';')
                .ok_or_else(|| usage(format!("--pair `{p}`: expected `phi;psi`")))?;
            pairs.push((sentence(l)?, sentence(r)?));
        }
        return Ok(CoherenceTargets {
            theorems: sentences(&a.theorem)?,
            refuted: sentences(&a.refuted)?,
            exclusive_pairs: pairs,
        });
    }
    let Some(cfg) = cfg else {
        return Err(usage(
            "--kind coherence needs --theorem/--refuted/--pair or a --config with diagnostics",
        ));
    };
    let d = &cfg.file.diagnostics;
    Ok(CoherenceTargets {
        theorems: cfg.sentences(&d.theorems).map_err(usage)?,
        refuted: cfg.sentences(&d.refuted).map_err(usage)?,
        exclusive_pairs: cfg.exclusive_pairs().map_err(usage)?,
    })
}

fn diagonal_seq(a: &ReportArgs, cfg: Option<&RunConfig>) -> Result<SentenceSeq> {
    if !a.sentence.is_empty() {
        return Ok(SentenceSeq::Cycle(sentences(&a.sentence)?));
    }
    cfg.map(|c| c.diagonal().map_err(usage))
        .transpose()?
        .flatten()
        .ok_or_else(|| usage("give --sentence values or a --config with diagnostics.diagonal"))
}
