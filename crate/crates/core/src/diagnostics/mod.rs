//! Finite-horizon observables over a committed market: exploitation audits, coherence gaps,
//! diagonal prices, calibration ratios, conditional prices, expectations, and CSV export.
//!
//! Everything here reads prices as stored, so a sentence outside a day's support counts as
//! priced 0 on that day. Track sentences the catalog actually trades.

use std::path::Path;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use crate::budgeter::plausible_value_range;
use crate::budgeter::world_value_range;
use crate::feature::{AffineCombination, Feature, FeatureError};
use crate::inductor::InductorState;
use crate::logic::{decided_value, DeductivePrefix, LogicError, Sentence};
use crate::pricing::{Pricing, PricingError, ValuationHistory};
use crate::rational::{self, parse_rational, Rational};
use crate::traders::{Ect, SentenceSeq, TraderContext, TraderError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticsError {
    #[error("need {need} days, have {have}")]
    MissingDays { need: usize, have: usize },
    #[error("day {day}: {sentence} is undecided at the audit horizon")]
    Undecided { day: usize, sentence: String },
    #[error("{0}")]
    Invalid(String),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Trader(#[from] TraderError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

fn need(need: usize, have: usize) -> Result<(), DiagnosticsError> {
    if have < need {
        return Err(DiagnosticsError::MissingDays { need, have });
    }
    Ok(())
}

/// Per-day (min, max) plausible value of cumulative holdings; `None` where PC(D_n) is empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditTrace {
    pub days: Vec<Option<(Rational, Rational)>>,
}

impl AuditTrace {
    pub fn min(&self, n: usize) -> Option<&Rational> {
        self.days[n - 1].as_ref().map(|(lo, _)| lo)
    }

    pub fn max(&self, n: usize) -> Option<&Rational> {
        self.days[n - 1].as_ref().map(|(_, hi)| hi)
    }

    pub fn rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        for (i, r) in self.days.iter().enumerate() {
            let (lo, hi) = match r {
                Some((lo, hi)) => (Some(lo.clone()), Some(hi.clone())),
                None => (None, None),
            };
            out.push(CsvRow::new(i + 1, "min", lo));
            out.push(CsvRow::new(i + 1, "max", hi));
        }
        out
    }
}

/// Plays `trader` against the fixed `history` and reports its plausible net worth each day.
pub fn exploitation_audit(
    trader: &Ect,
    history: &ValuationHistory,
    prefix: &DeductivePrefix,
    horizon: usize,
    cap: usize,
) -> Result<(AuditTrace, Vec<(usize, String)>), DiagnosticsError> {
    need(horizon, history.len())?;
    need(horizon, prefix.len())?;
    let ctx = TraderContext {
        prefix,
        atom_cap: cap,
    };
    let mut holdings = AffineCombination::zero();
    let mut days = Vec::with_capacity(horizon);
    let mut issues = Vec::new();
    for n in 1..=horizon {
        let e = trader.emit(n, &ctx);
        if e.status != crate::traders::EmissionStatus::Ok {
            issues.push((n, format!("{:?}", e.status)));
        }
        holdings.add_assign(&e.strategy.execute(history)?);
        days.push(world_value_range(&holdings, prefix.get(n), cap)?);
    }
    Ok((AuditTrace { days }, issues))
}

/// The firm's cumulative holdings range as committed in a run.
pub fn firm_audit(state: &InductorState) -> AuditTrace {
    AuditTrace {
        days: state.records.iter().map(|r| r.firm_range.clone()).collect(),
    }
}

/// Sentences audited by [`coherence_report`].
#[derive(Clone, Debug, Default)]
pub struct CoherenceTargets {
    pub theorems: Vec<Sentence>,
    pub refuted: Vec<Sentence>,
    /// Caller-asserted provably exclusive pairs.
    pub exclusive_pairs: Vec<(Sentence, Sentence)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoherenceDay {
    /// max 1 − P_n(φ) over tracked φ with D_n ⊢ φ.
    pub theorem_gap: Rational,
    /// max P_n(φ) over tracked φ with D_n ⊢ ¬φ.
    pub refuted_gap: Rational,
    /// max |P_n(φ∨ψ) − P_n(φ) − P_n(ψ)| over the pairs.
    pub additivity_gap: Rational,
}

impl CoherenceDay {
    pub fn max_gap(&self) -> Rational {
        rational::max_of(
            &rational::max_of(&self.theorem_gap, &self.refuted_gap),
            &self.additivity_gap,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoherenceReport {
    pub days: Vec<CoherenceDay>,
}

impl CoherenceReport {
    pub fn rows(&self) -> Vec<CsvRow> {
        let mut out = Vec::new();
        for (i, d) in self.days.iter().enumerate() {
            let n = i + 1;
            out.push(CsvRow::new(n, "theorem_gap", Some(d.theorem_gap.clone())));
            out.push(CsvRow::new(n, "refuted_gap", Some(d.refuted_gap.clone())));
            out.push(CsvRow::new(
                n,
                "additivity_gap",
                Some(d.additivity_gap.clone()),
            ));
            out.push(CsvRow::new(n, "max_gap", Some(d.max_gap())));
        }
        out
    }
}

/// Gaifman gaps per day. A theorem or refutation counts from the first day D decides it.
/// Gaps (i) and (ii) lie in [0, 1]; the additivity gap lies in [0, 2], reaching 2 when both
/// parts are priced 1 and the disjunction 0.
pub fn coherence_report(
    history: &ValuationHistory,
    prefix: &DeductivePrefix,
    targets: &CoherenceTargets,
    horizon: usize,
    cap: usize,
) -> Result<CoherenceReport, DiagnosticsError> {
    need(horizon, history.len())?;
    need(horizon, prefix.len())?;
    let mut days = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let p = history.day(n);
        let d = prefix.get(n);
        let mut theorem_gap = Rational::zero();
        for s in &targets.theorems {
            if decided_value(d, s, cap)? == Some(true) {
                theorem_gap = rational::max_of(&theorem_gap, &(Rational::one() - p.price(s)));
            }
        }
        let mut refuted_gap = Rational::zero();
        for s in &targets.refuted {
            if decided_value(d, s, cap)? == Some(false) {
                refuted_gap = rational::max_of(&refuted_gap, &p.price(s));
            }
        }
        let mut additivity_gap = Rational::zero();
        for (a, b) in &targets.exclusive_pairs {
            let or = a.clone().or(b.clone());
            let g = (p.price(&or) - p.price(a) - p.price(b)).abs();
            additivity_gap = rational::max_of(&additivity_gap, &g);
        }
        days.push(CoherenceDay {
            theorem_gap,
            refuted_gap,
            additivity_gap,
        });
    }
    Ok(CoherenceReport { days })
}

/// P_n(φ_n) for n = 1..=horizon.
pub fn diagonal_prices(
    history: &ValuationHistory,
    seq: &SentenceSeq,
    horizon: usize,
) -> Result<Vec<(Sentence, Rational)>, DiagnosticsError> {
    need(horizon, history.len())?;
    (1..=horizon)
        .map(|n| {
            let s = seq.get(n)?;
            let p = history.day(n).price(&s);
            Ok((s, p))
        })
        .collect()
}

/// Running ratio Σ_{i≤n} w_i·Thm(φ_i) / Σ_{i≤n} w_i with w_i = Ind_{δ_i}(a < P_i(φ_i) < b);
/// truth comes from `truth`, the theorem set at the audit horizon. `None` while the
/// denominator is still 0.
pub fn calibration_stats(
    phis: &[Sentence],
    history: &ValuationHistory,
    truth: &crate::logic::TheoremSet,
    band: (&Rational, &Rational),
    deltas: &[Rational],
    cap: usize,
) -> Result<Vec<Option<Rational>>, DiagnosticsError> {
    need(phis.len(), history.len())?;
    if deltas.len() < phis.len() {
        return Err(DiagnosticsError::Invalid(format!(
            "{} widths for {} sentences",
            deltas.len(),
            phis.len()
        )));
    }
    let (a, b) = (
        Feature::constant(band.0.clone()),
        Feature::constant(band.1.clone()),
    );
    let mut num = Rational::zero();
    let mut den = Rational::zero();
    let mut out = Vec::with_capacity(phis.len());
    for (i, phi) in phis.iter().enumerate() {
        let day = i + 1;
        let truth_value =
            decided_value(truth, phi, cap)?.ok_or_else(|| DiagnosticsError::Undecided {
                day,
                sentence: phi.to_string(),
            })?;
        let price = Feature::constant(history.day(day).price(phi));
        let w = Feature::ind_between(&deltas[i], &a, &price, &b)?;
        let w = w.as_const().expect("constant inputs fold").clone();
        if truth_value {
            num += &w;
        }
        den += w;
        out.push(if den.is_zero() {
            None
        } else {
            Some(&num / &den)
        });
    }
    Ok(out)
}

/// P(φ|ψ) = P(φ∧ψ)/P(ψ) when P(φ∧ψ) < P(ψ), else 1 (including P(ψ) = 0).
pub fn conditional_price(p_and: &Rational, p_psi: &Rational) -> Rational {
    if p_and < p_psi {
        p_and / p_psi
    } else {
        Rational::one()
    }
}

/// The market conditioned on ψ, priced on each of `phis`.
pub fn conditional_market(
    history: &ValuationHistory,
    psi: &Sentence,
    phis: &[Sentence],
) -> Result<ValuationHistory, DiagnosticsError> {
    let mut days = Vec::with_capacity(history.len());
    for p in history.days() {
        let p_psi = p.price(psi);
        let mut out = Pricing::new();
        for phi in phis {
            let p_and = p.price(&phi.clone().and(psi.clone()));
            out.set(phi.clone(), conditional_price(&p_and, &p_psi))?;
        }
        days.push(out);
    }
    Ok(ValuationHistory::from_days(days))
}

/// E_k(X) = Σ_{i<k} (1/k)·P_n(s_i) where `thresholds[i]` stands for "X > i/k".
pub fn expectation(
    history: &ValuationHistory,
    n: usize,
    thresholds: &[Sentence],
) -> Result<Rational, DiagnosticsError> {
    need(n.max(1), history.len())?;
    if thresholds.is_empty() {
        return Err(DiagnosticsError::Invalid(
            "expectation needs at least one threshold sentence".into(),
        ));
    }
    let k = rational::int(thresholds.len() as i64);
    let p = history.day(n);
    Ok(thresholds
        .iter()
        .fold(Rational::zero(), |acc, s| acc + p.price(s))
        / k)
}

/// One CSV row: day, key, exact `p/q` (empty when undefined), decimal approximation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvRow {
    pub day: usize,
    pub key: String,
    pub value: Option<Rational>,
}

impl CsvRow {
    pub fn new(day: usize, key: &str, value: Option<Rational>) -> CsvRow {
        CsvRow {
            day,
            key: key.to_string(),
            value,
        }
    }
}

pub const CSV_HEADER: [&str; 4] = ["day", "key", "exact", "decimal"];
const DECIMAL_DIGITS: u32 = 6;

/// One row per (day, support sentence).
pub fn price_rows(history: &ValuationHistory) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for (i, p) in history.days().iter().enumerate() {
        for (s, q) in p.iter() {
            out.push(CsvRow::new(i + 1, &s.to_string(), Some(q.clone())));
        }
    }
    out
}

pub fn render_csv(rows: &[CsvRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in rows {
        let (exact, dec) = match &r.value {
            Some(q) => (
                rational::fmt_exact(q),
                rational::fmt_decimal(q, DECIMAL_DIGITS),
            ),
            None => (String::new(), String::new()),
        };
        w.write_record([r.day.to_string(), r.key.clone(), exact, dec])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn export_csv(rows: &[CsvRow], path: &Path) -> Result<(), DiagnosticsError> {
    std::fs::write(path, render_csv(rows)).map_err(|e| DiagnosticsError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Reads rows back from the exact column; the decimal column is ignored.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, DiagnosticsError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| DiagnosticsError::Csv {
        line: 1,
        msg: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(DiagnosticsError::Csv {
            line: 1,
            msg: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let bad = |msg: String| DiagnosticsError::Csv { line, msg };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", rec.len())));
        }
        let day: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("bad day `{}`", &rec[0])))?;
        let value = if rec[2].is_empty() {
            None
        } else {
            Some(parse_rational(&rec[2]).map_err(|e| bad(e.to_string()))?)
        };
        out.push(CsvRow {
            day,
            key: rec[1].to_string(),
            value,
        });
    }
    Ok(out)
}

/// Inverse of [`price_rows`]: a market read from CSV, with `days` days (at least the largest
/// day mentioned). Keys must parse as sentences.
pub fn history_from_rows(
    rows: &[CsvRow],
    days: usize,
) -> Result<ValuationHistory, DiagnosticsError> {
    let last = rows.iter().map(|r| r.day).max().unwrap_or(0);
    if rows.iter().any(|r| r.day == 0) {
        return Err(DiagnosticsError::Invalid("day 0 in a price file".into()));
    }
    let mut out = vec![Pricing::new(); days.max(last)];
    for r in rows {
        let s = Sentence::parse(&r.key)?;
        let q = r.value.clone().ok_or_else(|| {
            DiagnosticsError::Invalid(format!("day {}: {} has no price", r.day, r.key))
        })?;
        if out[r.day - 1].get(&s).is_some() {
            return Err(DiagnosticsError::Invalid(format!(
                "day {}: {} priced twice",
                r.day, r.key
            )));
        }
        out[r.day - 1].set(s, q)?;
    }
    Ok(ValuationHistory::from_days(out))
}
