//! Line-oriented snapshot text. A header, one `day N` … `end` block per committed day holding
//! the new theorems and `<sentence> = p/q` prices, the budget and C_n caches, and a sha256
//! trailer over every preceding byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{DayRecord, InductorError, InductorState};
use crate::budgeter::TraderLedger;
use crate::feature::AffineCombination;
use crate::logic::{DeductivePrefix, Sentence};
use crate::market_maker::SEARCH_ORDER_VERSION;
use crate::pricing::{Pricing, ValuationHistory};
use crate::rational::{fmt_exact, parse_rational, Rational};

pub const SNAPSHOT_VERSION: &str = "lia-snapshot 1";

/// `Partial` marks a run that stopped on an error; its days are still individually valid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotStatus {
    Complete,
    Partial,
}

fn push_combination(out: &mut String, cash_key: &str, share_key: &str, a: &AffineCombination) {
    writeln!(out, "{cash_key} = {}", fmt_exact(a.constant())).unwrap();
    for (s, q) in a.shares() {
        writeln!(out, "{share_key} {s} = {}", fmt_exact(q)).unwrap();
    }
}

pub fn render_snapshot(state: &InductorState, status: SnapshotStatus) -> String {
    let mut out = String::new();
    writeln!(out, "{SNAPSHOT_VERSION}").unwrap();
    writeln!(
        out,
        "status {}",
        if status == SnapshotStatus::Complete {
            "complete"
        } else {
            "partial"
        }
    )
    .unwrap();
    writeln!(out, "fingerprint {}", state.fingerprint).unwrap();
    writeln!(out, "search-order {SEARCH_ORDER_VERSION}").unwrap();
    writeln!(out, "days {}", state.day()).unwrap();
    for r in &state.records {
        writeln!(out, "day {}", r.day).unwrap();
        for s in &r.added {
            writeln!(out, "theorem {s}").unwrap();
        }
        for (s, q) in r.pricing.iter() {
            writeln!(out, "{s} = {}", fmt_exact(q)).unwrap();
        }
        writeln!(out, "verified {}", u8::from(r.verified)).unwrap();
        writeln!(out, "cn {}", r.c_n).unwrap();
        match &r.firm_range {
            Some((lo, hi)) => {
                writeln!(out, "firm-range {} {}", fmt_exact(lo), fmt_exact(hi)).unwrap()
            }
            None => writeln!(out, "firm-range none").unwrap(),
        }
        for (k, msg) in &r.issues {
            writeln!(out, "issue {k} {}", msg.replace('\n', " ")).unwrap();
        }
        writeln!(out, "end").unwrap();
    }
    for (i, l) in state.ledgers.iter().enumerate() {
        let k = i + 1;
        let min = l.running_min().map_or("none".to_string(), fmt_exact);
        writeln!(out, "ledger {k} days {} min {min}", l.days()).unwrap();
        push_combination(
            &mut out,
            &format!("ledger-cash {k}"),
            &format!("ledger-share {k}"),
            l.holdings(),
        );
    }
    for (i, a) in state.accumulated.iter().enumerate() {
        writeln!(out, "acc {} = {}", i + 1, fmt_exact(a)).unwrap();
    }
    push_combination(&mut out, "firm-cash", "firm-share", &state.firm_holdings);
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    writeln!(out, "checksum {digest}").unwrap();
    out
}

/// Writes to a sibling temporary file and renames it into place.
pub fn save_snapshot(
    state: &InductorState,
    path: &Path,
    status: SnapshotStatus,
) -> Result<(), InductorError> {
    let io = |e: std::io::Error| InductorError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    };
    let text = render_snapshot(state, status);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load_snapshot(path: &Path) -> Result<(InductorState, SnapshotStatus), InductorError> {
    let text = std::fs::read_to_string(path).map_err(|e| InductorError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_snapshot(&text)
}

struct Lines<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> InductorError {
        let line = self
            .items
            .get(self.pos.saturating_sub(1))
            .map_or(0, |(n, _)| *n);
        InductorError::Snapshot {
            line,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|(_, l)| *l)
    }

    fn next(&mut self) -> Result<&'a str, InductorError> {
        let l = self.peek().ok_or_else(|| InductorError::Snapshot {
            line: self.items.len() + 1,
            msg: "unexpected end".into(),
        })?;
        self.pos += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str, InductorError> {
        let l = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.err(format!("expected `{key} ...`")))
    }

    fn rational(&self, text: &str) -> Result<Rational, InductorError> {
        parse_rational(text.trim()).map_err(|e| self.err(e.to_string()))
    }

    fn sentence(&self, text: &str) -> Result<Sentence, InductorError> {
        Sentence::parse(text.trim()).map_err(|e| self.err(e.to_string()))
    }

    fn number<T: std::str::FromStr>(&self, text: &str) -> Result<T, InductorError> {
        text.trim()
            .parse()
            .map_err(|_| self.err(format!("bad number `{text}`")))
    }

    /// `<left> = <rational>`.
    fn assignment(&self, text: &'a str) -> Result<(&'a str, Rational), InductorError> {
        let (l, r) = text
            .rsplit_once(" = ")
            .ok_or_else(|| self.err("expected `... = p/q`"))?;
        Ok((l, self.rational(r)?))
    }

    /// Reads `<cash_key> = q` then any `<share_key> <sentence> = q` lines.
    fn combination(
        &mut self,
        cash_key: &str,
        share_key: &str,
    ) -> Result<AffineCombination, InductorError> {
        let line = self.next()?;
        let (l, cash) = self.assignment(line)?;
        if l != cash_key {
            return Err(self.err(format!("expected `{cash_key} = ...`")));
        }
        let prefix = format!("{share_key} ");
        let mut shares = BTreeMap::new();
        while let Some(rest) = self.peek().and_then(|l| l.strip_prefix(prefix.as_str())) {
            self.pos += 1;
            let (s, q) = self.assignment(rest)?;
            shares.insert(self.sentence(s)?, q);
        }
        Ok(AffineCombination::new(cash, shares))
    }
}

pub fn parse_snapshot(text: &str) -> Result<(InductorState, SnapshotStatus), InductorError> {
    let body_end = text.rfind("checksum ").ok_or(InductorError::Checksum)?;
    let (body, trailer) = text.split_at(body_end);
    let stated = trailer
        .trim_end()
        .strip_prefix("checksum ")
        .ok_or(InductorError::Checksum)?;
    if !body.is_empty() && !body.ends_with('\n') {
        return Err(InductorError::Checksum);
    }
    if hex::encode(Sha256::digest(body.as_bytes())) != stated {
        return Err(InductorError::Checksum);
    }
    let mut lines = Lines {
        items: body.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(),
        pos: 0,
    };
    let version = lines.next()?;
    if version != SNAPSHOT_VERSION {
        return Err(InductorError::Version(version.to_string()));
    }
    let status = match lines.keyed("status")? {
        "complete" => SnapshotStatus::Complete,
        "partial" => SnapshotStatus::Partial,
        other => return Err(lines.err(format!("unknown status `{other}`"))),
    };
    let fingerprint = lines.keyed("fingerprint")?.to_string();
    let order = lines.keyed("search-order")?;
    if order != SEARCH_ORDER_VERSION {
        return Err(InductorError::Version(format!("search order {order}")));
    }
    let days_text = lines.keyed("days")?;
    let days: usize = lines.number(days_text)?;

    let mut records = Vec::with_capacity(days);
    let mut prefix = DeductivePrefix::new();
    let mut history = ValuationHistory::new();
    for expect in 1..=days {
        let day_text = lines.keyed("day")?;
        let day: usize = lines.number(day_text)?;
        if day != expect {
            return Err(lines.err(format!("expected day {expect}")));
        }
        let mut added = Vec::new();
        let mut pricing = Pricing::new();
        while let Some(l) = lines.peek() {
            if let Some(s) = l.strip_prefix("theorem ") {
                lines.pos += 1;
                added.push(lines.sentence(s)?);
            } else if l.contains(" = ") {
                lines.pos += 1;
                let (s, q) = lines.assignment(l)?;
                pricing
                    .set(lines.sentence(s)?, q)
                    .map_err(|e| lines.err(e.to_string()))?;
            } else {
                break;
            }
        }
        let verified = match lines.keyed("verified")? {
            "1" => true,
            "0" => false,
            other => return Err(lines.err(format!("bad verified bit `{other}`"))),
        };
        let c_n_text = lines.keyed("cn")?;
        let c_n: u64 = lines.number(c_n_text)?;
        let range = lines.keyed("firm-range")?;
        let firm_range = if range == "none" {
            None
        } else {
            let (lo, hi) = range
                .split_once(' ')
                .ok_or_else(|| lines.err("expected `firm-range lo hi`"))?;
            Some((lines.rational(lo)?, lines.rational(hi)?))
        };
        let mut issues = Vec::new();
        while let Some(rest) = lines.peek().and_then(|l| l.strip_prefix("issue ")) {
            lines.pos += 1;
            let (k, msg) = rest
                .split_once(' ')
                .ok_or_else(|| lines.err("expected `issue k reason`"))?;
            issues.push((lines.number(k)?, msg.to_string()));
        }
        if lines.next()? != "end" {
            return Err(lines.err("expected `end`"));
        }
        prefix.push_day(added.clone());
        if prefix.added(day) != added.as_slice() {
            return Err(lines.err("theorems repeat an earlier day or are out of order"));
        }
        history.push(pricing.clone());
        records.push(DayRecord {
            day,
            added,
            pricing,
            verified,
            c_n,
            firm_range,
            issues,
        });
    }

    let mut ledgers = Vec::new();
    while let Some(rest) = lines.peek().and_then(|l| l.strip_prefix("ledger ")) {
        lines.pos += 1;
        let parts: Vec<&str> = rest.split(' ').collect();
        if parts.len() != 5 || parts[1] != "days" || parts[3] != "min" {
            return Err(lines.err("expected `ledger k days d min r`"));
        }
        let k: usize = lines.number(parts[0])?;
        if k != ledgers.len() + 1 {
            return Err(lines.err(format!("expected ledger {}", ledgers.len() + 1)));
        }
        let d: usize = lines.number(parts[2])?;
        let min = if parts[4] == "none" {
            None
        } else {
            Some(lines.rational(parts[4])?)
        };
        let holdings =
            lines.combination(&format!("ledger-cash {k}"), &format!("ledger-share {k}"))?;
        ledgers.push(TraderLedger::from_parts(holdings, min, d));
    }
    let mut accumulated = Vec::new();
    while let Some(rest) = lines.peek().and_then(|l| l.strip_prefix("acc ")) {
        lines.pos += 1;
        let (k, q) = lines.assignment(rest)?;
        if lines.number::<usize>(k)? != accumulated.len() + 1 {
            return Err(lines.err("acc entries out of order"));
        }
        accumulated.push(q);
    }
    let firm_holdings = lines.combination("firm-cash", "firm-share")?;
    if lines.peek().is_some() {
        return Err(lines.err("trailing lines before checksum"));
    }
    let state = InductorState {
        fingerprint,
        records,
        history,
        prefix,
        ledgers,
        accumulated,
        firm_holdings,
    };
    Ok((state, status))
}
