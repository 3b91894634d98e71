//! Catalog entries: `name(key=value, ...)` built-ins and `program:<file>` templates.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::auditors::{
    BuyTrader, CoherenceTrader, ConvergenceTrader, NondogmatismTrader, PseudorandomTrader,
    ZeroTrader,
};
use super::template::{SentenceSeq, TemplateTrader};
use super::{NamedTrader, Trader, TraderError};
use crate::logic::Sentence;
use crate::rational::{self, parse_rational, Rational};

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogValue {
    Str(String),
    Num(Rational),
    List(Vec<CatalogValue>),
}

impl fmt::Display for CatalogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatalogValue::Str(s) => write!(f, "\"{s}\""),
            CatalogValue::Num(x) => write!(f, "{}", rational::fmt_exact(x)),
            CatalogValue::List(items) => {
                let parts: Vec<String> = items.iter().map(|v| v.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CatalogEntry {
    Builtin {
        name: String,
        args: BTreeMap<String, CatalogValue>,
    },
    Program(PathBuf),
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{c}` at offset {}", self.pos))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !(c.is_ascii_alphanumeric() || c == '_') {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a name at offset {start}"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn value(&mut self) -> Result<CatalogValue, String> {
        self.skip_ws();
        match self.peek() {
            Some('"') => {
                self.pos += 1;
                let rest = &self.src[self.pos..];
                let end = rest.find('"').ok_or("unterminated string")?;
                let s = rest[..end].to_string();
                self.pos += end + 1;
                Ok(CatalogValue::Str(s))
            }
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.eat(']') {
                    return Ok(CatalogValue::List(items));
                }
                loop {
                    items.push(self.value()?);
                    if self.eat(']') {
                        return Ok(CatalogValue::List(items));
                    }
                    self.expect(',')?;
                }
            }
            _ => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if !(c.is_ascii_digit() || matches!(c, '/' | '.' | '-' | '+')) {
                        break;
                    }
                    self.pos += 1;
                }
                let text = &self.src[start..self.pos];
                parse_rational(text)
                    .map(CatalogValue::Num)
                    .map_err(|e| format!("bad number `{text}`: {e}"))
            }
        }
    }
}

pub fn parse_catalog_entry(text: &str) -> Result<CatalogEntry, TraderError> {
    let err = |msg: String| TraderError::Catalog {
        entry: text.to_string(),
        msg,
    };
    let trimmed = text.trim();
    if let Some(path) = trimmed.strip_prefix("program:") {
        let path = path.trim();
        if path.is_empty() {
            return Err(err("missing program path".into()));
        }
        return Ok(CatalogEntry::Program(PathBuf::from(path)));
    }
    let mut c = Cursor {
        src: trimmed,
        pos: 0,
    };
    let name = c.ident().map_err(err)?;
    let mut args = BTreeMap::new();
    if c.eat('(') && !c.eat(')') {
        loop {
            let key = c.ident().map_err(err)?;
            c.expect('=').map_err(err)?;
            let v = c.value().map_err(err)?;
            if args.insert(key.clone(), v).is_some() {
                return Err(err(format!("duplicate key `{key}`")));
            }
            if c.eat(')') {
                break;
            }
            c.expect(',').map_err(err)?;
        }
    }
    c.skip_ws();
    if c.pos != trimmed.len() {
        return Err(err(format!("trailing input at offset {}", c.pos)));
    }
    Ok(CatalogEntry::Builtin { name, args })
}

struct Args<'a> {
    entry: &'a str,
    map: &'a BTreeMap<String, CatalogValue>,
    allowed: &'a [&'a str],
}

impl Args<'_> {
    fn err(&self, msg: String) -> TraderError {
        TraderError::Catalog {
            entry: self.entry.to_string(),
            msg,
        }
    }

    fn check_keys(&self) -> Result<(), TraderError> {
        for k in self.map.keys() {
            if !self.allowed.contains(&k.as_str()) {
                return Err(self.err(format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }

    fn sentence(&self, key: &str) -> Result<Option<Sentence>, TraderError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(CatalogValue::Str(s)) => Ok(Some(Sentence::parse(s)?)),
            Some(v) => Err(self.err(format!("`{key}` must be a quoted sentence, got {v}"))),
        }
    }

    fn req_sentence(&self, key: &str) -> Result<Sentence, TraderError> {
        self.sentence(key)?
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    fn num(&self, key: &str) -> Result<Option<Rational>, TraderError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(CatalogValue::Num(x)) => Ok(Some(x.clone())),
            Some(v) => Err(self.err(format!("`{key}` must be a number, got {v}"))),
        }
    }

    fn req_num(&self, key: &str) -> Result<Rational, TraderError> {
        self.num(key)?
            .ok_or_else(|| self.err(format!("missing `{key}`")))
    }

    fn day(&self, key: &str, default: usize) -> Result<usize, TraderError> {
        match self.num(key)? {
            None => Ok(default),
            Some(x) if x.is_integer() && x >= rational::one() => x
                .to_integer()
                .try_into()
                .map_err(|_| self.err(format!("`{key}` is too large"))),
            Some(x) => Err(self.err(format!("`{key}` must be a positive integer, got {x}"))),
        }
    }
}

/// Builds the traders named by one entry; `coherence` without `which` yields all four.
/// Program paths are resolved against `base`.
pub fn build_traders(entry_text: &str, base: &Path) -> Result<Vec<NamedTrader>, TraderError> {
    let entry = parse_catalog_entry(entry_text)?;
    let label = entry_text.trim().to_string();
    let (name, map) = match &entry {
        CatalogEntry::Program(path) => {
            let full = base.join(path);
            let text = std::fs::read_to_string(&full).map_err(|e| TraderError::Catalog {
                entry: label.clone(),
                msg: format!("reading {}: {e}", full.display()),
            })?;
            let t: Arc<dyn Trader> = Arc::new(TemplateTrader::new(
                &format!("program:{}", path.display()),
                &text,
            ));
            return Ok(vec![(label, t)]);
        }
        CatalogEntry::Builtin { name, args } => (name.as_str(), args),
    };
    let allowed: &[&str] = match name {
        "zero" => &[],
        "buy" => &["phi", "amount", "start"],
        "convergence" => &["phi", "p", "eps"],
        "coherence" => &["phi", "psi", "start", "which"],
        "nondogmatism" => &["phi"],
        "pseudorandom" => &["seq", "seq_template", "p", "eps"],
        other => {
            return Err(TraderError::Catalog {
                entry: label,
                msg: format!("unknown trader `{other}`"),
            })
        }
    };
    let a = Args {
        entry: &label,
        map,
        allowed,
    };
    a.check_keys()?;
    let one = |t: Arc<dyn Trader>| Ok(vec![(label.clone(), t)]);
    match name {
        "zero" => one(Arc::new(ZeroTrader)),
        "buy" => one(Arc::new(BuyTrader {
            phi: a.req_sentence("phi")?,
            amount: a.num("amount")?.unwrap_or_else(rational::one),
            start: a.day("start", 1)?,
        })),
        "convergence" => one(Arc::new(ConvergenceTrader::new(
            a.req_sentence("phi")?,
            a.req_num("p")?,
            a.req_num("eps")?,
        )?)),
        "nondogmatism" => one(Arc::new(NondogmatismTrader::new(a.req_sentence("phi")?))),
        "coherence" => {
            let phi = a.req_sentence("phi")?;
            let psi = a.sentence("psi")?;
            let start = a.day("start", 1)?;
            let which: Vec<u8> = match a.num("which")? {
                Some(w) if w.is_integer() && w >= rational::one() && w <= rational::int(4) => {
                    vec![w.to_integer().try_into().expect("in 1..=4")]
                }
                Some(w) => return Err(a.err(format!("`which` must be 1, 2, 3 or 4, got {w}"))),
                None if psi.is_some() => vec![1, 2, 3, 4],
                None => vec![1, 2],
            };
            let mut out: Vec<(String, Arc<dyn Trader>)> = Vec::new();
            for w in which {
                let t = CoherenceTrader::new(w, phi.clone(), psi.clone(), start)?;
                out.push((format!("{label}#{w}"), Arc::new(t)));
            }
            if out.len() == 1 {
                out[0].0 = label.clone();
            }
            Ok(out)
        }
        "pseudorandom" => {
            let seq = match (a.map.get("seq"), a.map.get("seq_template")) {
                (Some(CatalogValue::List(items)), None) => {
                    let mut list = Vec::new();
                    for v in items {
                        match v {
                            CatalogValue::Str(s) => list.push(Sentence::parse(s)?),
                            other => {
                                return Err(a.err(format!(
                                    "`seq` items must be quoted sentences, got {other}"
                                )))
                            }
                        }
                    }
                    if list.is_empty() {
                        return Err(a.err("`seq` is empty".into()));
                    }
                    SentenceSeq::Cycle(list)
                }
                (None, Some(CatalogValue::Str(t))) => SentenceSeq::Template(t.clone()),
                _ => {
                    return Err(
                        a.err("give exactly one of `seq=[...]` or `seq_template=\"...\"`".into())
                    )
                }
            };
            one(Arc::new(PseudorandomTrader::new(
                seq,
                a.req_num("p")?,
                a.req_num("eps")?,
            )?))
        }
        _ => unreachable!("name checked above"),
    }
}
