use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use super::LogicError;

/// Opaque prime sentence. The name is both identifier and label; atoms order by name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Result<Atom, LogicError> {
        if is_atom_name(name) {
            Ok(Atom(Arc::from(name)))
        } else {
            Err(LogicError::BadAtom(name.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

fn is_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Propositional formula. Structural equality is the identity for pricing and trading.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sentence {
    Top,
    Bottom,
    Atom(Atom),
    Not(Arc<Sentence>),
    And(Arc<Sentence>, Arc<Sentence>),
    Or(Arc<Sentence>, Arc<Sentence>),
    Implies(Arc<Sentence>, Arc<Sentence>),
    Iff(Arc<Sentence>, Arc<Sentence>),
}

impl Sentence {
    pub fn atom(name: &str) -> Result<Sentence, LogicError> {
        Ok(Sentence::Atom(Atom::new(name)?))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Sentence {
        Sentence::Not(Arc::new(self))
    }

    pub fn and(self, other: Sentence) -> Sentence {
        Sentence::And(Arc::new(self), Arc::new(other))
    }

    pub fn or(self, other: Sentence) -> Sentence {
        Sentence::Or(Arc::new(self), Arc::new(other))
    }

    pub fn implies(self, other: Sentence) -> Sentence {
        Sentence::Implies(Arc::new(self), Arc::new(other))
    }

    pub fn iff(self, other: Sentence) -> Sentence {
        Sentence::Iff(Arc::new(self), Arc::new(other))
    }

    pub fn parse(text: &str) -> Result<Sentence, LogicError> {
        Parser::new(text).parse_all()
    }

    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    pub fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Sentence::Top | Sentence::Bottom => {}
            Sentence::Atom(a) => {
                out.insert(a.clone());
            }
            Sentence::Not(s) => s.collect_atoms(out),
            Sentence::And(a, b)
            | Sentence::Or(a, b)
            | Sentence::Implies(a, b)
            | Sentence::Iff(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Node count; atoms and constants have size 1.
    pub fn size(&self) -> usize {
        match self {
            Sentence::Top | Sentence::Bottom | Sentence::Atom(_) => 1,
            Sentence::Not(s) => 1 + s.size(),
            Sentence::And(a, b)
            | Sentence::Or(a, b)
            | Sentence::Implies(a, b)
            | Sentence::Iff(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Truth value given a lookup for atoms; `None` from the lookup means uncovered.
    pub fn eval_with<F>(&self, lookup: &F) -> Result<bool, LogicError>
    where
        F: Fn(&Atom) -> Option<bool>,
    {
        Ok(match self {
            Sentence::Top => true,
            Sentence::Bottom => false,
            Sentence::Atom(a) => lookup(a).ok_or_else(|| LogicError::UncoveredAtom(a.clone()))?,
            Sentence::Not(s) => !s.eval_with(lookup)?,
            Sentence::And(a, b) => a.eval_with(lookup)? & b.eval_with(lookup)?,
            Sentence::Or(a, b) => a.eval_with(lookup)? | b.eval_with(lookup)?,
            Sentence::Implies(a, b) => !a.eval_with(lookup)? | b.eval_with(lookup)?,
            Sentence::Iff(a, b) => a.eval_with(lookup)? == b.eval_with(lookup)?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Sentence::Iff(..) => 1,
            Sentence::Implies(..) => 2,
            Sentence::Or(..) => 3,
            Sentence::And(..) => 4,
            Sentence::Not(_) => 5,
            _ => 6,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            f.write_str("(")?;
        }
        match self {
            Sentence::Top => f.write_str("T")?,
            Sentence::Bottom => f.write_str("F")?,
            Sentence::Atom(a) => f.write_str(a.name())?,
            Sentence::Not(s) => {
                f.write_str("~")?;
                s.fmt_prec(f, 5)?;
            }
            // & and | are left-associative, the arrows right-associative.
            Sentence::And(a, b) => {
                a.fmt_prec(f, 4)?;
                f.write_str(" & ")?;
                b.fmt_prec(f, 5)?;
            }
            Sentence::Or(a, b) => {
                a.fmt_prec(f, 3)?;
                f.write_str(" | ")?;
                b.fmt_prec(f, 4)?;
            }
            Sentence::Implies(a, b) => {
                a.fmt_prec(f, 3)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 2)?;
            }
            Sentence::Iff(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" <-> ")?;
                b.fmt_prec(f, 1)?;
            }
        }
        if p < min {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Debug for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{self}`")
    }
}

impl std::str::FromStr for Sentence {
    type Err = LogicError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sentence::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Top,
    Bottom,
    Not,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    err: Option<LogicError>,
    len: usize,
}

impl Parser {
    fn new(text: &str) -> Parser {
        let mut toks = Vec::new();
        let mut err = None;
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let start = i;
            match c {
                ' ' | '\t' | '\r' | '\n' => {
                    i += 1;
                    continue;
                }
                '~' => {
                    toks.push((start, Tok::Not));
                    i += 1;
                }
                '&' => {
                    toks.push((start, Tok::And));
                    i += 1;
                }
                '|' => {
                    toks.push((start, Tok::Or));
                    i += 1;
                }
                '(' => {
                    toks.push((start, Tok::LParen));
                    i += 1;
                }
                ')' => {
                    toks.push((start, Tok::RParen));
                    i += 1;
                }
                '-' if text[i..].starts_with("->") => {
                    toks.push((start, Tok::Implies));
                    i += 2;
                }
                '<' if text[i..].starts_with("<->") => {
                    toks.push((start, Tok::Iff));
                    i += 3;
                }
                c if c.is_ascii_alphabetic() => {
                    while i < bytes.len()
                        && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                    {
                        i += 1;
                    }
                    let word = &text[start..i];
                    let tok = match word {
                        "T" => Tok::Top,
                        "F" => Tok::Bottom,
                        w if is_atom_name(w) => Tok::Ident(w.to_string()),
                        w => {
                            err.get_or_insert(LogicError::Syntax {
                                pos: start,
                                msg: format!("`{w}` is not an atom name"),
                            });
                            Tok::Top
                        }
                    };
                    toks.push((start, tok));
                }
                other => {
                    err.get_or_insert(LogicError::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{other}`"),
                    });
                    i += other.len_utf8();
                }
            }
        }
        Parser {
            toks,
            pos: 0,
            err,
            len: text.len(),
        }
    }

    fn parse_all(mut self) -> Result<Sentence, LogicError> {
        if let Some(e) = self.err.take() {
            return Err(e);
        }
        let s = self.iff()?;
        if self.pos < self.toks.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(s)
    }

    fn error(&self, msg: &str) -> LogicError {
        let pos = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        LogicError::Syntax {
            pos,
            msg: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<Sentence, LogicError> {
        let lhs = self.implies()?;
        if self.eat(&Tok::Iff) {
            let rhs = self.iff()?;
            return Ok(lhs.iff(rhs));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Sentence, LogicError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implies()?;
            return Ok(lhs.implies(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Sentence, LogicError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Sentence, LogicError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::And) {
            let rhs = self.unary()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Sentence, LogicError> {
        if self.eat(&Tok::Not) {
            return Ok(self.unary()?.not());
        }
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let s = self.iff()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("expected `)`"));
                }
                Ok(s)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Sentence::atom(&name)
            }
            Some(Tok::Top) => {
                self.pos += 1;
                Ok(Sentence::Top)
            }
            Some(Tok::Bottom) => {
                self.pos += 1;
                Ok(Sentence::Bottom)
            }
            _ => Err(self.error("expected a sentence")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Sentence {
        Sentence::parse(s).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        let a = p("a");
        let b = p("b");
        let c = p("c");
        assert_eq!(p("~a & b"), a.clone().not().and(b.clone()));
        assert_eq!(p("a | b & c"), a.clone().or(b.clone().and(c.clone())));
        assert_eq!(
            p("a -> b -> c"),
            a.clone().implies(b.clone().implies(c.clone()))
        );
        assert_eq!(p("a <-> b <-> c"), a.clone().iff(b.clone().iff(c.clone())));
        assert_eq!(p("a | b -> c"), a.clone().or(b.clone()).implies(c.clone()));
        assert_eq!(p("a & b & c"), a.clone().and(b.clone()).and(c.clone()));
        assert_eq!(p("a|b"), a.or(b));
        assert_eq!(p("T & F"), Sentence::Top.and(Sentence::Bottom));
    }

    #[test]
    fn display_reparses_to_same_tree() {
        for s in [
            "~(a & b)",
            "(a -> b) -> c",
            "a -> b -> c",
            "a & (b & c)",
            "(a | b) & ~~c",
            "(a <-> b) <-> c",
            "x_1 | T",
        ] {
            let t = p(s);
            assert_eq!(p(&t.to_string()), t, "{s}");
        }
        assert_eq!(p("a|b").to_string(), "a | b");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Sentence::parse("a &").is_err());
        assert!(Sentence::parse("(a").is_err());
        assert!(Sentence::parse("A").is_err());
        assert!(Sentence::parse("a $ b").is_err());
        assert!(Sentence::parse("").is_err());
        assert!(Sentence::parse("a b").is_err());
    }

    #[test]
    fn atoms_and_size() {
        let s = p("(a -> b) <-> (~a | b)");
        let names: Vec<_> = s.atoms().iter().map(|a| a.name().to_string()).collect();
        assert_eq!(names, ["a", "b"]);
        assert_eq!(s.size(), 8);
    }
}
