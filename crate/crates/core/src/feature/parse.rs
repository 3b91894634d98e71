use std::collections::{BTreeMap, HashMap};

use num_traits::Signed;

use super::{Direction, Feature, FeatureError, FeatureProgram, TradingStrategy};
use crate::logic::Sentence;
use crate::rational::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    /// P[sentence]@day
    Price(Sentence, usize),
    /// T[sentence], the left side of a strategy coefficient line
    Coef(Sentence),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Comma,
    Semi,
    Gt,
    Lt,
    Assign,
}

fn lex(line: &str, line_no: usize) -> Result<Vec<(usize, Tok)>, FeatureError> {
    let err = |col: usize, msg: String| FeatureError::Syntax {
        line: line_no,
        col: col + 1,
        msg,
    };
    let b = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            '>' => Some(Tok::Gt),
            '<' => Some(Tok::Lt),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((start, t));
            i += 1;
            continue;
        }
        if c == ':' {
            if b.get(i + 1) == Some(&b'=') {
                out.push((start, Tok::Assign));
                i += 2;
                continue;
            }
            return Err(err(start, "expected `:=`".into()));
        }
        if c.is_ascii_digit() || c == '.' {
            while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            // A `/` directly followed by digits continues the literal as p/q.
            if i + 1 < b.len() && b[i] == b'/' && (b[i + 1] as char).is_ascii_digit() {
                i += 1;
                while i < b.len() && ((b[i] as char).is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
            }
            let q = parse_rational(&line[start..i]).map_err(|e| err(start, e.to_string()))?;
            out.push((start, Tok::Num(q)));
            continue;
        }
        if (c == 'P' || c == 'T') && b.get(i + 1) == Some(&b'[') {
            let close = line[i..]
                .find(']')
                .map(|j| i + j)
                .ok_or_else(|| err(start, "unclosed `[`".into()))?;
            let s =
                Sentence::parse(&line[i + 2..close]).map_err(|e| err(start + 2, e.to_string()))?;
            i = close + 1;
            if c == 'T' {
                out.push((start, Tok::Coef(s)));
                continue;
            }
            if b.get(i) != Some(&b'@') {
                return Err(err(i, "expected `@<day>` after price symbol".into()));
            }
            i += 1;
            let ds = i;
            while i < b.len() && (b[i] as char).is_ascii_digit() {
                i += 1;
            }
            let day: usize = line[ds..i]
                .parse()
                .map_err(|_| err(ds, "expected a day number".into()))?;
            if day == 0 {
                return Err(FeatureError::NonPositiveDay { line: line_no });
            }
            out.push((start, Tok::Price(s, day)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(line[start..i].to_string())));
            continue;
        }
        return Err(err(start, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    line: usize,
    width: usize,
    env: &'a HashMap<String, Feature>,
}

const RESERVED: &[&str] = &["max", "min", "abs", "saferecip", "ind", "return"];

impl<'a> ExprParser<'a> {
    fn err(&self, msg: &str) -> FeatureError {
        let col = self.toks.get(self.pos).map_or(self.width, |t| t.0) + 1;
        FeatureError::Syntax {
            line: self.line,
            col,
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

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), FeatureError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(&format!("expected {what}")))
        }
    }

    fn finish(&self) -> Result<(), FeatureError> {
        if self.pos < self.toks.len() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Feature, FeatureError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                let t = self.term()?;
                acc = Feature::sum(&acc, &t);
            } else if self.eat(&Tok::Minus) {
                let t = self.term()?;
                acc = Feature::sub(&acc, &t);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Feature, FeatureError> {
        let mut acc = self.unary()?;
        while self.eat(&Tok::Star) {
            let u = self.unary()?;
            acc = Feature::product(&acc, &u);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Feature, FeatureError> {
        if self.eat(&Tok::Minus) {
            return Ok(self.unary()?.neg());
        }
        self.atom()
    }

    fn args2(&mut self) -> Result<(Feature, Feature), FeatureError> {
        self.expect(&Tok::LParen, "`(`")?;
        let a = self.expr()?;
        self.expect(&Tok::Comma, "`,`")?;
        let b = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok((a, b))
    }

    fn args1(&mut self) -> Result<Feature, FeatureError> {
        self.expect(&Tok::LParen, "`(`")?;
        let a = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(a)
    }

    fn comparison(&mut self) -> Result<Direction, FeatureError> {
        if self.eat(&Tok::Gt) {
            Ok(Direction::Greater)
        } else if self.eat(&Tok::Lt) {
            Ok(Direction::Less)
        } else {
            Err(self.err("expected `>` or `<`"))
        }
    }

    /// ind(δ; x > y), ind(δ; x < y), ind(δ; a < x < b)
    fn ind(&mut self) -> Result<Feature, FeatureError> {
        self.expect(&Tok::LParen, "`(`")?;
        let delta = self.expr()?;
        let delta = delta
            .as_const()
            .cloned()
            .ok_or_else(|| self.err("ind width must be a constant"))?;
        if !delta.is_positive() {
            return Err(FeatureError::NonPositiveDelta(delta.to_string()));
        }
        self.expect(&Tok::Semi, "`;`")?;
        let x = self.expr()?;
        let d1 = self.comparison()?;
        let y = self.expr()?;
        let out = if matches!(self.peek(), Some(Tok::Gt) | Some(Tok::Lt)) {
            let d2 = self.comparison()?;
            let z = self.expr()?;
            match (d1, d2) {
                (Direction::Less, Direction::Less) => Feature::ind_between(&delta, &x, &y, &z)?,
                (Direction::Greater, Direction::Greater) => {
                    Feature::ind_between(&delta, &z, &y, &x)?
                }
                _ => return Err(self.err("two-sided ind needs matching comparisons")),
            }
        } else {
            Feature::ind(&delta, &x, &y, d1)?
        };
        self.expect(&Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn atom(&mut self) -> Result<Feature, FeatureError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err("expected an expression"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(q) => Ok(Feature::constant(q)),
            Tok::Price(s, d) => Ok(Feature::price(s, d)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "max" => {
                    let (a, b) = self.args2()?;
                    Ok(Feature::max(&a, &b))
                }
                "min" => {
                    let (a, b) = self.args2()?;
                    Ok(Feature::min(&a, &b))
                }
                "abs" => Ok(self.args1()?.abs()),
                "saferecip" => Ok(Feature::safe_recip(&self.args1()?)),
                "ind" => self.ind(),
                _ => self
                    .env
                    .get(&name)
                    .cloned()
                    .ok_or(FeatureError::UndefinedVariable {
                        name,
                        line: self.line,
                    }),
            },
            _ => {
                self.pos -= 1;
                Err(self.err("expected an expression"))
            }
        }
    }
}

fn parse_expr(
    toks: Vec<(usize, Tok)>,
    line: usize,
    width: usize,
    env: &HashMap<String, Feature>,
) -> Result<Feature, FeatureError> {
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        width,
        env,
    };
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Returns the binding name when `toks` starts with `<ident> :=`.
fn binding_head(toks: &[(usize, Tok)], line: usize) -> Result<Option<String>, FeatureError> {
    match (toks.first(), toks.get(1)) {
        (Some((_, Tok::Ident(name))), Some((_, Tok::Assign))) => {
            if RESERVED.contains(&name.as_str()) {
                return Err(FeatureError::Syntax {
                    line,
                    col: 1,
                    msg: format!("`{name}` is reserved"),
                });
            }
            Ok(Some(name.clone()))
        }
        _ => Ok(None),
    }
}

/// `v<k> := expr` lines followed by `return expr`.
pub fn parse_feature_program(text: &str) -> Result<FeatureProgram, FeatureError> {
    let mut env: HashMap<String, Feature> = HashMap::new();
    let mut bindings = Vec::new();
    let mut ret = None;
    for (line_no, line) in significant_lines(text) {
        if ret.is_some() {
            return Err(FeatureError::Syntax {
                line: line_no,
                col: 1,
                msg: "input after `return`".into(),
            });
        }
        let toks = lex(line, line_no)?;
        if let Some(name) = binding_head(&toks, line_no)? {
            let e = parse_expr(toks[2..].to_vec(), line_no, line.len(), &env)?;
            env.insert(name.clone(), e.clone());
            bindings.push((name, e));
        } else if matches!(toks.first(), Some((_, Tok::Ident(k))) if k == "return") {
            ret = Some(parse_expr(toks[1..].to_vec(), line_no, line.len(), &env)?);
        } else {
            return Err(FeatureError::Syntax {
                line: line_no,
                col: 1,
                msg: "expected `name := expr` or `return expr`".into(),
            });
        }
    }
    let ret = ret.ok_or(FeatureError::Syntax {
        line: text.lines().count().max(1),
        col: 1,
        msg: "missing `return`".into(),
    })?;
    Ok(FeatureProgram::new(bindings, ret))
}

/// `name := expr` bindings and `T[<sentence>] := expr` coefficient lines, forming a day-`day`
/// strategy. Repeated coefficient lines for one sentence add up.
pub fn parse_strategy(text: &str, day: usize) -> Result<TradingStrategy, FeatureError> {
    let mut env: HashMap<String, Feature> = HashMap::new();
    let mut coefficients: BTreeMap<Sentence, Feature> = BTreeMap::new();
    for (line_no, line) in significant_lines(text) {
        let toks = lex(line, line_no)?;
        if let Some(name) = binding_head(&toks, line_no)? {
            let e = parse_expr(toks[2..].to_vec(), line_no, line.len(), &env)?;
            env.insert(name, e);
        } else if let (Some((_, Tok::Coef(s))), Some((_, Tok::Assign))) =
            (toks.first(), toks.get(1))
        {
            let s = s.clone();
            let e = parse_expr(toks[2..].to_vec(), line_no, line.len(), &env)?;
            let merged = match coefficients.remove(&s) {
                Some(prev) => Feature::sum(&prev, &e),
                None => e,
            };
            coefficients.insert(s, merged);
        } else {
            return Err(FeatureError::Syntax {
                line: line_no,
                col: 1,
                msg: "expected `name := expr` or `T[sentence] := expr`".into(),
            });
        }
    }
    TradingStrategy::new(day, coefficients)
}
