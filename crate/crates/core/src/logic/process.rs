use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{Atom, LogicError, Sentence, TheoremSet};
use crate::pricing::ValuationHistory;
use crate::rational::Rational;
use crate::template;

/// A nested sequence D₁ ⊆ D₂ ⊆ … revealed one day at a time.
pub trait DeductiveProcess: Send {
    /// Sentences first asserted on day `n`. May read committed prices of days `< n` only.
    fn new_sentences(
        &mut self,
        n: usize,
        history: &ValuationHistory,
    ) -> Result<Vec<Sentence>, LogicError>;

    /// Atoms declared available by day `n`.
    fn universe(&self, n: usize) -> BTreeSet<Atom>;
}

/// Frozen D₀ = ∅, D₁, …, Dₙ with the per-day additions.
#[derive(Clone, Debug, PartialEq)]
pub struct DeductivePrefix {
    sets: Vec<Arc<TheoremSet>>,
    added: Vec<Vec<Sentence>>,
}

impl Default for DeductivePrefix {
    fn default() -> Self {
        DeductivePrefix {
            sets: vec![Arc::new(TheoremSet::empty())],
            added: vec![Vec::new()],
        }
    }
}

impl DeductivePrefix {
    pub fn new() -> DeductivePrefix {
        DeductivePrefix::default()
    }

    /// Number of frozen days.
    pub fn len(&self) -> usize {
        self.sets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dₘ; D₀ is empty.
    pub fn get(&self, m: usize) -> &Arc<TheoremSet> {
        &self.sets[m]
    }

    pub fn added(&self, m: usize) -> &[Sentence] {
        &self.added[m]
    }

    /// Freezes the next day from its new sentences (already-present ones are dropped).
    pub fn push_day(&mut self, new: Vec<Sentence>) {
        let last = self.sets.last().unwrap().clone();
        let fresh: BTreeSet<Sentence> = new.into_iter().filter(|s| !last.contains(s)).collect();
        if fresh.is_empty() {
            self.sets.push(last);
        } else {
            self.sets
                .push(Arc::new(last.extended(fresh.iter().cloned())));
        }
        self.added.push(fresh.into_iter().collect());
    }

    /// Drops every day after `days`.
    pub fn truncate(&mut self, days: usize) {
        self.sets.truncate(days + 1);
        self.added.truncate(days + 1);
    }

    /// Queries `process` for day len+1.
    pub fn advance(
        &mut self,
        process: &mut dyn DeductiveProcess,
        history: &ValuationHistory,
    ) -> Result<(), LogicError> {
        let n = self.len() + 1;
        let new = process.new_sentences(n, history)?;
        self.push_day(new);
        Ok(())
    }

    pub fn from_script(
        process: &mut dyn DeductiveProcess,
        days: usize,
    ) -> Result<DeductivePrefix, LogicError> {
        let mut p = DeductivePrefix::new();
        let h = ValuationHistory::new();
        for _ in 0..days {
            p.advance(process, &h)?;
        }
        Ok(p)
    }
}

/// Sentences listed per day in a text file.
#[derive(Clone, Debug, Default)]
pub struct ScriptedProcess {
    declared: BTreeSet<Atom>,
    by_day: BTreeMap<usize, Vec<Sentence>>,
}

impl ScriptedProcess {
    /// Parses `N: s; s` lines and `atoms: a, b` declarations. When any atoms are declared
    /// (in the file or via `declared`), sentences over other atoms are rejected.
    pub fn parse(text: &str, declared: &BTreeSet<Atom>) -> Result<ScriptedProcess, LogicError> {
        let mut decl = declared.clone();
        let mut entries: Vec<(usize, usize, Sentence)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| LogicError::Script { line: line_no, msg };
            let (head, body) = line
                .split_once(':')
                .ok_or_else(|| err("expected `N: sentence`".into()))?;
            let head = head.trim();
            if head == "atoms" {
                for name in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    decl.insert(Atom::new(name).map_err(|e| err(e.to_string()))?);
                }
                continue;
            }
            let day: usize = head
                .parse()
                .map_err(|_| err(format!("`{head}` is not a day number")))?;
            if day == 0 {
                return Err(err("day numbers start at 1".into()));
            }
            for part in body.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let s = Sentence::parse(part).map_err(|e| err(e.to_string()))?;
                entries.push((line_no, day, s));
            }
        }
        let mut by_day: BTreeMap<usize, Vec<Sentence>> = BTreeMap::new();
        for (line, day, s) in entries {
            if !decl.is_empty() {
                if let Some(a) = s.atoms().into_iter().find(|a| !decl.contains(a)) {
                    return Err(LogicError::Script {
                        line,
                        msg: format!("undeclared atom `{a}`"),
                    });
                }
            }
            by_day.entry(day).or_default().push(s);
        }
        Ok(ScriptedProcess {
            declared: decl,
            by_day,
        })
    }

    /// Dₙ as a set, without freezing a prefix.
    pub fn theorems(&self, n: usize) -> BTreeSet<Sentence> {
        self.by_day
            .range(1..=n)
            .flat_map(|(_, v)| v.iter().cloned())
            .collect()
    }
}

impl DeductiveProcess for ScriptedProcess {
    fn new_sentences(
        &mut self,
        n: usize,
        _history: &ValuationHistory,
    ) -> Result<Vec<Sentence>, LogicError> {
        Ok(self.by_day.get(&n).cloned().unwrap_or_default())
    }

    fn universe(&self, n: usize) -> BTreeSet<Atom> {
        let mut u = self.declared.clone();
        for s in self.theorems(n) {
            s.collect_atoms(&mut u);
        }
        u
    }
}

/// Dₙ = sentences of size ≤ min(n, max_size) over the first schedule(n) atoms that hold in
/// every assignment satisfying the axioms.
pub struct SaturationProcess {
    atoms: Vec<Atom>,
    schedule: Vec<usize>,
    max_size: usize,
    axiom_atoms: Vec<Atom>,
    axioms: Vec<Sentence>,
    emitted: BTreeSet<Sentence>,
}

impl SaturationProcess {
    /// `schedule[i]` is the number of atoms available on day i+1; the last entry repeats.
    pub fn new(
        axioms: Vec<Sentence>,
        atoms: Vec<Atom>,
        schedule: Vec<usize>,
        max_size: usize,
    ) -> Result<SaturationProcess, LogicError> {
        if schedule.is_empty() {
            return Err(LogicError::Config("atom schedule is empty".into()));
        }
        if schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(LogicError::Config("atom schedule is not monotone".into()));
        }
        if *schedule.last().unwrap() > atoms.len() {
            return Err(LogicError::Config(
                "atom schedule exceeds the declared atoms".into(),
            ));
        }
        let mut ax = BTreeSet::new();
        for s in &axioms {
            s.collect_atoms(&mut ax);
        }
        let total: BTreeSet<Atom> = ax.iter().chain(atoms.iter()).cloned().collect();
        if total.len() > 16 {
            return Err(LogicError::AtomCap {
                atoms: total.len(),
                cap: 16,
            });
        }
        Ok(SaturationProcess {
            atoms,
            schedule,
            max_size,
            axiom_atoms: ax.into_iter().collect(),
            axioms,
            emitted: BTreeSet::new(),
        })
    }

    fn available(&self, n: usize) -> usize {
        self.schedule[(n - 1).min(self.schedule.len() - 1)]
    }

    /// All theorems of day n in enumeration order.
    pub fn theorems(&self, n: usize) -> Vec<Sentence> {
        let k = self.available(n);
        let pool: Vec<Atom> = self.atoms[..k].to_vec();
        let universe: Vec<Atom> = {
            let mut u: BTreeSet<Atom> = self.axiom_atoms.iter().cloned().collect();
            u.extend(pool.iter().cloned());
            u.into_iter().collect()
        };
        let rows = 1usize << universe.len();
        let index: BTreeMap<&Atom, usize> =
            universe.iter().enumerate().map(|(i, a)| (a, i)).collect();
        let table_of_atom = |a: &Atom| -> Table {
            let i = index[a];
            Table::from_fn(rows, |r| r >> (universe.len() - 1 - i) & 1 == 1)
        };
        let mut models = Table::from_fn(rows, |_| true);
        for ax in &self.axioms {
            models = models.and(&table_for(ax, &table_of_atom, rows));
        }
        let size_cap = n.min(self.max_size);
        let mut by_size: Vec<Vec<(Sentence, Table)>> = vec![Vec::new(); size_cap + 1];
        if size_cap >= 1 {
            by_size[1].push((Sentence::Top, Table::from_fn(rows, |_| true)));
            by_size[1].push((Sentence::Bottom, Table::from_fn(rows, |_| false)));
            for a in &pool {
                by_size[1].push((Sentence::Atom(a.clone()), table_of_atom(a)));
            }
        }
        for size in 2..=size_cap {
            let mut level = Vec::new();
            for (s, t) in &by_size[size - 1] {
                level.push((s.clone().not(), t.not()));
            }
            for left in 1..size - 1 {
                let right = size - 1 - left;
                for (ls, lt) in &by_size[left] {
                    for (rs, rt) in &by_size[right] {
                        level.push((ls.clone().and(rs.clone()), lt.and(rt)));
                        level.push((ls.clone().or(rs.clone()), lt.or(rt)));
                        level.push((ls.clone().implies(rs.clone()), lt.not().or(rt)));
                        level.push((ls.clone().iff(rs.clone()), lt.iff(rt)));
                    }
                }
            }
            by_size[size] = level;
        }
        by_size
            .into_iter()
            .flatten()
            .filter(|(_, t)| models.implies_all(t))
            .map(|(s, _)| s)
            .collect()
    }
}

fn table_for<F: Fn(&Atom) -> Table>(s: &Sentence, atom: &F, rows: usize) -> Table {
    match s {
        Sentence::Top => Table::from_fn(rows, |_| true),
        Sentence::Bottom => Table::from_fn(rows, |_| false),
        Sentence::Atom(a) => atom(a),
        Sentence::Not(x) => table_for(x, atom, rows).not(),
        Sentence::And(a, b) => table_for(a, atom, rows).and(&table_for(b, atom, rows)),
        Sentence::Or(a, b) => table_for(a, atom, rows).or(&table_for(b, atom, rows)),
        Sentence::Implies(a, b) => table_for(a, atom, rows).not().or(&table_for(b, atom, rows)),
        Sentence::Iff(a, b) => table_for(a, atom, rows).iff(&table_for(b, atom, rows)),
    }
}

/// Truth table as a bitset over assignment rows.
#[derive(Clone, Debug)]
struct Table {
    words: Vec<u64>,
    rows: usize,
}

impl Table {
    fn from_fn(rows: usize, f: impl Fn(usize) -> bool) -> Table {
        let mut words = vec![0u64; rows.div_ceil(64)];
        for r in 0..rows {
            if f(r) {
                words[r / 64] |= 1 << (r % 64);
            }
        }
        Table { words, rows }
    }

    fn mask(&self, i: usize) -> u64 {
        let used = self.rows - i * 64;
        if used >= 64 {
            u64::MAX
        } else {
            (1u64 << used) - 1
        }
    }

    fn zip(&self, o: &Table, f: impl Fn(u64, u64) -> u64) -> Table {
        let words = self
            .words
            .iter()
            .zip(&o.words)
            .enumerate()
            .map(|(i, (a, b))| f(*a, *b) & self.mask(i))
            .collect();
        Table {
            words,
            rows: self.rows,
        }
    }

    fn not(&self) -> Table {
        let words = self
            .words
            .iter()
            .enumerate()
            .map(|(i, a)| !a & self.mask(i))
            .collect();
        Table {
            words,
            rows: self.rows,
        }
    }

    fn and(&self, o: &Table) -> Table {
        self.zip(o, |a, b| a & b)
    }

    fn or(&self, o: &Table) -> Table {
        self.zip(o, |a, b| a | b)
    }

    fn iff(&self, o: &Table) -> Table {
        self.zip(o, |a, b| !(a ^ b))
    }

    /// Every row set in `self` is set in `t`.
    fn implies_all(&self, t: &Table) -> bool {
        self.words.iter().zip(&t.words).all(|(m, x)| m & !x == 0)
    }
}

impl DeductiveProcess for SaturationProcess {
    fn new_sentences(
        &mut self,
        n: usize,
        _history: &ValuationHistory,
    ) -> Result<Vec<Sentence>, LogicError> {
        let fresh: Vec<Sentence> = self
            .theorems(n)
            .into_iter()
            .filter(|s| !self.emitted.contains(s))
            .collect();
        self.emitted.extend(fresh.iter().cloned());
        Ok(fresh)
    }

    fn universe(&self, n: usize) -> BTreeSet<Atom> {
        let mut u: BTreeSet<Atom> = self.atoms[..self.available(n)].iter().cloned().collect();
        u.extend(self.axiom_atoms.iter().cloned());
        u
    }
}

/// A base script plus paradox sentences χₙ: on day n+lag, asserts χₙ if Pₙ(χₙ) < threshold
/// and ¬χₙ otherwise.
pub struct ReflectiveProcess {
    base: ScriptedProcess,
    lag: usize,
    threshold: Rational,
    template: String,
}

impl ReflectiveProcess {
    pub fn new(
        base: ScriptedProcess,
        lag: usize,
        threshold: Rational,
        template: &str,
    ) -> Result<ReflectiveProcess, LogicError> {
        if lag == 0 {
            return Err(LogicError::Config(
                "reflective lag must be at least 1".into(),
            ));
        }
        let probe =
            template::instantiate(template, 1).map_err(|e| LogicError::Config(e.to_string()))?;
        Sentence::parse(&probe)?;
        Ok(ReflectiveProcess {
            base,
            lag,
            threshold,
            template: template.to_string(),
        })
    }

    pub fn paradox_sentence(&self, n: usize) -> Result<Sentence, LogicError> {
        let text = template::instantiate(&self.template, n)
            .map_err(|e| LogicError::Config(e.to_string()))?;
        Sentence::parse(&text)
    }
}

impl DeductiveProcess for ReflectiveProcess {
    fn new_sentences(
        &mut self,
        n: usize,
        history: &ValuationHistory,
    ) -> Result<Vec<Sentence>, LogicError> {
        let mut out = self.base.new_sentences(n, history)?;
        if n > self.lag {
            let m = n - self.lag;
            if history.len() < m {
                return Err(LogicError::Config(format!(
                    "reflective process needs prices of day {m}"
                )));
            }
            let chi = self.paradox_sentence(m)?;
            if history.day(m).price(&chi) < self.threshold {
                out.push(chi);
            } else {
                out.push(chi.not());
            }
        }
        Ok(out)
    }

    fn universe(&self, n: usize) -> BTreeSet<Atom> {
        let mut u = self.base.universe(n);
        for m in 1..=n {
            if let Ok(s) = self.paradox_sentence(m) {
                s.collect_atoms(&mut u);
            }
        }
        u
    }
}
