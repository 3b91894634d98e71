use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use super::{Atom, LogicError, Sentence};

pub const DEFAULT_ATOM_CAP: usize = 20;

/// Truth assignment over a finite atom set.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct World {
    assignment: BTreeMap<Atom, bool>,
}

impl World {
    pub fn new(assignment: BTreeMap<Atom, bool>) -> World {
        World { assignment }
    }

    pub fn get(&self, atom: &Atom) -> Option<bool> {
        self.assignment.get(atom).copied()
    }

    pub fn assignment(&self) -> &BTreeMap<Atom, bool> {
        &self.assignment
    }

    pub fn domain(&self) -> impl Iterator<Item = &Atom> {
        self.assignment.keys()
    }

    pub fn eval(&self, s: &Sentence) -> Result<bool, LogicError> {
        s.eval_with(&|a: &Atom| self.get(a))
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (a, v)) in self.assignment.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}={}", u8::from(*v))?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn eval_sentence(w: &World, s: &Sentence) -> Result<bool, LogicError> {
    w.eval(s)
}

/// Sentence compiled against a fixed atom indexing; evaluates on bitmasks.
struct Compiled {
    ops: Vec<BitOp>,
}

#[derive(Clone, Copy)]
enum BitOp {
    Const(bool),
    Var(u32),
    Not,
    And,
    Or,
    Implies,
    Iff,
}

impl Compiled {
    fn new(s: &Sentence, index: &HashMap<Atom, u32>) -> Result<Compiled, LogicError> {
        let mut ops = Vec::new();
        Self::emit(s, index, &mut ops)?;
        Ok(Compiled { ops })
    }

    fn emit(
        s: &Sentence,
        index: &HashMap<Atom, u32>,
        ops: &mut Vec<BitOp>,
    ) -> Result<(), LogicError> {
        match s {
            Sentence::Top => ops.push(BitOp::Const(true)),
            Sentence::Bottom => ops.push(BitOp::Const(false)),
            Sentence::Atom(a) => {
                let i = index
                    .get(a)
                    .ok_or_else(|| LogicError::UncoveredAtom(a.clone()))?;
                ops.push(BitOp::Var(*i));
            }
            Sentence::Not(x) => {
                Self::emit(x, index, ops)?;
                ops.push(BitOp::Not);
            }
            Sentence::And(a, b)
            | Sentence::Or(a, b)
            | Sentence::Implies(a, b)
            | Sentence::Iff(a, b) => {
                Self::emit(a, index, ops)?;
                Self::emit(b, index, ops)?;
                ops.push(match s {
                    Sentence::And(..) => BitOp::And,
                    Sentence::Or(..) => BitOp::Or,
                    Sentence::Implies(..) => BitOp::Implies,
                    _ => BitOp::Iff,
                });
            }
        }
        Ok(())
    }

    fn eval(&self, bits: u64, stack: &mut Vec<bool>) -> bool {
        stack.clear();
        for op in &self.ops {
            let v = match *op {
                BitOp::Const(c) => c,
                BitOp::Var(i) => bits >> i & 1 == 1,
                BitOp::Not => !stack.pop().unwrap(),
                BitOp::And | BitOp::Or | BitOp::Implies | BitOp::Iff => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match *op {
                        BitOp::And => a & b,
                        BitOp::Or => a | b,
                        BitOp::Implies => !a | b,
                        _ => a == b,
                    }
                }
            };
            stack.push(v);
        }
        stack.pop().unwrap()
    }
}

/// Bit positions: atom at sorted position j of `width` gets bit `width-1-j`,
/// so counting upward enumerates assignments lexicographically in atom order.
fn bit_index(atoms: &[Atom]) -> HashMap<Atom, u32> {
    let w = atoms.len() as u32;
    atoms
        .iter()
        .enumerate()
        .map(|(j, a)| (a.clone(), w - 1 - j as u32))
        .collect()
}

fn world_from_bits(atoms: &[Atom], bits: u64) -> World {
    let w = atoms.len() as u32;
    let assignment = atoms
        .iter()
        .enumerate()
        .map(|(j, a)| (a.clone(), bits >> (w - 1 - j as u32) & 1 == 1))
        .collect();
    World { assignment }
}

fn check_cap(n: usize, cap: usize) -> Result<(), LogicError> {
    if n > cap || n > 62 {
        Err(LogicError::AtomCap { atoms: n, cap })
    } else {
        Ok(())
    }
}

/// Every assignment over `atoms` satisfying all of `d`, in lexicographic atom order.
pub fn plausible_worlds<'a, I>(
    d: I,
    atoms: &BTreeSet<Atom>,
    cap: usize,
) -> Result<Vec<World>, LogicError>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let order: Vec<Atom> = atoms.iter().cloned().collect();
    check_cap(order.len(), cap)?;
    let index = bit_index(&order);
    let compiled = d
        .into_iter()
        .map(|s| Compiled::new(s, &index))
        .collect::<Result<Vec<_>, _>>()?;
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for bits in 0..(1u64 << order.len()) {
        if compiled.iter().all(|c| c.eval(bits, &mut stack)) {
            out.push(world_from_bits(&order, bits));
        }
    }
    Ok(out)
}

/// A finite theorem set D with cached world projections.
pub struct TheoremSet {
    sentences: BTreeSet<Sentence>,
    atoms: BTreeSet<Atom>,
    cache: Mutex<HashMap<Vec<Atom>, Projection>>,
}

#[derive(Clone)]
struct Projection {
    worlds: Arc<Vec<World>>,
    cost: u64,
}

impl fmt::Debug for TheoremSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sentences.iter()).finish()
    }
}

impl PartialEq for TheoremSet {
    fn eq(&self, other: &Self) -> bool {
        self.sentences == other.sentences
    }
}

impl TheoremSet {
    pub fn new(sentences: BTreeSet<Sentence>) -> TheoremSet {
        let mut atoms = BTreeSet::new();
        for s in &sentences {
            s.collect_atoms(&mut atoms);
        }
        TheoremSet {
            sentences,
            atoms,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn empty() -> TheoremSet {
        TheoremSet::new(BTreeSet::new())
    }

    pub fn sentences(&self) -> &BTreeSet<Sentence> {
        &self.sentences
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn contains(&self, s: &Sentence) -> bool {
        self.sentences.contains(s)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn extended(&self, extra: impl IntoIterator<Item = Sentence>) -> TheoremSet {
        let mut s = self.sentences.clone();
        s.extend(extra);
        TheoremSet::new(s)
    }

    /// Literal enumeration over atoms(D) ∪ `extra`.
    pub fn plausible_worlds(
        &self,
        extra: &BTreeSet<Atom>,
        cap: usize,
    ) -> Result<Vec<World>, LogicError> {
        let atoms: BTreeSet<Atom> = self.atoms.union(extra).cloned().collect();
        plausible_worlds(self.sentences.iter(), &atoms, cap)
    }

    /// Restrictions to `focus` of the plausible worlds over atoms(D) ∪ focus, deduplicated and
    /// in lexicographic order. Sentences are grouped into atom-connected components; only the
    /// components touching `focus` are enumerated jointly, the others are checked for
    /// satisfiability on their own. The cap applies per enumerated group.
    pub fn project_worlds(
        &self,
        focus: &BTreeSet<Atom>,
        cap: usize,
    ) -> Result<Arc<Vec<World>>, LogicError> {
        Ok(self.projection(focus, cap)?.worlds)
    }

    /// Number of assignments the factored enumeration behind `project_worlds` visits.
    pub fn projection_cost(&self, focus: &BTreeSet<Atom>, cap: usize) -> Result<u64, LogicError> {
        Ok(self.projection(focus, cap)?.cost)
    }

    fn projection(&self, focus: &BTreeSet<Atom>, cap: usize) -> Result<Projection, LogicError> {
        let key: Vec<Atom> = focus.iter().cloned().collect();
        if let Some(p) = self.cache.lock().unwrap().get(&key) {
            return Ok(p.clone());
        }
        let p = self.compute_projection(focus, cap)?;
        self.cache.lock().unwrap().insert(key, p.clone());
        Ok(p)
    }

    fn compute_projection(
        &self,
        focus: &BTreeSet<Atom>,
        cap: usize,
    ) -> Result<Projection, LogicError> {
        let groups = self.components();
        let mut focus_atoms = focus.clone();
        let mut focus_sentences: Vec<&Sentence> = Vec::new();
        let mut others: Vec<(BTreeSet<Atom>, Vec<&Sentence>)> = Vec::new();
        for (atoms, sents) in groups {
            if atoms.is_empty() || !atoms.is_disjoint(focus) {
                focus_atoms.extend(atoms);
                focus_sentences.extend(sents);
            } else {
                others.push((atoms, sents));
            }
        }
        let mut cost = 0u64;
        for (atoms, sents) in &others {
            check_cap(atoms.len(), cap)?;
            cost += 1 << atoms.len();
            if plausible_worlds(sents.iter().copied(), atoms, cap)?.is_empty() {
                return Ok(Projection {
                    worlds: Arc::new(Vec::new()),
                    cost,
                });
            }
        }
        check_cap(focus_atoms.len(), cap)?;
        cost += 1 << focus_atoms.len();
        let full = plausible_worlds(focus_sentences.iter().copied(), &focus_atoms, cap)?;
        let projected: BTreeSet<World> = full
            .into_iter()
            .map(|w| World {
                assignment: w
                    .assignment
                    .into_iter()
                    .filter(|(a, _)| focus.contains(a))
                    .collect(),
            })
            .collect();
        let order: Vec<Atom> = focus.iter().cloned().collect();
        let mut worlds: Vec<World> = projected.into_iter().collect();
        worlds.sort_by_key(|w| world_bits(w, &order));
        Ok(Projection {
            worlds: Arc::new(worlds),
            cost,
        })
    }

    fn components(&self) -> Vec<(BTreeSet<Atom>, Vec<&Sentence>)> {
        let mut groups: Vec<(BTreeSet<Atom>, Vec<&Sentence>)> = Vec::new();
        for s in &self.sentences {
            let atoms = s.atoms();
            let mut merged = (atoms, vec![s]);
            let mut rest = Vec::new();
            for g in groups.drain(..) {
                if g.0.is_disjoint(&merged.0) {
                    rest.push(g);
                } else {
                    merged.0.extend(g.0);
                    merged.1.extend(g.1);
                }
            }
            rest.push(merged);
            groups = rest;
        }
        groups
    }
}

fn world_bits(w: &World, order: &[Atom]) -> u64 {
    order.iter().fold(0u64, |acc, a| {
        acc << 1 | u64::from(w.get(a).unwrap_or(false))
    })
}

/// Whether every plausible world of `d` (over atoms(d) ∪ atoms(s)) agrees on `s`.
pub fn decides(d: &TheoremSet, s: &Sentence, cap: usize) -> Result<bool, LogicError> {
    let worlds = d.project_worlds(&s.atoms(), cap)?;
    let mut seen = None;
    for w in worlds.iter() {
        let v = w.eval(s)?;
        match seen {
            None => seen = Some(v),
            Some(prev) if prev != v => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}

/// Truth value of `s` fixed by `d`, or `None` while undecided. Inconsistent `d` proves everything.
pub fn decided_value(d: &TheoremSet, s: &Sentence, cap: usize) -> Result<Option<bool>, LogicError> {
    let worlds = d.project_worlds(&s.atoms(), cap)?;
    if worlds.is_empty() {
        return Ok(Some(true));
    }
    let first = worlds[0].eval(s)?;
    for w in worlds.iter().skip(1) {
        if w.eval(s)? != first {
            return Ok(None);
        }
    }
    Ok(Some(first))
}
