use std::collections::HashMap;

use num_traits::{One, Zero};

use super::{eval_into, Feature, FeatureError, Kind, ValueCache};
use crate::logic::Sentence;
use crate::pricing::PriceLookup;
use crate::rational::{self, Rational};

#[derive(Clone, Debug)]
enum Op {
    Const(Rational),
    Var(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Max(usize, usize),
    Recip(usize),
}

/// Straight-line program for a set of features restricted to one day: every node of rank
/// below `day` is folded into a constant from the committed history, and every day-`day`
/// price symbol becomes either a variable (sentences in `vars`) or the constant 0.
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    vars: Vec<Sentence>,
    /// For each variable, whether any output reads it.
    used: Vec<bool>,
}

/// Closed rational interval lo ≤ hi.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: Rational) -> Interval {
        Interval {
            lo: x.clone(),
            hi: x,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub(crate) fn add(&self, o: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    pub(crate) fn mul(&self, o: &Interval) -> Interval {
        if self.lo == self.hi && o.lo == o.hi {
            return Interval::point(&self.lo * &o.lo);
        }
        let c = [
            &self.lo * &o.lo,
            &self.lo * &o.hi,
            &self.hi * &o.lo,
            &self.hi * &o.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub(crate) fn max(&self, o: &Interval) -> Interval {
        Interval {
            lo: rational::max_of(&self.lo, &o.lo),
            hi: rational::max_of(&self.hi, &o.hi),
        }
    }

    /// 1/max(1,·) is nonincreasing.
    pub(crate) fn recip(&self) -> Interval {
        Interval {
            lo: rational::safe_recip(&self.hi),
            hi: rational::safe_recip(&self.lo),
        }
    }
}

impl Tape {
    /// `h` must cover days 1..day−1. `cache` supplies and receives values of history-only nodes.
    pub fn compile(
        roots: &[Feature],
        vars: &[Sentence],
        day: usize,
        h: &dyn PriceLookup,
        cache: Option<&mut ValueCache>,
    ) -> Result<Tape, FeatureError> {
        for r in roots {
            if r.rank() > day {
                return Err(FeatureError::RankExceedsDay {
                    rank: r.rank(),
                    day,
                });
            }
        }
        let var_index: HashMap<&Sentence, usize> =
            vars.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let order = super::topo_order(roots, |f| f.rank() < day);
        let frozen: Vec<Feature> = order.iter().filter(|f| f.rank() < day).cloned().collect();
        let mut values = HashMap::new();
        eval_into(&frozen, h, &mut values, cache)?;

        let mut slot: HashMap<u64, usize> = HashMap::new();
        let mut ops = Vec::with_capacity(order.len());
        let mut used = vec![false; vars.len()];
        for f in &order {
            let op = if f.rank() < day {
                Op::Const(values[&f.id()].clone())
            } else {
                match f.kind() {
                    Kind::PriceSym(s, _) => match var_index.get(s) {
                        Some(&i) => {
                            used[i] = true;
                            Op::Var(i)
                        }
                        None => Op::Const(Rational::zero()),
                    },
                    Kind::Const(q) => Op::Const(q.clone()),
                    Kind::Sum(a, b) => Op::Add(slot[&a.id()], slot[&b.id()]),
                    Kind::Product(a, b) => Op::Mul(slot[&a.id()], slot[&b.id()]),
                    Kind::Max(a, b) => Op::Max(slot[&a.id()], slot[&b.id()]),
                    Kind::SafeRecip(a) => Op::Recip(slot[&a.id()]),
                }
            };
            slot.insert(f.id(), ops.len());
            ops.push(op);
        }
        let outputs = roots.iter().map(|r| slot[&r.id()]).collect();
        Ok(Tape {
            ops,
            outputs,
            vars: vars.to_vec(),
            used,
        })
    }

    pub fn vars(&self) -> &[Sentence] {
        &self.vars
    }

    pub fn uses_var(&self, i: usize) -> bool {
        self.used[i]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Output values with variable i set to `x[i]`.
    pub fn eval(&self, x: &[Rational]) -> Vec<Rational> {
        let mut v: Vec<Rational> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let r = match op {
                Op::Const(q) => q.clone(),
                Op::Var(i) => x[*i].clone(),
                Op::Add(a, b) => &v[*a] + &v[*b],
                Op::Mul(a, b) => {
                    if v[*a].is_zero() || v[*b].is_zero() {
                        Rational::zero()
                    } else {
                        &v[*a] * &v[*b]
                    }
                }
                Op::Max(a, b) => rational::max_of(&v[*a], &v[*b]),
                Op::Recip(a) => {
                    if v[*a] <= Rational::one() {
                        Rational::one()
                    } else {
                        v[*a].recip()
                    }
                }
            };
            v.push(r);
        }
        self.outputs.iter().map(|&o| v[o].clone()).collect()
    }

    /// Enclosures of the outputs over the box `x`.
    pub fn eval_interval(&self, x: &[Interval]) -> Vec<Interval> {
        let mut v: Vec<Interval> = Vec::with_capacity(self.ops.len());
        for op in &self.ops {
            let r = match op {
                Op::Const(q) => Interval::point(q.clone()),
                Op::Var(i) => x[*i].clone(),
                Op::Add(a, b) => v[*a].add(&v[*b]),
                Op::Mul(a, b) => v[*a].mul(&v[*b]),
                Op::Max(a, b) => v[*a].max(&v[*b]),
                Op::Recip(a) => v[*a].recip(),
            };
            v.push(r);
        }
        self.outputs.iter().map(|&o| v[o].clone()).collect()
    }
}
