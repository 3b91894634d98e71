use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use num_traits::{One, Signed, Zero};

use super::{FeatureError, Interval};
use crate::logic::Sentence;
use crate::pricing::PriceLookup;
use crate::rational::{self, Rational};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Core feature node. Sharing is by `Arc`; node ids are unique for the process lifetime.
#[derive(Clone)]
pub struct Feature(Arc<Node>);

pub struct Node {
    id: u64,
    rank: usize,
    range: OnceLock<Interval>,
    kind: Kind,
}

pub enum Kind {
    PriceSym(Sentence, usize),
    Const(Rational),
    Sum(Feature, Feature),
    Product(Feature, Feature),
    Max(Feature, Feature),
    SafeRecip(Feature),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Ind(x > y)
    Greater,
    /// Ind(x < y)
    Less,
}

impl Feature {
    fn make(kind: Kind) -> Feature {
        let rank = match &kind {
            Kind::PriceSym(_, d) => *d,
            Kind::Const(_) => 0,
            Kind::Sum(a, b) | Kind::Product(a, b) | Kind::Max(a, b) => a.rank().max(b.rank()),
            Kind::SafeRecip(a) => a.rank(),
        };
        Feature(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            rank,
            range: OnceLock::new(),
            kind,
        }))
    }

    pub fn price(s: Sentence, day: usize) -> Feature {
        assert!(day >= 1, "price symbols need a positive day");
        Feature::make(Kind::PriceSym(s, day))
    }

    pub fn constant(q: Rational) -> Feature {
        Feature::make(Kind::Const(q))
    }

    pub fn int(n: i64) -> Feature {
        Feature::constant(rational::int(n))
    }

    pub fn zero() -> Feature {
        Feature::int(0)
    }

    pub fn one() -> Feature {
        Feature::int(1)
    }

    pub fn sum(a: &Feature, b: &Feature) -> Feature {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Feature::constant(x + y),
            (Some(x), _) if x.is_zero() => b.clone(),
            (_, Some(y)) if y.is_zero() => a.clone(),
            _ => Feature::make(Kind::Sum(a.clone(), b.clone())),
        }
    }

    pub fn product(a: &Feature, b: &Feature) -> Feature {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Feature::constant(x * y),
            (Some(x), _) | (_, Some(x)) if x.is_zero() => Feature::zero(),
            (Some(x), _) if x.is_one() => b.clone(),
            (_, Some(y)) if y.is_one() => a.clone(),
            _ => Feature::make(Kind::Product(a.clone(), b.clone())),
        }
    }

    pub fn max(a: &Feature, b: &Feature) -> Feature {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Feature::constant(rational::max_of(x, y)),
            _ => Feature::make(Kind::Max(a.clone(), b.clone())),
        }
    }

    pub fn safe_recip(a: &Feature) -> Feature {
        match a.as_const() {
            Some(x) => Feature::constant(rational::safe_recip(x)),
            None => Feature::make(Kind::SafeRecip(a.clone())),
        }
    }

    pub fn scale(&self, q: &Rational) -> Feature {
        Feature::product(&Feature::constant(q.clone()), self)
    }

    /// (−1)·x
    pub fn neg(&self) -> Feature {
        self.scale(&rational::int(-1))
    }

    pub fn sub(a: &Feature, b: &Feature) -> Feature {
        Feature::sum(a, &b.neg())
    }

    /// −max(−a, −b)
    pub fn min(a: &Feature, b: &Feature) -> Feature {
        Feature::max(&a.neg(), &b.neg()).neg()
    }

    /// min(1, max(0, x)). Used to restate a known invariant so interval bounds see it.
    pub fn clamp01(&self) -> Feature {
        Feature::min(&Feature::one(), &Feature::max(&Feature::zero(), self))
    }

    /// max(x, −x)
    pub fn abs(&self) -> Feature {
        Feature::max(self, &self.neg())
    }

    /// ξ/ζ for ζ ≥ ε > 0, as (1/ε)·ξ·SafeRecip((1/ε)·ζ).
    pub fn div_with_witness(
        xi: &Feature,
        zeta: &Feature,
        eps: &Rational,
    ) -> Result<Feature, FeatureError> {
        if !eps.is_positive() {
            return Err(FeatureError::NonPositiveWitness(eps.to_string()));
        }
        let inv = eps.recip();
        Ok(Feature::product(
            &xi.scale(&inv),
            &Feature::safe_recip(&zeta.scale(&inv)),
        ))
    }

    /// Continuous threshold indicator: max(0, min(1, (x−y)/δ)) for `Greater`, mirrored for `Less`.
    pub fn ind(
        delta: &Rational,
        x: &Feature,
        y: &Feature,
        dir: Direction,
    ) -> Result<Feature, FeatureError> {
        if !delta.is_positive() {
            return Err(FeatureError::NonPositiveDelta(delta.to_string()));
        }
        let (hi, lo) = match dir {
            Direction::Greater => (x, y),
            Direction::Less => (y, x),
        };
        let ramp = Feature::sub(hi, lo).scale(&delta.recip());
        Ok(Feature::max(
            &Feature::zero(),
            &Feature::min(&Feature::one(), &ramp),
        ))
    }

    /// Ind_δ(a < x < b) = min(Ind_δ(x > a), Ind_δ(x < b)).
    pub fn ind_between(
        delta: &Rational,
        a: &Feature,
        x: &Feature,
        b: &Feature,
    ) -> Result<Feature, FeatureError> {
        Ok(Feature::min(
            &Feature::ind(delta, x, a, Direction::Greater)?,
            &Feature::ind(delta, x, b, Direction::Less)?,
        ))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    /// Latest day whose prices this feature reads (0 for constants).
    pub fn rank(&self) -> usize {
        self.0.rank
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match &self.0.kind {
            Kind::Const(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|q| q.is_zero())
    }

    pub fn ptr_eq(&self, other: &Feature) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn children(&self) -> impl Iterator<Item = &Feature> {
        let (a, b) = match &self.0.kind {
            Kind::PriceSym(..) | Kind::Const(_) => (None, None),
            Kind::Sum(a, b) | Kind::Product(a, b) | Kind::Max(a, b) => (Some(a), Some(b)),
            Kind::SafeRecip(a) => (Some(a), None),
        };
        a.into_iter().chain(b)
    }

    /// Interval enclosure of the value over all histories, propagated with every price in [0, 1].
    pub fn range(&self) -> Interval {
        if let Some(r) = self.0.range.get() {
            return r.clone();
        }
        for f in topo_order(std::slice::from_ref(self), |f| f.0.range.get().is_some()) {
            if f.0.range.get().is_some() {
                continue;
            }
            let get = |g: &Feature| g.0.range.get().unwrap().clone();
            let r = match &f.0.kind {
                Kind::PriceSym(..) => Interval::new(Rational::zero(), Rational::one()),
                Kind::Const(q) => Interval::point(q.clone()),
                Kind::Sum(a, b) => get(a).add(&get(b)),
                Kind::Product(a, b) => get(a).mul(&get(b)),
                Kind::Max(a, b) => get(a).max(&get(b)),
                Kind::SafeRecip(a) => get(a).recip(),
            };
            let _ = f.0.range.set(r);
        }
        self.0.range.get().unwrap().clone()
    }

    /// Structural bound B with |value| ≤ B on every history.
    pub fn bound(&self) -> Rational {
        let r = self.range();
        rational::max_of(&r.lo.abs(), &r.hi.abs())
    }

    /// Structural Lipschitz constant with respect to the sup norm over all prices:
    /// |f(h) − f(h′)| ≤ L·‖h − h′‖∞. SafeRecip has slope at most 1 in magnitude.
    pub fn lipschitz(&self) -> Rational {
        let mut lip: HashMap<u64, Rational> = HashMap::new();
        for f in topo_order(std::slice::from_ref(self), |_| false) {
            let l = |g: &Feature| lip[&g.id()].clone();
            let v = match &f.0.kind {
                Kind::PriceSym(..) => Rational::one(),
                Kind::Const(_) => Rational::zero(),
                Kind::Sum(a, b) => l(a) + l(b),
                Kind::Product(a, b) => l(a) * b.bound() + a.bound() * l(b),
                Kind::Max(a, b) => rational::max_of(&l(a), &l(b)),
                Kind::SafeRecip(a) => l(a),
            };
            lip.insert(f.id(), v);
        }
        lip.remove(&self.id()).unwrap()
    }

    /// Exact value on `h`; every PriceSym day must lie within `h`.
    pub fn eval(&self, h: &dyn PriceLookup) -> Result<Rational, FeatureError> {
        let mut memo = HashMap::new();
        eval_into(std::slice::from_ref(self), h, &mut memo, None)?;
        Ok(memo.remove(&self.id()).unwrap())
    }

    /// Number of distinct nodes reachable from `roots`.
    pub fn node_count<'a, I: IntoIterator<Item = &'a Feature>>(roots: I) -> usize {
        let roots: Vec<Feature> = roots.into_iter().cloned().collect();
        topo_order(&roots, |_| false).len()
    }
}

/// Values of history-only nodes, valid while the history prefix they were computed on is fixed.
#[derive(Default)]
pub struct ValueCache {
    values: HashMap<u64, Rational>,
    horizon: usize,
}

impl ValueCache {
    pub fn new() -> ValueCache {
        ValueCache::default()
    }

    /// Nodes of rank ≤ `horizon` may be cached from now on.
    pub fn set_horizon(&mut self, horizon: usize) {
        self.horizon = self.horizon.max(horizon);
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, f: &Feature) -> Option<&Rational> {
        self.values.get(&f.id())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluates every node reachable from `roots` into `memo`; nodes of rank within the cache
/// horizon are read from and written to `cache`.
pub fn eval_into(
    roots: &[Feature],
    h: &dyn PriceLookup,
    memo: &mut HashMap<u64, Rational>,
    mut cache: Option<&mut ValueCache>,
) -> Result<(), FeatureError> {
    let horizon = cache.as_ref().map_or(0, |c| c.horizon);
    let order = {
        let cache_ref = cache.as_deref();
        topo_order(roots, |f| {
            memo.contains_key(&f.id())
                || (f.rank() <= horizon
                    && cache_ref.is_some_and(|c| c.values.contains_key(&f.id())))
        })
    };
    for f in order {
        if memo.contains_key(&f.id()) {
            continue;
        }
        if f.rank() <= horizon {
            if let Some(v) = cache.as_deref().and_then(|c| c.values.get(&f.id())) {
                memo.insert(f.id(), v.clone());
                continue;
            }
        }
        let get = |g: &Feature| &memo[&g.id()];
        let v = match &f.0.kind {
            Kind::PriceSym(s, d) => match h.lookup(s, *d) {
                Ok(p) => p.cloned().unwrap_or_else(Rational::zero),
                Err(_) => {
                    return Err(FeatureError::RankExceedsHistory {
                        rank: *d,
                        len: h.len(),
                    })
                }
            },
            Kind::Const(q) => q.clone(),
            Kind::Sum(a, b) => get(a) + get(b),
            Kind::Product(a, b) => get(a) * get(b),
            Kind::Max(a, b) => rational::max_of(get(a), get(b)),
            Kind::SafeRecip(a) => rational::safe_recip(get(a)),
        };
        if f.rank() <= horizon {
            if let Some(c) = cache.as_deref_mut() {
                c.values.insert(f.id(), v.clone());
            }
        }
        memo.insert(f.id(), v);
    }
    Ok(())
}

/// Children-first order of the nodes reachable from `roots`. Nodes for which `stop` holds are
/// emitted without visiting their children.
pub fn topo_order<F: Fn(&Feature) -> bool>(roots: &[Feature], stop: F) -> Vec<Feature> {
    let mut out = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack: Vec<(Feature, bool)> = roots.iter().rev().map(|r| (r.clone(), false)).collect();
    while let Some((f, expanded)) = stack.pop() {
        if expanded {
            out.push(f);
            continue;
        }
        if !seen.insert(f.id()) {
            continue;
        }
        if stop(&f) {
            out.push(f);
            continue;
        }
        stack.push((f.clone(), true));
        let kids: Vec<Feature> = f.children().cloned().collect();
        for c in kids.into_iter().rev() {
            if !seen.contains(&c.id()) {
                stack.push((c, false));
            }
        }
    }
    out
}

fn fmt_const(q: &Rational) -> String {
    let body = if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    };
    if q.is_negative() {
        format!("({body})")
    } else {
        body
    }
}

/// Program text: shared interior nodes become `v<k>` bindings.
pub fn program_text(ret: &Feature) -> String {
    let order = topo_order(std::slice::from_ref(ret), |_| false);
    let mut parents: HashMap<u64, usize> = HashMap::new();
    for f in &order {
        for c in f.children() {
            *parents.entry(c.id()).or_default() += 1;
        }
    }
    let mut names: HashMap<u64, String> = HashMap::new();
    let mut lines = Vec::new();
    for f in &order {
        let interior = !matches!(f.kind(), Kind::PriceSym(..) | Kind::Const(_));
        if interior && parents.get(&f.id()).copied().unwrap_or(0) > 1 && !f.ptr_eq(ret) {
            let text = render(f, &names, 0);
            let name = format!("v{}", names.len() + 1);
            lines.push(format!("{name} := {text}"));
            names.insert(f.id(), name);
        }
    }
    lines.push(format!("return {}", render(ret, &names, 0)));
    lines.join("\n")
}

/// `prec`: 0 = sum context, 1 = product operand.
fn render(f: &Feature, names: &HashMap<u64, String>, prec: u8) -> String {
    let child = |g: &Feature, p: u8| -> String {
        match names.get(&g.id()) {
            Some(n) => n.clone(),
            None => render(g, names, p),
        }
    };
    match f.kind() {
        Kind::PriceSym(s, d) => format!("P[{s}]@{d}"),
        Kind::Const(q) => fmt_const(q),
        Kind::Sum(a, b) => {
            let t = format!("{} + {}", child(a, 0), child(b, 0));
            if prec > 0 {
                format!("({t})")
            } else {
                t
            }
        }
        Kind::Product(a, b) => format!("{} * {}", child(a, 1), child(b, 1)),
        Kind::Max(a, b) => format!("max({}, {})", child(a, 0), child(b, 0)),
        Kind::SafeRecip(a) => format!("saferecip({})", child(a, 0)),
    }
}

impl fmt::Debug for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&program_text(self))
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&program_text(self))
    }
}
