//! Day-n belief states under which a strategy's executed trade is worth at most 2^-n in every
//! Boolean assignment to its support.
//!
//! With T_φ = T(P)[φ] the evaluated coefficients, the best assignment's value is separable:
//! max_W Σ_φ T_φ·(W(φ) − P(φ)) = Σ_φ max(T_φ·(1 − P(φ)), −T_φ·P(φ)), which we call the gain
//! G(P). The search looks for G(P) ≤ 2^-n: first along the damped price-adjustment map from
//! yesterday's prices, then by best-first branch and bound over dyadic boxes using interval
//! enclosures of the coefficients. A fixed point of the adjustment map has G = 0, so the box
//! containing it is never pruned and the search terminates once boxes are fine enough.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::feature::{FeatureError, Interval, Tape, TradingStrategy, ValueCache};
use crate::logic::Sentence;
use crate::pricing::{PriceLookup, Pricing, ValuationHistory};
use crate::rational::{self, Rational};

/// Frozen into snapshot headers; changing the search order changes which fixed point is found.
pub const SEARCH_ORDER_VERSION: &str = "dyadic-bnb-v1";

/// Literal world enumeration in `verify_fixed_point` stops here; beyond it the separable form
/// (which equals the maximum over all assignments) is used.
const LITERAL_VERIFY_MAX: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketMakerConfig {
    /// Finest box side is 2^-(n + max_level).
    pub max_level: u32,
    pub accel_iters: usize,
    pub max_boxes: usize,
}

impl Default for MarketMakerConfig {
    fn default() -> Self {
        MarketMakerConfig {
            max_level: 24,
            accel_iters: 64,
            max_boxes: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketMakerError {
    #[error("day {day}: fixed-point search exhausted after {boxes} boxes")]
    SearchCapExceeded { day: usize, boxes: usize },
    #[error("day-{day} strategy needs a history of {} days, got {len}", day - 1)]
    HistoryLength { day: usize, len: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stage {
    EmptySupport,
    /// Accepted after this many adjustment-map steps (0 = the seed itself).
    Accelerator(usize),
    Search {
        boxes: usize,
    },
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub pricing: Pricing,
    pub stage: Stage,
}

/// Σ_φ max(T_φ·(1 − p_φ), −T_φ·p_φ).
pub fn separable_gain(t: &[Rational], p: &[Rational]) -> Rational {
    let mut g = Rational::zero();
    for (ti, pi) in t.iter().zip(p) {
        if ti.is_positive() {
            g += ti * (Rational::one() - pi);
        } else if ti.is_negative() {
            g -= ti * pi;
        }
    }
    g
}

struct Problem {
    tape: Tape,
    support: Vec<Sentence>,
    slack: Rational,
}

impl Problem {
    fn gain(&self, p: &[Rational]) -> Rational {
        separable_gain(&self.tape.eval(p), p)
    }

    fn pricing(&self, p: &[Rational]) -> Pricing {
        Pricing::from_pairs(self.support.iter().cloned().zip(p.iter().cloned()))
            .expect("search stays inside [0,1]")
    }
}

pub fn find_fixed_point(
    t: &TradingStrategy,
    h: &ValuationHistory,
    cfg: &MarketMakerConfig,
    cache: Option<&mut ValueCache>,
) -> Result<FixedPoint, MarketMakerError> {
    let n = t.day();
    if h.len() + 1 != n {
        return Err(MarketMakerError::HistoryLength {
            day: n,
            len: h.len(),
        });
    }
    if t.is_zero() {
        return Ok(FixedPoint {
            pricing: Pricing::new(),
            stage: Stage::EmptySupport,
        });
    }
    let support: Vec<Sentence> = t.support().cloned().collect();
    let roots: Vec<_> = t.coefficients().values().cloned().collect();
    let tape = Tape::compile(&roots, &support, n, h, cache)?;
    let problem = Problem {
        tape,
        support,
        slack: rational::pow2(-(n as i64)),
    };

    if let Some((p, k)) = accelerate(&problem, h, n, cfg) {
        return Ok(FixedPoint {
            pricing: problem.pricing(&p),
            stage: Stage::Accelerator(k),
        });
    }
    let (p, boxes) = branch_and_bound(&problem, n, cfg)?;
    Ok(FixedPoint {
        pricing: problem.pricing(&p),
        stage: Stage::Search { boxes },
    })
}

/// Damped iteration v ← snap(clamp(v + T(v)/2)) from yesterday's prices (1/2 where absent).
fn accelerate(
    pr: &Problem,
    h: &ValuationHistory,
    n: usize,
    cfg: &MarketMakerConfig,
) -> Option<(Vec<Rational>, usize)> {
    let yesterday = h.pricing(n - 1);
    let mut v: Vec<Rational> = pr
        .support
        .iter()
        .map(|s| {
            yesterday
                .and_then(|p| p.get(s))
                .cloned()
                .unwrap_or_else(rational::half)
        })
        .collect();
    let level = n as u32 + 4;
    for k in 0..=cfg.accel_iters {
        let tv = pr.tape.eval(&v);
        if separable_gain(&tv, &v) <= pr.slack {
            return Some((v, k));
        }
        for (vi, ti) in v.iter_mut().zip(&tv) {
            let moved = &*vi + ti * rational::half();
            *vi = rational::round_dyadic(&rational::clamp01(&moved), level);
        }
    }
    None
}

/// One axis of a dyadic box: [lo, lo + 2^-level].
#[derive(Clone, Debug)]
struct Axis {
    lo: Rational,
    hi: Rational,
    level: u32,
}

struct Entry {
    gain: Rational,
    seq: u64,
    axes: Vec<Axis>,
    split: Option<usize>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reversed so that `BinaryHeap` pops the lowest gain, then the earliest box.
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .gain
            .cmp(&self.gain)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

enum Outcome {
    Found(Vec<Rational>),
    Pruned,
    Open(Entry),
}

fn examine(pr: &Problem, axes: Vec<Axis>, seq: u64, finest: u32) -> Outcome {
    let boxed: Vec<Interval> = axes
        .iter()
        .map(|a| Interval::new(a.lo.clone(), a.hi.clone()))
        .collect();
    let enclosures = pr.tape.eval_interval(&boxed);
    let one = Rational::one();
    let mut lower = Rational::zero();
    let mut candidate = Vec::with_capacity(axes.len());
    let mut undetermined = Vec::new();
    for (i, (a, t)) in axes.iter().zip(&enclosures).enumerate() {
        if t.lo.is_positive() {
            lower += &t.lo * (&one - &a.hi);
        } else if t.hi.is_negative() {
            lower -= &t.hi * &a.lo;
        }
        let c = if !t.lo.is_negative() && t.hi.is_positive() {
            a.hi.clone()
        } else if !t.hi.is_positive() && t.lo.is_negative() {
            a.lo.clone()
        } else {
            (&a.lo + &a.hi) * rational::half()
        };
        if t.lo.is_negative() && t.hi.is_positive() {
            undetermined.push(i);
        }
        candidate.push(c);
    }
    if lower > pr.slack {
        return Outcome::Pruned;
    }
    let gain = pr.gain(&candidate);
    if gain <= pr.slack {
        return Outcome::Found(candidate);
    }
    let widest = |dims: &mut dyn Iterator<Item = usize>| {
        dims.filter(|&i| axes[i].level < finest)
            .min_by_key(|&i| (axes[i].level, i))
    };
    let split = widest(&mut undetermined.iter().copied()).or_else(|| widest(&mut (0..axes.len())));
    Outcome::Open(Entry {
        gain,
        seq,
        axes,
        split,
    })
}

fn branch_and_bound(
    pr: &Problem,
    n: usize,
    cfg: &MarketMakerConfig,
) -> Result<(Vec<Rational>, usize), MarketMakerError> {
    let finest = n as u32 + cfg.max_level;
    let root: Vec<Axis> = pr
        .support
        .iter()
        .map(|_| Axis {
            lo: Rational::zero(),
            hi: Rational::one(),
            level: 0,
        })
        .collect();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    match examine(pr, root, seq, finest) {
        Outcome::Found(p) => return Ok((p, 1)),
        Outcome::Pruned => return Err(MarketMakerError::SearchCapExceeded { day: n, boxes: 1 }),
        Outcome::Open(e) => heap.push(e),
    }
    let mut boxes = 1usize;
    while let Some(entry) = heap.pop() {
        let Some(d) = entry.split else { continue };
        let a = &entry.axes[d];
        let mid = (&a.lo + &a.hi) * rational::half();
        let halves = [(a.lo.clone(), mid.clone()), (mid, a.hi.clone())];
        for (lo, hi) in halves {
            boxes += 1;
            if boxes > cfg.max_boxes {
                return Err(MarketMakerError::SearchCapExceeded { day: n, boxes });
            }
            seq += 1;
            let mut axes = entry.axes.clone();
            axes[d] = Axis {
                lo,
                hi,
                level: entry.axes[d].level + 1,
            };
            match examine(pr, axes, seq, finest) {
                Outcome::Found(p) => return Ok((p, boxes)),
                Outcome::Pruned => {}
                Outcome::Open(e) => heap.push(e),
            }
        }
    }
    Err(MarketMakerError::SearchCapExceeded { day: n, boxes })
}

/// Whether every Boolean assignment W′ to Support(T) gives W′(T(h, P)) ≤ 2^-n, and P is
/// supported inside Support(T).
pub fn verify_fixed_point(
    t: &TradingStrategy,
    h: &ValuationHistory,
    p: &Pricing,
) -> Result<bool, FeatureError> {
    let n = t.day();
    if p.support().any(|s| t.coefficient(s).is_none()) {
        return Ok(false);
    }
    let slack = rational::pow2(-(n as i64));
    let executed = t.execute(&h.with_day(p))?;
    let shares: Vec<&Rational> = executed.shares().values().collect();
    if shares.len() > LITERAL_VERIFY_MAX {
        let best = shares.iter().fold(executed.constant().clone(), |acc, q| {
            if q.is_positive() {
                acc + *q
            } else {
                acc
            }
        });
        return Ok(best <= slack);
    }
    for bits in 0u64..(1u64 << shares.len()) {
        let mut v = executed.constant().clone();
        for (i, q) in shares.iter().enumerate() {
            if bits >> i & 1 == 1 {
                v += *q;
            }
        }
        if v > slack {
            return Ok(false);
        }
    }
    Ok(true)
}
