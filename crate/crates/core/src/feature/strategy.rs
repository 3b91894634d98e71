use std::collections::{BTreeMap, HashMap};

use num_traits::{Signed, Zero};

use super::{eval_into, Feature, FeatureError, ValueCache};
use crate::logic::{LogicError, Sentence, World};
use crate::pricing::{PriceLookup, Pricing};
use crate::rational::Rational;

/// A day-n trading strategy: feature coefficients per sentence, with the cash term implied as
/// −Σ_φ coeff(φ)·φ^{*n}. Literal-zero coefficients are never stored.
#[derive(Clone, Debug)]
pub struct TradingStrategy {
    day: usize,
    coefficients: BTreeMap<Sentence, Feature>,
}

impl TradingStrategy {
    pub fn new(
        day: usize,
        coefficients: BTreeMap<Sentence, Feature>,
    ) -> Result<TradingStrategy, FeatureError> {
        let mut kept = BTreeMap::new();
        for (s, f) in coefficients {
            if f.rank() > day {
                return Err(FeatureError::RankExceedsDay {
                    rank: f.rank(),
                    day,
                });
            }
            if !f.is_zero() {
                kept.insert(s, f);
            }
        }
        Ok(TradingStrategy {
            day,
            coefficients: kept,
        })
    }

    pub fn zero(day: usize) -> TradingStrategy {
        TradingStrategy {
            day,
            coefficients: BTreeMap::new(),
        }
    }

    /// φ − φ^{*n} scaled by `amount`.
    pub fn buy(day: usize, s: Sentence, amount: Rational) -> TradingStrategy {
        let mut c = BTreeMap::new();
        c.insert(s, Feature::constant(amount));
        TradingStrategy::new(day, c).expect("constant coefficients have rank 0")
    }

    pub fn day(&self) -> usize {
        self.day
    }

    pub fn coefficients(&self) -> &BTreeMap<Sentence, Feature> {
        &self.coefficients
    }

    pub fn coefficient(&self, s: &Sentence) -> Option<&Feature> {
        self.coefficients.get(s)
    }

    pub fn support(&self) -> impl Iterator<Item = &Sentence> {
        self.coefficients.keys()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.coefficients
            .values()
            .map(Feature::rank)
            .max()
            .unwrap_or(0)
    }

    /// Distinct DAG nodes across all coefficients.
    pub fn node_count(&self) -> usize {
        Feature::node_count(self.coefficients.values())
    }

    /// The implied cash coefficient −Σ_φ coeff(φ)·φ^{*n} as a feature.
    pub fn cash(&self) -> Feature {
        self.coefficients
            .iter()
            .fold(Feature::zero(), |acc, (s, f)| {
                Feature::sub(
                    &acc,
                    &Feature::product(f, &Feature::price(s.clone(), self.day)),
                )
            })
    }

    /// W(T) as a feature: Σ_φ coeff(φ)·(W(φ) − φ^{*n}).
    pub fn world_value(&self, w: &World) -> Result<Feature, LogicError> {
        let mut acc = Feature::zero();
        for (s, f) in &self.coefficients {
            let truth = if w.eval(s)? {
                Feature::one()
            } else {
                Feature::zero()
            };
            let diff = Feature::sub(&truth, &Feature::price(s.clone(), self.day));
            acc = Feature::sum(&acc, &Feature::product(f, &diff));
        }
        Ok(acc)
    }

    pub fn map_coefficients(&self, g: impl Fn(&Feature) -> Feature) -> TradingStrategy {
        let c = self
            .coefficients
            .iter()
            .map(|(s, f)| (s.clone(), g(f)))
            .collect();
        TradingStrategy::new(self.day, c).expect("mapping keeps ranks within the day")
    }

    /// Every coefficient multiplied by `factor`; fails if the factor reads beyond the day.
    pub fn scale(&self, factor: &Feature) -> Result<TradingStrategy, FeatureError> {
        if factor.rank() > self.day {
            return Err(FeatureError::RankExceedsDay {
                rank: factor.rank(),
                day: self.day,
            });
        }
        Ok(self.map_coefficients(|f| Feature::product(factor, f)))
    }

    pub fn scale_const(&self, q: &Rational) -> TradingStrategy {
        if q.is_zero() {
            return TradingStrategy::zero(self.day);
        }
        self.map_coefficients(|f| f.scale(q))
    }

    pub fn add(&self, other: &TradingStrategy) -> Result<TradingStrategy, FeatureError> {
        if self.day != other.day {
            return Err(FeatureError::DayMismatch(self.day, other.day));
        }
        let mut c = self.coefficients.clone();
        for (s, f) in &other.coefficients {
            let merged = match c.remove(s) {
                Some(prev) => Feature::sum(&prev, f),
                None => f.clone(),
            };
            c.insert(s.clone(), merged);
        }
        TradingStrategy::new(self.day, c)
    }

    /// Shares are the evaluated coefficients; the constant is −Σ shares(φ)·h_n(φ), so the
    /// result is worth exactly 0 at day-n prices.
    pub fn execute(&self, h: &dyn PriceLookup) -> Result<AffineCombination, FeatureError> {
        self.execute_cached(h, None)
    }

    pub fn execute_cached(
        &self,
        h: &dyn PriceLookup,
        cache: Option<&mut ValueCache>,
    ) -> Result<AffineCombination, FeatureError> {
        if h.len() < self.day {
            return Err(FeatureError::RankExceedsHistory {
                rank: self.day,
                len: h.len(),
            });
        }
        let roots: Vec<Feature> = self.coefficients.values().cloned().collect();
        let mut memo = HashMap::new();
        eval_into(&roots, h, &mut memo, cache)?;
        let mut shares = BTreeMap::new();
        let mut constant = Rational::zero();
        for (s, f) in &self.coefficients {
            let v = memo[&f.id()].clone();
            if let Some(p) = h.lookup(s, self.day)? {
                constant -= &v * p;
            }
            if !v.is_zero() {
                shares.insert(s.clone(), v);
            }
        }
        Ok(AffineCombination { constant, shares })
    }
}

/// c + Σ α_φ·φ with exact rational entries; zero shares are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AffineCombination {
    constant: Rational,
    shares: BTreeMap<Sentence, Rational>,
}

impl AffineCombination {
    pub fn new(constant: Rational, shares: BTreeMap<Sentence, Rational>) -> AffineCombination {
        let shares = shares.into_iter().filter(|(_, q)| !q.is_zero()).collect();
        AffineCombination { constant, shares }
    }

    pub fn zero() -> AffineCombination {
        AffineCombination::default()
    }

    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    pub fn shares(&self) -> &BTreeMap<Sentence, Rational> {
        &self.shares
    }

    pub fn share(&self, s: &Sentence) -> Rational {
        self.shares.get(s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.shares.is_empty()
    }

    /// c + Σ α_φ·W(φ).
    pub fn world_value(&self, w: &World) -> Result<Rational, LogicError> {
        let mut v = self.constant.clone();
        for (s, q) in &self.shares {
            if w.eval(s)? {
                v += q;
            }
        }
        Ok(v)
    }

    /// c + Σ α_φ·P(φ).
    pub fn price_value(&self, p: &Pricing) -> Rational {
        let mut v = self.constant.clone();
        for (s, q) in &self.shares {
            if let Some(price) = p.get(s) {
                v += q * price;
            }
        }
        v
    }

    pub fn l1_norm(&self) -> Rational {
        self.shares
            .values()
            .fold(self.constant.abs(), |acc, q| acc + q.abs())
    }

    pub fn add(&self, other: &AffineCombination) -> AffineCombination {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &AffineCombination) {
        self.constant += &other.constant;
        for (s, q) in &other.shares {
            let e = self.shares.entry(s.clone()).or_insert_with(Rational::zero);
            *e += q;
            if e.is_zero() {
                self.shares.remove(s);
            }
        }
    }

    pub fn scale(&self, q: &Rational) -> AffineCombination {
        if q.is_zero() {
            return AffineCombination::zero();
        }
        AffineCombination {
            constant: &self.constant * q,
            shares: self
                .shares
                .iter()
                .map(|(s, a)| (s.clone(), a * q))
                .collect(),
        }
    }
}

/// An affine combination whose constant and shares are features.
#[derive(Clone, Debug)]
pub struct FeatureCombination {
    pub constant: Feature,
    pub shares: BTreeMap<Sentence, Feature>,
}

impl FeatureCombination {
    pub fn new(constant: Feature, shares: BTreeMap<Sentence, Feature>) -> FeatureCombination {
        FeatureCombination { constant, shares }
    }

    pub fn rank(&self) -> usize {
        self.shares
            .values()
            .map(Feature::rank)
            .fold(self.constant.rank(), usize::max)
    }

    /// A^{*n} = c + Σ ξ_φ·φ^{*n}.
    pub fn price_feature(&self, n: usize) -> Feature {
        self.shares
            .iter()
            .fold(self.constant.clone(), |acc, (s, f)| {
                Feature::sum(&acc, &Feature::product(f, &Feature::price(s.clone(), n)))
            })
    }

    /// The day-n strategy A − A^{*n}: the constant cancels against its own price, leaving the
    /// shares as coefficients.
    pub fn buy(&self, n: usize) -> Result<TradingStrategy, FeatureError> {
        let r = self.rank();
        if r > n {
            return Err(FeatureError::RankExceedsDay { rank: r, day: n });
        }
        TradingStrategy::new(n, self.shares.clone())
    }
}
