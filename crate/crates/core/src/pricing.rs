//! Belief states and price histories.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::logic::Sentence;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("price {price} for {sentence} is outside [0,1]")]
    OutOfRange { sentence: String, price: String },
    #[error("day {day} is outside the history (length {len})")]
    DayOutOfRange { day: usize, len: usize },
}

/// Finite-support map sentence → price in [0,1]. Zero prices are not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Pricing {
    prices: BTreeMap<Sentence, Rational>,
}

impl Pricing {
    pub fn new() -> Pricing {
        Pricing::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Sentence, Rational)>>(
        pairs: I,
    ) -> Result<Pricing, PricingError> {
        let mut p = Pricing::new();
        for (s, q) in pairs {
            p.set(s, q)?;
        }
        Ok(p)
    }

    pub fn set(&mut self, s: Sentence, q: Rational) -> Result<(), PricingError> {
        if q.is_negative() || q > Rational::one() {
            return Err(PricingError::OutOfRange {
                sentence: s.to_string(),
                price: q.to_string(),
            });
        }
        if q.is_zero() {
            self.prices.remove(&s);
        } else {
            self.prices.insert(s, q);
        }
        Ok(())
    }

    /// Stored price, `None` meaning 0.
    pub fn get(&self, s: &Sentence) -> Option<&Rational> {
        self.prices.get(s)
    }

    pub fn price(&self, s: &Sentence) -> Rational {
        self.prices.get(s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sentence, &Rational)> {
        self.prices.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Sentence> {
        self.prices.keys()
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Read access to prices by (sentence, day); absent entries read as 0.
pub trait PriceLookup {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn pricing(&self, day: usize) -> Option<&Pricing>;

    fn lookup(&self, s: &Sentence, day: usize) -> Result<Option<&Rational>, PricingError> {
        match self.pricing(day) {
            Some(p) => Ok(p.get(s)),
            None => Err(PricingError::DayOutOfRange {
                day,
                len: self.len(),
            }),
        }
    }
}

/// Committed pricings P₁…P_m.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValuationHistory {
    days: Vec<Pricing>,
}

impl ValuationHistory {
    pub fn new() -> ValuationHistory {
        ValuationHistory::default()
    }

    pub fn from_days(days: Vec<Pricing>) -> ValuationHistory {
        ValuationHistory { days }
    }

    pub fn push(&mut self, p: Pricing) {
        self.days.push(p);
    }

    pub fn day(&self, n: usize) -> &Pricing {
        &self.days[n - 1]
    }

    pub fn days(&self) -> &[Pricing] {
        &self.days
    }

    pub fn truncated(&self, len: usize) -> ValuationHistory {
        ValuationHistory {
            days: self.days[..len.min(self.days.len())].to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    /// This history with `top` appended as the next day, without copying.
    pub fn with_day<'a>(&'a self, top: &'a Pricing) -> Extended<'a> {
        Extended { base: self, top }
    }
}

impl PriceLookup for ValuationHistory {
    fn len(&self) -> usize {
        self.days.len()
    }

    fn pricing(&self, day: usize) -> Option<&Pricing> {
        if day == 0 {
            None
        } else {
            self.days.get(day - 1)
        }
    }
}

pub struct Extended<'a> {
    base: &'a ValuationHistory,
    top: &'a Pricing,
}

impl PriceLookup for Extended<'_> {
    fn len(&self) -> usize {
        self.base.len() + 1
    }

    fn pricing(&self, day: usize) -> Option<&Pricing> {
        if day == self.base.len() + 1 {
            Some(self.top)
        } else {
            self.base.pricing(day)
        }
    }
}
