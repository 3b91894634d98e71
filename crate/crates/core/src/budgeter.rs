//! Caps a trader's plausible losses at a budget b.
//!
//! Day n: if some earlier day m and world W ∈ PC(D_m) already had W(holdings through m) ≤ −b,
//! the trader is frozen at zero. Otherwise T_n is scaled by
//! min_{W ∈ PC(D_n)} SafeRecip(−W(T_n) / d_W) with d_W = b + W(holdings through n−1) > 0,
//! which keeps every plausible net worth above −b.
//!
//! Worlds are enumerated over atoms(D_m) ∪ the atoms traded so far and projected onto the
//! traded atoms, which leaves every value unchanged.

use std::collections::BTreeSet;

use num_traits::Signed;
use thiserror::Error;

use crate::feature::{AffineCombination, Feature, FeatureError, TradingStrategy};
use crate::logic::{Atom, DeductivePrefix, LogicError, TheoremSet};
use crate::pricing::ValuationHistory;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BudgetError {
    #[error("budget must be a positive integer")]
    NonPositiveBudget,
    #[error("world {world}: budget denominator {value} is not positive")]
    NonPositiveDenominator { world: String, value: String },
    #[error("need strategies and theorems through day {need}, have {have}")]
    MissingDays { need: usize, have: usize },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Atoms occurring in the shares of `a`.
pub fn traded_atoms(a: &AffineCombination) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    for s in a.shares().keys() {
        s.collect_atoms(&mut out);
    }
    out
}

/// (min, max) of W(a) over W ∈ PC(d); `None` when d has no plausible world.
pub fn world_value_range(
    a: &AffineCombination,
    d: &TheoremSet,
    cap: usize,
) -> Result<Option<(Rational, Rational)>, LogicError> {
    let worlds = d.project_worlds(&traded_atoms(a), cap)?;
    let mut range: Option<(Rational, Rational)> = None;
    for w in worlds.iter() {
        let v = a.world_value(w)?;
        range = Some(match range {
            None => (v.clone(), v),
            Some((lo, hi)) => (rational::min_of(&lo, &v), rational::max_of(&hi, &v)),
        });
    }
    Ok(range)
}

/// Running account of one trader's executed trades: cumulative holdings and the lowest
/// plausible net worth seen on any completed day.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraderLedger {
    holdings: AffineCombination,
    running_min: Option<Rational>,
    days: usize,
}

impl TraderLedger {
    pub fn new() -> TraderLedger {
        TraderLedger::default()
    }

    pub fn from_parts(
        holdings: AffineCombination,
        running_min: Option<Rational>,
        days: usize,
    ) -> TraderLedger {
        TraderLedger {
            holdings,
            running_min,
            days,
        }
    }

    /// Cumulative executed holdings through the last recorded day.
    pub fn holdings(&self) -> &AffineCombination {
        &self.holdings
    }

    /// min over recorded days m and W ∈ PC(D_m) of W(holdings through m).
    pub fn running_min(&self) -> Option<&Rational> {
        self.running_min.as_ref()
    }

    pub fn days(&self) -> usize {
        self.days
    }

    /// Whether budget b is already breached, so Budgeter outputs zero from now on.
    pub fn breached(&self, b: &Rational) -> bool {
        self.running_min.as_ref().is_some_and(|r| r <= &-b)
    }

    /// Adds day m's executed trade and folds the day-m plausible minimum into the running min.
    pub fn record(
        &mut self,
        executed: &AffineCombination,
        d_m: &TheoremSet,
        cap: usize,
    ) -> Result<(), LogicError> {
        self.holdings.add_assign(executed);
        self.days += 1;
        if let Some((lo, _)) = world_value_range(&self.holdings, d_m, cap)? {
            self.running_min = Some(match self.running_min.take() {
                Some(r) => rational::min_of(&r, &lo),
                None => lo,
            });
        }
        Ok(())
    }
}

/// Budgeter output for day n = `t_n.day()` given the ledger through day n−1.
pub fn budget_with_ledger(
    b: &Rational,
    t_n: &TradingStrategy,
    ledger: &TraderLedger,
    d_n: &TheoremSet,
    cap: usize,
) -> Result<TradingStrategy, BudgetError> {
    if !b.is_positive() {
        return Err(BudgetError::NonPositiveBudget);
    }
    let n = t_n.day();
    if ledger.breached(b) {
        return Ok(TradingStrategy::zero(n));
    }
    if t_n.is_zero() {
        return Ok(t_n.clone());
    }
    Ok(t_n.scale(&scale_feature(b, t_n, ledger.holdings(), d_n, cap)?)?)
}

/// min_{W ∈ PC(D_n)} SafeRecip(−W(T_n)/d_W); the constant 1 when PC(D_n) is empty.
pub fn scale_feature(
    b: &Rational,
    t_n: &TradingStrategy,
    holdings: &AffineCombination,
    d_n: &TheoremSet,
    cap: usize,
) -> Result<Feature, BudgetError> {
    let mut focus = traded_atoms(holdings);
    for s in t_n.support() {
        s.collect_atoms(&mut focus);
    }
    let worlds = d_n.project_worlds(&focus, cap)?;
    let mut scale: Option<Feature> = None;
    for w in worlds.iter() {
        let d_w = b + holdings.world_value(w)?;
        if !d_w.is_positive() {
            return Err(BudgetError::NonPositiveDenominator {
                world: w.to_string(),
                value: d_w.to_string(),
            });
        }
        let loss = t_n.world_value(w)?.neg();
        let term = Feature::safe_recip(&Feature::div_with_witness(
            &loss,
            &Feature::constant(d_w.clone()),
            &d_w,
        )?);
        scale = Some(match scale {
            None => term,
            Some(acc) => Feature::min(&acc, &term),
        });
    }
    Ok(scale.unwrap_or_else(Feature::one))
}

/// Literal Budgeter: replays T_1..T_{n−1} on `h` against D_1..D_{n−1}, then budgets T_n.
/// `strategies[i]` is the day-(i+1) strategy; `h` must cover days 1..n−1.
pub fn budget(
    b: &Rational,
    strategies: &[TradingStrategy],
    h: &ValuationHistory,
    prefix: &DeductivePrefix,
    cap: usize,
) -> Result<TradingStrategy, BudgetError> {
    let n = strategies.len();
    if n == 0 || prefix.len() < n || h.len() + 1 < n {
        return Err(BudgetError::MissingDays {
            need: n.max(1),
            have: prefix.len().min(h.len() + 1),
        });
    }
    let mut ledger = TraderLedger::new();
    for (i, t) in strategies[..n - 1].iter().enumerate() {
        ledger.record(&t.execute(h)?, prefix.get(i + 1), cap)?;
    }
    budget_with_ledger(b, &strategies[n - 1], &ledger, prefix.get(n), cap)
}

/// (min, max) of W(Σ_{i≤m} execute(T_i, h)) over W ∈ PC(D_m); `None` for an empty PC(D_m).
pub fn plausible_value_range(
    strategies: &[TradingStrategy],
    h: &ValuationHistory,
    prefix: &DeductivePrefix,
    m: usize,
    cap: usize,
) -> Result<Option<(Rational, Rational)>, BudgetError> {
    if strategies.len() < m || h.len() < m || prefix.len() < m {
        return Err(BudgetError::MissingDays {
            need: m,
            have: strategies.len().min(h.len()).min(prefix.len()),
        });
    }
    let mut total = AffineCombination::zero();
    for t in &strategies[..m] {
        total.add_assign(&t.execute(h)?);
    }
    Ok(world_value_range(&total, prefix.get(m), cap)?)
}
