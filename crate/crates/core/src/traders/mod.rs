//! Traders: deterministic generators of one strategy per day, the step-budgeted wrapper that
//! turns misbehaviour into the zero strategy, and the auditor library.
//!
//! A catalog here is finite and configured. The market built against it is unexploitable by
//! the catalog's traders only, not by every efficiently computable trader.

mod auditors;
mod catalog;
mod template;

pub use auditors::{
    maybe_open, BuyTrader, CoherenceTrader, ConvergenceTrader, NondogmatismTrader,
    PseudorandomTrader, ZeroTrader,
};
pub use catalog::{build_traders, parse_catalog_entry, CatalogEntry, CatalogValue};
pub use template::{SentenceSeq, TemplateTrader};

use std::sync::Arc;

use thiserror::Error;

use crate::feature::{FeatureError, TradingStrategy};
use crate::logic::{DeductivePrefix, LogicError};
use crate::template::TemplateError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraderError {
    #[error("step budget of {limit} exhausted")]
    StepsExceeded { limit: u64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("theorems through day {need} are not available (have {have})")]
    MissingTheorems { need: usize, have: usize },
    #[error("catalog entry `{entry}`: {msg}")]
    Catalog { entry: String, msg: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// What a trader may look at while writing its day-n strategy: the theorem sets D₁…Dₙ.
/// Prices enter only symbolically, through the features it builds.
pub struct TraderContext<'a> {
    pub prefix: &'a DeductivePrefix,
    pub atom_cap: usize,
}

impl TraderContext<'_> {
    pub fn require_day(&self, n: usize) -> Result<(), TraderError> {
        if self.prefix.len() < n {
            Err(TraderError::MissingTheorems {
                need: n,
                have: self.prefix.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Deterministic operation counter. Counts are platform independent.
#[derive(Clone, Debug)]
pub struct StepMeter {
    used: u64,
    limit: u64,
}

impl StepMeter {
    pub fn new(limit: u64) -> StepMeter {
        StepMeter { used: 0, limit }
    }

    pub fn unlimited() -> StepMeter {
        StepMeter::new(u64::MAX)
    }

    pub fn charge(&mut self, steps: u64) -> Result<(), TraderError> {
        self.used = self.used.saturating_add(steps);
        if self.used > self.limit {
            Err(TraderError::StepsExceeded { limit: self.limit })
        } else {
            Ok(())
        }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }
}

/// f(n) = Σ cᵢ·nⁱ, saturating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepPoly {
    pub coefficients: Vec<u64>,
}

impl StepPoly {
    pub fn new(coefficients: Vec<u64>) -> StepPoly {
        StepPoly { coefficients }
    }

    pub fn eval(&self, n: usize) -> u64 {
        let n = n as u64;
        self.coefficients
            .iter()
            .rev()
            .fold(0u64, |acc, &c| acc.saturating_mul(n).saturating_add(c))
    }

    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|&c| c != 0).unwrap_or(0)
    }
}

impl Default for StepPoly {
    /// 4096 + 64·n³.
    fn default() -> Self {
        StepPoly::new(vec![4096, 0, 0, 64])
    }
}

/// A catalog label with its trader.
pub type NamedTrader = (String, Arc<dyn Trader>);

pub trait Trader: Send + Sync {
    fn name(&self) -> String;

    /// The day-n strategy. Must not depend on anything beyond `n`, `ctx`, and construction
    /// parameters.
    fn generate(
        &self,
        n: usize,
        ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EmissionStatus {
    Ok,
    Timeout,
    Invalid(String),
}

#[derive(Clone, Debug)]
pub struct Emission {
    pub strategy: TradingStrategy,
    pub status: EmissionStatus,
    pub steps: u64,
}

/// Runs the inner trader under the step budget f(n). Steps are whatever the generator charges
/// plus the number of distinct feature nodes reachable from the output. Timeouts, errors,
/// and outputs for the wrong day all become the zero strategy.
pub struct Ect {
    inner: Arc<dyn Trader>,
    poly: StepPoly,
}

impl Ect {
    pub fn new(inner: Arc<dyn Trader>, poly: StepPoly) -> Ect {
        Ect { inner, poly }
    }

    pub fn emit(&self, n: usize, ctx: &TraderContext<'_>) -> Emission {
        let mut meter = StepMeter::new(self.poly.eval(n));
        let zero = |status, meter: &StepMeter| Emission {
            strategy: TradingStrategy::zero(n),
            status,
            steps: meter.used(),
        };
        let t = match self.inner.generate(n, ctx, &mut meter) {
            Ok(t) => t,
            Err(TraderError::StepsExceeded { .. }) => return zero(EmissionStatus::Timeout, &meter),
            Err(e) => return zero(EmissionStatus::Invalid(e.to_string()), &meter),
        };
        if t.day() != n || t.rank() > n {
            return zero(
                EmissionStatus::Invalid(format!(
                    "day {} strategy of rank {} on day {n}",
                    t.day(),
                    t.rank()
                )),
                &meter,
            );
        }
        if meter.charge(t.node_count() as u64).is_err() {
            return zero(EmissionStatus::Timeout, &meter);
        }
        Emission {
            strategy: t,
            status: EmissionStatus::Ok,
            steps: meter.used(),
        }
    }
}

impl Trader for Ect {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn generate(
        &self,
        n: usize,
        ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        let e = self.emit(n, ctx);
        meter.charge(e.steps)?;
        Ok(e.strategy)
    }
}

/// Zero strategy on every day before `k`.
pub struct ZeroBefore {
    k: usize,
    inner: Arc<dyn Trader>,
}

impl ZeroBefore {
    pub fn new(k: usize, inner: Arc<dyn Trader>) -> ZeroBefore {
        ZeroBefore { k, inner }
    }
}

impl Trader for ZeroBefore {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn generate(
        &self,
        n: usize,
        ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        if n < self.k {
            Ok(TradingStrategy::zero(n))
        } else {
            self.inner.generate(n, ctx, meter)
        }
    }
}

/// Trader k of the catalog (1-based), already step-budgeted and silent before day k.
pub struct CatalogTrader {
    pub k: usize,
    pub spec: String,
    ect: Ect,
}

impl CatalogTrader {
    pub fn emit(&self, n: usize, ctx: &TraderContext<'_>) -> Emission {
        if n < self.k {
            return Emission {
                strategy: TradingStrategy::zero(n),
                status: EmissionStatus::Ok,
                steps: 0,
            };
        }
        self.ect.emit(n, ctx)
    }

    pub fn name(&self) -> String {
        self.ect.name()
    }
}

/// Ordered, budgeted traders; enumeration order is the configuration order.
pub struct TraderCatalog {
    traders: Vec<CatalogTrader>,
}

impl TraderCatalog {
    pub fn traders(&self) -> &[CatalogTrader] {
        &self.traders
    }

    pub fn len(&self) -> usize {
        self.traders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traders.is_empty()
    }
}

/// Wraps trader k (1-based, in order) so it is zero before day k and runs under `poly`.
pub fn emulatable(traders: Vec<(String, Arc<dyn Trader>)>, poly: &StepPoly) -> TraderCatalog {
    let traders = traders
        .into_iter()
        .enumerate()
        .map(|(i, (spec, t))| CatalogTrader {
            k: i + 1,
            spec,
            ect: Ect::new(t, poly.clone()),
        })
        .collect();
    TraderCatalog { traders }
}

#[cfg(test)]
mod tests;
