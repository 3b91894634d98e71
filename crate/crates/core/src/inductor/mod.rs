//! The day loop: advance the deductive process, collect the catalog's strategies, build the
//! firm, price it, verify, commit.

mod snapshot;

pub use snapshot::{
    load_snapshot, parse_snapshot, render_snapshot, save_snapshot, SnapshotStatus, SNAPSHOT_VERSION,
};

use num_traits::Zero;
use thiserror::Error;

use crate::budgeter::{world_value_range, BudgetError, TraderLedger};
use crate::config::{ConfigError, RunConfig};
use crate::feature::{AffineCombination, FeatureError, TradingStrategy, ValueCache};
use crate::firm::{combine, compute_cn, volume_bound, FirmError};
use crate::logic::{DeductivePrefix, DeductiveProcess, LogicError, Sentence};
use crate::market_maker::{find_fixed_point, verify_fixed_point, MarketMakerError};
use crate::pricing::{Pricing, ValuationHistory};
use crate::rational::Rational;
use crate::traders::{EmissionStatus, TraderCatalog, TraderContext};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InductorError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Firm(#[from] FirmError),
    #[error(transparent)]
    MarketMaker(#[from] MarketMakerError),
    #[error("day {day}: committed pricing fails the fixed-point check")]
    VerificationFailed { day: usize },
    #[error("snapshot line {line}: {msg}")]
    Snapshot { line: usize, msg: String },
    #[error("snapshot checksum mismatch")]
    Checksum,
    #[error("snapshot format `{0}` is not supported")]
    Version(String),
    #[error("snapshot was made with config {found}, current config is {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("day {day}: replay diverges from the snapshot: {msg}")]
    Replay { day: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

/// What was committed on one day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DayRecord {
    pub day: usize,
    /// Sentences first in D on this day.
    pub added: Vec<Sentence>,
    pub pricing: Pricing,
    pub verified: bool,
    pub c_n: u64,
    /// (min, max) of the firm's cumulative holdings value over PC(D_n); `None` if PC(D_n) = ∅.
    pub firm_range: Option<(Rational, Rational)>,
    /// Catalog traders (1-based) whose emission was replaced by zero, with the reason.
    pub issues: Vec<(usize, String)>,
}

/// Everything needed to continue a run: the committed history, the frozen theorem sets, and
/// the incremental budget and C_n caches.
#[derive(Clone, Debug, PartialEq)]
pub struct InductorState {
    pub fingerprint: String,
    pub records: Vec<DayRecord>,
    pub history: ValuationHistory,
    pub prefix: DeductivePrefix,
    pub ledgers: Vec<TraderLedger>,
    pub accumulated: Vec<Rational>,
    pub firm_holdings: AffineCombination,
}

impl InductorState {
    pub fn empty(fingerprint: &str, traders: usize) -> InductorState {
        InductorState {
            fingerprint: fingerprint.to_string(),
            records: Vec::new(),
            history: ValuationHistory::new(),
            prefix: DeductivePrefix::new(),
            ledgers: vec![TraderLedger::new(); traders],
            accumulated: vec![Rational::zero(); traders],
            firm_holdings: AffineCombination::zero(),
        }
    }

    pub fn day(&self) -> usize {
        self.records.len()
    }
}

pub struct Inductor {
    cfg: RunConfig,
    process: Box<dyn DeductiveProcess>,
    catalog: TraderCatalog,
    state: InductorState,
    cache: ValueCache,
}

/// The day-n output of the catalog and firm, before pricing.
struct DayPlan {
    strategies: Vec<TradingStrategy>,
    firm: TradingStrategy,
    c_n: u64,
    accumulated: Vec<Rational>,
    issues: Vec<(usize, String)>,
}

impl Inductor {
    pub fn new(cfg: RunConfig) -> Result<Inductor, InductorError> {
        let process = cfg.build_process()?;
        let catalog = cfg.build_catalog()?;
        let state = InductorState::empty(cfg.fingerprint(), catalog.len());
        Ok(Inductor {
            cfg,
            process,
            catalog,
            state,
            cache: ValueCache::new(),
        })
    }

    /// Continues from a snapshot made with the same configuration. The process is replayed
    /// against the committed prices and must reproduce the stored theorem sets.
    pub fn resume(cfg: RunConfig, state: InductorState) -> Result<Inductor, InductorError> {
        if state.fingerprint != cfg.fingerprint() {
            return Err(InductorError::Fingerprint {
                expected: cfg.fingerprint().to_string(),
                found: state.fingerprint.clone(),
            });
        }
        let mut process = cfg.build_process()?;
        let catalog = cfg.build_catalog()?;
        if state.ledgers.len() != catalog.len() || state.accumulated.len() != catalog.len() {
            return Err(InductorError::Replay {
                day: state.day(),
                msg: "trader count differs from the catalog".into(),
            });
        }
        let mut replayed = DeductivePrefix::new();
        for m in 1..=state.day() {
            replayed.advance(process.as_mut(), &state.history.truncated(m - 1))?;
            if replayed.added(m) != state.prefix.added(m) {
                return Err(InductorError::Replay {
                    day: m,
                    msg: "deductive process emitted different theorems".into(),
                });
            }
        }
        Ok(Inductor {
            cfg,
            process,
            catalog,
            state,
            cache: ValueCache::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn catalog(&self) -> &TraderCatalog {
        &self.catalog
    }

    pub fn state(&self) -> &InductorState {
        &self.state
    }

    pub fn into_state(self) -> InductorState {
        self.state
    }

    fn plan(&mut self, n: usize) -> Result<DayPlan, InductorError> {
        let cap = self.cfg.atom_cap();
        let ctx = TraderContext {
            prefix: &self.state.prefix,
            atom_cap: cap,
        };
        let mut strategies = Vec::with_capacity(self.catalog.len());
        let mut issues = Vec::new();
        let mut accumulated = self.state.accumulated.clone();
        for (i, t) in self.catalog.traders().iter().enumerate() {
            let e = t.emit(n, &ctx);
            match &e.status {
                EmissionStatus::Ok => {}
                EmissionStatus::Timeout => issues.push((i + 1, "timeout".to_string())),
                EmissionStatus::Invalid(msg) => issues.push((i + 1, format!("invalid: {msg}"))),
            }
            accumulated[i] += volume_bound(&e.strategy);
            strategies.push(e.strategy);
        }
        let c_n = compute_cn(&accumulated);
        let (firm, _bands) = combine(
            n,
            &strategies,
            &self.state.ledgers,
            c_n,
            self.state.prefix.get(n),
            &self.state.history,
            cap,
            &self.cfg.firm(),
        )?;
        debug_assert!(firm.rank() <= n);
        Ok(DayPlan {
            strategies,
            firm,
            c_n,
            accumulated,
            issues,
        })
    }

    fn commit(&mut self, n: usize, plan: DayPlan, pricing: Pricing) -> Result<(), InductorError> {
        let verified = verify_fixed_point(&plan.firm, &self.state.history, &pricing)?;
        if !verified {
            return Err(InductorError::VerificationFailed { day: n });
        }
        self.state.history.push(pricing.clone());
        let (ledgers, holdings, firm_range) = match self.settle(n, &plan) {
            Ok(v) => v,
            Err(e) => {
                self.state.history = self.state.history.truncated(n - 1);
                return Err(e);
            }
        };
        self.state.ledgers = ledgers;
        self.state.firm_holdings = holdings;
        self.state.accumulated = plan.accumulated;
        self.state.records.push(DayRecord {
            day: n,
            added: self.state.prefix.added(n).to_vec(),
            pricing,
            verified,
            c_n: plan.c_n,
            firm_range,
            issues: plan.issues,
        });
        Ok(())
    }

    /// Ledgers and firm holdings after executing day n; the state itself is left alone.
    #[allow(clippy::type_complexity)]
    fn settle(
        &mut self,
        n: usize,
        plan: &DayPlan,
    ) -> Result<
        (
            Vec<TraderLedger>,
            AffineCombination,
            Option<(Rational, Rational)>,
        ),
        InductorError,
    > {
        let cap = self.cfg.atom_cap();
        self.cache.set_horizon(n - 1);
        let d_n = self.state.prefix.get(n).clone();
        let mut ledgers = self.state.ledgers.clone();
        for (ledger, s) in ledgers.iter_mut().zip(&plan.strategies) {
            let executed = s.execute_cached(&self.state.history, Some(&mut self.cache))?;
            ledger.record(&executed, &d_n, cap)?;
        }
        let firm_exec = plan
            .firm
            .execute_cached(&self.state.history, Some(&mut self.cache))?;
        let mut holdings = self.state.firm_holdings.clone();
        holdings.add_assign(&firm_exec);
        let firm_range = world_value_range(&holdings, &d_n, cap)?;
        Ok((ledgers, holdings, firm_range))
    }

    /// Commits day n+1. On error the state is left at day n.
    pub fn step(&mut self) -> Result<&DayRecord, InductorError> {
        let n = self.state.day() + 1;
        if let Err(e) = self.try_step(n) {
            self.state.prefix.truncate(n - 1);
            return Err(e);
        }
        Ok(self.state.records.last().expect("just committed"))
    }

    fn try_step(&mut self, n: usize) -> Result<(), InductorError> {
        self.state
            .prefix
            .advance(self.process.as_mut(), &self.state.history)?;
        let plan = self.plan(n)?;
        self.cache.set_horizon(n - 1);
        let fp = find_fixed_point(
            &plan.firm,
            &self.state.history,
            &self.cfg.market_maker(),
            Some(&mut self.cache),
        )?;
        self.commit(n, plan, fp.pricing)
    }

    pub fn run_to(&mut self, horizon: usize) -> Result<(), InductorError> {
        while self.state.day() < horizon {
            self.step()?;
        }
        Ok(())
    }
}

/// Fresh run of `horizon` days.
pub fn run(cfg: RunConfig, horizon: usize) -> Result<InductorState, InductorError> {
    let mut ind = Inductor::new(cfg)?;
    ind.run_to(horizon)?;
    Ok(ind.into_state())
}

/// Replays every day of `state` from scratch with the stored prices in place of the search:
/// each committed pricing must pass the fixed-point check against the regenerated firm, and
/// the rebuilt caches must equal the stored ones.
pub fn reverify(cfg: RunConfig, state: &InductorState) -> Result<(), InductorError> {
    if state.fingerprint != cfg.fingerprint() {
        return Err(InductorError::Fingerprint {
            expected: cfg.fingerprint().to_string(),
            found: state.fingerprint.clone(),
        });
    }
    let mut ind = Inductor::new(cfg)?;
    for rec in &state.records {
        let n = rec.day;
        ind.state
            .prefix
            .advance(ind.process.as_mut(), &ind.state.history)?;
        if ind.state.prefix.added(n) != rec.added.as_slice() {
            return Err(InductorError::Replay {
                day: n,
                msg: "deductive process emitted different theorems".into(),
            });
        }
        let plan = ind.plan(n)?;
        ind.commit(n, plan, rec.pricing.clone())?;
        if ind.state.records.last() != Some(rec) {
            return Err(InductorError::Replay {
                day: n,
                msg: "day record differs".into(),
            });
        }
    }
    if ind.state != *state {
        return Err(InductorError::Replay {
            day: state.day(),
            msg: "final caches differ".into(),
        });
    }
    Ok(())
}
