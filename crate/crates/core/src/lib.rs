//! Logical induction over propositional sentences with exact rational prices.
//!
//! The pipeline: a catalog of traders emits feature-valued strategies each day, the trading
//! firm budgets and aggregates them, and the market maker finds a belief state under which the
//! aggregate trade gains at most `2^-n` in every world.

pub mod budgeter;
pub mod config;
pub mod diagnostics;
pub mod feature;
pub mod firm;
pub mod inductor;
pub mod logic;
pub mod market_maker;
pub mod pricing;
pub mod rational;
pub mod template;
pub mod traders;

pub use feature::{AffineCombination, Feature, FeatureError, FeatureProgram, TradingStrategy};
pub use logic::{Atom, DeductivePrefix, DeductiveProcess, LogicError, Sentence, TheoremSet, World};
pub use pricing::{PriceLookup, Pricing, ValuationHistory};
pub use rational::Rational;
