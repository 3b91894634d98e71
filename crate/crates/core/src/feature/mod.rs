//! Expressible features over price histories, trading strategies built from them, and their
//! executed affine combinations.
//!
//! Features are shared DAGs: a node built once and referenced from many places is evaluated
//! once per call. Derived operators (negation, subtraction, min, abs, threshold indicators,
//! witnessed division) desugar into the six core node kinds at construction.

mod expr;
mod parse;
mod strategy;
mod tape;

pub use expr::{eval_into, program_text, topo_order, Direction, Feature, Kind, ValueCache};
pub use parse::{parse_feature_program, parse_strategy};
pub use strategy::{AffineCombination, FeatureCombination, TradingStrategy};
pub use tape::{Interval, Tape};

use thiserror::Error;

use crate::logic::LogicError;
use crate::pricing::{PriceLookup, PricingError};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("line {line}, column {col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("line {line}: undefined variable `{name}`")]
    UndefinedVariable { name: String, line: usize },
    #[error("line {line}: price symbol day must be positive")]
    NonPositiveDay { line: usize },
    #[error("division witness must be positive, got {0}")]
    NonPositiveWitness(String),
    #[error("indicator width must be positive, got {0}")]
    NonPositiveDelta(String),
    #[error("feature of rank {rank} evaluated on a history of length {len}")]
    RankExceedsHistory { rank: usize, len: usize },
    #[error("coefficient of rank {rank} in a day-{day} strategy")]
    RankExceedsDay { rank: usize, day: usize },
    #[error("strategies of days {0} and {1} cannot be combined")]
    DayMismatch(usize, usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

/// Ordered bindings plus a return expression. Bindings are kept for display; evaluation and
/// rank only see what the return expression reaches.
#[derive(Clone, Debug)]
pub struct FeatureProgram {
    bindings: Vec<(String, Feature)>,
    ret: Feature,
}

impl FeatureProgram {
    pub fn new(bindings: Vec<(String, Feature)>, ret: Feature) -> FeatureProgram {
        FeatureProgram { bindings, ret }
    }

    pub fn from_feature(ret: Feature) -> FeatureProgram {
        FeatureProgram {
            bindings: Vec::new(),
            ret,
        }
    }

    pub fn parse(text: &str) -> Result<FeatureProgram, FeatureError> {
        parse_feature_program(text)
    }

    pub fn bindings(&self) -> &[(String, Feature)] {
        &self.bindings
    }

    pub fn feature(&self) -> &Feature {
        &self.ret
    }

    pub fn rank(&self) -> usize {
        self.ret.rank()
    }

    pub fn bound(&self) -> Rational {
        self.ret.bound()
    }

    pub fn eval(&self, h: &dyn PriceLookup) -> Result<Rational, FeatureError> {
        if self.ret.rank() > h.len() {
            return Err(FeatureError::RankExceedsHistory {
                rank: self.ret.rank(),
                len: h.len(),
            });
        }
        self.ret.eval(h)
    }

    /// Canonical text; parses back to an equivalent program.
    pub fn text(&self) -> String {
        program_text(&self.ret)
    }
}
