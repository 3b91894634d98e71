use std::fmt;

use super::{StepMeter, Trader, TraderContext, TraderError};
use crate::feature::{parse_strategy, TradingStrategy};
use crate::logic::Sentence;
use crate::template::instantiate;

/// A deterministic sentence sequence φ₁, φ₂, …
#[derive(Clone, Debug)]
pub enum SentenceSeq {
    /// φ_n = list[(n − 1) mod len].
    Cycle(Vec<Sentence>),
    /// φ_n parsed from the template with `{n}` substituted.
    Template(String),
}

impl SentenceSeq {
    pub fn get(&self, n: usize) -> Result<Sentence, TraderError> {
        match self {
            SentenceSeq::Cycle(list) => {
                if list.is_empty() {
                    return Err(TraderError::Parameter("empty sentence sequence".into()));
                }
                Ok(list[(n - 1) % list.len()].clone())
            }
            SentenceSeq::Template(t) => Ok(Sentence::parse(&instantiate(t, n)?)?),
        }
    }
}

impl fmt::Display for SentenceSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentenceSeq::Cycle(list) => {
                let items: Vec<String> = list.iter().map(|s| format!("\"{s}\"")).collect();
                write!(f, "[{}]", items.join(", "))
            }
            SentenceSeq::Template(t) => write!(f, "\"{t}\""),
        }
    }
}

/// A trader written as a per-day strategy template: `name := expr` bindings and
/// `T[<sentence>] := expr` lines in which `{n}`, `{n-1}`, … stand for day numbers. Each
/// whitespace-separated token of the instantiated text costs one step.
pub struct TemplateTrader {
    name: String,
    text: String,
}

impl TemplateTrader {
    pub fn new(name: &str, text: &str) -> TemplateTrader {
        TemplateTrader {
            name: name.to_string(),
            text: text.to_string(),
        }
    }
}

impl Trader for TemplateTrader {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        let text = instantiate(&self.text, n)?;
        meter.charge(text.split_whitespace().count() as u64)?;
        Ok(parse_strategy(&text, n)?)
    }
}
