//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use lia_core::config::RunConfig;
use lia_core::feature::parse_strategy;
use lia_core::{Sentence, TradingStrategy};

pub fn demo_config() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
    RunConfig::load(&path).expect("demo config loads")
}

/// A day-1 strategy with a coupled fixed point: a at 1/2, b tracking a.
pub fn coupled_strategy() -> TradingStrategy {
    parse_strategy(
        "T[a] := 1/2 + (-1) * P[a]@1\nT[b] := P[a]@1 + (-1) * P[b]@1\nT[a|b] := 3/4 + (-1) * P[a|b]@1",
        1,
    )
    .expect("fixture parses")
}

/// A chain a0 -> a1 -> ... -> a{k-1}, one implication per sentence.
pub fn implication_chain(k: usize) -> Vec<Sentence> {
    (1..k)
        .map(|i| Sentence::parse(&format!("a{} -> a{i}", i - 1)).expect("fixture parses"))
        .collect()
}
