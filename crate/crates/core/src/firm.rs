//! The trading firm: every catalog trader k ≤ n under every budget b, weighted 2^{-k-b} and
//! summed, with the b-sum truncated at C_n.
//!
//! The budgets fall into three bands given trader k's ledger through day n−1:
//! b < b_nb are breached and contribute zero; b ≥ b_flat have a scale factor that is
//! identically 1 on every day-n price vector, so B^{b,k}_n = S^k_n. With
//! b_lit = min(max(b_nb, b_flat), C_n + 1) the whole b-sum therefore collapses to
//! `S^k_n · (Σ_{b=b_nb}^{b_lit−1} 2^{-k-b}·scale_{k,b} + 2^{-k-b_lit+1})`, by
//! Σ_{b=L}^{C} 2^{-b} + 2^{-C} = 2^{1-L}. The literal sum is kept for cross-checking.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::budgeter::{budget_with_ledger, scale_feature, traded_atoms, BudgetError, TraderLedger};
use crate::feature::{topo_order, Feature, FeatureError, Interval, Kind, Tape, TradingStrategy};
use crate::logic::{LogicError, Sentence, TheoremSet};
use crate::pricing::ValuationHistory;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FirmError {
    #[error("{strategies} strategies but {ledgers} ledgers")]
    LedgerMismatch { strategies: usize, ledgers: usize },
    #[error("strategy for day {got} passed to the day-{day} firm")]
    WrongDay { day: usize, got: usize },
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirmMode {
    Collapsed,
    /// Σ_{b=1}^{C_n + extra_b_margin} 2^{-k-b}·Budgeter(b) + 2^{-k-cutoff}·S^k, term by term.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirmConfig {
    pub mode: FirmMode,
    pub extra_b_margin: u64,
    /// Boxes the interval bound on a trader's day-n loss may be refined into.
    pub interval_cells: usize,
}

impl Default for FirmConfig {
    fn default() -> Self {
        FirmConfig {
            mode: FirmMode::Collapsed,
            extra_b_margin: 0,
            interval_cells: 64,
        }
    }
}

/// ℓ1 bound on one executed strategy: |shares| + |cash| ≤ Σ_φ 2·bound(coef φ).
pub fn volume_bound(t: &TradingStrategy) -> Rational {
    t.coefficients().values().fold(Rational::zero(), |acc, f| {
        acc + f.bound() * rational::int(2)
    })
}

/// C_n = floor(max_k acc_k) + 1, where acc_k is trader k's summed volume bound through day n.
pub fn compute_cn(accumulated: &[Rational]) -> u64 {
    let max = accumulated
        .iter()
        .fold(Rational::zero(), |m, a| rational::max_of(&m, a));
    let c: BigInt = rational::floor_to_bigint(&max) + 1;
    c.to_u64().unwrap_or(u64::MAX)
}

/// How trader k's b-sum was evaluated on one day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BudgetBand {
    /// Smallest unbreached budget.
    pub b_nb: u64,
    /// First budget summed as a plain S^k_n tail.
    pub b_lit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirmCertificate {
    pub day: usize,
    pub c_n: u64,
    /// Per-trader volume bounds summed through day n.
    pub accumulated: Vec<Rational>,
    /// Σ_k 2^{-k}·volume_bound(S^k_n), dominating ℓ1 of the firm's executed day-n trade.
    pub l1_bound: Rational,
    pub bands: Vec<BudgetBand>,
}

fn b_rational(b: u64) -> Rational {
    Rational::from_integer(BigInt::from(b))
}

fn weight(k: usize, b: u64) -> Rational {
    rational::pow2(-(k as i64) - b as i64)
}

/// Sound upper bound on max_W (−W(S_n) − W(H)) over all day-n prices, refined by bisection
/// until it drops to `target` or `cells` boxes are in play. `None` when PC(D_n) is empty.
fn flat_threshold(
    t_n: &TradingStrategy,
    ledger: &TraderLedger,
    d_n: &TheoremSet,
    h: &ValuationHistory,
    cap: usize,
    target: &Rational,
    cells: usize,
) -> Result<Option<Rational>, FirmError> {
    let mut focus: BTreeSet<_> = traded_atoms(ledger.holdings());
    for s in t_n.support() {
        s.collect_atoms(&mut focus);
    }
    let worlds = d_n.project_worlds(&focus, cap)?;
    if worlds.is_empty() {
        return Ok(None);
    }
    let mut losses = Vec::with_capacity(worlds.len());
    let mut held = Vec::with_capacity(worlds.len());
    for w in worlds.iter() {
        losses.push(t_n.world_value(w)?.neg());
        held.push(ledger.holdings().world_value(w)?);
    }
    // Every day-n price the losses read, not only the trader's own support: the firm's
    // support is wider and the market maker may set any of them.
    let day = t_n.day();
    let vars: Vec<Sentence> = topo_order(&losses, |f| f.rank() < day)
        .iter()
        .filter_map(|f| match f.kind() {
            Kind::PriceSym(s, d) if *d == day => Some(s.clone()),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tape = Tape::compile(&losses, &vars, day, h, None)?;
    let score = |bx: &[Interval]| -> Rational {
        let out = tape.eval_interval(bx);
        out.iter()
            .zip(&held)
            .map(|(iv, hw)| &iv.hi - hw)
            .max()
            .expect("at least one world")
    };
    let unit = Interval::new(Rational::zero(), Rational::one());
    let root: Vec<Interval> = vec![unit; vars.len()];
    let mut boxes = vec![(score(&root), root)];
    loop {
        let (top, _) = boxes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(&a.0)))
            .expect("nonempty");
        if &boxes[top].0 <= target || boxes.len() >= cells {
            break;
        }
        let (_, bx) = boxes.swap_remove(top);
        let dim = (0..bx.len())
            .filter(|&i| tape.uses_var(i))
            .max_by(|&a, &b| {
                (&bx[a].hi - &bx[a].lo)
                    .cmp(&(&bx[b].hi - &bx[b].lo))
                    .then(b.cmp(&a))
            });
        let Some(dim) = dim else {
            boxes.push((score(&bx), bx));
            break;
        };
        let mid = (&bx[dim].lo + &bx[dim].hi) * rational::half();
        let mut left = bx.clone();
        left[dim] = Interval::new(bx[dim].lo.clone(), mid.clone());
        let mut right = bx;
        right[dim] = Interval::new(mid, right[dim].hi.clone());
        boxes.push((score(&left), left));
        boxes.push((score(&right), right));
    }
    Ok(boxes.into_iter().map(|(s, _)| s).max())
}

/// The day-n firm strategy from the catalog's day-n strategies (`strategies[k-1]` is trader k)
/// and each trader's ledger through day n−1. `c_n` comes from [`compute_cn`] including day n.
#[allow(clippy::too_many_arguments)]
pub fn combine(
    n: usize,
    strategies: &[TradingStrategy],
    ledgers: &[TraderLedger],
    c_n: u64,
    d_n: &TheoremSet,
    h: &ValuationHistory,
    cap: usize,
    cfg: &FirmConfig,
) -> Result<(TradingStrategy, Vec<BudgetBand>), FirmError> {
    if strategies.len() != ledgers.len() {
        return Err(FirmError::LedgerMismatch {
            strategies: strategies.len(),
            ledgers: ledgers.len(),
        });
    }
    let mut firm = TradingStrategy::zero(n);
    let mut bands = Vec::with_capacity(strategies.len());
    for (i, (s, ledger)) in strategies.iter().zip(ledgers).enumerate() {
        let k = i + 1;
        if s.day() != n {
            return Err(FirmError::WrongDay {
                day: n,
                got: s.day(),
            });
        }
        let b_nb = match ledger.running_min() {
            Some(r) if r.is_negative() => {
                let f: BigInt = rational::floor_to_bigint(&-r.clone()) + 1;
                f.to_u64().unwrap_or(u64::MAX).max(1)
            }
            _ => 1,
        };
        if k > n || s.is_zero() {
            bands.push(BudgetBand {
                b_nb,
                b_lit: b_nb.min(c_n + 1),
            });
            continue;
        }
        match cfg.mode {
            FirmMode::Collapsed => {
                let band = if b_nb > c_n {
                    BudgetBand {
                        b_nb,
                        b_lit: c_n + 1,
                    }
                } else {
                    let b_flat = flat_threshold(
                        s,
                        ledger,
                        d_n,
                        h,
                        cap,
                        &b_rational(b_nb),
                        cfg.interval_cells,
                    )?
                    .map(|u| rational::ceil_to_bigint(&u).to_u64().unwrap_or(u64::MAX))
                    .unwrap_or(1)
                    .max(1);
                    BudgetBand {
                        b_nb,
                        b_lit: b_nb.max(b_flat).min(c_n + 1),
                    }
                };
                let mut factor =
                    Feature::constant(rational::pow2(-(k as i64) - band.b_lit as i64 + 1));
                for b in band.b_nb..band.b_lit {
                    let sc = scale_feature(&b_rational(b), s, ledger.holdings(), d_n, cap)?;
                    factor = Feature::sum(&factor, &sc.scale(&weight(k, b)));
                }
                firm = firm.add(&s.scale(&factor)?)?;
                bands.push(band);
            }
            FirmMode::Literal => {
                let cutoff = c_n.saturating_add(cfg.extra_b_margin);
                for b in 1..=cutoff {
                    let bt = budget_with_ledger(&b_rational(b), s, ledger, d_n, cap)?;
                    firm = firm.add(&bt.scale_const(&weight(k, b)))?;
                }
                firm = firm.add(&s.scale_const(&weight(k, cutoff)))?;
                bands.push(BudgetBand {
                    b_nb,
                    b_lit: cutoff + 1,
                });
            }
        }
    }
    Ok((firm, bands))
}

/// Σ_k 2^{-k}·volume_bound(S^k_n).
pub fn l1_bound(strategies: &[TradingStrategy]) -> Rational {
    strategies
        .iter()
        .enumerate()
        .fold(Rational::zero(), |acc, (i, s)| {
            acc + volume_bound(s) * rational::pow2(-(i as i64) - 1)
        })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::feature::parse_strategy;
    use crate::logic::{DeductivePrefix, Sentence, DEFAULT_ATOM_CAP};
    use crate::pricing::Pricing;
    use crate::rational::{int, ratio};

    fn s(t: &str) -> Sentence {
        Sentence::parse(t).unwrap()
    }

    fn strategy(day: usize, text: &str) -> TradingStrategy {
        parse_strategy(text, day).unwrap()
    }

    #[test]
    fn cn_examples() {
        assert_eq!(compute_cn(&[]), 1);
        assert_eq!(compute_cn(&[Rational::zero(), Rational::zero()]), 1);
        let buy = TradingStrategy::buy(1, s("a"), int(1));
        assert_eq!(compute_cn(&[volume_bound(&buy)]), 3);
        let two = strategy(1, "T[a] := 2 * P[a]@1");
        assert_eq!(compute_cn(&[volume_bound(&two)]), 5);
        assert_eq!(compute_cn(&[ratio(7, 2), int(2)]), 4);
    }

    fn ledger_for(
        strats: &[TradingStrategy],
        h: &ValuationHistory,
        prefix: &DeductivePrefix,
    ) -> TraderLedger {
        let mut l = TraderLedger::new();
        for (i, t) in strats.iter().enumerate() {
            l.record(&t.execute(h).unwrap(), prefix.get(i + 1), DEFAULT_ATOM_CAP)
                .unwrap();
        }
        l
    }

    fn empty_prefix(n: usize) -> DeductivePrefix {
        let mut p = DeductivePrefix::new();
        for _ in 0..n {
            p.push_day(Vec::new());
        }
        p
    }

    fn grid_histories(n: usize, sentences: &[&str]) -> Vec<ValuationHistory> {
        let steps = [
            ratio(0, 1),
            ratio(1, 4),
            ratio(1, 2),
            ratio(5, 6),
            ratio(1, 1),
        ];
        (0..steps.len())
            .map(|g| {
                let days = (1..=n)
                    .map(|d| {
                        Pricing::from_pairs(
                            sentences
                                .iter()
                                .enumerate()
                                .map(|(j, t)| (s(t), steps[(g + d + 2 * j) % steps.len()].clone())),
                        )
                        .unwrap()
                    })
                    .collect();
                ValuationHistory::from_days(days)
            })
            .collect()
    }

    #[test]
    fn zero_catalog_gives_zero_firm() {
        let p = empty_prefix(1);
        let h = ValuationHistory::new();
        let z = vec![TradingStrategy::zero(1); 3];
        let l = vec![TraderLedger::new(); 3];
        for mode in [FirmMode::Collapsed, FirmMode::Literal] {
            let cfg = FirmConfig {
                mode,
                ..FirmConfig::default()
            };
            let (f, _) = combine(
                1,
                &z,
                &l,
                compute_cn(&vec![Rational::zero(); 3]),
                p.get(1),
                &h,
                DEFAULT_ATOM_CAP,
                &cfg,
            )
            .unwrap();
            assert!(f.is_zero());
        }
    }

    #[test]
    fn lone_safe_trader_is_halved() {
        // A single one-share buy: each budget b ≥ 1 leaves it unscaled, so the weights sum to 1/2.
        let p = empty_prefix(1);
        let h = ValuationHistory::new();
        let t = vec![TradingStrategy::buy(1, s("a"), int(1))];
        let l = vec![TraderLedger::new()];
        let cn = compute_cn(&[volume_bound(&t[0])]);
        for mode in [FirmMode::Collapsed, FirmMode::Literal] {
            let cfg = FirmConfig {
                mode,
                ..FirmConfig::default()
            };
            let (f, _) = combine(1, &t, &l, cn, p.get(1), &h, DEFAULT_ATOM_CAP, &cfg).unwrap();
            for q in [ratio(0, 1), ratio(1, 3), ratio(1, 1)] {
                let top = Pricing::from_pairs([(s("a"), q)]).unwrap();
                let ex = f.execute(&h.with_day(&top)).unwrap();
                assert_eq!(ex.share(&s("a")), ratio(1, 2));
            }
        }
    }

    #[test]
    fn breached_budgets_drop_out() {
        // Day 1 buys 3 shares at price 1: worst world value −3 breaches b = 1, 2, 3.
        let p = empty_prefix(2);
        let h = ValuationHistory::from_days(vec![Pricing::from_pairs([(s("a"), int(1))]).unwrap()]);
        let day1 = TradingStrategy::buy(1, s("a"), int(3));
        let ledger = ledger_for(std::slice::from_ref(&day1), &h, &p);
        let day2 = TradingStrategy::buy(2, s("a"), int(1));
        let acc = vec![volume_bound(&day1) + volume_bound(&day2)];
        let cn = compute_cn(&acc);
        assert_eq!(cn, 9);
        let (f, bands) = combine(
            2,
            std::slice::from_ref(&day2),
            std::slice::from_ref(&ledger),
            cn,
            p.get(2),
            &h,
            DEFAULT_ATOM_CAP,
            &FirmConfig::default(),
        )
        .unwrap();
        assert_eq!(bands[0].b_nb, 4);
        let cfg = FirmConfig {
            mode: FirmMode::Literal,
            ..FirmConfig::default()
        };
        let (g, _) = combine(
            2,
            &[day2],
            &[ledger],
            cn,
            p.get(2),
            &h,
            DEFAULT_ATOM_CAP,
            &cfg,
        )
        .unwrap();
        for q in [ratio(0, 1), ratio(1, 2), ratio(1, 1)] {
            let top = Pricing::from_pairs([(s("a"), q)]).unwrap();
            let a = f.execute(&h.with_day(&top)).unwrap();
            assert_eq!(a, g.execute(&h.with_day(&top)).unwrap());
            // Σ_{b≥4} 2^{-1-b} in the literal sum, with b=4 possibly scaled.
            assert!(a.share(&s("a")) <= ratio(1, 16));
        }
    }

    fn arb_coef() -> impl Strategy<Value = String> {
        prop_oneof![
            (-3i64..=3).prop_map(|c| format!("{c}")),
            (-2i64..=2, 1usize..=2).prop_map(|(c, d)| format!("{c} * P[a]@{d}")),
            (-2i64..=2).prop_map(|c| format!("{c} * max(P[a]@2, P[b]@2)")),
            Just("ind(1/4; P[b]@2 < 1/2) - P[a]@1".to_string()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        // The collapsed sum, the literal sum at C_n, and the literal sum at C_n + 5 execute
        // identically on every sampled history.
        #[test]
        fn collapsed_equals_literal(c1 in arb_coef(), c2 in arb_coef(), c3 in arb_coef(), c4 in arb_coef(),
                                    d3 in prop::sample::select(vec!["", "a", "a -> b", "~a"])) {
            let mut p = DeductivePrefix::new();
            p.push_day(Vec::new());
            p.push_day(if d3.is_empty() { vec![] } else { vec![s(d3)] });
            let t1 = [strategy(1, &format!("T[a] := {}", c1.replace("@2", "@1"))), strategy(1, &format!("T[b] := {}", c3.replace("@2", "@1")))];
            let t2 = [strategy(2, &format!("T[a] := {c2}\nT[a | b] := {c4}")), strategy(2, &format!("T[b] := {c4}"))];
            for h1 in grid_histories(1, &["a", "b", "a | b"]) {
                let ledgers: Vec<TraderLedger> = t1.iter().map(|t| ledger_for(std::slice::from_ref(t), &h1, &p)).collect();
                let acc: Vec<Rational> = t1.iter().zip(&t2).map(|(a, b)| volume_bound(a) + volume_bound(b)).collect();
                let cn = compute_cn(&acc);
                let run = |mode, extra| combine(2, &t2, &ledgers, cn, p.get(2), &h1, DEFAULT_ATOM_CAP,
                    &FirmConfig { mode, extra_b_margin: extra, interval_cells: 64 }).unwrap().0;
                let fc = run(FirmMode::Collapsed, 0);
                let fl = run(FirmMode::Literal, 0);
                let fl5 = run(FirmMode::Literal, 5);
                for h2 in grid_histories(2, &["a", "b", "a | b"]) {
                    let top = h2.day(2).clone();
                    let full = h1.with_day(&top);
                    let x = fc.execute(&full).unwrap();
                    prop_assert_eq!(&x, &fl.execute(&full).unwrap());
                    prop_assert_eq!(&x, &fl5.execute(&full).unwrap());
                    prop_assert!(x.l1_norm() <= l1_bound(&t2));
                }
            }
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let p = empty_prefix(1);
        let h = ValuationHistory::new();
        let cfg = FirmConfig::default();
        let t = vec![TradingStrategy::zero(1)];
        assert!(matches!(
            combine(1, &t, &[], 1, p.get(1), &h, 20, &cfg),
            Err(FirmError::LedgerMismatch { .. })
        ));
        let t = vec![TradingStrategy::zero(2)];
        assert!(matches!(
            combine(1, &t, &[TraderLedger::new()], 1, p.get(1), &h, 20, &cfg),
            Err(FirmError::WrongDay { .. })
        ));
    }
}
