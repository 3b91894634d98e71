use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

use super::*;
use crate::feature::{parse_strategy, TradingStrategy};
use crate::logic::{decides, Atom, DeductivePrefix, Sentence, DEFAULT_ATOM_CAP};
use crate::pricing::{Pricing, ValuationHistory};
use crate::rational::{self, int, ratio, Rational};

fn s(t: &str) -> Sentence {
    Sentence::parse(t).unwrap()
}

fn prefix(days: &[&[&str]]) -> DeductivePrefix {
    let mut p = DeductivePrefix::new();
    for d in days {
        p.push_day(d.iter().map(|t| s(t)).collect());
    }
    p
}

fn empty_prefix(n: usize) -> DeductivePrefix {
    let none: &[&str] = &[];
    prefix(&vec![none; n])
}

/// One price per day for `phi`.
fn price_path(phi: &str, prices: &[Rational]) -> ValuationHistory {
    let days = prices
        .iter()
        .map(|q| Pricing::from_pairs([(s(phi), q.clone())]).unwrap())
        .collect();
    ValuationHistory::from_days(days)
}

fn gen(t: &dyn Trader, n: usize, p: &DeductivePrefix) -> TradingStrategy {
    let ctx = TraderContext {
        prefix: p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    t.generate(n, &ctx, &mut StepMeter::unlimited()).unwrap()
}

/// Executed trades agree on a few price histories (ranks up to n).
fn same_on_samples(a: &TradingStrategy, b: &TradingStrategy, sentences: &[&str], n: usize) -> bool {
    let grids = [ratio(0, 1), ratio(1, 3), ratio(7, 8), ratio(1, 1)];
    for (i, g) in grids.iter().enumerate() {
        let days = (1..=n)
            .map(|d| {
                let pairs = sentences.iter().enumerate().map(|(j, t)| {
                    let q =
                        rational::clamp01(&(g + ratio(((d + i + j) % 5) as i64, 11) - ratio(1, 5)));
                    (s(t), q)
                });
                Pricing::from_pairs(pairs).unwrap()
            })
            .collect();
        let h = ValuationHistory::from_days(days);
        if a.execute(&h).unwrap() != b.execute(&h).unwrap() {
            return false;
        }
    }
    true
}

struct Heavy;

impl Trader for Heavy {
    fn name(&self) -> String {
        "heavy".into()
    }
    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        meter.charge(1_000)?;
        Ok(TradingStrategy::buy(n, s("a"), int(1)))
    }
}

struct Peeker;

impl Trader for Peeker {
    fn name(&self) -> String {
        "peeker".into()
    }
    fn generate(
        &self,
        n: usize,
        _ctx: &TraderContext<'_>,
        _meter: &mut StepMeter,
    ) -> Result<TradingStrategy, TraderError> {
        Ok(parse_strategy(&format!("T[a] := P[a]@{}", n + 1), n + 1)?
            .map_coefficients(|f| f.clone()))
    }
}

#[test]
fn step_poly_evaluates_horner() {
    let p = StepPoly::new(vec![3, 0, 2]);
    assert_eq!(p.eval(0), 3);
    assert_eq!(p.eval(5), 53);
    assert_eq!(p.degree(), 2);
    assert_eq!(StepPoly::default().eval(10), 4096 + 64_000);
    assert_eq!(StepPoly::new(vec![u64::MAX, u64::MAX]).eval(3), u64::MAX);
}

#[test]
fn over_budget_generator_becomes_zero() {
    let p = empty_prefix(3);
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let e = Ect::new(Arc::new(Heavy), StepPoly::new(vec![999])).emit(2, &ctx);
    assert!(e.strategy.is_zero());
    assert_eq!(e.status, EmissionStatus::Timeout);
    let ok = Ect::new(Arc::new(Heavy), StepPoly::new(vec![2000])).emit(2, &ctx);
    assert_eq!(ok.status, EmissionStatus::Ok);
    assert!(same_on_samples(
        &ok.strategy,
        &TradingStrategy::buy(2, s("a"), int(1)),
        &["a"],
        2
    ));
}

#[test]
fn node_count_is_charged() {
    let p = empty_prefix(3);
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let t = Arc::new(ConvergenceTrader::new(s("a"), ratio(1, 2), ratio(1, 4)).unwrap());
    let e = Ect::new(t.clone(), StepPoly::default()).emit(3, &ctx);
    assert_eq!(e.status, EmissionStatus::Ok);
    let nodes = e.strategy.node_count() as u64;
    assert!(e.steps >= nodes);
    let tight = Ect::new(t, StepPoly::new(vec![e.steps - 1])).emit(3, &ctx);
    assert_eq!(tight.status, EmissionStatus::Timeout);
}

#[test]
fn wrong_day_or_future_rank_becomes_zero() {
    let p = empty_prefix(3);
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let e = Ect::new(Arc::new(Peeker), StepPoly::default()).emit(2, &ctx);
    assert!(e.strategy.is_zero());
    assert_eq!(e.strategy.day(), 2);
    assert!(matches!(e.status, EmissionStatus::Invalid(_)));
}

#[test]
fn generator_errors_become_zero() {
    let p = empty_prefix(1);
    let t = Arc::new(TemplateTrader::new("bad", "T[a] := P[a]@{n} +"));
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let e = Ect::new(t, StepPoly::default()).emit(1, &ctx);
    assert!(e.strategy.is_zero());
    assert!(matches!(e.status, EmissionStatus::Invalid(_)));
}

#[test]
fn ect_is_idempotent_on_compliant_traders() {
    let p = empty_prefix(6);
    let inner: Arc<dyn Trader> = Arc::new(NondogmatismTrader::new(s("a")));
    let once: Arc<dyn Trader> = Arc::new(Ect::new(inner.clone(), StepPoly::default()));
    let twice = Ect::new(once.clone(), StepPoly::default());
    for n in 1..=6 {
        let raw = gen(inner.as_ref(), n, &p);
        assert!(same_on_samples(&raw, &gen(once.as_ref(), n, &p), &["a"], n));
        assert!(same_on_samples(&raw, &gen(&twice, n, &p), &["a"], n));
    }
}

#[test]
fn emulatable_zeroes_trader_k_before_day_k() {
    let p = empty_prefix(3);
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let buys: Vec<(String, Arc<dyn Trader>)> = (0..3)
        .map(|_| {
            (
                "buy".to_string(),
                Arc::new(BuyTrader {
                    phi: s("a"),
                    amount: int(1),
                    start: 1,
                }) as Arc<dyn Trader>,
            )
        })
        .collect();
    let cat = emulatable(buys, &StepPoly::default());
    assert_eq!(cat.len(), 3);
    assert!(cat.traders()[2].emit(2, &ctx).strategy.is_zero());
    assert!(!cat.traders()[2].emit(3, &ctx).strategy.is_zero());
    let first = cat.traders()[0].emit(1, &ctx).strategy;
    assert!(same_on_samples(
        &first,
        &TradingStrategy::buy(1, s("a"), int(1)),
        &["a"],
        1
    ));
    assert_eq!(ZeroBefore::new(3, Arc::new(ZeroTrader)).name(), "zero");
}

fn demo_entries() -> Vec<&'static str> {
    vec![
        "nondogmatism(phi=\"a|b\")",
        "pseudorandom(seq=[\"a|b|c\", \"b|a\", \"a|~a\", \"(b->c)|a\"], p=1, eps=1/10)",
        "convergence(phi=\"c\", p=1/2, eps=1/4)",
        "coherence(phi=\"~a & ~b\", start=1, which=2)",
    ]
}

fn catalog_from(entries: &[&str]) -> TraderCatalog {
    let mut all = Vec::new();
    for e in entries {
        all.extend(build_traders(e, Path::new(".")).unwrap());
    }
    emulatable(all, &StepPoly::default())
}

#[test]
fn catalog_enumeration_is_deterministic() {
    let p = prefix(&[&["a | b"], &[], &["b -> c"], &[], &[], &[]]);
    let ctx = TraderContext {
        prefix: &p,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let x = catalog_from(&demo_entries());
    let y = catalog_from(&demo_entries());
    for (tx, ty) in x.traders().iter().zip(y.traders()) {
        assert_eq!(tx.name(), ty.name());
        for n in 1..=6 {
            let a = tx.emit(n, &ctx);
            let b = ty.emit(n, &ctx);
            assert_eq!(a.status, b.status);
            assert_eq!(a.steps, b.steps);
            let ta: Vec<String> = a
                .strategy
                .coefficients()
                .iter()
                .map(|(k, f)| format!("{k}:{}", crate::feature::program_text(f)))
                .collect();
            let tb: Vec<String> = b
                .strategy
                .coefficients()
                .iter()
                .map(|(k, f)| format!("{k}:{}", crate::feature::program_text(f)))
                .collect();
            assert_eq!(ta, tb);
        }
    }
}

#[test]
fn catalog_entries_parse() {
    let e = parse_catalog_entry("coherence(phi=\"a\", psi=\"b\", start=1)").unwrap();
    match e {
        CatalogEntry::Builtin { name, args } => {
            assert_eq!(name, "coherence");
            assert_eq!(args["phi"], CatalogValue::Str("a".into()));
            assert_eq!(args["start"], CatalogValue::Num(int(1)));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(
        parse_catalog_entry(" program: t.txt").unwrap(),
        CatalogEntry::Program("t.txt".into())
    );
    assert_eq!(
        parse_catalog_entry("zero").unwrap(),
        CatalogEntry::Builtin {
            name: "zero".into(),
            args: Default::default()
        }
    );
    let list = parse_catalog_entry("pseudorandom(seq=[\"a, b\", \"c\"], p=0.5, eps=1/10)").unwrap();
    if let CatalogEntry::Builtin { args, .. } = list {
        assert_eq!(
            args["seq"],
            CatalogValue::List(vec![
                CatalogValue::Str("a, b".into()),
                CatalogValue::Str("c".into())
            ])
        );
        assert_eq!(args["p"], CatalogValue::Num(ratio(1, 2)));
    }
    for bad in [
        "coherence(phi=)",
        "x(a=1",
        "x(a=1,a=2)",
        "x(a=1) y",
        "program:",
    ] {
        assert!(parse_catalog_entry(bad).is_err(), "{bad}");
    }
}

#[test]
fn catalog_builds_expected_traders() {
    let base = Path::new(".");
    assert_eq!(
        build_traders("coherence(phi=\"a\", psi=\"b\", start=1)", base)
            .unwrap()
            .len(),
        4
    );
    assert_eq!(
        build_traders("coherence(phi=\"a\")", base).unwrap().len(),
        2
    );
    assert_eq!(
        build_traders("coherence(phi=\"a\", which=2)", base)
            .unwrap()
            .len(),
        1
    );
    for bad in [
        "unknown()",
        "convergence(phi=\"a\", p=1/2)",
        "convergence(phi=\"a\", p=1/2, eps=1)",
        "nondogmatism(phi=\"a\", extra=1)",
        "coherence(phi=\"a\", which=5)",
        "coherence(phi=\"a\", which=3)",
        "coherence(phi=\"a\", start=0)",
        "pseudorandom(p=1, eps=1)",
        "buy(phi=3)",
        "program:/nonexistent/trader.txt",
    ] {
        assert!(build_traders(bad, base).is_err(), "{bad}");
    }
}

#[test]
fn program_entries_load_templates() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.txt"), "x := P[a]@{n}\nT[a] := 1 - x\n").unwrap();
    let built = build_traders("program:t.txt", dir.path()).unwrap();
    let p = empty_prefix(2);
    let t = gen(built[0].1.as_ref(), 2, &p);
    let h = price_path("a", &[ratio(1, 2), ratio(1, 4)]);
    assert_eq!(t.execute(&h).unwrap().share(&s("a")), ratio(3, 4));
}

#[test]
fn sentence_sequences() {
    let c = SentenceSeq::Cycle(vec![s("a"), s("b")]);
    assert_eq!(c.get(1).unwrap(), s("a"));
    assert_eq!(c.get(4).unwrap(), s("b"));
    let t = SentenceSeq::Template("x{n} | y".into());
    assert_eq!(t.get(3).unwrap(), s("x3 | y"));
    assert!(SentenceSeq::Cycle(vec![]).get(1).is_err());
}

/// Direct convergence recursion on rationals.
fn convergence_oracle(
    prices: &[Rational],
    p: &Rational,
    eps: &Rational,
) -> Vec<(Rational, Rational)> {
    let half = eps / int(2);
    let ind_less = |x: &Rational, y: &Rational| rational::clamp01(&((y - x) / &half));
    let ind_greater = |x: &Rational, y: &Rational| rational::clamp01(&((x - y) / &half));
    let mut h = Rational::zero();
    let mut out = Vec::new();
    for (i, q) in prices.iter().enumerate() {
        let t = if i == 0 {
            Rational::zero()
        } else {
            (Rational::one() - &h) * ind_less(q, &(p - &half)) - &h * ind_greater(q, &(p + &half))
        };
        h = &h + &t;
        out.push((t, h.clone()));
    }
    out
}

fn nondog_oracle(prices: &[Rational]) -> Vec<Rational> {
    // sums[k-1] = Σ_j β^k_j so far.
    let mut sums: Vec<Rational> = Vec::new();
    let mut out = Vec::new();
    for (idx, q) in prices.iter().enumerate() {
        let i = idx + 1;
        let mut t = Rational::zero();
        for k in 1..i {
            let width = rational::pow2(-(k as i64) - 1);
            let ind = rational::clamp01(&((rational::pow2(-(k as i64)) - q) / &width));
            let b = ind * (Rational::one() - &sums[k - 1]);
            sums[k - 1] += &b;
            t += b;
        }
        sums.push(Rational::zero());
        out.push(t);
    }
    out
}

fn price_strategy() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((0i64..=16).prop_map(|k| ratio(k, 16)), 1..=30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convergence_matches_direct_recursion(prices in price_strategy(), pk in 1i64..=3) {
        let p = ratio(pk, 4);
        let eps = ratio(1, 8);
        let t = ConvergenceTrader::new(s("a"), p.clone(), eps.clone()).unwrap();
        let h = price_path("a", &prices);
        let oracle = convergence_oracle(&prices, &p, &eps);
        for (i, (ot, oh)) in oracle.iter().enumerate() {
            let n = i + 1;
            prop_assert_eq!(&t.trade(n).eval(&h).unwrap(), ot);
            let held = t.holdings(n).eval(&h).unwrap();
            prop_assert_eq!(&held, oh);
            prop_assert!(!held.is_negative() && held <= Rational::one());
        }
    }

    #[test]
    fn convergence_cash_bound(prices in price_strategy()) {
        // Cash through n is −Σ T_i·price_i, which dominates −p + (ε/2)·Σ|T_i|.
        let p = ratio(1, 2);
        let eps = ratio(1, 4);
        let oracle = convergence_oracle(&prices, &p, &eps);
        let mut cash = Rational::zero();
        let mut volume = Rational::zero();
        for ((t, _), q) in oracle.iter().zip(&prices) {
            cash -= t * q;
            volume += t.abs();
        }
        prop_assert!(cash >= -&p + &volume * &eps / int(2));
    }

    #[test]
    fn nondogmatism_matches_direct_recursion(prices in price_strategy()) {
        let t = NondogmatismTrader::new(s("a"));
        let h = price_path("a", &prices);
        let oracle = nondog_oracle(&prices);
        let mut spent = Rational::zero();
        for (i, ot) in oracle.iter().enumerate() {
            let n = i + 1;
            prop_assert_eq!(&t.trade(n).eval(&h).unwrap(), ot);
            spent += ot * &prices[i];
        }
        prop_assert!(spent <= Rational::one());
    }

    #[test]
    fn pseudorandom_matches_direct_recursion(prices in price_strategy(), closes in prop::collection::vec(any::<bool>(), 30)) {
        // φ_n = x_n; x_n is proved on day n+1 when closes[n] is set.
        let n_days = prices.len();
        let mut days: Vec<Vec<Sentence>> = vec![Vec::new(); n_days];
        for i in 1..n_days {
            if closes[i - 1] {
                days[i].push(s(&format!("x{i}")));
            }
        }
        let mut pre = DeductivePrefix::new();
        for d in &days {
            pre.push_day(d.clone());
        }
        let ctx = TraderContext { prefix: &pre, atom_cap: DEFAULT_ATOM_CAP };
        let t = PseudorandomTrader::new(SentenceSeq::Template("x{n}".into()), ratio(1, 2), ratio(1, 4)).unwrap();
        let hist = ValuationHistory::from_days(
            prices.iter().enumerate().map(|(i, q)| Pricing::from_pairs([(s(&format!("x{}", i + 1)), q.clone())]).unwrap()).collect(),
        );
        let half = ratio(1, 8);
        let mut trades: Vec<Rational> = Vec::new();
        for n in 1..=n_days {
            let beta = if n == 1 {
                Rational::zero()
            } else {
                // x_i is first decided by D_{i+1}, whose check visits two assignments per proved atom.
                let closed = |i: usize| {
                    let proved = (1..=i).filter(|&j| j < n_days && closes[j - 1]).count();
                    closes[i - 1] && i < n && 2 * proved <= n
                };
                let open: Rational = (1..n).filter(|&i| !closed(i)).map(|i| trades[i - 1].clone()).sum();
                Rational::one() - open
            };
            let ind = rational::clamp01(&((ratio(1, 2) - &half - &prices[n - 1]) / &half));
            let expect = if n == 1 { Rational::zero() } else { &beta * ind };
            prop_assert_eq!(t.beta(n, &ctx).unwrap().eval(&hist).unwrap(), beta);
            let (phi, f) = t.trade(n, &ctx).unwrap();
            prop_assert_eq!(phi, s(&format!("x{n}")));
            prop_assert_eq!(&f.eval(&hist).unwrap(), &expect);
            trades.push(expect);
        }
    }
}

#[test]
fn constant_price_at_p_gives_zero_convergence_trades() {
    let t = ConvergenceTrader::new(s("a"), ratio(1, 2), ratio(1, 4)).unwrap();
    let h = price_path("a", &vec![ratio(1, 2); 8]);
    for n in 1..=8 {
        assert_eq!(t.trade(n).eval(&h).unwrap(), Rational::zero());
    }
}

#[test]
fn convergence_parameter_domain() {
    assert!(ConvergenceTrader::new(s("a"), ratio(1, 2), int(0)).is_err());
    assert!(ConvergenceTrader::new(s("a"), ratio(1, 10), ratio(1, 5)).is_err());
    assert!(ConvergenceTrader::new(s("a"), ratio(9, 10), ratio(1, 5)).is_err());
    assert!(ConvergenceTrader::new(s("a"), int(0), int(0)).is_err());
    assert!(ConvergenceTrader::new(s("a"), ratio(1, 5), ratio(1, 5)).is_ok());
}

#[test]
fn coherence_buyer_profits_while_a_theorem_is_underpriced() {
    // φ ∈ D_s, price stuck at 1 − ε: holdings through n are worth ε·(n − s) in every world of PC(D_n).
    let eps = ratio(1, 10);
    let start = 2;
    let horizon = 7;
    let mut days: Vec<&[&str]> = vec![&[]; horizon];
    days[start - 1] = &["a"];
    let pre = prefix(&days);
    let t = CoherenceTrader::new(1, s("a"), None, start).unwrap();
    let h = price_path("a", &vec![Rational::one() - &eps; horizon]);
    let mut total = crate::feature::AffineCombination::zero();
    for n in 1..=horizon {
        total.add_assign(&gen(&t, n, &pre).execute(&h).unwrap());
        if n >= start {
            let focus: BTreeSet<Atom> = [Atom::new("a").unwrap()].into();
            for w in pre
                .get(n)
                .project_worlds(&focus, DEFAULT_ATOM_CAP)
                .unwrap()
                .iter()
            {
                assert_eq!(
                    total.world_value(w).unwrap(),
                    &eps * int((n - start) as i64)
                );
            }
        }
    }
}

#[test]
fn coherence_auditors_are_silent_through_start_and_three_cancels_four() {
    let pre = empty_prefix(6);
    for which in 1..=4u8 {
        let t = CoherenceTrader::new(which, s("a"), Some(s("b")), 3).unwrap();
        for n in 1..=3 {
            assert!(gen(&t, n, &pre).is_zero());
        }
        assert!(!gen(&t, 4, &pre).is_zero());
    }
    let t3 = CoherenceTrader::new(3, s("a"), Some(s("b")), 1).unwrap();
    let t4 = CoherenceTrader::new(4, s("a"), Some(s("b")), 1).unwrap();
    for n in 2..=6 {
        assert!(gen(&t3, n, &pre).add(&gen(&t4, n, &pre)).unwrap().is_zero());
        let e = gen(&t3, n, &pre);
        assert_eq!(
            e.coefficient(&s("a | b")).unwrap().as_const(),
            Some(&int(1))
        );
        assert_eq!(e.coefficient(&s("a")).unwrap().as_const(), Some(&int(-1)));
    }
}

#[test]
fn nondogmatism_ignores_price_one() {
    let t = NondogmatismTrader::new(s("a"));
    let h = price_path("a", &vec![int(1); 10]);
    for n in 1..=10 {
        assert_eq!(t.trade(n).eval(&h).unwrap(), Rational::zero());
    }
}

#[test]
fn nondogmatism_buys_a_share_per_level_crossed() {
    // Day i has price 2^{-i-1}, which is at or below 2^{-k} − 2^{-k-1} for every k < i.
    let k_levels = 6;
    let prices: Vec<Rational> = (1..=k_levels + 1)
        .map(|i| rational::pow2(-(i as i64) - 1))
        .collect();
    let t = NondogmatismTrader::new(s("a"));
    let h = price_path("a", &prices);
    let total: Rational = (1..=k_levels + 1)
        .map(|n| t.trade(n).eval(&h).unwrap())
        .sum();
    assert_eq!(total, int(k_levels as i64));
    for k in 1..=k_levels {
        assert_eq!(t.beta(k, k).eval(&h).unwrap(), Rational::zero());
        assert_eq!(t.beta(k, k + 1).eval(&h).unwrap(), Rational::one());
    }
}

#[test]
fn maybe_open_examples() {
    let cap = DEFAULT_ATOM_CAP;
    let pre = prefix(&[&["a"], &[], &[], &[]]);
    // A one-atom check costs 2 assignments, so day 2 is the first whose budget fits it.
    assert!(maybe_open(&s("a"), 1, &pre, cap).unwrap());
    assert!(!maybe_open(&s("a"), 2, &pre, cap).unwrap());
    assert!(!maybe_open(&s("a"), 4, &pre, cap).unwrap());
    assert!(maybe_open(&s("b"), 4, &pre, cap).unwrap());
    let none = empty_prefix(4);
    assert!(!maybe_open(&s("c | ~c"), 4, &none, cap).unwrap());
    assert!(maybe_open(&s("c | d"), 4, &none, cap).unwrap());
}

#[test]
fn maybe_open_is_monotone_and_sound() {
    let cap = DEFAULT_ATOM_CAP;
    let pre = prefix(&[&["a | b"], &["a -> c"], &[], &["~b"], &[], &[], &[], &[]]);
    let probes = [
        "a", "b", "c", "a | b", "c & a", "b -> a", "a | ~a", "d", "~c",
    ];
    for t in probes {
        let phi = s(t);
        let mut closed = false;
        for n in 1..=8 {
            let open = maybe_open(&phi, n, &pre, cap).unwrap();
            if closed {
                assert!(!open, "{t} reopened on day {n}");
            }
            if !open {
                closed = true;
                assert!(
                    decides(pre.get(n), &phi, cap).unwrap(),
                    "{t} closed but undecided on day {n}"
                );
            }
        }
    }
}

#[test]
fn pseudorandom_does_not_buy_when_prices_stay_high() {
    let pre = empty_prefix(6);
    let ctx = TraderContext {
        prefix: &pre,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let t = PseudorandomTrader::new(
        SentenceSeq::Cycle(vec![s("a"), s("b")]),
        ratio(1, 2),
        ratio(1, 4),
    )
    .unwrap();
    let days = (0..6)
        .map(|_| Pricing::from_pairs([(s("a"), ratio(3, 8)), (s("b"), ratio(7, 8))]).unwrap())
        .collect();
    let h = ValuationHistory::from_days(days);
    for n in 1..=6 {
        assert_eq!(
            t.trade(n, &ctx).unwrap().1.eval(&h).unwrap(),
            Rational::zero()
        );
    }
    assert!(gen(&t, 1, &pre).is_zero());
}

#[test]
fn pseudorandom_needs_theorems_through_day_n() {
    let pre = empty_prefix(2);
    let ctx = TraderContext {
        prefix: &pre,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let t = PseudorandomTrader::new(SentenceSeq::Cycle(vec![s("a")]), ratio(1, 2), ratio(1, 4))
        .unwrap();
    assert!(matches!(
        t.trade(3, &ctx),
        Err(TraderError::MissingTheorems { need: 3, have: 2 })
    ));
    assert!(
        PseudorandomTrader::new(SentenceSeq::Cycle(vec![s("a")]), ratio(1, 2), int(0)).is_err()
    );
}

#[test]
fn emitted_strategies_respect_rank() {
    let pre = prefix(&[&["a | b"], &[], &["b -> c"], &[], &[], &[], &[], &[]]);
    let ctx = TraderContext {
        prefix: &pre,
        atom_cap: DEFAULT_ATOM_CAP,
    };
    let cat = catalog_from(&demo_entries());
    for t in cat.traders() {
        for n in 1..=8 {
            let e = t.emit(n, &ctx);
            assert_eq!(e.status, EmissionStatus::Ok, "{} on day {n}", t.name());
            assert_eq!(e.strategy.day(), n);
            assert!(e.strategy.rank() <= n);
        }
    }
}
