use std::collections::BTreeSet;

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use lia_bench::{coupled_strategy, demo_config, implication_chain};
use lia_core::inductor::run;
use lia_core::logic::DEFAULT_ATOM_CAP;
use lia_core::market_maker::{find_fixed_point, MarketMakerConfig};
use lia_core::rational::ratio;
use lia_core::{FeatureProgram, Pricing, Sentence, TheoremSet, ValuationHistory};

fn feature_eval(c: &mut Criterion) {
    let p = FeatureProgram::parse(
        "v1 := P[phi1]@7 + P[phi2]@4\nv2 := v1 + (-1)\nreturn 3 * max(v1, v2)",
    )
    .unwrap();
    let mut days = vec![Pricing::new(); 7];
    days[6]
        .set(Sentence::parse("phi1").unwrap(), ratio(4, 5))
        .unwrap();
    let h = ValuationHistory::from_days(days);
    c.bench_function("feature_eval_appendix", |b| {
        b.iter(|| p.eval(black_box(&h)).unwrap())
    });
}

fn worlds(c: &mut Criterion) {
    let chain = implication_chain(14);
    c.bench_function("plausible_worlds_chain14", |b| {
        b.iter(|| {
            let d = TheoremSet::new(chain.iter().cloned().collect());
            d.plausible_worlds(&BTreeSet::new(), DEFAULT_ATOM_CAP)
                .unwrap()
                .len()
        })
    });
}

fn market_maker(c: &mut Criterion) {
    let t = coupled_strategy();
    let h = ValuationHistory::new();
    let cfg = MarketMakerConfig::default();
    c.bench_function("fixed_point_coupled", |b| {
        b.iter(|| find_fixed_point(black_box(&t), &h, &cfg, None).unwrap())
    });
}

fn demo_days(c: &mut Criterion) {
    let mut g = c.benchmark_group("demo_run");
    g.sample_size(10);
    g.bench_function("ten_days", |b| {
        b.iter(|| run(demo_config(), 10).unwrap().day())
    });
    g.finish();
}

criterion_group!(benches, feature_eval, worlds, market_maker, demo_days);
criterion_main!(benches);
