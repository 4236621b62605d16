use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use tripcraft_core::metrics::{aggregate, evaluate};
use tripcraft_core::oracle::{check_commonsense, check_hard, compute_cost};
use tripcraft_core::scrub::{extract_constraints_rules, scrub};
use tripcraft_core::synth::records;
use tripcraft_core::{parse_plan, render_plan};

fn oracle(c: &mut Criterion) {
    let recs = records("bench", 20, 5);
    c.bench_function("commonsense/20 plans", |b| {
        b.iter(|| {
            for r in &recs {
                black_box(check_commonsense(&r.plan, &r.query, &r.reference));
            }
        })
    });
    c.bench_function("hard/20 plans", |b| {
        b.iter(|| {
            for r in &recs {
                black_box(check_hard(&r.plan, &r.query, &r.reference));
            }
        })
    });
    c.bench_function("cost/20 plans", |b| {
        b.iter(|| {
            for r in &recs {
                black_box(compute_cost(&r.plan, &r.query, &r.reference).unwrap());
            }
        })
    });
    c.bench_function("evaluate+aggregate/20 plans", |b| {
        b.iter(|| {
            let e: Vec<_> = recs.iter().map(|r| evaluate(Some(&r.plan), &r.query, &r.reference)).collect();
            black_box(aggregate(&e).unwrap())
        })
    });
}

fn codec(c: &mut Criterion) {
    let texts: Vec<(String, usize)> = records("bench", 20, 5)
        .iter()
        .map(|r| (render_plan(&r.plan), r.plan.day_count()))
        .collect();
    c.bench_function("parse/20 plans", |b| {
        b.iter(|| {
            for (t, d) in &texts {
                black_box(parse_plan(t, *d).unwrap());
            }
        })
    });
    let plans: Vec<_> = texts.iter().map(|(t, d)| parse_plan(t, *d).unwrap()).collect();
    c.bench_function("render/20 plans", |b| {
        b.iter(|| plans.iter().map(render_plan).map(|s| s.len()).sum::<usize>())
    });
}

fn scrubber(c: &mut Criterion) {
    let recs = records("bench", 5, 9);
    c.bench_function("extract+scrub/5 bundles", |b| {
        b.iter_batched(
            || recs.clone(),
            |recs| {
                for r in &recs {
                    let k = extract_constraints_rules(&r.query.text).unwrap();
                    black_box(scrub(&r.reference, &k));
                }
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, oracle, codec, scrubber);
criterion_main!(benches);
