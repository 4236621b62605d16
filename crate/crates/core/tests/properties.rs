mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use support::{brute_force_cost, noisy_text, plan, random_record, small_fixture};
use tripcraft_core::metrics::{aggregate, percent, refinement_deltas, EvalRecord};
use tripcraft_core::oracle::{check_commonsense, compute_cost, repeated_entities};
use tripcraft_core::scrub::{scrub, surviving_restaurants};
use tripcraft_core::synth::{records, validation_scenarios, Flaw};
use tripcraft_core::{parse_plan, render_plan, ConstraintId, Cuisine};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_inverts_render(p in plan()) {
        let text = render_plan(&p);
        let back = parse_plan(&text, p.day_count()).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(render_plan(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn parser_survives_arbitrary_input(text in prop_oneof![noisy_text(), any::<String>()], days in 1usize..4) {
        if let Ok(p) = parse_plan(&text, days) {
            // Canonical text is a fixed point.
            let canon = render_plan(&p);
            let again = parse_plan(&canon, days).unwrap();
            prop_assert_eq!(render_plan(&again), canon);
        }
    }
}

#[test]
fn cost_matches_brute_force_on_small_fixtures() {
    for seed in 0..50 {
        let (q, r, p) = small_fixture(seed);
        let cost = compute_cost(&p, &q, &r).unwrap();
        assert_eq!(cost.grand_total.cents(), brute_force_cost(&p, &q, &r), "seed {seed}");
        let items: i64 = cost.line_items.iter().map(|i| i.subtotal.cents()).sum();
        assert_eq!(items, cost.grand_total.cents());
    }
}

// ---- scrubber ------------------------------------------------------------

#[test]
fn scrub_keeps_compliant_plans_and_is_idempotent() {
    for rec in records("s", 15, 3) {
        let c = &rec.query.hard_constraints;
        let (s, report) = scrub(&rec.reference, c);
        let f = check_commonsense(&rec.plan, &rec.query, &s);
        assert!(f.is_all_success(), "{}: {}", rec.query.id, f.render());
        let (again, second) = scrub(&s, c);
        assert_eq!(again, s);
        assert_eq!(second.tokens_before, second.tokens_after);
        assert!(report.reduction_ratio >= 0.5, "{}: {}", rec.query.id, report.reduction_ratio);
    }
}

fn cuisine_set() -> impl Strategy<Value = BTreeSet<Cuisine>> {
    prop::collection::btree_set(prop::sample::select(Cuisine::ALL.to_vec()), 1..=7)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn widening_cuisines_never_drops_restaurants(a in cuisine_set(), b in cuisine_set(), seed in 0u64..8) {
        let rec = &records("m", 1, seed)[0];
        let union: BTreeSet<Cuisine> = a.union(&b).copied().collect();
        let narrow = surviving_restaurants(&rec.reference, &a);
        let wide = surviving_restaurants(&rec.reference, &union);
        prop_assert!(narrow.is_subset(&wide));
    }
}

// ---- oracle --------------------------------------------------------------

#[test]
fn repeat_counts_ignore_day_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in validation_scenarios() {
        let base = repeated_entities(&s.draft);
        for _ in 0..5 {
            let mut p = s.draft.clone();
            p.days.shuffle(&mut rng);
            assert_eq!(repeated_entities(&p), base);
        }
    }
}

#[test]
fn adding_sandbox_rows_never_breaks_sandbox_validity() {
    let extra = records("pad", 3, 77);
    let sandbox = ConstraintId::ValidInformationInSandbox.index();
    for s in validation_scenarios() {
        let r = &s.record;
        let before = check_commonsense(&s.draft, &r.query, &r.reference).passes()[sandbox];
        assert_eq!(before, s.flaw != Flaw::HallucinatedRestaurant);
        let mut bigger = r.reference.clone();
        for e in &extra {
            bigger.restaurants.extend(e.reference.restaurants.iter().cloned());
            bigger.accommodations.extend(e.reference.accommodations.iter().cloned());
            bigger.flights.extend(e.reference.flights.iter().cloned());
        }
        let after = check_commonsense(&s.draft, &r.query, &bigger).passes()[sandbox];
        assert!(!before || after, "{}", r.query.id);
    }
}

// ---- metrics -------------------------------------------------------------
#[test]
fn metric_invariants_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.gen_range(1..60);
        let before: Vec<EvalRecord> = (0..n).map(|i| random_record(&mut rng, i)).collect();
        let after: Vec<EvalRecord> = (0..n).map(|i| random_record(&mut rng, i)).collect();
        let r = aggregate(&before).unwrap();
        assert!(r.commonsense_macro <= r.commonsense_micro);
        assert!(r.final_pass_rate <= r.commonsense_macro.min(r.hard_macro));
        assert!(r.final_pass_rate <= r.delivery_rate);
        for v in [r.delivery_rate, r.commonsense_micro, r.hard_micro, r.hallucination_rate] {
            assert!((0.0..=100.0).contains(&v));
        }
        let d = refinement_deltas(&before, &after).unwrap();
        assert_eq!(d.uplift + d.flat + d.downgrade, n);
        let sum = d.uplift_ratio + d.flat_ratio + d.downgrade_ratio;
        assert!((sum - 100.0).abs() <= 0.15 + 1e-9, "{sum}");
        assert_eq!(d.uplift_ratio, percent(d.uplift, n));
    }
}
