//! Plan → feedback → refine loop.
//!
//! The loop's trigger is the feedback a variant emits, which may be wrong.
//! Every trace is also scored by the oracle so that noisy variants can be
//! compared against ground truth.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{parse_plan, render_plan};
use crate::domain::{
    extract_entities, ConstraintId, Feedback, Plan, ReferenceBundle, SlotName, TripQuery, Verdict,
};
use crate::gateway::{
    build_feedback_prompt, build_planner_prompt, build_refiner_prompt, pick_shots, BackendError,
    BackendHandle, PromptError, Shot,
};
use crate::oracle::check_commonsense;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// A training example owned by the caller, usable as a prompt shot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub query: TripQuery,
    pub reference: ReferenceBundle,
    pub plan: Plan,
}

impl ExampleRecord {
    pub fn shot(&self) -> Shot<'_> {
        Shot {
            query: &self.query,
            reference: &self.reference,
            plan: &self.plan,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FeedbackVariant {
    Oracle,
    Random {
        seed: u64,
    },
    /// Feedback written by a model, prompted with two shots drawn per query
    /// from `pool`.
    Llm {
        backend: BackendHandle,
        pool: Arc<Vec<ExampleRecord>>,
        seed: u64,
    },
}

impl FeedbackVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FeedbackVariant::Oracle => "oracle",
            FeedbackVariant::Random { .. } => "random",
            FeedbackVariant::Llm { .. } => "llm",
        }
    }
}

/// What the planner or refiner produced in one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PlanOutcome {
    Delivered { plan: Plan },
    Failed { text: String, cause: String },
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Delivered { plan } => Some(plan),
            PlanOutcome::Failed { .. } => None,
        }
    }

    pub fn delivered(&self) -> bool {
        self.plan().is_some()
    }
}

/// One step of a query's run.
///
/// Iteration 0 is the planner's draft, scored by the oracle. In iteration
/// `i >= 1`, `feedback_emitted` judges the plan carried over from `i - 1`,
/// and `outcome`/`oracle_truth` describe the plan after any refinement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub query_id: String,
    pub iteration: usize,
    pub outcome: PlanOutcome,
    pub feedback_emitted: Feedback,
    pub oracle_truth: Feedback,
    pub refined: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Traces of a refinement run. `aborted` is set when a backend error cut the
/// run short; `traces` then holds the completed steps only.
#[derive(Debug, Clone)]
pub struct RefinementRun {
    pub traces: Vec<IterationTrace>,
    pub aborted: Option<BackendError>,
}

const UNDELIVERED: &str = "No plan was delivered.";

fn score(outcome: &PlanOutcome, query: &TripQuery, reference: &ReferenceBundle) -> Feedback {
    match outcome {
        PlanOutcome::Delivered { plan } => check_commonsense(plan, query, reference),
        PlanOutcome::Failed { .. } => Feedback::all_fail(UNDELIVERED),
    }
}

fn read_plan(text: &str, days: usize) -> PlanOutcome {
    match parse_plan(text, days) {
        Ok(plan) => PlanOutcome::Delivered { plan },
        Err(d) => PlanOutcome::Failed {
            text: text.to_string(),
            cause: d.to_string(),
        },
    }
}

/// Inputs for one query. The planner may see a scrubbed reference while
/// scoring always uses the full one.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub query: &'a TripQuery,
    pub reference: &'a ReferenceBundle,
    pub prompt_reference: &'a ReferenceBundle,
}

impl<'a> QueryContext<'a> {
    pub fn new(query: &'a TripQuery, reference: &'a ReferenceBundle) -> Self {
        QueryContext {
            query,
            reference,
            prompt_reference: reference,
        }
    }

    pub fn with_prompt_reference(mut self, r: &'a ReferenceBundle) -> Self {
        self.prompt_reference = r;
        self
    }

    fn days(&self) -> usize {
        self.query.day_count as usize
    }
}

/// One planner call. Unparseable output is a delivery failure in the trace.
pub fn run_direct(
    ctx: QueryContext<'_>,
    planner: &BackendHandle,
    shots: &[Shot<'_>],
) -> Result<IterationTrace, RunError> {
    let prompt = build_planner_prompt(ctx.query, ctx.prompt_reference, shots)?;
    let reply = planner.complete(&prompt)?;
    let outcome = read_plan(&reply, ctx.days());
    let oracle_truth = score(&outcome, ctx.query, ctx.reference);
    Ok(IterationTrace {
        query_id: ctx.query.id.clone(),
        iteration: 0,
        outcome,
        feedback_emitted: oracle_truth.clone(),
        oracle_truth,
        refined: false,
        warnings: Vec::new(),
    })
}

pub fn run_refinement(
    ctx: QueryContext<'_>,
    initial: IterationTrace,
    variant: &FeedbackVariant,
    refiner: &BackendHandle,
    max_iters: usize,
) -> RefinementRun {
    let mut traces = vec![initial];
    for iteration in 1..=max_iters {
        let prev = traces.last().expect("initial trace");
        match step(ctx, prev, iteration, variant, refiner) {
            Ok(t) => traces.push(t),
            Err(e) => {
                log::warn!("query {} stopped at iteration {iteration}: {e}", ctx.query.id);
                return RefinementRun {
                    traces,
                    aborted: Some(e),
                };
            }
        }
    }
    RefinementRun {
        traces,
        aborted: None,
    }
}

fn step(
    ctx: QueryContext<'_>,
    prev: &IterationTrace,
    iteration: usize,
    variant: &FeedbackVariant,
    refiner: &BackendHandle,
) -> Result<IterationTrace, BackendError> {
    let carry = |emitted: Feedback, warnings: Vec<String>| IterationTrace {
        query_id: ctx.query.id.clone(),
        iteration,
        outcome: prev.outcome.clone(),
        feedback_emitted: emitted,
        oracle_truth: prev.oracle_truth.clone(),
        refined: false,
        warnings,
    };
    let Some(plan) = prev.outcome.plan() else {
        // Nothing to refine; the failure stands.
        return Ok(carry(Feedback::all_fail(UNDELIVERED), Vec::new()));
    };
    let emitted = emit_feedback(ctx, plan, iteration, variant)?;
    if emitted.is_all_success() {
        return Ok(carry(emitted, Vec::new()));
    }
    let prompt = build_refiner_prompt(ctx.query, ctx.prompt_reference, plan, &emitted)
        .expect("feedback has a failure");
    let reply = refiner.complete(&prompt)?;
    let mut warnings = Vec::new();
    let outcome = match read_plan(&reply, ctx.days()) {
        delivered @ PlanOutcome::Delivered { .. } => delivered,
        PlanOutcome::Failed { cause, .. } => {
            let w = format!("refiner output unreadable, keeping previous plan: {cause}");
            log::warn!("query {} iteration {iteration}: {w}", ctx.query.id);
            warnings.push(w);
            prev.outcome.clone()
        }
    };
    let oracle_truth = score(&outcome, ctx.query, ctx.reference);
    Ok(IterationTrace {
        query_id: ctx.query.id.clone(),
        iteration,
        outcome,
        feedback_emitted: emitted,
        oracle_truth,
        refined: true,
        warnings,
    })
}

fn emit_feedback(
    ctx: QueryContext<'_>,
    plan: &Plan,
    iteration: usize,
    variant: &FeedbackVariant,
) -> Result<Feedback, BackendError> {
    match variant {
        FeedbackVariant::Oracle => Ok(check_commonsense(plan, ctx.query, ctx.reference)),
        FeedbackVariant::Random { seed } => {
            let mut rng = stream_rng(*seed, &ctx.query.id, iteration);
            Ok(random_feedback(&mut rng, plan, ctx.query))
        }
        FeedbackVariant::Llm {
            backend,
            pool,
            seed,
        } => {
            let picks = pick_shots(pool.len(), 2, stream_seed(*seed, &ctx.query.id, 0));
            let shots: Vec<_> = picks
                .iter()
                .map(|&i| {
                    let ex = &pool[i];
                    (ex.shot(), check_commonsense(&ex.plan, &ex.query, &ex.reference))
                })
                .collect();
            let prompt = match build_feedback_prompt(ctx.query, ctx.prompt_reference, plan, &shots) {
                Ok(p) => p,
                Err(e) => return Err(BackendError::Malformed(e.to_string())),
            };
            let reply = backend.complete(&prompt)?;
            let (feedback, missing) = Feedback::parse_lenient(&reply);
            if !missing.is_empty() {
                log::warn!(
                    "query {} iteration {iteration}: feedback reply lacks {} verdicts, read as success",
                    ctx.query.id,
                    missing.len()
                );
            }
            Ok(feedback)
        }
    }
}

fn stream_seed(seed: u64, query_id: &str, iteration: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{query_id}/{iteration}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn stream_rng(seed: u64, query_id: &str, iteration: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, query_id, iteration))
}

/// Well-formed feedback with each verdict failing independently with
/// probability one half. Reasons reuse the oracle's sentence shapes with
/// random fillers.
pub fn random_feedback<R: Rng>(rng: &mut R, plan: &Plan, query: &TripQuery) -> Feedback {
    let days = plan.day_count().max(1);
    let entities = extract_entities(plan);
    let mut verdicts: [Verdict; 8] = std::array::from_fn(|_| Verdict::Success);
    for (i, id) in ConstraintId::ALL.into_iter().enumerate() {
        if rng.gen_bool(0.5) {
            verdicts[i] = Verdict::fail(random_reason(rng, id, days, &entities, query));
        }
    }
    Feedback::new(verdicts)
}

fn random_reason<R: Rng>(
    rng: &mut R,
    id: ConstraintId,
    days: usize,
    entities: &[crate::domain::EntityRef],
    query: &TripQuery,
) -> String {
    let day = rng.gen_range(1..=days);
    let slot = *SlotName::ALL[1..].choose(rng).unwrap();
    use crate::domain::EntityKind as K;
    match id {
        ConstraintId::ReasonableVisitingCity => match rng.gen_range(0..3) {
            0 => "The trip should be a closed circle.".to_string(),
            1 => "The city sequence is invalid.".to_string(),
            _ => format!("The first day's city should be {}.", query.origin_city),
        },
        ConstraintId::ValidRestaurants => {
            let meal = *SlotName::MEALS.choose(rng).unwrap();
            format!("The restaurant in day {day} {} is repeated.", meal.noun())
        }
        ConstraintId::ValidAttractions => {
            let n = pick_name(rng, entities, K::Attraction, "the attraction");
            let n = n.split(", ").next().unwrap_or_default().to_string();
            format!("The attraction {n} in day {day} is repeated.")
        }
        ConstraintId::ValidAccommodation => format!(
            "The accommodation {} do not obey the minumum nights rule.",
            pick_name(rng, entities, K::Accommodation, "chosen")
        ),
        ConstraintId::ValidTransportation => "The transportation is conflicting.".to_string(),
        ConstraintId::ValidInformationInCurrentCity => format!(
            "The {} in day {day} is invalid in the current city.",
            slot.noun()
        ),
        ConstraintId::ValidInformationInSandbox => {
            format!("The {} in day {day} is invalid in the sandbox.", slot.noun())
        }
        ConstraintId::NotAbsent => format!("No {} in day {day} is not allowed.", slot.noun()),
    }
}

fn pick_name<R: Rng>(
    rng: &mut R,
    entities: &[crate::domain::EntityRef],
    kind: crate::domain::EntityKind,
    fallback: &str,
) -> String {
    let names: Vec<String> = entities
        .iter()
        .filter(|e| e.kind == kind)
        .map(|e| {
            if e.city.is_empty() {
                e.name.clone()
            } else {
                format!("{}, {}", e.name, e.city)
            }
        })
        .collect();
    names.choose(rng).cloned().unwrap_or_else(|| fallback.to_string())
}

/// Runs `f` over `items` on up to `jobs` threads; results keep input order.
pub fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Renders the plan a trace ends with, or the raw failed text.
pub fn outcome_text(outcome: &PlanOutcome) -> String {
    match outcome {
        PlanOutcome::Delivered { plan } => render_plan(plan),
        PlanOutcome::Failed { text, .. } => text.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_feedback_is_reproducible_and_well_formed() {
        let q = TripQuery {
            id: "q1".into(),
            text: String::new(),
            origin_city: "A".into(),
            destination_region: "R".into(),
            city_count: 1,
            day_count: 3,
            group_size: 1,
            dates: vec![],
            budget: crate::domain::Money::from_dollars(1),
            hard_constraints: Default::default(),
        };
        let plan = Plan::new(vec![Default::default(); 3]);
        let a = random_feedback(&mut stream_rng(9, "q1", 1), &plan, &q);
        let b = random_feedback(&mut stream_rng(9, "q1", 1), &plan, &q);
        assert_eq!(a, b);
        assert_eq!(Feedback::parse(&a.render()).unwrap(), a);
        let fails: usize = (0..200)
            .map(|i| 8 - random_feedback(&mut stream_rng(i, "q1", 1), &plan, &q).passed_count())
            .sum();
        assert!((700..900).contains(&fails), "{fails} of 1600 failed");
    }

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<u32> = (0..50).collect();
        assert_eq!(parallel_map(&v, 4, |x| x * 2), (0..50).map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&Vec::<u32>::new(), 3, |x| *x).is_empty());
    }
}
