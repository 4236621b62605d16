use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{PromptBundle, Role};
use crate::codec::render_plan;
use crate::domain::{Feedback, Plan, ReferenceBundle, TripQuery};

/// Original instruction text for the Direct planning strategy.
pub const PLANNER_TEMPLATE: &str = include_str!("../../assets/prompts/planner.txt");
pub const FEEDBACK_TEMPLATE: &str = include_str!("../../assets/prompts/feedback.txt");
pub const REFINER_TEMPLATE: &str = include_str!("../../assets/prompts/refiner.txt");

pub const MAX_PLANNER_SHOTS: usize = 5;
pub const FEEDBACK_SHOTS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("{role:?} prompt takes {expected} shots, got {got}")]
    WrongShotCount {
        role: Role,
        expected: String,
        got: usize,
    },
    #[error("feedback is all-success; nothing to refine")]
    RefineNotNeeded,
}

/// A solved example drawn from the training split.
#[derive(Debug, Clone, Copy)]
pub struct Shot<'a> {
    pub query: &'a TripQuery,
    pub reference: &'a ReferenceBundle,
    pub plan: &'a Plan,
}

/// Replaces placeholders left to right: each `(placeholder, value)` pair fills
/// the next occurrence of `placeholder` after the previous substitution.
/// Unlisted braces such as `{success or fail}` are left alone.
pub fn fill_in_order(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    for (placeholder, value) in slots {
        let at = rest
            .find(placeholder)
            .unwrap_or_else(|| panic!("template has no further {placeholder}"));
        out.push_str(&rest[..at]);
        out.push_str(value);
        rest = &rest[at + placeholder.len()..];
    }
    out.push_str(rest);
    out
}

/// Distinct indices into a pool of `pool_len` items, reproducible for a seed.
pub fn pick_shots(pool_len: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, pool_len, n.min(pool_len)).into_vec()
}

fn shot_ids(shots: &[Shot<'_>]) -> Vec<String> {
    shots.iter().map(|s| s.query.id.clone()).collect()
}

pub fn build_planner_prompt(
    query: &TripQuery,
    reference: &ReferenceBundle,
    shots: &[Shot<'_>],
) -> Result<PromptBundle, PromptError> {
    if shots.len() > MAX_PLANNER_SHOTS {
        return Err(PromptError::WrongShotCount {
            role: Role::Planner,
            expected: format!("0..={MAX_PLANNER_SHOTS}"),
            got: shots.len(),
        });
    }
    let mut examples = String::new();
    for (i, shot) in shots.iter().enumerate() {
        examples.push_str(&format!(
            "\n***** Example {n} *****\nreference information box:{}\nquery:{}\ntravel plan:\n{}\n***** Example {n} Ends *****\n",
            shot.reference.render_text(),
            shot.query.text,
            render_plan(shot.plan),
            n = i + 1,
        ));
    }
    let ref_text = reference.render_text();
    let text = fill_in_order(
        PLANNER_TEMPLATE,
        &[
            ("{examples}", &examples),
            ("{ref}", &ref_text),
            ("{query}", &query.text),
        ],
    );
    Ok(PromptBundle {
        role: Role::Planner,
        text,
        shot_count: shots.len(),
        shot_ids: shot_ids(shots),
        stream: format!("planner/{}", query.id),
    })
}

/// Feedback-generator prompt. Each shot is shown with its oracle feedback.
pub fn build_feedback_prompt(
    query: &TripQuery,
    reference: &ReferenceBundle,
    plan: &Plan,
    shots: &[(Shot<'_>, Feedback)],
) -> Result<PromptBundle, PromptError> {
    if shots.len() != FEEDBACK_SHOTS {
        return Err(PromptError::WrongShotCount {
            role: Role::Feedback,
            expected: FEEDBACK_SHOTS.to_string(),
            got: shots.len(),
        });
    }
    let mut owned: Vec<(&str, String)> = Vec::new();
    for (shot, feedback) in shots {
        owned.push(("{ref}", shot.reference.render_text()));
        owned.push(("{query}", shot.query.text.clone()));
        owned.push(("{plan}", render_plan(shot.plan)));
        owned.push(("{feedback}", feedback.render()));
    }
    owned.push(("{ref}", reference.render_text()));
    owned.push(("{query}", query.text.clone()));
    owned.push(("{plan}", render_plan(plan)));
    let slots: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let bare: Vec<Shot<'_>> = shots.iter().map(|(s, _)| *s).collect();
    Ok(PromptBundle {
        role: Role::Feedback,
        text: fill_in_order(FEEDBACK_TEMPLATE, &slots),
        shot_count: FEEDBACK_SHOTS,
        shot_ids: shot_ids(&bare),
        stream: format!("feedback/{}", query.id),
    })
}

pub fn build_refiner_prompt(
    query: &TripQuery,
    reference: &ReferenceBundle,
    plan: &Plan,
    feedback: &Feedback,
) -> Result<PromptBundle, PromptError> {
    if feedback.is_all_success() {
        return Err(PromptError::RefineNotNeeded);
    }
    let ref_text = reference.render_text();
    let plan_text = render_plan(plan);
    let fb = feedback.render();
    let text = fill_in_order(
        REFINER_TEMPLATE,
        &[
            ("{reference information box}", &ref_text),
            ("{query}", &query.text),
            ("{original draft travel plan}", &plan_text),
            ("{feedback}", &fb),
        ],
    );
    Ok(PromptBundle {
        role: Role::Refiner,
        text,
        shot_count: 0,
        shot_ids: Vec::new(),
        stream: format!("refiner/{}", query.id),
    })
}
