//! Query-driven reference pruning.
//!
//! Infers hard constraints from query text, then removes reference rows that no
//! compliant plan can use and the auxiliary columns no checker reads.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Cuisine, HardConstraintSet, Money, ReferenceBundle, RoomRule, RoomType, Table, TransportRule,
};
use crate::gateway::{BackendError, BackendHandle, PromptBundle, Role};
use crate::ingest::token_length;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("several dollar amounts and none is next to the word \"budget\": {0:?}")]
    AmbiguousBudget(Vec<Money>),
}

static MONEY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\$\s?(\d{1,3}(?:,\d{3})+|\d+)(?:\.(\d{1,2}))?").unwrap());
static BUDGET_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bbudget").unwrap());
static NEGATION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:not|no|never|avoid|avoiding|without|rather than)\b|n't\b").unwrap());
static FLYING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:fly|flying|flights?|planes?|air travel)\b").unwrap());
static SELF_DRIVING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:drive ourselves|driving ourselves|drive myself|self[- ]driv\w*|drive|driving)\b").unwrap()
});
static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?;]+(?:\s|$)").unwrap());

/// Characters between a dollar amount and "budget" for them to count as adjacent.
const BUDGET_WINDOW: usize = 40;

fn room_rule_patterns() -> &'static [(RoomRule, Regex)] {
    static P: LazyLock<Vec<(RoomRule, Regex)>> = LazyLock::new(|| {
        vec![
            (RoomRule::PetsAllowed, Regex::new(r"(?i)\bpets?\b|pet-friendly").unwrap()),
            (
                RoomRule::PartiesAllowed,
                Regex::new(r"(?i)\bparties\b|\bhost(?:ing)? a party\b").unwrap(),
            ),
            (RoomRule::SmokingAllowed, Regex::new(r"(?i)\bsmok(?:e|ing|ers?)\b").unwrap()),
            (
                RoomRule::ChildrenAllowed,
                Regex::new(r"(?i)\bchildren\b|\bkids\b|child-friendly").unwrap(),
            ),
            (RoomRule::VisitorsAllowed, Regex::new(r"(?i)\bvisitors?\b|\bguests? over\b").unwrap()),
        ]
    });
    &P
}

fn room_type_patterns() -> &'static [(RoomType, Regex)] {
    static P: LazyLock<Vec<(RoomType, Regex)>> = LazyLock::new(|| {
        vec![
            (
                RoomType::NotSharedRoom,
                Regex::new(r"(?i)\bnot (?:be )?(?:a )?shared\b|\bnon-shared\b|\bno shared rooms?\b").unwrap(),
            ),
            (RoomType::EntireRoom, Regex::new(r"(?i)\bentire (?:rooms?|homes?|apartments?)\b").unwrap()),
            (RoomType::PrivateRoom, Regex::new(r"(?i)\bprivate rooms?\b").unwrap()),
            (RoomType::SharedRoom, Regex::new(r"(?i)\bshared rooms?\b").unwrap()),
        ]
    });
    &P
}

/// Cuisines named in the text, in order of first mention.
pub fn cuisines_in_order(text: &str) -> Vec<Cuisine> {
    static P: LazyLock<Vec<(Cuisine, Regex)>> = LazyLock::new(|| {
        Cuisine::ALL
            .iter()
            .map(|c| (*c, Regex::new(&format!(r"(?i)\b{}\b", c.name())).unwrap()))
            .collect()
    });
    let mut found: Vec<(usize, Cuisine)> = P
        .iter()
        .filter_map(|(c, re)| re.find(text).map(|m| (m.start(), *c)))
        .collect();
    found.sort();
    found.into_iter().map(|(_, c)| c).collect()
}

/// Python-style list literal, e.g. `['Mexican', 'Italian']`.
pub fn format_cuisine_list(cuisines: &[Cuisine]) -> String {
    let items: Vec<String> = cuisines.iter().map(|c| format!("'{}'", c.name())).collect();
    format!("[{}]", items.join(", "))
}

fn extract_budget(text: &str) -> Result<Option<Money>, ExtractError> {
    let amounts: Vec<(usize, usize, Money)> = MONEY
        .captures_iter(text)
        .map(|c| {
            let m = c.get(0).unwrap();
            let dollars: i64 = c[1].replace(',', "").parse().unwrap_or(i64::MAX / 100);
            let cents = c
                .get(2)
                .map(|f| {
                    let s = f.as_str();
                    let v: i64 = s.parse().unwrap_or(0);
                    if s.len() == 1 { v * 10 } else { v }
                })
                .unwrap_or(0);
            (m.start(), m.end(), Money::from_cents(dollars.saturating_mul(100) + cents))
        })
        .collect();
    match amounts.len() {
        0 => return Ok(None),
        1 => return Ok(Some(amounts[0].2)),
        _ => {}
    }
    let anchors: Vec<usize> = BUDGET_WORD.find_iter(text).map(|m| m.start()).collect();
    let distance = |start: usize, end: usize| {
        anchors
            .iter()
            .map(|&a| if a >= end { a - end } else { start.saturating_sub(a + "budget".len()) })
            .min()
            .unwrap_or(usize::MAX)
    };
    amounts
        .iter()
        .map(|&(s, e, m)| (distance(s, e), m))
        .filter(|(d, _)| *d <= BUDGET_WINDOW)
        .min_by_key(|(d, _)| *d)
        .map(|(_, m)| Some(m))
        .ok_or_else(|| ExtractError::AmbiguousBudget(amounts.iter().map(|a| a.2).collect()))
}

fn extract_transportation(text: &str) -> Option<TransportRule> {
    let mut start = 0;
    let mut sentences = Vec::new();
    for m in SENTENCE_END.find_iter(text) {
        sentences.push(&text[start..m.end()]);
        start = m.end();
    }
    sentences.push(&text[start..]);
    for s in sentences {
        let Some(neg) = NEGATION.find(s) else { continue };
        let after = &s[neg.start()..];
        let fly = FLYING.find(after).map(|m| m.start());
        let drive = SELF_DRIVING.find(after).map(|m| m.start());
        match (fly, drive) {
            (Some(f), Some(d)) if d < f => return Some(TransportRule::NoSelfDriving),
            (Some(_), _) => return Some(TransportRule::NoFlight),
            (None, Some(_)) => return Some(TransportRule::NoSelfDriving),
            (None, None) => {}
        }
    }
    None
}

fn first_match<T: Copy>(text: &str, patterns: &[(T, Regex)]) -> Option<T> {
    patterns
        .iter()
        .filter_map(|(v, re)| re.find(text).map(|m| (m.start(), *v)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, v)| v)
}

/// Keyword extraction of the hard constraints stated in a query.
pub fn extract_constraints_rules(query_text: &str) -> Result<HardConstraintSet, ExtractError> {
    // "a party of 5" names the group, not a house rule.
    static PARTY_OF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bparty of\b").unwrap());
    let text = PARTY_OF.replace_all(query_text, "group of");
    let room_type = first_match(&text, room_type_patterns());
    Ok(HardConstraintSet {
        room_rule: first_match(&text, room_rule_patterns()),
        room_type,
        cuisines: cuisines_in_order(&text).into_iter().collect(),
        budget: extract_budget(&text)?,
        transportation: extract_transportation(&text),
    })
}

/// Outcome of the model-backed extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExtraction {
    pub constraints: HardConstraintSet,
    pub reply: String,
    /// The reply could not be read and the rules extractor supplied the cuisines.
    pub fell_back: bool,
}

#[derive(Debug, Error)]
pub enum LlmExtractError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

pub const EXTRACTOR_SHOT_1: &str = "Can you assist in creating a 5-day travel itinerary starting in Sacramento and covering 2 cities in Washington state from March 22nd to March 26th, 2022? The journey will be for a group of three with a budget of $3,600. We require accommodations that provide entire rooms and do not plan to travel by flight. As far as cuisines are concerned, we'd love to experience American, Mediterranean, Italian, and French during our trip.";
pub const EXTRACTOR_SHOT_2: &str = "Can you help with generating a 7-day travel plan for a party of 5? We're setting off from Indianapolis and planning to explore 3 cities in Colorado from March 11th to March 17th, 2022. We have a budget of $15,100 for this trip. We'll be bringing our pets, so pet-friendly accommodations are a must. We're also hoping to find places that offer Mexican, Italian, Mediterranean, and Indian cuisines. Entire rooms for accommodations would be ideal.";
pub const EXTRACTOR_SHOT_3: &str = "Can you assist in creating a travel itinerary for a group of 4, starting in Seattle and visiting 3 unique cities across Texas? This trip will span over 7 days from March 10th through March 16th, 2022. We have a budget of $11,000. Regarding our accommodations, we would like to rent entire rooms, and it's important that our lodgings allow parties. As for transportation, we do not plan to drive ourselves around.";

/// The three built-in demonstrations and their answers.
pub fn default_extractor_shots() -> Vec<ExtractorShot> {
    use Cuisine::*;
    vec![
        ExtractorShot {
            id: "shot-1".into(),
            text: EXTRACTOR_SHOT_1.into(),
            cuisines: vec![American, Mediterranean, Italian, French],
        },
        ExtractorShot {
            id: "shot-2".into(),
            text: EXTRACTOR_SHOT_2.into(),
            cuisines: vec![Mexican, Italian, Mediterranean, Indian],
        },
        ExtractorShot {
            id: "shot-3".into(),
            text: EXTRACTOR_SHOT_3.into(),
            cuisines: vec![],
        },
    ]
}

/// One demonstration for the extractor prompt: a query text and its cuisines.
#[derive(Debug, Clone)]
pub struct ExtractorShot {
    pub id: String,
    pub text: String,
    pub cuisines: Vec<Cuisine>,
}

/// The cuisine-inference prompt: every shot as `query\n===> [...]`, then the
/// target query followed by `===>`.
pub fn build_scrubber_prompt(query_text: &str, shots: &[ExtractorShot]) -> PromptBundle {
    let mut text = String::new();
    for shot in shots {
        text.push_str(shot.text.trim());
        text.push_str("\n===> ");
        text.push_str(&format_cuisine_list(&shot.cuisines));
        text.push_str("\n\n");
    }
    text.push_str(query_text.trim());
    text.push_str("\n===>");
    PromptBundle {
        role: Role::Scrubber,
        text,
        shot_count: shots.len(),
        shot_ids: shots.iter().map(|s| s.id.clone()).collect(),
        stream: String::new(),
    }
}

/// Reads `['A', 'B']`, `["A"]`, or a JSON array of names. `None` when the reply
/// holds no list or names something outside the vocabulary.
pub fn parse_cuisine_reply(reply: &str) -> Option<Vec<Cuisine>> {
    let open = reply.find('[')?;
    let close = open + reply[open..].find(']')?;
    let inner = reply[open + 1..close].trim();
    if inner.is_empty() {
        return Some(Vec::new());
    }
    inner
        .split(',')
        .map(|item| Cuisine::from_name(item.trim().trim_matches(['\'', '"']).trim()))
        .collect()
}

/// Asks the backend for the queried cuisines. Non-cuisine constraints come from
/// the rules extractor.
pub fn extract_constraints_llm(
    stream: &str,
    query_text: &str,
    shots: &[ExtractorShot],
    backend: &BackendHandle,
) -> Result<LlmExtraction, LlmExtractError> {
    let mut prompt = build_scrubber_prompt(query_text, shots);
    prompt.stream = stream.to_string();
    let reply = backend.complete(&prompt)?;
    let mut constraints = extract_constraints_rules(query_text)?;
    let fell_back = match parse_cuisine_reply(&reply) {
        Some(list) => {
            constraints.cuisines = list.into_iter().collect();
            false
        }
        None => {
            log::warn!("unreadable extractor reply, using keyword cuisines: {reply:?}");
            true
        }
    };
    Ok(LlmExtraction {
        constraints,
        reply,
        fell_back,
    })
}

/// Which auxiliary columns `scrub` removes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnPolicy {
    #[default]
    DropAll,
    Drop(Vec<String>),
}

impl ColumnPolicy {
    fn drops(&self, column: &str) -> bool {
        match self {
            ColumnPolicy::DropAll => true,
            ColumnPolicy::Drop(cols) => cols.iter().any(|c| c.eq_ignore_ascii_case(column)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScrubReport {
    pub tokens_before: usize,
    pub tokens_after: usize,
    pub reduction_ratio: f64,
    pub rows_dropped: BTreeMap<String, usize>,
    pub columns_dropped: BTreeMap<String, Vec<String>>,
}

pub fn scrub(reference: &ReferenceBundle, c: &HardConstraintSet) -> (ReferenceBundle, ScrubReport) {
    scrub_with(reference, c, &ColumnPolicy::DropAll)
}

pub fn scrub_with(
    reference: &ReferenceBundle,
    c: &HardConstraintSet,
    columns: &ColumnPolicy,
) -> (ReferenceBundle, ScrubReport) {
    let mut out = reference.clone();
    if !c.cuisines.is_empty() {
        out.restaurants
            .retain(|r| !r.cuisines.is_disjoint(&c.cuisines));
    }
    out.accommodations.retain(|a| {
        c.room_rule.is_none_or(|rule| a.permits(rule))
            && c.room_type.is_none_or(|t| room_type_ok(t, a.room_type))
            && c.budget.is_none_or(|b| a.price <= b)
    });
    match c.transportation {
        Some(TransportRule::NoFlight) => out.flights.clear(),
        Some(TransportRule::NoSelfDriving) => out
            .ground_routes
            .retain(|g| g.mode != crate::domain::GroundMode::SelfDriving),
        None => {}
    }

    let mut rows_dropped = BTreeMap::new();
    let mut columns_dropped = BTreeMap::new();
    for table in Table::ALL {
        let dropped = reference.row_count(table) - out.row_count(table);
        if dropped > 0 {
            rows_dropped.insert(table.name().to_string(), dropped);
        }
        let cols: Vec<String> = out
            .extra_columns(table)
            .into_iter()
            .filter(|col| columns.drops(col))
            .collect();
        if cols.is_empty() {
            continue;
        }
        for extra in out.extras_mut(table) {
            extra.retain(|k, _| !cols.contains(k));
        }
        columns_dropped.insert(table.name().to_string(), cols);
    }

    let tokens_before = token_length(reference);
    let tokens_after = token_length(&out);
    let reduction_ratio = if tokens_before == 0 {
        0.0
    } else {
        1.0 - tokens_after as f64 / tokens_before as f64
    };
    let report = ScrubReport {
        tokens_before,
        tokens_after,
        reduction_ratio,
        rows_dropped,
        columns_dropped,
    };
    (out, report)
}

fn room_type_ok(want: RoomType, have: crate::domain::RoomKind) -> bool {
    crate::oracle::room_type_matches(want, have)
}

/// Restaurants that survive scrubbing under `cuisines`, by (name, city).
pub fn surviving_restaurants(
    reference: &ReferenceBundle,
    cuisines: &BTreeSet<Cuisine>,
) -> BTreeSet<(String, String)> {
    let c = HardConstraintSet {
        cuisines: cuisines.clone(),
        ..Default::default()
    };
    scrub(reference, &c)
        .0
        .restaurants
        .into_iter()
        .map(|r| (r.name, r.city))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;


    #[test]
    fn first_shot() {
        let c = extract_constraints_rules(EXTRACTOR_SHOT_1).unwrap();
        assert_eq!(
            format_cuisine_list(&cuisines_in_order(EXTRACTOR_SHOT_1)),
            "['American', 'Mediterranean', 'Italian', 'French']"
        );
        assert_eq!(c.room_type, Some(RoomType::EntireRoom));
        assert_eq!(c.transportation, Some(TransportRule::NoFlight));
        assert_eq!(c.budget, Some(Money::from_dollars(3600)));
        assert_eq!(c.room_rule, None);
    }

    #[test]
    fn second_shot_party_of_is_not_a_house_rule() {
        let c = extract_constraints_rules(EXTRACTOR_SHOT_2).unwrap();
        assert_eq!(c.room_rule, Some(RoomRule::PetsAllowed));
        assert_eq!(c.room_type, Some(RoomType::EntireRoom));
        assert_eq!(c.transportation, None);
        assert_eq!(
            format_cuisine_list(&cuisines_in_order(EXTRACTOR_SHOT_2)),
            "['Mexican', 'Italian', 'Mediterranean', 'Indian']"
        );
    }

    #[test]
    fn third_shot() {
        let c = extract_constraints_rules(EXTRACTOR_SHOT_3).unwrap();
        assert!(c.cuisines.is_empty());
        assert_eq!(format_cuisine_list(&cuisines_in_order(EXTRACTOR_SHOT_3)), "[]");
        assert_eq!(c.room_rule, Some(RoomRule::PartiesAllowed));
        assert_eq!(c.transportation, Some(TransportRule::NoSelfDriving));
        assert_eq!(c.budget, Some(Money::from_dollars(11000)));
    }

    #[test]
    fn budget_disambiguation() {
        let t = "Flights cost about $300 each. Our total budget is $2,900.";
        assert_eq!(extract_budget(t).unwrap(), Some(Money::from_dollars(2900)));
        let t = "One option is $300 and another is $500, we are flexible about everything else in the whole trip.";
        assert!(matches!(extract_budget(t), Err(ExtractError::AmbiguousBudget(v)) if v.len() == 2));
        assert_eq!(extract_budget("no money mentioned").unwrap(), None);
    }

    #[test]
    fn reply_parsing() {
        assert_eq!(
            parse_cuisine_reply("['Mediterranean', 'Mexican']"),
            Some(vec![Cuisine::Mediterranean, Cuisine::Mexican])
        );
        assert_eq!(parse_cuisine_reply(" []"), Some(vec![]));
        assert_eq!(parse_cuisine_reply("[\"Chinese\"]"), Some(vec![Cuisine::Chinese]));
        assert_eq!(parse_cuisine_reply("I think Thai"), None);
        assert_eq!(parse_cuisine_reply("['Thai']"), None);
    }

    #[test]
    fn avoid_flying() {
        let c = extract_constraints_rules("We would also prefer to avoid flying for transportation.").unwrap();
        assert_eq!(c.transportation, Some(TransportRule::NoFlight));
    }
}
