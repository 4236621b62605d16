//! Text format for plans.
//!
//! ```text
//! Day 1:
//! Current City: from Seattle to San Francisco
//! Transportation: Self-Driving from Seattle to San Francisco, Duration: 12 hours 28 mins, Cost: $65
//! Breakfast: -
//! Attraction: -
//! Lunch: -
//! Dinner: Anupam Eating Point, San Francisco
//! Accommodation: Room in Down town Brooklyn Parkslop, San Francisco
//! ```
//!
//! Parsing tolerates ragged whitespace, trailing periods and label case; rendering
//! always emits the canonical form above. The full grammar is in `docs/plan-grammar.md`.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::domain::{
    CurrentCity, DayEntry, Money, PlaceRef, Plan, Slot, SlotName, Transport, TransportLeg,
    TransportMode,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub day: usize,
    pub slot: Option<SlotName>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fatal {
    pub line_no: usize,
    pub cause: String,
}

/// Warnings collected while parsing; `fatal` is set iff the parse failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub warnings: Vec<ParseWarning>,
    pub fatal: Option<Fatal>,
}

impl ParseDiagnostics {
    fn warn(&mut self, day: usize, slot: Option<SlotName>, message: impl Into<String>) {
        self.warnings.push(ParseWarning {
            day,
            slot,
            message: message.into(),
        });
    }

    fn fail(mut self, line_no: usize, cause: impl Into<String>) -> Self {
        self.fatal = Some(Fatal {
            line_no,
            cause: cause.into(),
        });
        self
    }
}

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.fatal {
            Some(fatal) => write!(f, "line {}: {}", fatal.line_no, fatal.cause),
            None => write!(f, "{} warning(s)", self.warnings.len()),
        }
    }
}

impl std::error::Error for ParseDiagnostics {}

static DAY_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*day\s+(\d{1,4})\s*:\s*$").unwrap());
static TRANSITION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^from\s+(.+?)\s+to\s+(.+)$").unwrap());
static FLIGHT_HEAD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^flight\s+number\s*:\s*([^,\s]+)\s*,?\s*from\s+").unwrap()
});
static GROUND_HEAD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(self[- ]driving|taxi)\s*,?\s*from\s+").unwrap());
static FIELD_DELIM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\s*,\s*(departure\s+time|arrival\s+time|duration|cost)\s*:\s*").unwrap()
});
static TO_SEP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\s+to\s+").unwrap());
static FLIGHT_NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^F\d+$").unwrap());

/// Parses plan text, requiring exactly `expected_days` day blocks numbered from 1.
pub fn parse_plan(text: &str, expected_days: usize) -> Result<Plan, ParseDiagnostics> {
    parse_plan_with_diagnostics(text, expected_days).map(|(plan, _)| plan)
}

/// Day number, header line number, and body lines with their numbers.
type Block<'a> = (usize, usize, Vec<(usize, &'a str)>);

/// Like [`parse_plan`] but also returns the non-fatal warnings.
pub fn parse_plan_with_diagnostics(
    text: &str,
    expected_days: usize,
) -> Result<(Plan, ParseDiagnostics), ParseDiagnostics> {
    let mut diag = ParseDiagnostics::default();
    if expected_days == 0 {
        return Err(diag.fail(0, "expected day count must be at least 1"));
    }

    let mut blocks: Vec<Block> = Vec::new();
    let mut last_line = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        if let Some(caps) = DAY_HEADER.captures(line) {
            let n: usize = caps[1].parse().unwrap_or(usize::MAX);
            blocks.push((n, line_no, Vec::new()));
        } else if let Some(block) = blocks.last_mut() {
            block.2.push((line_no, line));
        }
    }
    if blocks.is_empty() {
        return Err(diag.fail(1, "no day blocks found"));
    }

    let mut days = Vec::with_capacity(expected_days);
    for (k, (n, header_line, body)) in blocks.iter().enumerate() {
        let want = k + 1;
        if *n != want {
            let cause = if *n < want {
                format!("Day {n} is duplicated or out of order")
            } else {
                format!("Day {want} is missing")
            };
            return Err(diag.fail(*header_line, cause));
        }
        if want > expected_days {
            return Err(diag.fail(
                *header_line,
                format!("Day {want} exceeds the expected {expected_days} days"),
            ));
        }
        match parse_day(want, body, &mut diag) {
            Some(day) => days.push(day),
            None => {
                return Err(diag.fail(*header_line, format!("Day {want} has no Current City line")))
            }
        }
    }
    if days.len() < expected_days {
        return Err(diag.fail(last_line + 1, format!("Day {} is missing", days.len() + 1)));
    }
    Ok((Plan::new(days), diag))
}

fn label_of(s: &str) -> Option<SlotName> {
    let s = s.trim();
    SlotName::ALL
        .into_iter()
        .find(|slot| slot.label().eq_ignore_ascii_case(s))
}

fn parse_day(day: usize, body: &[(usize, &str)], diag: &mut ParseDiagnostics) -> Option<DayEntry> {
    let mut values: [Option<&str>; 7] = [None; 7];
    for (line_no, line) in body {
        if line.trim().is_empty() {
            continue;
        }
        let Some((label, value)) = line.split_once(':') else {
            diag.warn(day, None, format!("line {line_no}: ignored unlabeled line"));
            continue;
        };
        let Some(slot) = label_of(label) else {
            diag.warn(
                day,
                None,
                format!("line {line_no}: ignored unknown label {:?}", label.trim()),
            );
            continue;
        };
        let idx = SlotName::ALL.iter().position(|s| *s == slot).unwrap();
        if values[idx].is_some() {
            diag.warn(day, Some(slot), format!("line {line_no}: duplicate label ignored"));
            continue;
        }
        values[idx] = Some(value);
    }

    values[0]?;
    let mut entry = DayEntry::default();
    for (slot, value) in SlotName::ALL.into_iter().zip(values) {
        let value = match value {
            Some(v) => v.trim(),
            None => {
                diag.warn(day, Some(slot), "label missing, treated as '-'");
                continue;
            }
        };
        if is_blank_marker(value) {
            continue;
        }
        if value.is_empty() {
            diag.warn(day, Some(slot), "empty value, treated as '-'");
            continue;
        }
        match slot {
            SlotName::CurrentCity => entry.current_city = Slot::Filled(parse_current_city(value)),
            SlotName::Transportation => {
                let t = parse_transport(value);
                if let Transport::Unrecognized(_) = t {
                    diag.warn(day, Some(slot), "unrecognized transportation format");
                } else if let Transport::Leg(leg) = &t {
                    if let Some(num) = &leg.flight_number {
                        if !FLIGHT_NUMBER.is_match(num) {
                            diag.warn(day, Some(slot), format!("unusual flight number {num:?}"));
                        }
                    }
                }
                entry.transport = Slot::Filled(t);
            }
            SlotName::Attraction => {
                let list: Vec<PlaceRef> = value
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty() && !is_blank_marker(s))
                    .filter_map(|s| parse_place(s, day, slot, diag))
                    .collect();
                if !list.is_empty() {
                    entry.attractions = Slot::Filled(list);
                }
            }
            SlotName::Breakfast | SlotName::Lunch | SlotName::Dinner | SlotName::Accommodation => {
                if let Some(place) = parse_place(value, day, slot, diag) {
                    let target = match slot {
                        SlotName::Breakfast => &mut entry.breakfast,
                        SlotName::Lunch => &mut entry.lunch,
                        SlotName::Dinner => &mut entry.dinner,
                        _ => &mut entry.accommodation,
                    };
                    *target = Slot::Filled(place);
                }
            }
        }
    }
    Some(entry)
}

fn is_blank_marker(v: &str) -> bool {
    let v = v.trim();
    v == "-" || v == "-."
}

fn strip_period(s: &str) -> &str {
    s.trim().trim_end_matches('.').trim_end()
}

fn parse_current_city(value: &str) -> CurrentCity {
    let v = strip_period(value);
    match TRANSITION.captures(v) {
        Some(c) => CurrentCity::Transition {
            from: c[1].trim().to_string(),
            to: c[2].trim().to_string(),
        },
        None => CurrentCity::Single(v.to_string()),
    }
}

/// `None` when nothing but separators is left, which reads as `-`.
fn parse_place(value: &str, day: usize, slot: SlotName, diag: &mut ParseDiagnostics) -> Option<PlaceRef> {
    let v = value.trim_end_matches(|c: char| c == ',' || c == '.' || c.is_whitespace());
    if v.chars().all(|c| c == ',' || c == '.' || c.is_whitespace()) {
        diag.warn(day, Some(slot), "value has no name, treated as '-'");
        return None;
    }
    Some(match v.rsplit_once(',') {
        Some((name, city)) => {
            if name.trim().is_empty() {
                diag.warn(day, Some(slot), "entity name is empty");
            }
            PlaceRef::new(name.trim(), city.trim())
        }
        None => {
            diag.warn(day, Some(slot), "no city given for entity");
            PlaceRef::new(v.trim(), "")
        }
    })
}

fn parse_transport(value: &str) -> Transport {
    let v = strip_period(value);
    let (mode, flight_number, rest) = if let Some(c) = FLIGHT_HEAD.captures(v) {
        let end = c.get(0).unwrap().end();
        (TransportMode::Flight, Some(c[1].to_string()), &v[end..])
    } else if let Some(c) = GROUND_HEAD.captures(v) {
        let end = c.get(0).unwrap().end();
        let mode = if c[1].to_ascii_lowercase().starts_with("taxi") {
            TransportMode::Taxi
        } else {
            TransportMode::SelfDriving
        };
        (mode, None, &v[end..])
    } else {
        return Transport::Unrecognized(v.to_string());
    };

    let delims: Vec<regex::Captures> = FIELD_DELIM.captures_iter(rest).collect();
    let route_end = delims.first().map(|c| c.get(0).unwrap().start()).unwrap_or(rest.len());
    let route = &rest[..route_end];
    let Some(sep) = TO_SEP.find(route) else {
        return Transport::Unrecognized(v.to_string());
    };
    let from = route[..sep.start()].trim();
    let to = route[sep.end()..].trim();
    if from.is_empty() || to.is_empty() {
        return Transport::Unrecognized(v.to_string());
    }

    let mut leg = TransportLeg {
        mode,
        flight_number,
        from: from.to_string(),
        to: to.to_string(),
        departure_time: None,
        arrival_time: None,
        duration: None,
        cost: None,
    };
    for (i, c) in delims.iter().enumerate() {
        let start = c.get(0).unwrap().end();
        let end = delims
            .get(i + 1)
            .map(|n| n.get(0).unwrap().start())
            .unwrap_or(rest.len());
        let val = rest[start..end].trim().to_string();
        let key = c[1].to_ascii_lowercase();
        let key: String = key.split_whitespace().collect::<Vec<_>>().join(" ");
        match key.as_str() {
            "departure time" => leg.departure_time = Some(val),
            "arrival time" => leg.arrival_time = Some(val),
            "duration" => leg.duration = Some(val),
            "cost" => match Money::parse(&val) {
                Ok(m) => leg.cost = Some(m),
                Err(_) => return Transport::Unrecognized(v.to_string()),
            },
            _ => {}
        }
    }
    Transport::Leg(leg)
}

/// Renders the canonical text form of a transport leg.
pub fn render_transport(t: &Transport) -> String {
    let leg = match t {
        Transport::Leg(leg) => leg,
        Transport::Unrecognized(raw) => return raw.clone(),
    };
    let mut out = match leg.mode {
        TransportMode::Flight => format!(
            "Flight Number: {}, from {} to {}",
            leg.flight_number.as_deref().unwrap_or(""),
            leg.from,
            leg.to
        ),
        TransportMode::SelfDriving => format!("Self-Driving from {} to {}", leg.from, leg.to),
        TransportMode::Taxi => format!("Taxi from {} to {}", leg.from, leg.to),
    };
    if let Some(t) = &leg.departure_time {
        out.push_str(&format!(", Departure Time: {t}"));
    }
    if let Some(t) = &leg.arrival_time {
        out.push_str(&format!(", Arrival Time: {t}"));
    }
    if let Some(d) = &leg.duration {
        out.push_str(&format!(", Duration: {d}"));
    }
    if let Some(c) = leg.cost {
        out.push_str(&format!(", Cost: {c}"));
    }
    out
}

fn render_place(slot: &Slot<PlaceRef>) -> String {
    match slot {
        Slot::Filled(p) => p.to_string(),
        Slot::Unnecessary => "-".to_string(),
    }
}

/// Renders a plan in canonical text form; days are separated by a blank line.
pub fn render_plan(plan: &Plan) -> String {
    let mut blocks = Vec::with_capacity(plan.days.len());
    for (i, day) in plan.days.iter().enumerate() {
        let city = match &day.current_city {
            Slot::Filled(CurrentCity::Single(c)) => c.clone(),
            Slot::Filled(CurrentCity::Transition { from, to }) => format!("from {from} to {to}"),
            Slot::Unnecessary => "-".to_string(),
        };
        let transport = match &day.transport {
            Slot::Filled(t) => render_transport(t),
            Slot::Unnecessary => "-".to_string(),
        };
        let attractions = match &day.attractions {
            Slot::Filled(list) if !list.is_empty() => list
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; "),
            _ => "-".to_string(),
        };
        blocks.push(format!(
            "Day {}:\nCurrent City: {}\nTransportation: {}\nBreakfast: {}\nAttraction: {}\nLunch: {}\nDinner: {}\nAccommodation: {}",
            i + 1,
            city,
            transport,
            render_place(&day.breakfast),
            attractions,
            render_place(&day.lunch),
            render_place(&day.dinner),
            render_place(&day.accommodation),
        ));
    }
    blocks.join("\n\n")
}
