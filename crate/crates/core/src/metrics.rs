//! Pass rates, hallucination rate and refinement deltas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ConstraintId, Plan, ReferenceBundle, TripQuery};
use crate::oracle::{check_commonsense, check_hard, HardVerdict, ORACLE_VERSION};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no records to aggregate")]
    EmptyCorpus,
    #[error("corpora are not aligned at position {index}: {detail}")]
    MisalignedCorpora { index: usize, detail: String },
}

/// Hard-constraint outcomes; `None` where the query imposes nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HardOutcome {
    pub room_rule: Option<bool>,
    pub room_type: Option<bool>,
    pub cuisine: Option<bool>,
    pub budget: Option<bool>,
    pub transportation: Option<bool>,
}

impl HardOutcome {
    pub fn values(&self) -> impl Iterator<Item = bool> {
        [
            self.room_rule,
            self.room_type,
            self.cuisine,
            self.budget,
            self.transportation,
        ]
        .into_iter()
        .flatten()
    }

    pub fn applicable(&self) -> usize {
        self.values().count()
    }

    pub fn passed(&self) -> usize {
        self.values().filter(|v| *v).count()
    }

    pub fn all_passed(&self) -> bool {
        self.values().all(|v| v)
    }

    /// Every constraint the query imposes, marked failed.
    pub fn all_failed(query: &TripQuery) -> Self {
        let hc = &query.hard_constraints;
        HardOutcome {
            room_rule: hc.room_rule.map(|_| false),
            room_type: hc.room_type.map(|_| false),
            cuisine: (!hc.cuisines.is_empty()).then_some(false),
            budget: Some(false),
            transportation: hc.transportation.map(|_| false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub query_id: String,
    pub delivered: bool,
    pub commonsense: [bool; 8],
    pub hard: HardOutcome,
    pub hallucinated: bool,
    pub passed_count_commonsense: usize,
}

impl EvalRecord {
    pub fn commonsense_all(&self) -> bool {
        self.commonsense.iter().all(|b| *b)
    }

    pub fn final_pass(&self) -> bool {
        self.delivered && self.commonsense_all() && self.hard.all_passed()
    }
}

/// Scores one outcome against the full reference. Hard constraints are only
/// judged once every commonsense constraint passes; otherwise they count as
/// failed.
pub fn evaluate(plan: Option<&Plan>, query: &TripQuery, reference: &ReferenceBundle) -> EvalRecord {
    let Some(plan) = plan else {
        return EvalRecord {
            query_id: query.id.clone(),
            delivered: false,
            commonsense: [false; 8],
            hard: HardOutcome::all_failed(query),
            hallucinated: false,
            passed_count_commonsense: 0,
        };
    };
    let feedback = check_commonsense(plan, query, reference);
    let commonsense = feedback.passes();
    let hard = if feedback.is_all_success() {
        let v = check_hard(plan, query, reference);
        let b = |x: &Option<HardVerdict>| x.as_ref().map(HardVerdict::passed);
        HardOutcome {
            room_rule: b(&v.room_rule),
            room_type: b(&v.room_type),
            cuisine: b(&v.cuisine),
            budget: b(&v.budget),
            transportation: b(&v.transportation),
        }
    } else {
        HardOutcome::all_failed(query)
    };
    EvalRecord {
        query_id: query.id.clone(),
        delivered: true,
        commonsense,
        hard,
        hallucinated: !commonsense[ConstraintId::ValidInformationInSandbox.index()],
        passed_count_commonsense: feedback.passed_count(),
    }
}

/// Percentage of `num / den`, rounded half-up to one decimal.
pub fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let tenths = (num as u128 * 2000 + den as u128) / (2 * den as u128);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: usize,
    pub delivery_rate: f64,
    pub commonsense_micro: f64,
    pub commonsense_macro: f64,
    pub hard_micro: f64,
    pub hard_macro: f64,
    pub final_pass_rate: f64,
    pub hallucination_rate: f64,
    pub oracle_version: String,
    /// Hard constraints are scored only for plans passing every commonsense
    /// constraint.
    pub hard_gated_on_commonsense: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn aggregate(records: &[EvalRecord]) -> Result<MetricsReport, MetricsError> {
    let n = records.len();
    if n == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    let count = |f: &dyn Fn(&EvalRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let cs_passed: usize = records.iter().map(|r| r.commonsense.iter().filter(|b| **b).count()).sum();
    let hard_total: usize = records.iter().map(|r| r.hard.applicable()).sum();
    let hard_passed: usize = records.iter().map(|r| r.hard.passed()).sum();

    let mut report = MetricsReport {
        records: n,
        delivery_rate: percent(count(&|r| r.delivered), n),
        commonsense_micro: percent(cs_passed, 8 * n),
        commonsense_macro: percent(count(&|r| r.commonsense_all()), n),
        hard_micro: percent(hard_passed, hard_total),
        hard_macro: percent(count(&|r| r.hard.all_passed()), n),
        final_pass_rate: percent(count(&|r| r.final_pass()), n),
        hallucination_rate: percent(count(&|r| r.hallucinated), n),
        oracle_version: ORACLE_VERSION.to_string(),
        hard_gated_on_commonsense: true,
        warnings: Vec::new(),
    };
    assert!(
        report.commonsense_macro <= report.commonsense_micro,
        "commonsense macro exceeds micro"
    );
    assert!(report.final_pass_rate <= report.commonsense_macro.min(report.hard_macro));
    if report.hard_macro > report.hard_micro {
        report.warnings.push(format!(
            "hard macro {} exceeds hard micro {}: plans impose different numbers of hard constraints",
            report.hard_macro, report.hard_micro
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub records: usize,
    pub uplift: usize,
    pub flat: usize,
    pub downgrade: usize,
    pub uplift_ratio: f64,
    pub flat_ratio: f64,
    pub downgrade_ratio: f64,
}

/// Classifies each plan by the change in commonsense constraints passed.
pub fn refinement_deltas(
    before: &[EvalRecord],
    after: &[EvalRecord],
) -> Result<DeltaReport, MetricsError> {
    if before.len() != after.len() {
        return Err(MetricsError::MisalignedCorpora {
            index: before.len().min(after.len()),
            detail: format!("{} records before, {} after", before.len(), after.len()),
        });
    }
    if before.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let (mut up, mut flat, mut down) = (0, 0, 0);
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        if b.query_id != a.query_id {
            return Err(MetricsError::MisalignedCorpora {
                index: i,
                detail: format!("{} vs {}", b.query_id, a.query_id),
            });
        }
        match a.passed_count_commonsense.cmp(&b.passed_count_commonsense) {
            std::cmp::Ordering::Greater => up += 1,
            std::cmp::Ordering::Equal => flat += 1,
            std::cmp::Ordering::Less => down += 1,
        }
    }
    let n = before.len();
    Ok(DeltaReport {
        records: n,
        uplift: up,
        flat,
        downgrade: down,
        uplift_ratio: percent(up, n),
        flat_ratio: percent(flat, n),
        downgrade_ratio: percent(down, n),
    })
}

/// Plain-text table with one row per labelled report, columns in the order
/// delivery, commonsense micro/macro, hard micro/macro, final, hallucination.
pub fn render_table(rows: &[(String, MetricsReport)]) -> String {
    let header = [
        "arm", "delivery", "cs_micro", "cs_macro", "hard_micro", "hard_macro", "final", "halluc",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (label, r) in rows {
        cells.push(vec![
            label.clone(),
            format!("{:.1}", r.delivery_rate),
            format!("{:.1}", r.commonsense_micro),
            format!("{:.1}", r.commonsense_macro),
            format!("{:.1}", r.hard_micro),
            format!("{:.1}", r.hard_macro),
            format!("{:.1}", r.final_pass_rate),
            format!("{:.1}", r.hallucination_rate),
        ]);
    }
    align(&cells)
}

/// Pads cells into columns: the first left-aligned, the rest right-aligned.
pub fn align(cells: &[Vec<String>]) -> String {
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| cells.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    cells
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}
