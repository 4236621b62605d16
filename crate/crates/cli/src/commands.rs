//! One function per subcommand. Each writes its artifacts into the run
//! directory and returns a short summary for stdout.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use tripcraft_core::faft::{self, CollectOptions, CorpusFormat, SampleSource};
use tripcraft_core::gateway::{pick_shots, Role, Shot};
use tripcraft_core::ingest::{load_split, read_plan_records, DatasetSplit, SplitName};
use tripcraft_core::metrics::{
    aggregate, align, evaluate, refinement_deltas, DeltaReport, EvalRecord, MetricsReport,
};
use tripcraft_core::orchestrator::{
    parallel_map, run_direct, run_refinement, ExampleRecord, FeedbackVariant, IterationTrace,
    QueryContext,
};
use tripcraft_core::scrub::{
    default_extractor_shots, extract_constraints_llm, extract_constraints_rules, scrub_with,
    ColumnPolicy, ScrubReport,
};
use tripcraft_core::{parse_plan, HardConstraintSet, ReferenceBundle};

use crate::config::{Columns, CorpusKind, Extractor, Variant};
use crate::error::CliError;
use crate::run::{read_jsonl, write_json, write_stamped, Ctx, Stamped};

/// What a command reports on stdout.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub run_dir: PathBuf,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl Summary {
    fn new(ctx: &Ctx, artifacts: &[&str]) -> Self {
        Summary {
            command: ctx.command.to_string(),
            run_dir: ctx.run_dir.clone(),
            artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
            table: None,
        }
    }
}

fn load_data(ctx: &Ctx) -> Result<DatasetSplit, CliError> {
    let d = &ctx.cfg.data;
    Ok(load_split(d.split, &d.queries, &d.reference, None)?)
}

fn load_train(ctx: &Ctx) -> Result<Vec<ExampleRecord>, CliError> {
    let Some(t) = &ctx.cfg.train else {
        return Err(CliError::Config(format!("{} needs a [train] split", ctx.command)));
    };
    let split = load_split(SplitName::Train, &t.queries, &t.reference, t.plans.as_deref())?;
    Ok(split
        .records
        .into_iter()
        .filter_map(|r| {
            Some(ExampleRecord {
                plan: r.plan?,
                query: r.query,
                reference: r.reference,
            })
        })
        .collect())
}

// ---- scrubbing -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScrubRow {
    pub query_id: String,
    pub extractor: Extractor,
    /// `None` when extraction failed and the full reference was kept.
    pub constraints: Option<HardConstraintSet>,
    pub report: Option<ScrubReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn column_policy(c: &Option<Columns>) -> ColumnPolicy {
    match c {
        None => ColumnPolicy::DropAll,
        Some(Columns::Keyword(k)) if k == "all" => ColumnPolicy::DropAll,
        Some(Columns::Keyword(_)) => ColumnPolicy::Drop(Vec::new()),
        Some(Columns::List(v)) => ColumnPolicy::Drop(v.clone()),
    }
}

/// The reference each planner prompt shows, scrubbed when enabled.
fn prompt_references(
    ctx: &Ctx,
    split: &DatasetSplit,
    force: bool,
) -> Result<(Vec<ReferenceBundle>, Vec<ScrubRow>), CliError> {
    if !(force || ctx.cfg.scrub.enabled) {
        return Ok((split.records.iter().map(|r| r.reference.clone()).collect(), Vec::new()));
    }
    let extractor = ctx.cfg.scrub.extractor;
    let backend = match extractor {
        Extractor::Llm => Some(ctx.backend(Role::Scrubber)?),
        Extractor::Rules => None,
    };
    let shots = default_extractor_shots();
    let policy = column_policy(&ctx.cfg.scrub.columns);
    let results = parallel_map(&split.records, ctx.jobs(), |rec| {
        let q = &rec.query;
        let extracted = match &backend {
            Some(b) => extract_constraints_llm(&format!("scrubber/{}", q.id), &q.text, &shots, b)
                .map(|x| {
                    let w = x.fell_back.then(|| format!("unreadable extractor reply {:?}", x.reply));
                    (x.constraints, w)
                })
                .map_err(|e| e.to_string()),
            None => extract_constraints_rules(&q.text)
                .map(|c| (c, None))
                .map_err(|e| e.to_string()),
        };
        match extracted {
            Ok((c, w)) => {
                let (bundle, report) = scrub_with(&rec.reference, &c, &policy);
                let row = ScrubRow {
                    query_id: q.id.clone(),
                    extractor,
                    constraints: Some(c),
                    report: Some(report),
                    warnings: w.into_iter().collect(),
                };
                (bundle, row)
            }
            Err(e) => (
                rec.reference.clone(),
                ScrubRow {
                    query_id: q.id.clone(),
                    extractor,
                    constraints: None,
                    report: None,
                    warnings: vec![format!("extraction failed, reference left whole: {e}")],
                },
            ),
        }
    });
    Ok(results.into_iter().unzip())
}

pub fn cmd_scrub(ctx: &Ctx) -> Result<Summary, CliError> {
    let split = load_data(ctx)?;
    let (_, rows) = prompt_references(ctx, &split, true)?;
    write_stamped(&ctx.path("scrub_reports.jsonl"), &ctx.hash, &rows)?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.report.as_ref()).map(|r| r.reduction_ratio).collect();
    let before: usize = rows.iter().filter_map(|r| r.report.as_ref()).map(|r| r.tokens_before).sum();
    let after: usize = rows.iter().filter_map(|r| r.report.as_ref()).map(|r| r.tokens_after).sum();
    let summary = serde_json::json!({
        "config_hash": ctx.hash,
        "queries": rows.len(),
        "scrubbed": ratios.len(),
        "tokens_before": before,
        "tokens_after": after,
        "pooled_reduction_ratio": if before == 0 { 0.0 } else { 1.0 - after as f64 / before as f64 },
        "mean_reduction_ratio": if ratios.is_empty() { 0.0 } else { ratios.iter().sum::<f64>() / ratios.len() as f64 },
        "min_reduction_ratio": ratios.iter().copied().fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r)))),
    });
    write_json(&ctx.path("scrub_summary.json"), &summary)?;
    let artifacts = ["scrub_reports.jsonl", "scrub_summary.json"];
    ctx.finish(&artifacts, serde_json::json!({}))?;
    Ok(Summary::new(ctx, &artifacts))
}

// ---- planning and refinement -------------------------------------------

fn plan_all(
    ctx: &Ctx,
    split: &DatasetSplit,
    prompt_refs: &[ReferenceBundle],
) -> Result<(Vec<IterationTrace>, Option<CliError>), CliError> {
    let planner = ctx.backend(Role::Planner)?;
    let pool = if ctx.cfg.plan.shots > 0 { load_train(ctx)? } else { Vec::new() };
    let indices: Vec<usize> = (0..split.len()).collect();
    let results = parallel_map(&indices, ctx.jobs(), |&i| {
        let rec = &split.records[i];
        let picks = pick_shots(pool.len(), ctx.cfg.plan.shots, ctx.cfg.seed.wrapping_add(i as u64));
        let shots: Vec<Shot<'_>> = picks.iter().map(|&k| pool[k].shot()).collect();
        let qctx = QueryContext::new(&rec.query, &rec.reference).with_prompt_reference(&prompt_refs[i]);
        run_direct(qctx, &planner, &shots)
    });
    let mut traces = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => {
                first_err.get_or_insert(CliError::Run(e));
            }
        }
    }
    Ok((traces, first_err))
}

pub fn cmd_plan(ctx: &Ctx) -> Result<Summary, CliError> {
    let split = load_data(ctx)?;
    let (refs, scrub_rows) = prompt_references(ctx, &split, false)?;
    let (traces, err) = plan_all(ctx, &split, &refs)?;
    write_stamped(&ctx.path("traces.jsonl"), &ctx.hash, &traces)?;
    let mut artifacts = vec!["traces.jsonl"];
    if !scrub_rows.is_empty() {
        write_stamped(&ctx.path("scrub_reports.jsonl"), &ctx.hash, &scrub_rows)?;
        artifacts.push("scrub_reports.jsonl");
    }
    let delivered = traces.iter().filter(|t| t.outcome.delivered()).count();
    ctx.finish(
        &artifacts,
        serde_json::json!({ "queries": split.len(), "planned": traces.len(), "delivered": delivered }),
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(Summary::new(ctx, &artifacts)),
    }
}

pub fn read_traces(path: &Path) -> Result<Vec<IterationTrace>, CliError> {
    Ok(read_jsonl::<Stamped<IterationTrace>>(path)?.into_iter().map(|s| s.body).collect())
}

pub fn cmd_refine(ctx: &Ctx, input: Option<&Path>) -> Result<Summary, CliError> {
    let split = load_data(ctx)?;
    let (refs, scrub_rows) = prompt_references(ctx, &split, false)?;
    let initial: Vec<IterationTrace> = match input {
        Some(p) => {
            let mut by_id: HashMap<String, IterationTrace> = HashMap::new();
            for t in read_traces(p)? {
                if t.iteration == 0 {
                    by_id.insert(t.query_id.clone(), t);
                }
            }
            split
                .records
                .iter()
                .map(|r| {
                    by_id.remove(&r.query.id).ok_or_else(|| {
                        CliError::Usage(format!("{} has no draft for {}", p.display(), r.query.id))
                    })
                })
                .collect::<Result<_, _>>()?
        }
        None => {
            let (t, err) = plan_all(ctx, &split, &refs)?;
            if let Some(e) = err {
                write_stamped(&ctx.path("traces.jsonl"), &ctx.hash, &t)?;
                ctx.finish(&["traces.jsonl"], serde_json::json!({ "stage": "plan" }))?;
                return Err(e);
            }
            t
        }
    };

    let variant = match ctx.cfg.refine.variant {
        Variant::Oracle => FeedbackVariant::Oracle,
        Variant::Random => FeedbackVariant::Random { seed: ctx.cfg.seed },
        Variant::Llm => FeedbackVariant::Llm {
            backend: ctx.backend(Role::Feedback)?,
            pool: Arc::new(load_train(ctx)?),
            seed: ctx.cfg.seed,
        },
    };
    let refiner = ctx.backend(Role::Refiner)?;
    let indices: Vec<usize> = (0..split.len()).collect();
    let runs = parallel_map(&indices, ctx.jobs(), |&i| {
        let rec = &split.records[i];
        let qctx = QueryContext::new(&rec.query, &rec.reference).with_prompt_reference(&refs[i]);
        run_refinement(qctx, initial[i].clone(), &variant, &refiner, ctx.cfg.refine.max_iters)
    });
    let mut traces = Vec::new();
    let mut aborted = None;
    for run in runs {
        traces.extend(run.traces);
        if let Some(e) = run.aborted {
            aborted.get_or_insert(e);
        }
    }
    write_stamped(&ctx.path("traces.jsonl"), &ctx.hash, &traces)?;
    let mut artifacts = vec!["traces.jsonl"];
    if !scrub_rows.is_empty() {
        write_stamped(&ctx.path("scrub_reports.jsonl"), &ctx.hash, &scrub_rows)?;
        artifacts.push("scrub_reports.jsonl");
    }
    ctx.finish(
        &artifacts,
        serde_json::json!({
            "variant": ctx.cfg.refine.variant,
            "max_iters": ctx.cfg.refine.max_iters,
            "queries": split.len(),
            "traces": traces.len(),
            "drafts_from": input,
        }),
    )?;
    match aborted {
        Some(e) => Err(CliError::Backend(e)),
        None => Ok(Summary::new(ctx, &artifacts)),
    }
}

// ---- evaluation ------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub source: PathBuf,
    /// Scores of the last iteration (or of the plans file).
    #[serde(rename = "final")]
    pub final_report: MetricsReport,
    /// One report per iteration, starting with the drafts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<MetricsReport>,
    /// Change from iteration `k` to `k + 1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<DeltaReport>,
    /// Change from the drafts to the last iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_delta: Option<DeltaReport>,
    pub records: Vec<EvalRecord>,
}

pub fn cmd_eval(ctx: &Ctx, traces: Option<&Path>, plans: Option<&Path>) -> Result<Summary, CliError> {
    let split = load_data(ctx)?;
    let report = match (traces, plans) {
        (Some(t), None) => eval_traces(ctx, &split, t)?,
        (None, Some(p)) => eval_plans(ctx, &split, p)?,
        _ => return Err(CliError::Usage("eval takes exactly one of --traces or --plans".into())),
    };
    write_json(&ctx.path("report.json"), &report)?;
    let table = tripcraft_core::metrics::render_table(&[("final".to_string(), report.final_report.clone())]);
    let artifacts = ["report.json"];
    ctx.finish(&artifacts, serde_json::json!({ "source": report.source }))?;
    let mut s = Summary::new(ctx, &artifacts);
    s.table = Some(table);
    Ok(s)
}

fn eval_plans(ctx: &Ctx, split: &DatasetSplit, path: &Path) -> Result<EvalReport, CliError> {
    let texts: HashMap<String, String> = read_plan_records(path)?
        .into_iter()
        .map(|r| (r.query_id, r.plan_text))
        .collect();
    let records: Vec<EvalRecord> = split
        .records
        .iter()
        .map(|r| {
            let plan = texts
                .get(&r.query.id)
                .and_then(|t| parse_plan(t, r.query.day_count as usize).ok());
            evaluate(plan.as_ref(), &r.query, &r.reference)
        })
        .collect();
    Ok(EvalReport {
        config_hash: ctx.hash.clone(),
        source: path.to_path_buf(),
        final_report: aggregate(&records)?,
        iterations: Vec::new(),
        deltas: Vec::new(),
        overall_delta: None,
        records,
    })
}

fn eval_traces(ctx: &Ctx, split: &DatasetSplit, path: &Path) -> Result<EvalReport, CliError> {
    let mut grid: BTreeMap<usize, HashMap<String, IterationTrace>> = BTreeMap::new();
    for t in read_traces(path)? {
        grid.entry(t.iteration).or_default().insert(t.query_id.clone(), t);
    }
    if grid.is_empty() {
        return Err(CliError::Metrics(tripcraft_core::metrics::MetricsError::EmptyCorpus));
    }
    let mut per_iter: Vec<Vec<EvalRecord>> = Vec::new();
    for (iteration, traces) in &grid {
        let mut recs = Vec::with_capacity(split.len());
        for (index, r) in split.records.iter().enumerate() {
            let t = traces.get(&r.query.id).ok_or_else(|| {
                CliError::Metrics(tripcraft_core::metrics::MetricsError::MisalignedCorpora {
                    index,
                    detail: format!("no iteration {iteration} trace for {}", r.query.id),
                })
            })?;
            recs.push(evaluate(t.outcome.plan(), &r.query, &r.reference));
        }
        per_iter.push(recs);
    }
    let iterations = per_iter.iter().map(|r| aggregate(r)).collect::<Result<Vec<_>, _>>()?;
    let deltas = per_iter
        .windows(2)
        .map(|w| refinement_deltas(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let last = per_iter.last().expect("non-empty");
    let overall_delta = if per_iter.len() > 1 {
        Some(refinement_deltas(&per_iter[0], last)?)
    } else {
        None
    };
    Ok(EvalReport {
        config_hash: ctx.hash.clone(),
        source: path.to_path_buf(),
        final_report: iterations.last().cloned().expect("non-empty"),
        records: last.clone(),
        iterations,
        deltas,
        overall_delta,
    })
}

// ---- reports ---------------------------------------------------------------

/// Side-by-side table of several eval reports with differences from the first.
pub fn cmd_report(ctx: &Ctx, reports: &[PathBuf]) -> Result<Summary, CliError> {
    if reports.is_empty() {
        return Err(CliError::Usage("report needs at least one report.json".into()));
    }
    let mut rows: Vec<(String, MetricsReport)> = Vec::new();
    for p in reports {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| CliError::io(p, e))?;
        let label = p
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| p.display().to_string());
        rows.push((label, r.final_report));
    }
    let version = &rows[0].1.oracle_version;
    if let Some((label, r)) = rows.iter().find(|(_, r)| &r.oracle_version != version) {
        return Err(CliError::Incompatible(format!(
            "{label} was scored by oracle version {} but {} by version {version}",
            r.oracle_version, rows[0].0
        )));
    }
    for (label, r) in &rows {
        if r.commonsense_macro > r.commonsense_micro {
            return Err(CliError::Incompatible(format!("{label}: commonsense macro exceeds micro")));
        }
    }
    let table = comparison_table(&rows);
    std::fs::write(ctx.path("comparison.txt"), format!("config_hash: {}\n{table}\n", ctx.hash))
        .map_err(|e| CliError::io(&ctx.path("comparison.txt"), e))?;
    write_json(
        &ctx.path("comparison.json"),
        &serde_json::json!({ "config_hash": ctx.hash, "inputs": reports, "rows": rows }),
    )?;
    let artifacts = ["comparison.txt", "comparison.json"];
    ctx.finish(&artifacts, serde_json::json!({ "inputs": reports }))?;
    let mut s = Summary::new(ctx, &artifacts);
    s.table = Some(table);
    Ok(s)
}

fn metric_values(r: &MetricsReport) -> [f64; 7] {
    [
        r.delivery_rate,
        r.commonsense_micro,
        r.commonsense_macro,
        r.hard_micro,
        r.hard_macro,
        r.final_pass_rate,
        r.hallucination_rate,
    ]
}

pub fn comparison_table(rows: &[(String, MetricsReport)]) -> String {
    let names = ["delivery", "cs_micro", "cs_macro", "hard_micro", "hard_macro", "final", "halluc"];
    let mut header = vec!["arm".to_string()];
    for n in names {
        header.push(n.to_string());
        header.push("Δ".to_string());
    }
    let base = metric_values(&rows[0].1);
    let mut cells = vec![header];
    for (label, r) in rows {
        let mut row = vec![label.clone()];
        for (v, b) in metric_values(r).iter().zip(base) {
            row.push(format!("{v:.1}"));
            row.push(format!("{:+.1}", v - b));
        }
        cells.push(row);
    }
    align(&cells)
}

// ---- fine-tuning corpora ---------------------------------------------------

pub fn cmd_faft(ctx: &Ctx) -> Result<Summary, CliError> {
    let train = load_train(ctx)?;
    let fc = &ctx.cfg.faft;
    let annotated: Vec<_> = train
        .iter()
        .map(|r| (r.query.clone(), r.reference.clone(), r.plan.clone()))
        .collect();
    let sources: Vec<SampleSource<'_>> = train
        .iter()
        .map(|r| SampleSource {
            query: &r.query,
            reference: &r.reference,
        })
        .collect();
    let planner = if fc.samples_per_query > 0 {
        ctx.backend(Role::Planner)?
    } else {
        // Never called when nothing is sampled.
        tripcraft_core::gateway::BackendHandle::scripted(Vec::<String>::new())
    };
    let opts = CollectOptions {
        samples_per_query: fc.samples_per_query,
        temperature: fc.temperature,
        seed: ctx.cfg.seed,
        max_total: fc.max_total,
    };
    let collected = faft::collect(&annotated, &sources, &planner, &opts);
    let format = match fc.format {
        CorpusKind::Sft => CorpusFormat::Sft,
        CorpusKind::Faft => CorpusFormat::Faft,
    };
    let manifest = faft::emit_jsonl(
        &collected.samples,
        &ctx.path("corpus.jsonl"),
        format,
        fc.shuffle_seed,
        collected.skipped_unparseable,
        Some(&ctx.hash),
    )
    .map_err(|e| CliError::Io(e.to_string()))?;
    write_json(
        &ctx.path("corpus_manifest.json"),
        &serde_json::json!({ "config_hash": ctx.hash, "corpus": manifest }),
    )?;
    let artifacts = ["corpus.jsonl", "corpus_manifest.json"];
    ctx.finish(&artifacts, serde_json::json!({ "total": manifest.total }))?;
    match collected.error {
        Some(e) => Err(CliError::Backend(e)),
        None => Ok(Summary::new(ctx, &artifacts)),
    }
}
