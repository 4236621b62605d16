//! Fine-tuning corpora: supervised samples with and without embedded oracle
//! feedback, and the matching inference prompt.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{parse_plan, render_plan};
use crate::domain::{Feedback, Plan, ReferenceBundle, TripQuery};
use crate::gateway::{build_planner_prompt, fill_in_order, BackendError, BackendHandle, CompletionParams};
use crate::oracle::check_commonsense;

pub const SFT_TEMPLATE: &str = include_str!("../assets/faft/sft.txt");
pub const FAFT_TEMPLATE: &str = include_str!("../assets/faft/faft.txt");
pub const FAFT_INFERENCE_TEMPLATE: &str = include_str!("../assets/faft/faft_inference.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Annotated,
    Sampled { temperature: f64, seed: u64 },
}

impl Provenance {
    fn key(&self) -> &'static str {
        match self {
            Provenance::Annotated => "annotated",
            Provenance::Sampled { .. } => "sampled",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaftSample {
    pub ref_text: String,
    pub query_text: String,
    pub feedback_text: String,
    pub plan_text: String,
    pub provenance: Provenance,
}

impl FaftSample {
    /// Labels `plan` with oracle feedback.
    pub fn labelled(
        query: &TripQuery,
        reference: &ReferenceBundle,
        plan: &Plan,
        provenance: Provenance,
    ) -> Self {
        FaftSample {
            ref_text: reference.render_text(),
            query_text: query.text.clone(),
            feedback_text: check_commonsense(plan, query, reference).render(),
            plan_text: render_plan(plan),
            provenance,
        }
    }

    pub fn feedback_all_success(&self) -> bool {
        Feedback::parse(&self.feedback_text).is_ok_and(|f| f.is_all_success())
    }
}

pub fn render_sft(s: &FaftSample) -> String {
    fill_in_order(
        SFT_TEMPLATE,
        &[("{ref}", &s.ref_text), ("{query}", &s.query_text), ("{plan}", &s.plan_text)],
    )
}

pub fn render_faft(s: &FaftSample) -> String {
    fill_in_order(
        FAFT_TEMPLATE,
        &[
            ("{ref}", &s.ref_text),
            ("{query}", &s.query_text),
            ("{feedback}", &s.feedback_text),
            ("{plan}", &s.plan_text),
        ],
    )
}

/// The inference prompt. The template already spells out the all-success
/// block, so the feedback slot stays empty and the text ends at
/// `draft travel plan:`.
pub fn render_faft_inference(ref_text: &str, query_text: &str) -> String {
    fill_in_order(
        FAFT_INFERENCE_TEMPLATE,
        &[("{ref}", ref_text), ("{query}", query_text), ("{feedback}", "")],
    )
}

/// Splits a FAFT rendering back into (ref, query, feedback, plan).
pub fn split_faft(text: &str) -> Option<(&str, &str, &str, &str)> {
    let rest = text.strip_prefix("reference information box:")?;
    let (r, rest) = rest.split_once("\nquery:")?;
    let (q, rest) = rest.split_once("\nfeedback:")?;
    let (f, p) = rest.rsplit_once("\ndraft travel plan:")?;
    Some((r, q, f, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusFormat {
    Sft,
    Faft,
}

/// A query to sample plans for, with the reference shown to the planner.
#[derive(Debug, Clone, Copy)]
pub struct SampleSource<'a> {
    pub query: &'a TripQuery,
    pub reference: &'a ReferenceBundle,
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub samples_per_query: usize,
    pub temperature: f64,
    pub seed: u64,
    /// Stop sampling once the corpus (annotated included) reaches this size.
    pub max_total: Option<usize>,
}

#[derive(Debug)]
pub struct Collected {
    pub samples: Vec<FaftSample>,
    pub skipped_unparseable: usize,
    /// Set when a backend error stopped sampling early.
    pub error: Option<BackendError>,
}

/// Samples plans from `planner` and labels them with the oracle, then appends
/// the annotated plans.
pub fn collect(
    annotated: &[(TripQuery, ReferenceBundle, Plan)],
    sources: &[SampleSource<'_>],
    planner: &BackendHandle,
    opts: &CollectOptions,
) -> Collected {
    let cap = opts.max_total.unwrap_or(usize::MAX);
    let sampled_cap = cap.saturating_sub(annotated.len());
    let mut samples = Vec::new();
    let mut skipped = 0;
    let mut error = None;
    'outer: for src in sources {
        for k in 0..opts.samples_per_query {
            if samples.len() >= sampled_cap {
                break 'outer;
            }
            let seed = opts.seed.wrapping_add(k as u64);
            let params = CompletionParams {
                temperature: opts.temperature,
                seed: Some(seed),
                ..planner.params().clone()
            };
            let handle = planner.clone().with_params(params);
            let prompt = build_planner_prompt(src.query, src.reference, &[])
                .expect("zero shots is always valid");
            let reply = match handle.complete(&prompt) {
                Ok(r) => r,
                Err(e) => {
                    error = Some(e);
                    break 'outer;
                }
            };
            match parse_plan(&reply, src.query.day_count as usize) {
                Ok(plan) => samples.push(FaftSample::labelled(
                    src.query,
                    src.reference,
                    &plan,
                    Provenance::Sampled {
                        temperature: opts.temperature,
                        seed,
                    },
                )),
                Err(_) => skipped += 1,
            }
        }
    }
    for (q, r, p) in annotated {
        samples.push(FaftSample::labelled(q, r, p, Provenance::Annotated));
    }
    Collected {
        samples,
        skipped_unparseable: skipped,
        error,
    }
}

#[derive(Debug, Serialize)]
struct CorpusLine<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<&'a str>,
    text: String,
    provenance: &'a Provenance,
    feedback_all_success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub path: PathBuf,
    pub format: CorpusFormat,
    pub total: usize,
    pub by_provenance: BTreeMap<String, usize>,
    pub positive: usize,
    pub negative: usize,
    pub skipped_unparseable: usize,
    pub shuffle_seed: u64,
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Writes one JSON object per sample, in an order shuffled by `shuffle_seed`.
/// The file appears only once complete. `config_hash`, when given, is copied
/// into every line.
pub fn emit_jsonl(
    samples: &[FaftSample],
    path: &Path,
    format: CorpusFormat,
    shuffle_seed: u64,
    skipped_unparseable: usize,
    config_hash: Option<&str>,
) -> Result<CorpusManifest, EmitError> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));

    let tmp = path.with_extension("jsonl.partial");
    let io = |source| EmitError::Io {
        path: path.to_path_buf(),
        source,
    };
    let result = (|| -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(&tmp)?);
        for &i in &order {
            let s = &samples[i];
            let line = CorpusLine {
                config_hash,
                text: match format {
                    CorpusFormat::Sft => render_sft(s),
                    CorpusFormat::Faft => render_faft(s),
                },
                provenance: &s.provenance,
                feedback_all_success: s.feedback_all_success(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io(e));
    }

    let mut by_provenance = BTreeMap::new();
    for s in samples {
        *by_provenance.entry(s.provenance.key().to_string()).or_insert(0) += 1;
    }
    let positive = samples.iter().filter(|s| s.feedback_all_success()).count();
    Ok(CorpusManifest {
        path: path.to_path_buf(),
        format,
        total: samples.len(),
        by_provenance,
        positive,
        negative: samples.len() - positive,
        skipped_unparseable,
        shuffle_seed,
    })
}
