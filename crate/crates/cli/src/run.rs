//! Run directories, backend wiring and stamped output files.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tripcraft_core::gateway::{BackendHandle, CompletionParams, HttpConfig, Role};
use tripcraft_core::oracle::ORACLE_VERSION;
use tripcraft_core::synth::ScriptLine;

use crate::config::{BackendConfig, ExperimentConfig};
use crate::error::CliError;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    pub config: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub record: bool,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

/// Everything a command needs: the validated config, its hash and the fresh
/// run directory.
#[derive(Debug)]
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub run_dir: PathBuf,
    pub run_id: String,
    pub opts: GlobalOpts,
    pub command: &'static str,
}

impl Ctx {
    pub fn new(command: &'static str, opts: GlobalOpts) -> Result<Self, CliError> {
        let path = opts
            .config
            .clone()
            .ok_or_else(|| CliError::Usage(format!("{command} needs --config PATH")))?;
        let mut cfg = ExperimentConfig::load(&path)?;
        if let Some(seed) = opts.seed {
            cfg.seed = seed;
        }
        if let Some(jobs) = opts.jobs {
            if jobs == 0 {
                return Err(CliError::Usage("--jobs must be at least 1".into()));
            }
            cfg.jobs = jobs;
        }
        if let Some(dir) = &opts.replay {
            if !dir.join("transcripts").is_dir() {
                return Err(CliError::Usage(format!(
                    "replay mode requires transcripts: {} has no transcripts/ directory",
                    dir.display()
                )));
            }
        }
        let hash = cfg.hash();
        let (run_dir, run_id) = create_run_dir(&cfg.output_dir, command, &hash)?;
        let ctx = Ctx {
            cfg,
            hash,
            run_dir,
            run_id,
            opts,
            command,
        };
        let toml = toml::to_string(&ctx.cfg).map_err(|e| CliError::Config(e.to_string()))?;
        write_text(&ctx.run_dir.join("config.toml"), &toml)?;
        Ok(ctx)
    }

    pub fn jobs(&self) -> usize {
        self.cfg.jobs
    }

    fn role_config(&self, role: Role) -> Option<&BackendConfig> {
        let b = &self.cfg.backends;
        match role {
            Role::Planner => b.planner.as_ref(),
            Role::Feedback => b.feedback.as_ref(),
            Role::Refiner => b.refiner.as_ref(),
            Role::Scrubber => b.scrubber.as_ref(),
        }
    }

    /// The backend for `role`: replayed from `--replay`, otherwise built from
    /// config and wrapped in a recorder under `--record`.
    pub fn backend(&self, role: Role) -> Result<BackendHandle, CliError> {
        let name = role.as_str();
        if let Some(dir) = &self.opts.replay {
            let path = dir.join("transcripts").join(format!("{name}.jsonl"));
            if !path.is_file() {
                return Err(CliError::Usage(format!(
                    "replay mode requires transcripts: {} is missing",
                    path.display()
                )));
            }
            return Ok(BackendHandle::replay(&path)?);
        }
        let cfg = self
            .role_config(role)
            .ok_or_else(|| CliError::Config(format!("{} needs [backends.{name}]", self.command)))?;
        let base = build_backend(cfg, self.cfg.seed)?;
        if self.opts.record {
            let path = self.run_dir.join("transcripts").join(format!("{name}.jsonl"));
            return Ok(BackendHandle::record(base, &path)?);
        }
        Ok(base)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.run_dir.join(name)
    }

    /// Writes `manifest.json` describing the run.
    pub fn finish(&self, artifacts: &[&str], extra: serde_json::Value) -> Result<(), CliError> {
        let manifest = serde_json::json!({
            "command": self.command,
            "run_id": self.run_id,
            "config_hash": self.hash,
            "oracle_version": ORACLE_VERSION,
            "seed": self.cfg.seed,
            "jobs": self.cfg.jobs,
            "replayed_from": self.opts.replay,
            "recorded": self.opts.record,
            "created": chrono::Utc::now().to_rfc3339(),
            "artifacts": artifacts,
            "details": extra,
        });
        write_json(&self.path("manifest.json"), &manifest)
    }
}

fn create_run_dir(root: &Path, command: &str, hash: &str) -> Result<(PathBuf, String), CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S");
    let base = format!("{command}-{stamp}-{}", &hash[..8]);
    for n in 1.. {
        let id = if n == 1 { base.clone() } else { format!("{base}-{n}") };
        let dir = root.join(&id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok((dir, id)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::io(&dir, e)),
        }
    }
    unreachable!()
}

fn build_backend(cfg: &BackendConfig, seed: u64) -> Result<BackendHandle, CliError> {
    match cfg {
        BackendConfig::Scripted { script } => {
            let lines: Vec<ScriptLine> = read_jsonl(script)?;
            let mut streams: HashMap<String, Vec<String>> = HashMap::new();
            let mut shared = Vec::new();
            for l in lines {
                if l.stream.is_empty() {
                    shared.push(l.reply);
                } else {
                    streams.entry(l.stream).or_default().push(l.reply);
                }
            }
            Ok(BackendHandle::scripted_streams(streams, shared))
        }
        BackendConfig::Replay { transcript } => Ok(BackendHandle::replay(transcript)?),
        BackendConfig::Http {
            endpoint,
            model,
            api_key_env,
            max_attempts,
            backoff_ms,
            max_in_flight,
            min_interval_ms,
            timeout_secs,
            temperature,
            max_tokens,
        } => {
            let mut h = HttpConfig::new(endpoint.clone(), model.clone());
            h.api_key_env = api_key_env.clone();
            if let Some(v) = max_attempts {
                h.max_attempts = *v;
            }
            if let Some(v) = backoff_ms {
                h.backoff_ms = *v;
            }
            if let Some(v) = max_in_flight {
                h.max_in_flight = *v;
            }
            if let Some(v) = min_interval_ms {
                h.min_interval_ms = *v;
            }
            if let Some(v) = timeout_secs {
                h.timeout_secs = *v;
            }
            let mut params = CompletionParams {
                seed: Some(seed),
                ..CompletionParams::default()
            };
            if let Some(t) = temperature {
                params.temperature = *t;
            }
            if let Some(m) = max_tokens {
                params.max_tokens = *m;
            }
            Ok(BackendHandle::http(h)?.with_params(params))
        }
    }
}

/// A record tagged with the config hash of the run that wrote it.
#[derive(Debug, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub config_hash: String,
    #[serde(flatten)]
    pub body: T,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_text(path, &text)
}

/// Writes `rows` as JSONL, each stamped with `hash`.
pub fn write_stamped<T: Serialize>(path: &Path, hash: &str, rows: &[T]) -> Result<(), CliError> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for row in rows {
        #[derive(Serialize)]
        struct Line<'a, T> {
            config_hash: &'a str,
            #[serde(flatten)]
            body: &'a T,
        }
        serde_json::to_writer(&mut w, &Line { config_hash: hash, body: row }).expect("row serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Io(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
