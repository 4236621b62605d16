//! The `tripcraft` command line: experiment arms, reports and corpora from a
//! TOML config.

pub mod commands;
pub mod config;
pub mod error;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Summary;
pub use error::CliError;
pub use run::{Ctx, GlobalOpts};

#[derive(Debug, Parser)]
#[command(name = "tripcraft", version, about = "Constrained travel planning experiments")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Serve every backend from the transcripts of an earlier run directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub replay: Option<PathBuf>,
    /// Save backend transcripts into the new run directory.
    #[arg(long, global = true)]
    pub record: bool,
    /// Queries processed in parallel.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract constraints and prune each query's reference.
    Scrub,
    /// Draft one plan per query.
    Plan,
    /// Run the feedback and refinement loop.
    Refine {
        /// Drafts from an earlier `plan` run; planned afresh when absent.
        #[arg(long, value_name = "PATH")]
        traces: Option<PathBuf>,
    },
    /// Score traces or a plans file.
    Eval {
        #[arg(long, value_name = "PATH")]
        traces: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        plans: Option<PathBuf>,
    },
    /// Build an SFT or FAFT corpus from the training split.
    Faft,
    /// Compare eval reports.
    Report {
        #[arg(required = true, value_name = "REPORT")]
        reports: Vec<PathBuf>,
    },
    /// Write the synthetic fixture tree.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

impl Cli {
    fn opts(&self) -> GlobalOpts {
        GlobalOpts {
            config: self.config.clone(),
            replay: self.replay.clone(),
            record: self.record,
            jobs: self.jobs,
            seed: self.seed,
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: Cli) -> Result<Summary, CliError> {
    let opts = cli.opts();
    match cli.command {
        Command::Scrub => commands::cmd_scrub(&Ctx::new("scrub", opts)?),
        Command::Plan => commands::cmd_plan(&Ctx::new("plan", opts)?),
        Command::Refine { traces } => commands::cmd_refine(&Ctx::new("refine", opts)?, traces.as_deref()),
        Command::Eval { traces, plans } => {
            if traces.is_some() == plans.is_some() {
                return Err(CliError::Usage("eval takes exactly one of --traces or --plans".into()));
            }
            commands::cmd_eval(&Ctx::new("eval", opts)?, traces.as_deref(), plans.as_deref())
        }
        Command::Faft => commands::cmd_faft(&Ctx::new("faft", opts)?),
        Command::Report { reports } => commands::cmd_report(&Ctx::new("report", opts)?, &reports),
        Command::Synth { out } => {
            if out.exists() && std::fs::read_dir(&out).map_err(|e| CliError::io(&out, e))?.next().is_some() {
                return Err(CliError::Usage(format!("{} exists and is not empty", out.display())));
            }
            tripcraft_core::synth::write_fixtures(&out)?;
            Ok(Summary {
                command: "synth".into(),
                run_dir: out,
                artifacts: vec!["train".into(), "validation".into(), "eval".into()],
                table: None,
            })
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// go to stderr as one JSON object.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string().trim().to_string()).to_json());
            return 2;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            if let Some(t) = &summary.table {
                eprintln!("{t}");
            }
            println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
