use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use omgs_core::deliberation::{DeliberationConfig, Mode};
use omgs_core::roles::AccessMatrix;
use omgs_stats::{ContingencyMethod, IqrStyle, WilcoxonMode, DEFAULT_MC_REPLICATES, DEFAULT_MC_SEED};

use omgs_cli::audit::{cmd_audit, AuditRequest};
use omgs_cli::error::exit_code;
use omgs_cli::ingest::{cmd_ingest, load_ingest_config, IngestRequest};
use omgs_cli::replay::{cmd_replay, ReplayRequest};
use omgs_cli::run::{cmd_run, run_summary_json, RunRequest};
use omgs_cli::score::{cmd_score, ScoreRequest};
use omgs_cli::stats::{cmd_stats, StatsRequest};
use omgs_cli::usage::cmd_usage;

/// Multi-agent tumour-board deliberation pipeline.
#[derive(Parser)]
#[command(name = "omgs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a frozen evidence snapshot from JSONL corpus files.
    Ingest {
        #[arg(required = true)]
        corpus: Vec<PathBuf>,
        /// Snapshot directory to create.
        #[arg(long)]
        out: PathBuf,
        /// Ingest settings (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Deliberate one case packet.
    Run(RunArgs),
    /// Re-derive a run's summary from its transcript without a backend.
    Replay {
        run: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Apply the citation audit's evidence caps.
    Audit {
        #[arg(long)]
        verdicts: PathBuf,
        #[arg(long)]
        initial_e: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gate SPEAR scores and summarise them by scene and arm.
    Score {
        scores: PathBuf,
        /// `audit_cases.csv` from `omgs audit`.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Statistical tests over CSV inputs.
    Stats {
        #[command(subcommand)]
        test: StatsCommand,
        /// Write the JSON result here instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Token and wall-time distributions across run manifests.
    Usage {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print the default role access matrix.
    Matrix,
    /// Serve every command over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Case packet directory.
    case: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    /// `scripted:<file>` or `http(s)://...`.
    #[arg(long)]
    backend: String,
    /// Root for run directories.
    #[arg(long)]
    out: PathBuf,
    /// Deliberation config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// omgs, chair-r, chair-e or chair-d.
    #[arg(long, value_parser = parse_enum::<Mode>)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Role access matrix (JSON).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
    /// Endpoint of a remote embedder matching the snapshot's.
    #[arg(long)]
    embedder_url: Option<String>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Paired signed-rank test per group with Bonferroni adjustment.
    Wilcoxon {
        input: PathBuf,
        #[arg(long, default_value = "auto", value_parser = parse_enum::<WilcoxonMode>)]
        mode: WilcoxonMode,
        /// Family size; the number of groups by default.
        #[arg(long)]
        bonferroni: Option<usize>,
    },
    /// Two one-sided tests for paired equivalence per group.
    Tost {
        input: PathBuf,
        #[arg(long, default_value_t = omgs_stats::DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = omgs_stats::DEFAULT_ALPHA_EACH)]
        alpha: f64,
    },
    /// Benjamini-Hochberg adjustment of `id,p` rows.
    Bh {
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        q: f64,
    },
    /// ICC(2,k) from long-format `subject,rater,value` rows.
    Icc { input: PathBuf },
    /// Spearman correlation of two columns.
    Spearman {
        input: PathBuf,
        #[arg(long, default_value = "x")]
        x: String,
        #[arg(long, default_value = "y")]
        y: String,
    },
    /// Median with IQR and mean with 95% CI of one column.
    Describe {
        input: PathBuf,
        #[arg(long)]
        column: String,
        #[arg(long, default_value = "bracket", value_parser = parse_enum::<IqrStyle>)]
        style: IqrStyle,
        #[arg(long, default_value_t = 1)]
        decimals: usize,
    },
    /// Independence test on a contingency table.
    Contingency {
        input: PathBuf,
        /// auto, chi-square, fisher-exact or monte-carlo.
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long, default_value_t = DEFAULT_MC_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_MC_REPLICATES)]
        replicates: u64,
    },
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn stats_request(test: StatsCommand) -> anyhow::Result<StatsRequest> {
    Ok(match test {
        StatsCommand::Wilcoxon { input, mode, bonferroni } => StatsRequest::Wilcoxon { input, mode, bonferroni },
        StatsCommand::Tost { input, margin, alpha } => StatsRequest::Tost { input, margin, alpha },
        StatsCommand::Bh { input, q } => StatsRequest::Bh { input, q },
        StatsCommand::Icc { input } => StatsRequest::Icc { input },
        StatsCommand::Spearman { input, x, y } => StatsRequest::Spearman { input, x, y },
        StatsCommand::Describe {
            input,
            column,
            style,
            decimals,
        } => StatsRequest::Describe {
            input,
            column,
            style,
            decimals,
        },
        StatsCommand::Contingency {
            input,
            method,
            seed,
            replicates,
        } => {
            let method = match method.as_str() {
                "auto" => ContingencyMethod::Auto { replicates, seed },
                "chi-square" => ContingencyMethod::ChiSquare,
                "fisher-exact" => ContingencyMethod::FisherExact,
                "monte-carlo" => ContingencyMethod::MonteCarlo { replicates, seed },
                other => anyhow::bail!("unknown contingency method {other:?}"),
            };
            StatsRequest::Contingency { input, method }
        }
    })
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Ingest { corpus, out, config } => {
            let config = load_ingest_config(config.as_deref())?;
            print_json(&cmd_ingest(&IngestRequest { corpus, out, config })?)
        }
        Command::Run(a) => {
            let config: Option<DeliberationConfig> = a.config.as_deref().map(read_json).transpose()?;
            let report = cmd_run(&RunRequest {
                case: a.case,
                snapshot: a.snapshot,
                backend: a.backend,
                out: a.out,
                config,
                mode: a.mode,
                seed: a.seed,
                matrix: a.matrix,
                run_id: a.run_id,
                embedder_url: a.embedder_url,
                force: a.force,
            })?;
            print_json(&run_summary_json(&report))?;
            report.into_result().map(|_| ())
        }
        Command::Replay { run, snapshot, config } => {
            let report = cmd_replay(&ReplayRequest { run, snapshot, config })?;
            print_json(&report)?;
            if !report.summary_matches {
                anyhow::bail!("replayed summary differs from summary.json");
            }
            Ok(())
        }
        Command::Audit { verdicts, initial_e, out } => print_json(&cmd_audit(&AuditRequest {
            verdicts,
            initial_e,
            out,
        })?),
        Command::Score { scores, audit, out } => {
            let output = cmd_score(&ScoreRequest { scores, audit, out })?;
            print_json(&output.summary)
        }
        Command::Stats { test, out } => {
            let result = cmd_stats(&stats_request(test)?)?;
            match out {
                Some(path) => {
                    let mut text = serde_json::to_string_pretty(&result)?;
                    text.push('\n');
                    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
                }
                None => print_json(&result),
            }
        }
        Command::Usage { paths } => print_json(&cmd_usage(&paths)?),
        Command::Matrix => {
            println!("{}", AccessMatrix::default().to_json_pretty());
            Ok(())
        }
        Command::Serve { addr } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let (local, server) = omgs_cli::serve::bind(addr).await?;
                tracing::info!(%local, "listening");
                eprintln!("listening on http://{local}");
                server.await?;
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
