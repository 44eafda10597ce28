use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inkmark::cohorts::SchemeKind;
use inkmark::features::RegistryProfile;
use inkmark::io::write_atomic;
use inkmark::pipeline::{self, RunConfig};
use inkmark::selection::{FeatureOrder, LeakMode};
use inkmark::synth::SynthConfig;
use inkmark::{Error, Result};

/// Handwriting-kinematics Parkinson's screening pipeline.
#[derive(Debug, Parser)]
#[command(name = "inkmark", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic cohort (recordings + manifest.txt).
    Synth {
        /// reference-cohort, sex-effect or null.
        #[arg(long, default_value = "reference-cohort")]
        preset: String,
        /// JSON synth config; overrides --preset.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manifest → features.tsv.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// features.tsv → mw_results.tsv, pass_counts.tsv, filtered.tsv.
    Filter(RunArgs),
    /// filtered.tsv → ranking.tsv, capacity.tsv.
    Rank(RunArgs),
    /// filtered.tsv + ranking.tsv → model.json.
    Train(RunArgs),
    /// features.tsv → cohort_report.json.
    Evaluate(RunArgs),
    /// cohort_report.json → comparison.tsv, bars.tsv, curves.tsv.
    Report(RunArgs),
    /// Every stage from extract to report in one process.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Artifact directory (inputs are read from and outputs written to it).
    #[arg(long)]
    out: PathBuf,
    /// Task number(s) 1..7 (comma separated) or `all`.
    #[arg(long, default_value = "all", value_parser = parse_tasks)]
    task: Tasks,
    #[arg(long, default_value = "combined")]
    scheme: SchemeKind,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "descending")]
    order: FeatureOrder,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Train:test ratio such as `80:20`, or a train fraction.
    #[arg(long, default_value = "80:20", value_parser = parse_split)]
    split: f64,
    #[arg(long, default_value = "paper")]
    leak_mode: LeakMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature registry: full or compact.
    #[arg(long, default_value = "full")]
    profile: RegistryProfile,
    /// Keep only the k lowest-p filtered features.
    #[arg(long)]
    rank_limit: Option<usize>,
    /// Longest forward-accumulation prefix.
    #[arg(long)]
    curve_limit: Option<usize>,
    #[arg(long, default_value_t = 65)]
    age_threshold: u32,
    /// Skip the companion curve under the other feature order.
    #[arg(long)]
    single_order: bool,
}

#[derive(Debug, Clone)]
struct Tasks(Vec<u8>);

fn parse_tasks(s: &str) -> std::result::Result<Tasks, String> {
    if s == "all" {
        return Ok(Tasks(Vec::new()));
    }
    let mut tasks = s
        .split(',')
        .map(|t| match t.trim().parse::<u8>() {
            Ok(v @ 1..=7) => Ok(v),
            _ => Err(format!("task `{t}` is not in 1..7")),
        })
        .collect::<std::result::Result<Vec<u8>, String>>()?;
    tasks.sort_unstable();
    tasks.dedup();
    Ok(Tasks(tasks))
}

fn parse_split(s: &str) -> std::result::Result<f64, String> {
    let frac = match s.split_once(':') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad split `{s}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad split `{s}`"))?;
            a / (a + b)
        }
        None => s.parse().map_err(|_| format!("bad split `{s}`"))?,
    };
    if frac > 0.0 && frac < 1.0 {
        Ok(frac)
    } else {
        Err(format!("split `{s}` must leave both sides nonempty"))
    }
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            tasks: self.task.0.clone(),
            scheme: self.scheme,
            age_threshold: self.age_threshold,
            alpha: self.alpha,
            order: self.order,
            folds: self.folds,
            repetitions: self.reps,
            train_fraction: self.split,
            leak_mode: self.leak_mode,
            seed: self.seed,
            profile: self.profile,
            rank_limit: self.rank_limit,
            curve_limit: self.curve_limit,
            compare_orders: !self.single_order,
            ..RunConfig::default()
        }
    }
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Extract { .. } => "extract",
            Command::Filter(_) => "filter",
            Command::Rank(_) => "rank",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Report(_) => "report",
            Command::Run { .. } => "run",
        }
    }

    fn out_dir(&self) -> &Path {
        match self {
            Command::Synth { out, .. } => out,
            Command::Extract { run, .. } | Command::Run { run, .. } => &run.out,
            Command::Filter(r) | Command::Rank(r) | Command::Train(r) | Command::Evaluate(r) | Command::Report(r) => &r.out,
        }
    }
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth {
            preset,
            config,
            seed,
            out,
        } => {
            let cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    serde_json::from_str(&text)?
                }
                None => SynthConfig::preset(preset, *seed)?,
            };
            let manifest = pipeline::synth_stage(&cfg, out)?;
            println!("{}", manifest.display());
        }
        Command::Extract { manifest, run } => {
            let m = pipeline::extract_stage(manifest, &run.config(), &run.out)?;
            log::info!("{} subjects × {} features", m.nrows(), m.ncols());
        }
        Command::Filter(r) => {
            let m = pipeline::filter_stage(&r.config(), &r.out)?;
            log::info!("{} features kept", m.ncols());
        }
        Command::Rank(r) => {
            pipeline::rank_stage(&r.config(), &r.out)?;
        }
        Command::Train(r) => pipeline::train_stage(&r.config(), &r.out)?,
        Command::Evaluate(r) => {
            pipeline::evaluate_stage(&r.config(), &r.out)?;
        }
        Command::Report(r) => pipeline::report_stage(&r.config(), &r.out)?,
        Command::Run { manifest, run } => {
            pipeline::run_all(manifest, &run.config(), &run.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = pipeline::error_record(cli.command.stage(), &e);
            eprint!("{record}");
            if let Err(w) = write_atomic(&cli.command.out_dir().join("error.json"), record.as_bytes()) {
                log::error!("could not write error record: {w}");
            }
            ExitCode::FAILURE
        }
    }
}
