use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use toolplan_core::competition::{Competition, CompetitionError};
use toolplan_core::harness::{
    prepare, run_trials, write_report, BenchmarkReport, CompetitionReport, HarnessError, PolicyChoice, TrialSettings,
};
use toolplan_core::llm::LlmConfig;
use toolplan_core::search::{Algorithm, SearchConfig};
use toolplan_core::stage::StageId;
use toolplan_core::trajlog::{render_log, validate_log, ClockKind};
use toolplan_core::Registry;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(name = "toolplan", version, about = "Tree-search planners that build ML pipelines from tool calls")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Scripted,
    Llm,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials of one planner on one or more competitions.
    Run {
        /// Competition name; repeat for several.
        #[arg(long = "competition", short = 'c', required = true)]
        competitions: Vec<String>,
        #[arg(long, short = 'a', default_value = "hierarchical")]
        algorithm: String,
        #[arg(long, value_enum, default_value = "scripted")]
        policy: PolicyKind,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Seed of the first trial; trial i uses seed + i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise rate of the scripted policy.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Expose the full tool catalog at every subtask (hierarchical only).
        #[arg(long)]
        no_masking: bool,
        /// TOML file with [search] and [llm] sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Directory holding downloaded competition files.
        #[arg(long, default_value = "competition_data")]
        data_dir: PathBuf,
        /// Directory with extra competition configs.
        #[arg(long)]
        competitions_dir: Option<PathBuf>,
        /// Stamp log records with wall-clock time instead of a logical clock.
        #[arg(long)]
        wall_clock: bool,
    },
    /// List the tool catalog.
    Tools {
        /// Only tools tagged with this stage.
        #[arg(long)]
        stage: Option<String>,
    },
    /// Validate and print a trajectory log.
    Replay { log: PathBuf },
    /// Print the table of one or more saved JSON reports.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    search: SearchConfig,
    llm: LlmConfig,
    epsilon: f64,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_DATA, message: message.into() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Failure {
        let code = match &e {
            HarnessError::Competition(
                CompetitionError::Unknown(_)
                | CompetitionError::Config(_)
                | CompetitionError::SourceMissing(_)
                | CompetitionError::LeaderboardMissing(_),
            ) => EXIT_USAGE,
            HarnessError::Competition(_) => EXIT_DATA,
            HarnessError::Search(toolplan_core::search::SearchError::InvalidConfig(_)) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Print to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            competitions,
            algorithm,
            policy,
            trials,
            seed,
            epsilon,
            no_masking,
            config,
            out,
            data_dir,
            competitions_dir,
            wall_clock,
        } => {
            let algorithm: Algorithm = algorithm.parse().map_err(|e: toolplan_core::search::SearchError| {
                Failure::usage(format!("{e}; expected one of react, lats, mcts-outcome, mcts-shaped, hierarchical"))
            })?;
            if no_masking && algorithm != Algorithm::Hierarchical {
                return Err(Failure::usage("--no-masking only applies to the hierarchical planner"));
            }
            if trials == 0 {
                return Err(Failure::usage("--trials must be at least 1"));
            }
            let cfg = match &config {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
                    toml::from_str::<RunConfig>(&text).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?
                }
                None => RunConfig::default(),
            };
            let epsilon = epsilon.unwrap_or(cfg.epsilon);
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Failure::usage("--epsilon must be within [0, 1]"));
            }
            let mut search = cfg.search;
            search.masking = !no_masking;
            let settings = TrialSettings {
                algorithm,
                policy: match policy {
                    PolicyKind::Scripted => PolicyChoice::Scripted { epsilon },
                    PolicyKind::Llm => PolicyChoice::Llm(cfg.llm),
                },
                search,
                trials,
                base_seed: seed,
                out_dir: out.clone(),
                data_dir,
                clock: if wall_clock { ClockKind::Wall } else { ClockKind::Logical },
            };
            run(&competitions, competitions_dir.as_deref(), &settings)
        }
        Command::Tools { stage } => tools(stage.as_deref()),
        Command::Replay { log } => replay(&log),
        Command::Report { reports } => report(&reports),
    }
}

fn run(names: &[String], competitions_dir: Option<&Path>, settings: &TrialSettings) -> Result<(), Failure> {
    let registry = Registry::with_catalog().map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    // Resolve everything up front so a typo fails before any trial runs.
    let found = names
        .iter()
        .map(|n| Competition::find(n, competitions_dir))
        .collect::<Result<Vec<_>, _>>()
        .map_err(HarnessError::from)?;
    let mut report = BenchmarkReport::default();
    for competition in found {
        let prepared = prepare(competition, &settings.out_dir, &settings.data_dir)?;
        log::info!("{}: {} train rows, {} test rows", prepared.competition.spec.name, prepared.data.train_rows, prepared.data.test_rows);
        let row = run_trials(&prepared, &registry, settings)?;
        report.rows.push(row);
    }
    let stem = if names.len() == 1 {
        format!("{}_{}", names[0], settings.algorithm)
    } else {
        format!("benchmark_{}", settings.algorithm)
    };
    let (json, _) = write_report(&report, &settings.out_dir, &stem)?;
    emit(&format!("{}report written to {}\n", report.render_text(), json.display()));
    Ok(())
}

fn tools(stage: Option<&str>) -> Result<(), Failure> {
    let stage = stage
        .map(|s| {
            s.parse::<StageId>().map_err(|e| {
                let keys: Vec<&str> = StageId::ALL.iter().map(|s| s.key()).collect();
                Failure::usage(format!("{e}; expected one of {}", keys.join(", ")))
            })
        })
        .transpose()?;
    let registry = Registry::with_catalog().map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?;
    let view = match stage {
        Some(s) => registry.mask(s).map_err(|e| Failure { code: EXIT_RUNTIME, message: e.to_string() })?,
        None => registry.full(),
    };
    let mut out = format!("{:<34} {:<9} {:<40} summary\n", "name", "wrapper", "stages");
    for d in view.exposed() {
        let stages: Vec<&str> = d.stages.iter().map(|s| s.key()).collect();
        let first = d.docstring.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or(&d.summary);
        let _ = writeln!(out, "{:<34} {:<9} {:<40} {}", d.name, d.wrapper.as_str(), stages.join(","), first);
    }
    emit(&out);
    Ok(())
}

fn replay(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let log: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{} is not valid JSON: {e}", path.display())))?;
    let warnings = validate_log(&log).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    emit(&render_log(&log));
    Ok(())
}

fn report(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut merged = BenchmarkReport::default();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::data(format!("{} is not valid JSON: {e}", p.display())))?;
        if value.get("rows").is_some() {
            let r: BenchmarkReport =
                serde_json::from_value(value).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
            merged.rows.extend(r.rows);
        } else {
            let r: CompetitionReport =
                serde_json::from_value(value).map_err(|e| Failure::data(format!("{}: {e}", p.display())))?;
            merged.rows.push(r);
        }
    }
    emit(&merged.render_text());
    Ok(())
}
