//! `alpsim`: run recipes on the virtual ALP reactor, plot the results, serve
//! the experiment API and poke at the alien market.
//!
//! Exit codes: 0 ok, 2 bad arguments, 3 I/O, 4 malformed input (recipe,
//! config or table), 5 validation, 6 solver failure, 7 time budget.

mod plot;
mod tables;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use alp_core::config::{reference_config, ReferenceRun};
use alp_core::market::{
    corpus_stats, market_query, parse_wordlist, score_hypothesis, LetterHypothesis, MarketRule, WORDLIST_URL,
};
use alp_core::recipe::total_duration;
use alp_core::telemetry::{build_narrative, fields_to_tsv, format_duration, trace_to_tsv};
use alp_core::transport::RunOptions;
use alp_core::{load_config, parse_recipe, ConfigError, Reactor, ReactorConfig, ReactorState, RecipeError};
use alp_service::{ExperimentService, ServiceError, ServiceOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Malformed(String),
    #[error("recipe: {0}")]
    Recipe(#[from] RecipeError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("{0}")]
    Budget(String),
    #[error("plot: {0}")]
    Plot(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Plot(_) => 3,
            CliError::Malformed(_) | CliError::Recipe(_) | CliError::Config(ConfigError::Schema(_)) => 4,
            CliError::Config(_) | CliError::Validation(_) => 5,
            CliError::Solver(_) => 6,
            CliError::Budget(_) => 7,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Parse(e) => CliError::Recipe(e),
            ServiceError::Validation(_) => CliError::Validation(e.to_string()),
            ServiceError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            ServiceError::UnknownSession(_)
            | ServiceError::UnknownExperiment { .. }
            | ServiceError::UnknownConfig(_)
            | ServiceError::BadRequest(_) => CliError::Usage(e.to_string()),
            ServiceError::Io(_) => CliError::Io(e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Parser, Debug)]
#[command(name = "alpsim", version, about = "Virtual atomic layer processing reactor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a recipe file offline and write trace, narrative, fields and state.
    Run(RunArgs),
    /// Draw the eight-panel figure from a trace (and optional field snapshots).
    Plot(PlotArgs),
    /// Serve the experiment API.
    Serve(ServeArgs),
    /// Check or export reactor configurations.
    #[command(subcommand)]
    Config(ConfigCommand),
    /// Alien market rule, corpus statistics and scoring.
    #[command(subcommand)]
    Market(MarketCommand),
    /// Print the experiment timeline and behaviour tags of a stored session.
    Timeline(TimelineArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Reference config id (run1, run2) or path to a config file.
    #[arg(long, default_value = "run2")]
    config: String,
    /// Recipe file (tab- or space-separated).
    #[arg(long)]
    recipe: PathBuf,
    /// Reactor state to start from; updated after the run. Starts fresh if absent.
    #[arg(long)]
    state: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seconds between full-field snapshots; 0 disables them.
    #[arg(long, default_value_t = 1.0)]
    snapshot_interval: f64,
    /// Refuse recipes longer than this many seconds.
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// trace.tsv written by `run`.
    #[arg(long)]
    trace: PathBuf,
    /// fields.tsv written by `run`; without it only the sensor panels are drawn.
    #[arg(long)]
    fields: Option<PathBuf>,
    /// SVG file to write.
    #[arg(long, default_value = "figure.svg")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Configs sessions may use (ids or paths); the first is the default.
    #[arg(long = "config", default_values_t = ["run2".to_string(), "run1".to_string()])]
    configs: Vec<String>,
    #[arg(long, env = "ALP_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, env = "ALP_DATA_DIR", default_value = "alp-data")]
    data_dir: PathBuf,
    /// Reactor seconds granted to each new session.
    #[arg(long, default_value_t = alp_service::DEFAULT_BUDGET)]
    budget: f64,
    /// Seconds between stored field snapshots; 0 disables them.
    #[arg(long, default_value_t = 1.0)]
    snapshot_interval: f64,
}

#[derive(Subcommand, Debug)]
enum ConfigCommand {
    /// Parse and check a config file.
    Validate { path: PathBuf },
    /// Print a built-in reference config (run1 or run2).
    ExportReference {
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum MarketCommand {
    /// Would the market sell this item?
    Query {
        item: String,
        /// Forbidden letters.
        #[arg(long, default_value = "mp")]
        letters: String,
    },
    /// Rejection and letter frequencies over a word list.
    Stats {
        path: PathBuf,
        #[arg(long, default_value = "mp")]
        letters: String,
    },
    /// Score a claimed set of forbidden letters.
    Score {
        #[arg(long)]
        claim: String,
        #[arg(long, default_value = "mp")]
        letters: String,
    },
    /// Download the 10k English word list.
    Fetch {
        #[arg(long, default_value = "wordlist.10000")]
        out: PathBuf,
        #[arg(long, default_value = WORDLIST_URL)]
        url: String,
    },
}

#[derive(Args, Debug)]
struct TimelineArgs {
    #[arg(long)]
    session: String,
    #[arg(long, env = "ALP_DATA_DIR", default_value = "alp-data")]
    data_dir: PathBuf,
    /// Extra config files the session may have been opened on.
    #[arg(long = "config")]
    configs: Vec<String>,
}

fn reference_id(id: &str) -> Option<ReferenceRun> {
    match id {
        "run1" => Some(ReferenceRun::Run1),
        "run2" => Some(ReferenceRun::Run2),
        _ => None,
    }
}

/// Resolve a config argument to (id, config): a reference id or a file.
fn resolve_config(arg: &str) -> Result<(String, ReactorConfig), CliError> {
    if let Some(run) = reference_id(arg) {
        return Ok((arg.to_string(), reference_config(run)));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Usage(format!("config '{arg}' is neither run1, run2 nor an existing file")));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    Ok((id, load_config(&read(path)?)?))
}

fn rule(letters: &str) -> Result<MarketRule, CliError> {
    MarketRule::from_letters(letters).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(args: RunArgs) -> Result<(), CliError> {
    if !args.recipe.exists() {
        return Err(CliError::Usage(format!("recipe file {} not found", args.recipe.display())));
    }
    let (_, config) = resolve_config(&args.config)?;
    let reactor = Reactor::new(config);
    let recipe = parse_recipe(&read(&args.recipe)?)?;
    let duration = total_duration(&recipe);
    if let Some(budget) = args.budget {
        if duration > budget {
            return Err(CliError::Budget(format!(
                "recipe needs {} s but the budget is {} s",
                format_duration(duration),
                format_duration(budget)
            )));
        }
    }

    let state_path = args.state.clone().unwrap_or_else(|| args.out.join("state.json"));
    let mut state: ReactorState = match &args.state {
        Some(p) if p.exists() => serde_json::from_str(&read(p)?)
            .map_err(|e| CliError::Malformed(format!("state {}: {e}", p.display())))?,
        _ => reactor.initial_state(),
    };
    let n = reactor.sections();
    if state.concentrations.len() != reactor.config().chemicals.len()
        || state.coverages.len() != reactor.config().surfaces.len()
        || state.concentrations.iter().chain(&state.coverages).any(|v| v.len() != n)
    {
        return Err(CliError::Validation("state file does not match the reactor configuration".into()));
    }

    let opts = RunOptions {
        snapshot_interval: (args.snapshot_interval > 0.0).then_some(args.snapshot_interval),
        ..Default::default()
    };
    let before = state.clone();
    let result = reactor
        .run_recipe(&mut state, &recipe, &opts)
        .map_err(|report| CliError::Validation(format!("recipe violates reactor limits: {}", report.hard.join("; "))))?;
    let failure = result.failure.as_ref().map(|e| e.to_string());
    if failure.is_some() {
        state = before;
        state.time += result.elapsed;
    }

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let narrative = build_narrative(&result.trace, reactor.config(), &result.report, failure.as_deref());
    write(&args.out.join("trace.tsv"), &trace_to_tsv(&result.trace))?;
    write(&args.out.join("narrative.txt"), &narrative.text())?;
    if !result.snapshots.is_empty() {
        write(&args.out.join("fields.tsv"), &fields_to_tsv(&result.snapshots, reactor.config()))?;
    }
    let state_json = serde_json::to_string(&state).map_err(|e| CliError::Io(e.to_string()))?;
    write(&state_path, &state_json)?;

    for line in &narrative.header {
        println!("{line}");
    }
    let mut summary = format!(
        "Reactor time: {} s this run, clock at {} s",
        format_duration(result.elapsed),
        format_duration(state.time)
    );
    if let Some(budget) = args.budget {
        summary.push_str(&format!(", {} s of {} s budget left", format_duration(budget - result.elapsed), format_duration(budget)));
    }
    println!("{summary}.");
    println!("{} samples written to {}", result.trace.len(), args.out.join("trace.tsv").display());
    match failure {
        Some(f) => Err(CliError::Solver(f)),
        None => Ok(()),
    }
}

fn plot_cmd(args: PlotArgs) -> Result<(), CliError> {
    let trace = tables::TraceTable::parse(&read(&args.trace)?)?;
    let fields = match &args.fields {
        Some(p) => Some(tables::parse_fields(&read(p)?)?),
        None => None,
    };
    for w in plot::render(&trace, fields.as_ref(), &args.out)? {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let mut opts = ServiceOptions::with_reference_configs(&args.data_dir);
    let mut default = None;
    for arg in &args.configs {
        let (id, cfg) = resolve_config(arg)?;
        default.get_or_insert_with(|| id.clone());
        opts.configs.insert(id, cfg);
    }
    if let Some(d) = default {
        opts.default_config = d;
    }
    opts.default_budget = args.budget;
    opts.snapshot_interval = (args.snapshot_interval > 0.0).then_some(args.snapshot_interval);
    let service = Arc::new(ExperimentService::open(opts)?);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Io(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        println!("listening on http://{local} (data in {})", args.data_dir.display());
        alp_service::serve_on(service, listener)
            .await
            .map_err(|e| CliError::Io(e.to_string()))
    })
}

fn config_cmd(cmd: ConfigCommand) -> Result<(), CliError> {
    match cmd {
        ConfigCommand::Validate { path } => {
            let cfg = load_config(&read(&path)?)?;
            println!(
                "ok: {} chemicals, {} surfaces, {} reactions, {} sections",
                cfg.chemicals.len(),
                cfg.surfaces.len(),
                cfg.reactions.len(),
                cfg.geometry.sections
            );
        }
        ConfigCommand::ExportReference { id, out } => {
            let run = reference_id(&id).ok_or_else(|| CliError::Usage(format!("unknown reference '{id}'")))?;
            match out {
                Some(p) => write(&p, run.document())?,
                None => print!("{}", run.document()),
            }
        }
    }
    Ok(())
}

fn market_cmd(cmd: MarketCommand) -> Result<(), CliError> {
    match cmd {
        MarketCommand::Query { item, letters } => {
            let accepted = market_query(&item, &rule(&letters)?);
            println!("{}", if accepted { "accepted" } else { "rejected" });
        }
        MarketCommand::Stats { path, letters } => {
            let rule = rule(&letters)?;
            let words = parse_wordlist(&read(&path)?);
            let stats = corpus_stats(&words, &rule).map_err(|e| CliError::Malformed(e.to_string()))?;
            println!("words\t{}", stats.words);
            println!("p_reject\t{:.4}", stats.p_reject);
            println!("independent_estimate\t{:.4}", stats.independent_estimate);
            for c in rule.forbidden() {
                println!("P({c})\t{:.4}", stats.letter[c]);
            }
        }
        MarketCommand::Score { claim, letters } => {
            let h = LetterHypothesis::from_letters(&claim).map_err(|e| CliError::Usage(e.to_string()))?;
            println!("{}", score_hypothesis(&h, &rule(&letters)?));
        }
        MarketCommand::Fetch { out, url } => {
            let body = reqwest::blocking::get(&url)
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.text())
                .map_err(|e| CliError::Io(format!("{url}: {e}")))?;
            let words = parse_wordlist(&body);
            if words.is_empty() {
                return Err(CliError::Malformed(format!("{url}: no words")));
            }
            write(&out, &body)?;
            println!("{} words saved to {}", words.len(), out.display());
        }
    }
    Ok(())
}

fn timeline(args: TimelineArgs) -> Result<(), CliError> {
    let mut opts = ServiceOptions::with_reference_configs(&args.data_dir);
    for arg in &args.configs {
        let (id, cfg) = resolve_config(arg)?;
        opts.configs.insert(id, cfg);
    }
    let service = ExperimentService::open(opts)?;
    print!("{}", service.timeline(&args.session)?.text());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Plot(a) => plot_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Config(c) => config_cmd(c),
        Command::Market(c) => market_cmd(c),
        Command::Timeline(a) => timeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alpsim: {e}");
            ExitCode::from(e.code())
        }
    }
}
