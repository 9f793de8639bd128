use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arbiter_core::env::{GridMap, BUNDLED_MAPS};
use arbiter_core::harness::metrics::export_metrics;
use arbiter_core::harness::{accuracy_sweep, run_experiment, value_iteration, ExperimentResult, RunConfig, Session};
use arbiter_core::qlearn::{Checkpoint, Learner};
use arbiter_core::Error;
use arbiter_service::{serve, ControlCommand, ServiceError, ServiceOptions};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "arbiter", version, about = "Q-learning with an exploration/exploitation/advice arbiter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Base seed (same as `--set run.seed=N`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics, summaries and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train `run.sessions` independent sessions.
    Train {
        #[command(flatten)]
        common: Common,
        /// Sessions run concurrently (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Greedy return of a saved learner.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train once per oracle accuracy with shared seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])]
        accuracies: Vec<f64>,
    },
    /// Host a live session over WebSocket.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: String,
        /// Start training immediately instead of waiting for a client.
        #[arg(long)]
        start: bool,
    },
    /// List bundled maps, or validate map files.
    Maps { files: Vec<PathBuf> },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::MalformedMap(_) | Error::NoPath | Error::MissingStartOrGoal(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Core(e) => e.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate(&cfg.load_map()?)?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> CliResult<Option<&Path>> {
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir)?;
    }
    Ok(common.out.as_deref())
}

fn write_experiment(dir: &Path, prefix: &str, result: &ExperimentResult) -> CliResult<()> {
    export_metrics(&result.sessions, dir.join(format!("{prefix}metrics.csv")))?;
    for (i, s) in result.sessions.iter().enumerate() {
        if let Some(ckpt) = &s.checkpoint {
            ckpt.save(dir.join(format!("{prefix}session-{i:03}.ckpt")))?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value).unwrap() + "\n")?;
    Ok(())
}

fn train(common: &Common, jobs: Option<usize>) -> CliResult<Value> {
    let cfg = load_config(common)?;
    let result = run_experiment(&cfg, cfg.sessions, jobs)?;
    let summary = json!({
        "map": cfg.map,
        "mode": cfg.mode().as_str(),
        "seed": cfg.seed,
        "total_episodes": cfg.total_episodes,
        "summary": result.summary(),
    });
    if let Some(dir) = out_dir(common)? {
        write_experiment(dir, "", &result)?;
        fs::write(dir.join("config.cfg"), cfg.to_text())?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn sweep(common: &Common, jobs: Option<usize>, accuracies: &[f64]) -> CliResult<Value> {
    let cfg = load_config(common)?;
    if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Failure::Config(format!("accuracy {a} is not in [0, 1]")));
    }
    let results = accuracy_sweep(&cfg, accuracies, cfg.sessions, jobs)?;
    let dir = out_dir(common)?;
    let mut rows = Vec::new();
    for (acc, result) in &results {
        if let Some(dir) = dir {
            write_experiment(dir, &format!("acc-{acc:.2}-"), result)?;
        }
        rows.push(json!({ "accuracy": acc, "summary": result.summary() }));
    }
    let summary = json!({
        "map": cfg.map,
        "mode": cfg.mode().as_str(),
        "seed": cfg.seed,
        "sweep": rows,
    });
    if let Some(dir) = dir {
        fs::write(dir.join("config.cfg"), cfg.to_text())?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(summary)
}

fn eval(common: &Common, checkpoint: &Path) -> CliResult<Value> {
    let cfg = load_config(common)?;
    let map = cfg.load_map()?;
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| Failure::Config(e.to_string()))?;
    let learner = Learner::from_checkpoint(ckpt, &cfg.learner, &map)?;
    let mut session = Session::new(&cfg, cfg.seed)?;
    session.set_learner(learner);
    let eval_return = session.evaluate()?;
    Ok(json!({
        "map": map.name(),
        "eval_return": eval_return,
        "optimal_return": session.optimal_return(),
        "optimal": eval_return == session.optimal_return(),
    }))
}

fn serve_cmd(common: &Common, bind: &str, start: bool) -> CliResult<Value> {
    let cfg = load_config(common)?;
    let mut opts = ServiceOptions::new(bind);
    if let Some(dir) = out_dir(common)? {
        opts.metrics_path = Some(dir.join("metrics.csv"));
        opts.checkpoint_path = Some(dir.join("live.ckpt"));
    }
    let handle = serve(cfg, opts)?;
    eprintln!("listening on ws://{}", handle.local_addr());
    if start {
        handle.command(ControlCommand::Resume);
    }
    let session = handle.wait()?;
    Ok(json!({ "episodes": session.records().len() }))
}

fn describe(map: &GridMap) -> CliResult<Value> {
    let defaults = RunConfig::default();
    let solution = value_iteration(map, defaults.learner.gamma, &defaults.rewards)?;
    Ok(json!({
        "name": map.name(),
        "width": map.width(),
        "height": map.height(),
        "shortest_path": map.shortest_path_len(),
        "optimal_return": solution.optimal_return,
    }))
}

fn maps(files: &[PathBuf]) -> CliResult<Value> {
    let mut out = Vec::new();
    if files.is_empty() {
        for name in BUNDLED_MAPS {
            out.push(describe(&GridMap::bundled(name).expect("bundled map"))?);
        }
    }
    for path in files {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let name = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        let map = GridMap::parse(name, &text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        out.push(describe(&map)?);
    }
    Ok(Value::Array(out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Train { common, jobs } => train(common, *jobs),
        Command::Eval { common, checkpoint } => eval(common, checkpoint),
        Command::Sweep { common, jobs, accuracies } => sweep(common, *jobs, accuracies),
        Command::Serve { common, bind, start } => serve_cmd(common, bind, *start),
        Command::Maps { files } => maps(files),
    };
    match result {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
