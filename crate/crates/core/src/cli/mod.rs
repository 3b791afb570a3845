//! Command-line interface.

pub mod bot;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::argumentation::ArgumentSet;
use crate::culture::{parse_culture, validate_culture, ContextSampler, Culture, Level};
use crate::dialogue::{play_dialogue, render_moves, MoveStrategy, Player};
use crate::explanation::{generate_explanation, partition_moves, render_hint, ExplanationKind};
use crate::game::{verify_replay, Mode, SessionConfig};
use crate::server::{serve, ServerConfig};
use bot::{run_bot, BotKind, BotRun};

#[derive(Debug, Parser)]
#[command(name = "deconflict", version, about = "Right-of-way deconfliction with argumentation-based explanations")]
pub struct Cli {
    /// Log filter, e.g. `info` or `deconflict=debug`.
    #[arg(long, global = true, env = "DECONFLICT_LOG", default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that cultures are decisive and strategy-invariant.
    Validate(ValidateArgs),
    /// Play sessions with a scripted human.
    Run(RunArgs),
    /// Verify a replay log by re-simulating it.
    Replay(ReplayArgs),
    /// Play one dispute and explain its outcome.
    Explain(ExplainArgs),
    /// Serve the HTTP and websocket API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Easy,
    Medium,
    Hard,
    All,
}

impl LevelArg {
    fn levels(self) -> Vec<Level> {
        match self {
            LevelArg::Easy => vec![Level::Easy],
            LevelArg::Medium => vec![Level::Medium],
            LevelArg::Hard => vec![Level::Hard],
            LevelArg::All => Level::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Culture file to validate; the built-ins when omitted.
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all", conflicts_with = "file")]
    pub level: LevelArg,
    /// Sample this many pairs even when enumeration is feasible.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub level: LevelArg,
    #[arg(long, default_value = "N")]
    pub mode: Mode,
    /// First seed; sessions use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "optimal")]
    pub bot: BotKind,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    /// Simulated time between steps.
    #[arg(long, default_value_t = 2_000)]
    pub step_ms: u64,
    /// Write one JSON summary per session to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write each session's replay log into this directory.
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub file: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Plain,
    Contrastive,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long, value_enum, default_value = "easy")]
    pub level: LevelArg,
    /// Culture file to use instead of a built-in.
    #[arg(long)]
    pub culture: Option<PathBuf>,
    /// Proponent context, e.g. `rank=2,tasked=yes`.
    #[arg(long = "self")]
    pub self_ctx: String,
    /// Opponent context.
    #[arg(long)]
    pub other: String,
    #[arg(long, value_enum, default_value = "contrastive")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 2)]
    pub reasons: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "DECONFLICT_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, env = "DECONFLICT_REPLAY_DIR")]
    pub replay_dir: Option<PathBuf>,
    /// Seconds of inactivity before a session is dropped.
    #[arg(long, env = "DECONFLICT_IDLE_SECS", default_value_t = 1800)]
    pub idle_secs: u64,
    #[arg(long, env = "DECONFLICT_MAX_SESSIONS", default_value_t = 1024)]
    pub max_sessions: usize,
}

type CliResult = Result<ExitCode, String>;

pub fn run(cli: Cli) -> ExitCode {
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::Run(a) => run_sessions(a),
        Command::Replay(a) => replay(a),
        Command::Explain(a) => explain(a),
        Command::Serve(a) => serve_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn read(path: &PathBuf) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn validate(args: ValidateArgs) -> CliResult {
    let cultures = match &args.file {
        Some(path) => vec![parse_culture(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?],
        None => args.level.levels().into_iter().map(Culture::builtin).collect(),
    };
    let sampler = match args.samples {
        Some(n) => ContextSampler::sampled(n, args.seed),
        None => ContextSampler { seed: args.seed, ..Default::default() },
    };
    let mut ok = true;
    for culture in &cultures {
        let report = validate_culture(culture, &sampler);
        ok &= report.passed();
        if args.json {
            println!("{}", serde_json::to_string(&report).map_err(|e| e.to_string())?);
            continue;
        }
        println!(
            "{}: {} rules, {} properties, {} pairs ({}): decisive={} strategy_invariant={} -> {}",
            report.culture,
            culture.rule_count(),
            culture.property_count(),
            report.pairs_checked,
            if report.exhaustive { "exhaustive" } else { "sampled" },
            report.decisive,
            report.strategy_invariant,
            if report.passed() { "PASS" } else { "FAIL" }
        );
        for c in &report.counterexamples {
            println!("  {:?}: {} vs {}: {}", c.defect, c.first, c.second, c.detail);
        }
        for w in &report.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run_sessions(args: RunArgs) -> CliResult {
    let jobs: Vec<(Level, u64)> = args
        .level
        .levels()
        .into_iter()
        .flat_map(|l| (0..args.count).map(move |k| (l, args.seed.wrapping_add(k))))
        .collect();
    if let Some(dir) = &args.replay_dir {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let results: Vec<Result<BotRun, String>> = jobs
        .par_iter()
        .map(|&(level, seed)| {
            let (session, run) = run_bot(SessionConfig::new(level, args.mode, seed), args.bot, args.step_ms)
                .map_err(|e| format!("{level} seed {seed}: {e}"))?;
            if let Some(dir) = &args.replay_dir {
                let path = dir.join(format!("{level}-{}-{seed}-{}.jsonl", args.mode, args.bot));
                fs::write(&path, session.replay_log()).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(run)
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut out = match &args.out {
        Some(p) => Some(fs::File::create(p).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    println!(
        "{:<7} {:<4} {:>20} {:<8} {:>6} {:>6} {:>10} {:>10} {:>8}",
        "level", "mode", "seed", "bot", "steps", "fuel", "collisions", "sim_ms", "finished"
    );
    for r in &runs {
        println!(
            "{:<7} {:<4} {:>20} {:<8} {:>6} {:>6} {:>10} {:>10} {:>8}",
            r.level.as_str(),
            r.mode.to_string(),
            r.seed,
            r.bot.to_string(),
            r.steps,
            r.fuel,
            r.collisions,
            r.sim_ms,
            r.finished
        );
        if let Some(f) = out.as_mut() {
            let line = serde_json::to_string(r).map_err(|e| e.to_string())?;
            writeln!(f, "{line}").map_err(|e| e.to_string())?;
        }
    }
    for level in args.level.levels() {
        let mine: Vec<_> = runs.iter().filter(|r| r.level == level).collect();
        if mine.is_empty() {
            continue;
        }
        let n = mine.len() as f64;
        println!(
            "{level}: sessions={} mean_fuel={:.2} mean_steps={:.2} collisions={} finished={}",
            mine.len(),
            mine.iter().map(|r| r.fuel as f64).sum::<f64>() / n,
            mine.iter().map(|r| r.steps as f64).sum::<f64>() / n,
            mine.iter().map(|r| r.collisions).sum::<u64>(),
            mine.iter().filter(|r| r.finished).count()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(args: ReplayArgs) -> CliResult {
    let text = read(&args.file)?;
    match verify_replay(&text) {
        Ok(s) => {
            println!(
                "ok: steps={} t={} fuel={} collisions={} finished={}",
                s.steps, s.t, s.fuel, s.collisions, s.finished
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("invalid: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn explain(args: ExplainArgs) -> CliResult {
    let culture = match &args.culture {
        Some(path) => parse_culture(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
        None => match args.level {
            LevelArg::All => return Err("pick one level".into()),
            l => Culture::builtin(l.levels()[0]),
        },
    };
    let schema = culture.schema();
    let p = schema.parse_context(&args.self_ctx).map_err(|e| format!("--self: {e}"))?;
    let o = schema.parse_context(&args.other).map_err(|e| format!("--other: {e}"))?;
    let motion = ArgumentSet::singleton(culture.default_motion());
    let result =
        play_dialogue(&culture, motion, &p, &o, MoveStrategy::optimal(args.seed)).map_err(|e| e.to_string())?;
    let kind = match args.kind {
        KindArg::Plain => ExplanationKind::Plain,
        KindArg::Contrastive => ExplanationKind::Contrastive,
    };
    let explanation = generate_explanation(&result, kind, args.reasons).map_err(|e| e.to_string())?;
    let af = culture.framework();
    println!("dialogue: {}", render_moves(af, &result.dialogue.moves));
    println!("winner: {}", result.winner);
    let partition = partition_moves(&result).map_err(|e| e.to_string())?;
    let pick = |idx: &[usize]| render_moves(af, &idx.iter().map(|&i| result.dialogue.moves[i]).collect::<Vec<_>>());
    println!("W: {}", pick(&partition.winning));
    println!("L: {}", pick(&partition.losing));
    let chosen: Vec<usize> = explanation.moves.iter().map(|m| m.index).collect();
    println!("explanation ({} reasons): {}", explanation.reasons(), pick(&chosen));
    if explanation.fallback {
        println!("note: the loser never moved, so the explanation is plain");
    }
    println!("self:  {}", render_hint(&explanation, &culture, Player::Proponent, "the other party"));
    println!("other: {}", render_hint(&explanation, &culture, Player::Opponent, "the other party"));
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(args: ServeArgs) -> CliResult {
    let config = ServerConfig {
        addr: args.addr,
        replay_dir: args.replay_dir,
        idle_timeout: Duration::from_secs(args.idle_secs),
        max_sessions: args.max_sessions,
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(serve(config)).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}
