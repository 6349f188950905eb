//! `bdspell`: every pipeline stage from the shell.
//!
//! Exit codes: 0 success, 1 input error (bad flag, unreadable or
//! unparsable file), 2 invariant violation (invalid frame, threshold,
//! ruleset or dataset).

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use bdspell::alphabet::RulesetError;
use bdspell::metrics::{self, GroundTruth, Prediction};
use bdspell::session::{Session, SessionConfig};
use bdspell::simulator::{self, BenchOptions, Replay};
use bdspell::wire::{Inbound, Outbound};
use bdspell::{ConfirmConfig, ConfirmState, Composer, Planner, RuleSet, SensorProfile, Strategy};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bdspell", version, about = "Bengali fingerspelling pipeline")]
struct Cli {
    /// Ruleset JSON; the built-in Bengali ruleset when omitted.
    #[arg(long, global = true, env = "BDSPELL_RULESET")]
    ruleset: Option<PathBuf>,
    /// Confirmation threshold δ.
    #[arg(long, global = true, default_value_t = 50.0)]
    delta: f64,
    #[arg(long, global = true, value_enum, default_value_t = StrategyArg::Confidence)]
    strategy: StrategyArg,
    #[arg(long, global = true, default_value_t = 45.0)]
    fps: f64,
    /// PRNG seed; a random one is drawn and printed when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-readable JSON instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Confidence,
    Count,
    /// bench only
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Confirm and compose a JSONL frame stream; prints the final text.
    Compose {
        /// Trace file; stdin when omitted.
        input: Option<PathBuf>,
    },
    /// Print the sign sequence that spells TEXT.
    Plan { text: String },
    /// Write a simulated detection trace for TEXT.
    Simulate {
        #[arg(long)]
        text: String,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        noise: Switch,
        /// Mean true-class confidence.
        #[arg(long)]
        conf: Option<f64>,
        /// Frames each sign is held.
        #[arg(long)]
        hold: Option<u32>,
    },
    /// Stream a trace through a live session, printing its messages.
    Replay {
        input: PathBuf,
        /// Sleep so frames arrive at their recorded times.
        #[arg(long)]
        paced: bool,
    },
    /// Accuracy and latency over a threshold grid.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0, 30.0, 50.0])]
        deltas: Vec<f64>,
        /// Minimum number of signed characters.
        #[arg(long, default_value_t = 1000)]
        chars: usize,
        /// Word list, one per line; the shipped list when omitted.
        #[arg(long)]
        words: Option<PathBuf>,
    },
    /// Score detections against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// IoU thresholds; 0.50:0.95 when omitted.
        #[arg(long, value_delimiter = ',')]
        iou: Vec<f64>,
    },
    /// Run the HTTP and websocket service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

enum Failure {
    Input(anyhow::Error),
    Invariant(anyhow::Error),
}

type Outcome<T = ()> = Result<T, Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Input(e.into())
}

fn invariant(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invariant(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // downstream closed the pipe early, as `| head` does
        Err(Failure::Input(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(e)) => {
            eprintln!("invariant violation: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn run(cli: Cli) -> Outcome {
    let rules = Arc::new(load_rules(cli.ruleset.as_deref())?);
    match &cli.command {
        Command::Compose { input } => compose(&cli, rules, input.as_deref()),
        Command::Plan { text } => plan(&cli, rules, text),
        Command::Simulate { text, noise, conf, hold } => simulate(&cli, rules, text, *noise, *conf, *hold),
        Command::Replay { input, paced } => replay(&cli, rules, input, *paced),
        Command::Bench { deltas, chars, words } => bench(&cli, rules, deltas, *chars, words.as_deref()),
        Command::Eval { gt, pred, iou } => eval(&cli, gt, pred, iou),
        Command::Serve { addr } => serve(&cli, rules, *addr),
    }
}

fn load_rules(path: Option<&Path>) -> Outcome<RuleSet> {
    let Some(path) = path else {
        return Ok(RuleSet::default_bengali());
    };
    bdspell::load_ruleset(path).map_err(|e| match e {
        RulesetError::Io { .. } | RulesetError::Parse(_) => input(e),
        other => invariant(other),
    })
}

fn single_strategy(cli: &Cli) -> Outcome<Strategy> {
    match cli.strategy {
        StrategyArg::Confidence => Ok(Strategy::CumulativeConfidence),
        StrategyArg::Count => Ok(Strategy::DetectionCount),
        StrategyArg::Both => Err(input(anyhow!("--strategy both only applies to bench"))),
    }
}

fn confirm_config(cli: &Cli) -> Outcome<ConfirmConfig> {
    let config = ConfirmConfig::new(single_strategy(cli)?, cli.delta);
    config.validate().map_err(invariant)?;
    Ok(config)
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("seed: {seed}");
        seed
    })
}

fn output(cli: &Cli) -> Outcome<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(io::BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display())).map_err(input)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_out(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .context("cannot write output")
        .map_err(input)
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(input)
}

fn compose(cli: &Cli, rules: Arc<RuleSet>, path: Option<&Path>) -> Outcome {
    let reader: Box<dyn BufRead> = match path {
        Some(p) => Box::new(open(p)?),
        None => Box::new(io::stdin().lock()),
    };
    let mut state = ConfirmState::new(confirm_config(cli)?).map_err(invariant)?;
    let mut composer = Composer::new(Arc::clone(&rules));
    let mut log = Vec::new();
    for (n, frame) in Replay::new(reader).enumerate() {
        let frame = frame.map_err(input)?;
        if let Some(d) = frame.detections.iter().find(|d| !rules.contains(&d.label)) {
            return Err(invariant(anyhow!("frame {}: unknown label {:?}", n + 1, d.label)));
        }
        let confirmed = state
            .ingest_frame(&frame)
            .with_context(|| format!("frame {}", n + 1))
            .map_err(invariant)?;
        if let Some(sym) = confirmed {
            let events = composer.apply_symbol(&sym).map_err(invariant)?;
            if !cli.json {
                eprintln!(
                    "t={:.3} confirmed {} (score {:.2}, {} frames)",
                    sym.t, sym.label, sym.score, sym.frames_to_confirm
                );
                for ev in &events {
                    eprintln!("  {:?}: {} -> {:?}", ev.kind, ev.detail, ev.buffer_text);
                }
            }
            log.push(Outbound::from(&sym));
            log.extend(events.into_iter().map(Outbound::from));
        }
    }
    let text = composer.render();
    let body = if cli.json {
        let events: Vec<serde_json::Value> = log.iter().map(|m| serde_json::to_value(m).unwrap()).collect();
        format!("{}\n", serde_json::json!({ "text": text, "mode": composer.mode(), "events": events }))
    } else {
        format!("{text}\n")
    };
    write_out(&mut *output(cli)?, &body)
}

fn plan(cli: &Cli, rules: Arc<RuleSet>, text: &str) -> Outcome {
    let plan = Planner::new(rules).plan(text).map_err(input)?;
    let body = if cli.json {
        format!("{}\n", serde_json::to_string_pretty(&plan).unwrap())
    } else {
        format!("{}\n", plan.labels.join(" "))
    };
    write_out(&mut *output(cli)?, &body)
}

fn simulate(
    cli: &Cli,
    rules: Arc<RuleSet>,
    text: &str,
    noise: Switch,
    conf: Option<f64>,
    hold: Option<u32>,
) -> Outcome {
    let plan = Planner::new(Arc::clone(&rules)).plan(text).map_err(input)?;
    let mut profile = match noise {
        Switch::On => SensorProfile::default(),
        Switch::Off => SensorProfile::noiseless(),
    };
    profile.fps = cli.fps;
    profile.seed = seed(cli);
    if let Some(c) = conf {
        profile.conf_mean = c;
    }
    if let Some(h) = hold {
        profile.hold_frames = h;
    }
    let trace = simulator::simulate(&plan, &rules, &profile).map_err(invariant)?;
    let mut out = output(cli)?;
    trace
        .write_jsonl(&mut out)
        .context("cannot write trace")
        .map_err(input)
}

fn replay(cli: &Cli, rules: Arc<RuleSet>, path: &Path, paced: bool) -> Outcome {
    let config = SessionConfig {
        confirm: confirm_config(cli)?,
        ..SessionConfig::default()
    };
    let mut session = Session::new("replay", config, rules).map_err(invariant)?;
    let mut out = output(cli)?;
    let mut errors = 0;
    for frame in Replay::new(open(path)?).paced(paced) {
        let frame = frame.map_err(input)?;
        for message in session.handle(Inbound::frame(&frame)) {
            let line = match &message {
                _ if cli.json => message.to_json(),
                Outbound::Confirmed { label, score, frames, t } => {
                    format!("t={t:.3} confirmed {label} (score {score:.2}, {frames} frames)")
                }
                Outbound::ComposeEvent { kind, buffer_text, .. } => format!("  {kind:?} -> {buffer_text:?}"),
                Outbound::Error { reason } => format!("error: {reason}"),
                _ => continue,
            };
            if matches!(message, Outbound::Error { .. }) {
                errors += 1;
            }
            write_out(&mut *out, &format!("{line}\n"))?;
        }
    }
    if !cli.json {
        write_out(&mut *out, &format!("{}\n", session.buffer_text()))?;
    }
    if errors > 0 {
        return Err(invariant(anyhow!("{errors} frames rejected")));
    }
    Ok(())
}

fn bench(cli: &Cli, rules: Arc<RuleSet>, deltas: &[f64], chars: usize, words: Option<&Path>) -> Outcome {
    let words = match words {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(input)?;
            bdspell::corpus::parse_word_list(&text)
        }
        None => bdspell::corpus::shipped_words(),
    };
    let strategies = match cli.strategy {
        StrategyArg::Both => Strategy::ALL.to_vec(),
        _ => vec![single_strategy(cli)?],
    };
    for &d in deltas {
        ConfirmConfig::new(strategies[0], d).validate().map_err(invariant)?;
    }
    let mut profile = SensorProfile::default().with_seed(seed(cli));
    profile.fps = cli.fps;
    let options = BenchOptions {
        deltas: deltas.to_vec(),
        strategies,
        min_characters: chars,
    };
    let report = simulator::bench(&words, &Planner::new(rules), &profile, &options).map_err(|e| match e {
        simulator::BenchError::Plan { .. } | simulator::BenchError::EmptyCorpus => input(e),
        other => invariant(other),
    })?;
    let body = if cli.json {
        format!("{}\n", serde_json::to_string_pretty(&report).unwrap())
    } else {
        report.to_table()
    };
    write_out(&mut *output(cli)?, &body)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    serde_json::from_reader(open(path)?)
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(input)
}

fn eval(cli: &Cli, gt: &Path, pred: &Path, iou: &[f64]) -> Outcome {
    let gts: Vec<GroundTruth> = read_json(gt)?;
    let preds: Vec<Prediction> = read_json(pred)?;
    let report = metrics::evaluate(&gts, &preds, iou, &metrics::default_conf_grid()).map_err(invariant)?;
    let body = if cli.json || cli.out.is_some() {
        format!("{}\n", serde_json::to_string_pretty(&report).unwrap())
    } else {
        report.to_table()
    };
    write_out(&mut *output(cli)?, &body)
}

fn serve(cli: &Cli, rules: Arc<RuleSet>, addr: SocketAddr) -> Outcome {
    let defaults = SessionConfig {
        confirm: confirm_config(cli)?,
        ..SessionConfig::default()
    };
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let state = bdspell_service::AppState::new(rules, defaults);
    let runtime = tokio::runtime::Runtime::new().context("cannot start runtime").map_err(input)?;
    runtime
        .block_on(bdspell_service::serve(addr, state))
        .with_context(|| format!("cannot serve on {addr}"))
        .map_err(input)
}
