use clap::{Args, Parser, Subcommand};
use phasta_service::config::{self, ConfigError, Model};
use phasta_service::figures;
use phasta_service::presets::{self, HANDOVER, THREE_CYCLE};
use phasta_service::server;
use phasta_service::session::{run_batch, RunError, RunSummary, Session};
use phasta_service::trace::{TraceRecord, TraceWriter};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "phasta", version, about = "Phase-state machine: batch runs, figure presets and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted config override, e.g. `modulation.epsilon=1e-6`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VAL")]
    overrides: Vec<String>,
    /// Trace file, or output directory for `reproduce`.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Noise seed; same as `--override modulation.seed=N`.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a config headless and write an NDJSON trace.
    Simulate(Common),
    /// Serve live sessions over WebSocket.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "HOST:PORT", default_value = "127.0.0.1:8765")]
        bind: String,
    },
    /// Regenerate the data behind one of the built-in figures.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(["fig1", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"]))]
        figure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run the handover scenario with its scripted cues.
    Handover(Common),
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Run(RunError),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(RunError::Io(e))
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(RunError::Sim(_)) => 3,
            _ => 1,
        }
    }

    fn report(&self) {
        match self {
            Failure::Config(ConfigError::Schema { field, detail, line }) if *line > 0 => {
                eprintln!("config error at line {line}: {field}: {detail}")
            }
            Failure::Config(e) => eprintln!("config error: {e}"),
            Failure::Run(RunError::Sim(e)) => eprintln!("numerical divergence: {e}"),
            Failure::Run(e) => eprintln!("error: {e}"),
            Failure::Other(e) => eprintln!("error: {e}"),
        }
    }
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut v = self.overrides.clone();
        if let Some(seed) = self.seed {
            v.push(format!("modulation.seed={seed}"));
        }
        v
    }

    fn model(&self, fallback: &str) -> Result<Model, ConfigError> {
        match &self.config {
            Some(path) => config::load(path, &self.overrides()),
            None => config::parse(fallback, &self.overrides()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PHASTA_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Simulate(c) => simulate(&c, THREE_CYCLE),
        Cmd::Handover(c) => handover(&c),
        Cmd::Reproduce { figure, common } => reproduce(&figure, &common),
        Cmd::Serve { common, bind } => serve(&common, &bind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            f.report();
            ExitCode::from(f.exit_code())
        }
    }
}

/// Runs `model` into `out`, or stdout when no path is given.
fn write_run(model: &Arc<Model>, out: Option<&Path>) -> Result<RunSummary, Failure> {
    let sink: Box<dyn Write> = match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(File::create(p)?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut writer = TraceWriter::new(BufWriter::new(sink));
    let summary = run_batch(model, model.seed, |r| writer.write(r))?;
    writer.finish()?.flush()?;
    if let Some(p) = out {
        log::info!("{} records over {:.3} s -> {}", summary.records, summary.t_end, p.display());
    }
    Ok(summary)
}

fn visited_names(model: &Model, visited: &[usize]) -> String {
    visited.iter().map(|&i| model.names[i].as_str()).collect::<Vec<_>>().join(" -> ")
}

fn simulate(c: &Common, fallback: &str) -> Result<(), Failure> {
    let model = Arc::new(c.model(fallback)?);
    let out = c.out.clone().or_else(|| model.output.clone());
    let summary = write_run(&model, out.as_deref())?;
    eprintln!("visited: {}", visited_names(&model, &summary.visited));
    Ok(())
}

fn handover(c: &Common) -> Result<(), Failure> {
    let model = Arc::new(c.model(HANDOVER)?);
    if model.handover.is_none() {
        return Err(Failure::Config(ConfigError::Invalid {
            field: "scenario.handover".into(),
            detail: "the handover command needs a handover scenario".into(),
        }));
    }
    let out = c.out.clone().or_else(|| model.output.clone());
    let summary = write_run(&model, out.as_deref())?;
    println!("visited: {}", visited_names(&model, &summary.visited));
    Ok(())
}

fn reproduce(figure: &str, c: &Common) -> Result<(), Failure> {
    if c.config.is_some() {
        return Err(Failure::Other("reproduce uses built-in configs; pass changes with --override".into()));
    }
    let preset = presets::find(figure).ok_or_else(|| Failure::Other(format!("unknown figure `{figure}`")))?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    println!("{}: {}", preset.name, preset.summary);
    for (suffix, model) in preset.models(&c.overrides())? {
        let model = Arc::new(model);
        let file = if suffix.is_empty() { format!("{figure}.ndjson") } else { format!("{figure}_{suffix}.ndjson") };
        let path = dir.join(file);
        let mut records = Vec::new();
        let mut writer = TraceWriter::new(BufWriter::new(File::create(&path)?));
        run_batch(&model, model.seed, |r| {
            records.push(r.clone());
            writer.write(r)
        })?;
        writer.finish()?.flush()?;
        let label = if suffix.is_empty() { String::new() } else { format!("[{suffix}] ") };
        println!("  {label}{} -> {}", summarize(figure, &model, &records), path.display());
    }
    Ok(())
}

fn summarize(figure: &str, model: &Model, records: &[TraceRecord]) -> String {
    let seq = figures::dominant_sequence(records);
    let names = visited_names(model, &seq);
    match figure {
        "fig3" => {
            let peaks: Vec<String> =
                figures::pulses(records).iter().filter(|p| p.complete).map(|p| format!("{:.3}", p.peak)).collect();
            format!("complete pulse peaks [{}]", peaks.join(", "))
        }
        "fig5" => {
            let t = |f: &str, to: &str| {
                let (f, to) = (model.index_of(f).unwrap_or(0), model.index_of(to).unwrap_or(0));
                figures::traversal_time(records, f, to, 0.25, 0.75)
            };
            match (t("s1", "s2"), t("s2", "s3"), t("s3", "s1")) {
                (Some(a), Some(b), Some(c)) => {
                    format!("phase 0.25 -> 0.75 times {a:.3} / {b:.3} / {c:.3} s, ratios {:.1}, {:.1}", a / b, b / c)
                }
                _ => format!("incomplete traversals; dominant {names}"),
            }
        }
        "fig4" => match figures::decision_time(records, 0, 1, 2) {
            Some((w, t)) => format!("decided for {} at {t:.3} s", model.names[w]),
            None => format!("undecided; dominant {names}"),
        },
        _ => match figures::final_state(records) {
            Some((s, a)) => format!("dominant {names}; final {} at {a:.3}", model.names[s]),
            None => String::from("empty trace"),
        },
    }
}

fn serve(c: &Common, bind: &str) -> Result<(), Failure> {
    let model = Arc::new(c.model(HANDOVER)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        log::info!("serving {} states on ws://{}", model.n(), listener.local_addr()?);
        let session = Session::new(model.clone(), model.seed).map_err(RunError::Sim)?;
        server::run(listener, session, async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await;
        Ok(())
    })
}
