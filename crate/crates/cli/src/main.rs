//! `aav`: serve live sessions, replay and summarize logs, render snapshots
//! and generate synthetic scanpaths.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aav_core::grid2d::GridConfig;
use aav_core::model::{normalize, ModelParams, Source};
use aav_core::revis::svg::{border_svg, contour_svg, heatmap_svg};
use aav_core::revis::{border_marginal, contours, heatmap, Axis, BorderStyle, Colormap};
use aav_core::scanpath::{simulate, Hotspot, ScanpathSpec, TargetDistribution};
use aav_core::session::{self, Replayer, SessionLog, SessionMaps, LOG_EXTENSION, SNAPSHOT_EXTENSION};
use aav_core::Snapshot;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "aav", version, about = "Attention-aware visualization tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the websocket session server.
    Serve(ServeArgs),
    /// Replay a session log and write its final snapshot.
    Replay(ReplayArgs),
    /// Render a grid snapshot to SVG.
    Render(RenderArgs),
    /// Generate a synthetic scanpath session log.
    Simulate(SimulateArgs),
    /// Print coverage and dwell statistics for a session log.
    Stats(StatsArgs),
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "AAV_PORT", default_value_t = aav_server::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Tick length in ms for every session, overriding clients.
    #[arg(long, env = "AAV_TICK_MS", value_parser = clap::value_parser!(u64).range(1..))]
    tick_ms: Option<u64>,
    /// Directory for session logs and final snapshots.
    #[arg(long, env = "AAV_LOG_DIR")]
    log_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Stop at this session time instead of the last event.
    #[arg(long)]
    until: Option<u64>,
    /// Snapshot path; defaults to the log path with a snapshot extension.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderStyle {
    Heatmap,
    Contour,
    Border,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Cumulative,
    ShortTerm,
}

#[derive(Clone, Copy, ValueEnum)]
enum BorderArg {
    Bar,
    Area,
    LinearHeatmap,
}

#[derive(Args)]
struct RenderArgs {
    snapshot: PathBuf,
    #[arg(long, value_enum)]
    style: RenderStyle,
    /// Output SVG; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cumulative")]
    stat: StatArg,
    /// Contour levels on the normalized map.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    levels: Vec<f64>,
    #[arg(long, default_value = "viridis", value_parser = ["viridis", "greys", "heat"])]
    colormap: String,
    #[arg(long, value_enum, default_value = "bar")]
    border_style: BorderArg,
    /// Background image reference placed under the glaze.
    #[arg(long)]
    background: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON scanpath spec; replaces the fixation flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    fixations: usize,
    #[arg(long, default_value_t = 300.0)]
    mean_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    sd_ms: f64,
    /// Hotspot `x,y,radius,weight`; repeatable. Uniform targets when absent.
    #[arg(long, value_parser = parse_hotspot)]
    hotspot: Vec<Hotspot>,
    #[arg(long, default_value_t = 640.0)]
    width: f64,
    #[arg(long, default_value_t = 480.0)]
    height: f64,
    #[arg(long, default_value_t = 32.0)]
    cell: f64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    tick_ms: u64,
    /// Output log; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    log: PathBuf,
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_hotspot(s: &str) -> Result<Hotspot, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, radius, weight] => Ok(Hotspot { x, y, radius, weight }),
        _ => Err("expected x,y,radius,weight".into()),
    }
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_log(path: &Path) -> Result<SessionLog> {
    SessionLog::load(path).with_context(|| format!("reading {}", path.display()))
}

fn default_snapshot_path(log: &Path) -> PathBuf {
    let name = log
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(&format!(".{LOG_EXTENSION}"))
        .or_else(|| name.rsplit_once('.').map(|(s, _)| s))
        .unwrap_or(&name)
        .to_string();
    log.with_file_name(format!("{stem}.{SNAPSHOT_EXTENSION}"))
}

fn serve(args: ServeArgs) -> Result<()> {
    let config = aav_server::ServerConfig {
        tick_ms: args.tick_ms,
        log_dir: args.log_dir,
        ..aav_server::ServerConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let server = aav_server::Server::new(config);
        let addr = SocketAddr::new(args.host, args.port);
        let (ready_tx, ready_rx) = tokio::sync::oneshot::channel();
        let task = tokio::spawn(aav_server::bind_and_serve(addr, server, Some(ready_tx)));
        if let Ok(local) = ready_rx.await {
            out!("listening on {local}");
        }
        task.await?
            .with_context(|| format!("serving on {addr}"))
    })
}

fn replay(args: ReplayArgs) -> Result<()> {
    let log = load_log(&args.log)?;
    let mut replayer = Replayer::new(&log)
        .with_context(|| format!("replaying {}", args.log.display()))?
        .collect_frames();
    match args.until {
        Some(t) => replayer.advance_to(t),
        None => replayer.run_to_end(),
    }
    .with_context(|| format!("replaying {}", args.log.display()))?;
    let out = replayer.finish();
    let path = args.out.unwrap_or_else(|| default_snapshot_path(&args.log));
    out.snapshot
        .save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    let s = &out.snapshot;
    out!("snapshot: {}", path.display());
    out!("time_ms: {}", s.t_ms);
    out!("ticks: {}", s.tick);
    out!("frames: {}", out.frames.len());
    out!("coverage: {:.2}%", s.maps.coverage() * 100.0);
    out!(
        "samples: {} accepted, {} dropped",
        s.counters.samples_accepted, s.counters.samples_dropped
    );
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let snap = Snapshot::load(&args.snapshot)
        .with_context(|| format!("reading {}", args.snapshot.display()))?;
    let SessionMaps::Grid { grid } = &snap.maps else {
        bail!("only grid snapshots can be rendered");
    };
    let config: GridConfig = *grid.config();
    let raw = match args.stat {
        StatArg::Cumulative => grid.fused_cumulative(),
        StatArg::ShortTerm => grid.fused_short_term(),
    };
    let colormap = Colormap::by_name(&args.colormap).ok_or_else(|| anyhow!("unknown colormap"))?;
    let href = args.background.as_deref();
    let svg = match args.style {
        RenderStyle::Heatmap => heatmap_svg(&config, &heatmap(&raw, &colormap), href),
        RenderStyle::Contour => {
            if args.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
                bail!("contour levels must lie strictly between 0 and 1");
            }
            let rings = contours(
                &normalize(&raw),
                config.cols(),
                config.rows(),
                &args.levels,
                config.cell_px,
            );
            contour_svg(&config, &rings, &colormap, href)
        }
        RenderStyle::Border => {
            let style = match args.border_style {
                BorderArg::Bar => BorderStyle::Bar,
                BorderArg::Area => BorderStyle::Area,
                BorderArg::LinearHeatmap => BorderStyle::LinearHeatmap,
            };
            let x = border_marginal(&raw, config.cols(), config.rows(), Axis::X, style);
            let y = border_marginal(&raw, config.cols(), config.rows(), Axis::Y, style);
            border_svg(&config, &x, &y, &colormap, href)
        }
    };
    write_output(args.out.as_deref(), &svg)
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ScanpathSpec>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => ScanpathSpec {
            seed: args.seed,
            fixation_count: args.fixations,
            duration_mean_ms: args.mean_ms,
            duration_sd_ms: args.sd_ms,
            targets: if args.hotspot.is_empty() {
                TargetDistribution::Uniform
            } else {
                TargetDistribution::Hotspots {
                    hotspots: args.hotspot.clone(),
                }
            },
            source: Source::Gaze,
            radius_px: None,
        },
    };
    let grid = GridConfig::new(args.width, args.height, args.cell)?;
    let params = ModelParams {
        tick_ms: args.tick_ms,
        ..ModelParams::default()
    };
    let log = simulate(&spec, grid, params)?;
    let mut buf = Vec::new();
    log.write_to(&mut buf)?;
    write_output(args.out.as_deref(), std::str::from_utf8(&buf)?)
}

fn stats_cmd(args: StatsArgs) -> Result<()> {
    let log = load_log(&args.log)?;
    let out = session::replay(&log, None)
        .with_context(|| format!("replaying {}", args.log.display()))?;
    let s = session::stats(&out.snapshot, args.top);
    if args.json {
        out!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(());
    }
    let touched = (s.coverage * s.targets as f64).round() as usize;
    out!(
        "coverage: {:.2}% ({touched}/{} targets)",
        s.coverage * 100.0,
        s.targets
    );
    out!("total attention: {:.3} s", s.total_attention_s);
    out!("ticks: {} ({} ms)", s.ticks, s.duration_ms);
    out!(
        "samples: {} accepted, {} dropped",
        s.samples_accepted, s.samples_dropped
    );
    out!("top {}:", s.top.len());
    for (i, (label, secs)) in s.top.iter().enumerate() {
        out!("  {:>2}. {label:<16} {secs:.3} s", i + 1);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if matches!(cli.command, Command::Serve(_)) {
        tracing_subscriber::fmt()
            .with_env_filter(
                tracing_subscriber::EnvFilter::try_from_default_env()
                    .unwrap_or_else(|_| "info".into()),
            )
            .with_writer(std::io::stderr)
            .init();
    }
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay(a),
        Command::Render(a) => render(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Stats(a) => stats_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed pipe downstream (`aav stats ... | head`) is not an error.
        Err(e)
            if e
                .downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
