//! `roadtrace` command line: synthesize data, trace or grid-extract road
//! graphs, refine them, score them and serve review sessions.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use roadtrace_core::baseline::{density_grid, extract_graph};
use roadtrace_core::eval::geo_precision_recall;
use roadtrace_core::geo::{LonLat, Xy};
use roadtrace_core::graph::RoadGraph;
use roadtrace_core::graph_io::{read_graph, write_graph};
use roadtrace_core::refine::refine_geometry;
use roadtrace_core::synth::{make_ground_truth, simulate_trips, GraphKind};
use roadtrace_core::traj::{clean, parse_trajectories, parse_trajectories_with, write_trajectories, CleanConfig, TrajectorySet};
use roadtrace_core::traj_index::TrajIndex;
use roadtrace_core::tracer::{detect_seeds, trace, GpsOracle};
use roadtrace_edit::server::{serve, AppState};

use config::PipelineConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "roadtrace", version, about, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic ground-truth graph and noisy trips over it.
    Synth(SynthArgs),
    /// Infer a road graph from trajectories by iterative tracing.
    Trace(TraceArgs),
    /// Infer a road graph with the grid-density baseline.
    Baseline(BaselineArgs),
    /// Snap junctions, smooth and simplify a graph.
    Refine(RefineArgs),
    /// Score an inferred graph against ground truth.
    Eval(EvalArgs),
    /// Run the review service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with optional synth/clean/trace/baseline/refine/eval/serve sections.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Grid,
    Straight,
    TwoCrossing,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out_graph: PathBuf,
    #[arg(long)]
    out_trips: PathBuf,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    n_blocks: Option<usize>,
    #[arg(long)]
    block_m: Option<f64>,
    #[arg(long)]
    length_m: Option<f64>,
    #[arg(long)]
    trips: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    bias: Option<f64>,
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV (`traj_id,timestamp,lon,lat`).
    #[arg(long)]
    input: PathBuf,
    /// Existing map to extend.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Starting point as `LON,LAT`; repeatable.
    #[arg(long = "seed-at", value_parser = parse_lonlat, allow_hyphen_values = true)]
    seed_at: Vec<LonLat>,
    /// Seeds to detect when neither a base map nor --seed-at is given.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long)]
    no_clean: bool,
    #[arg(long)]
    step_d: Option<f64>,
    #[arg(long)]
    r_match: Option<f64>,
    #[arg(long)]
    r_hist: Option<f64>,
    #[arg(long)]
    conf_threshold: Option<f64>,
    #[arg(long)]
    merge_radius: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    no_clean: bool,
    #[arg(long)]
    cell_size: Option<f64>,
    #[arg(long)]
    threshold: Option<u32>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    junction_snap: Option<f64>,
    #[arg(long)]
    simplify_tol: Option<f64>,
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long)]
    min_component_len: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    inferred: PathBuf,
    truth: PathBuf,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d_match: Option<f64>,
    #[arg(long)]
    sample_spacing: Option<f64>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    host: Option<String>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    merge_radius: Option<f64>,
}

fn parse_lonlat(s: &str) -> Result<LonLat, String> {
    let (lon, lat) = s.split_once(',').ok_or("expected LON,LAT")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    LonLat::new(num(lon)?, num(lat)?).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_graph(path: &Path) -> Result<RoadGraph, CliError> {
    read_graph(&read_text(path)?).map_err(|e| CliError::io(path, e))
}

/// Rounds every non-integer number to 7 decimals so reports print stably.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            json!((x * 1e7).round() / 1e7)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_floats).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

fn write_report(path: Option<&Path>, report: Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&round_floats(report)).unwrap();
    text.push('\n');
    match path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_trajectories(path: &Path, base: Option<&RoadGraph>, clean_cfg: Option<&CleanConfig>) -> Result<TrajectorySet, CliError> {
    let text = read_text(path)?;
    let mut set = match base {
        Some(b) => TrajectorySet {
            projection: *b.projection(),
            trajectories: parse_trajectories_with(&text, *b.projection()).map_err(|e| CliError::io(path, e))?,
        },
        None => parse_trajectories(&text).map_err(|e| CliError::io(path, e))?,
    };
    if let Some(cfg) = clean_cfg {
        set.trajectories = clean(&set.trajectories, cfg);
    }
    Ok(set)
}

fn run_synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(a.common.config.as_deref())?.synth;
    let file_len = match cfg.graph_kind {
        GraphKind::Straight { length_m } | GraphKind::TwoCrossingNoConnection { length_m } => Some(length_m),
        GraphKind::Grid { .. } => None,
    };
    let file_grid = match cfg.graph_kind {
        GraphKind::Grid { n_blocks, block_m } => (n_blocks, block_m),
        _ => (4, 100.0),
    };
    let kind = a.kind.unwrap_or(match cfg.graph_kind {
        GraphKind::Grid { .. } => Kind::Grid,
        GraphKind::Straight { .. } => Kind::Straight,
        GraphKind::TwoCrossingNoConnection { .. } => Kind::TwoCrossing,
    });
    let grid_flags = a.n_blocks.is_some() || a.block_m.is_some();
    cfg.graph_kind = match kind {
        Kind::Grid if a.length_m.is_some() => {
            return Err(CliError::Usage("--length-m does not apply to grid".into()))
        }
        Kind::Straight | Kind::TwoCrossing if grid_flags => {
            return Err(CliError::Usage("--n-blocks/--block-m only apply to grid".into()))
        }
        Kind::Grid => GraphKind::Grid {
            n_blocks: a.n_blocks.unwrap_or(file_grid.0),
            block_m: a.block_m.unwrap_or(file_grid.1),
        },
        Kind::Straight => GraphKind::Straight {
            length_m: a.length_m.or(file_len).unwrap_or(500.0),
        },
        Kind::TwoCrossing => GraphKind::TwoCrossingNoConnection {
            length_m: a.length_m.or(file_len).unwrap_or(1000.0),
        },
    };
    set(&mut cfg.n_trips, a.trips);
    set(&mut cfg.noise_sigma, a.sigma);
    set(&mut cfg.bias_radius, a.bias);
    set(&mut cfg.rng_seed, a.rng_seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let truth = make_ground_truth(cfg.graph_kind, cfg.projection());
    let trips = simulate_trips(&truth, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    write_text(&a.out_graph, &write_graph(&truth))?;
    write_text(&a.out_trips, &write_trajectories(&trips, &cfg.projection()))?;
    log::info!("wrote {} trips over {} edges", trips.len(), truth.edge_count());
    Ok(())
}

fn run_trace(a: TraceArgs) -> Result<(), CliError> {
    let file = PipelineConfig::load(a.common.config.as_deref())?;
    let mut cfg = file.trace.clone();
    set(&mut cfg.step_d, a.step_d);
    set(&mut cfg.r_match, a.r_match);
    set(&mut cfg.r_hist, a.r_hist);
    set(&mut cfg.conf_threshold, a.conf_threshold);
    set(&mut cfg.merge_radius, a.merge_radius);
    set(&mut cfg.max_iterations, a.max_iterations);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let base = a.base.as_deref().map(load_graph).transpose()?;
    let trajs = load_trajectories(&a.input, base.as_ref(), (!a.no_clean).then_some(&file.clean))?;
    let base = base.unwrap_or_else(|| RoadGraph::new(trajs.projection));
    let started = Instant::now();
    let index = TrajIndex::build(trajs.trajectories, cfg.r_hist).map_err(|e| CliError::Usage(e.to_string()))?;
    let seeds: Vec<Xy> = if !a.seed_at.is_empty() {
        a.seed_at
            .iter()
            .map(|&ll| base.projection().project(ll).expect("validated coordinate"))
            .collect()
    } else if base.vertex_count() == 0 {
        detect_seeds(&index, &cfg, a.seeds)
    } else {
        Vec::new()
    };
    let oracle = GpsOracle::new(&index, &cfg);
    let result = trace(&base, &seeds, &oracle, &cfg);
    let wall = started.elapsed().as_secs_f64();
    write_text(&a.out, &write_graph(&result.graph))?;
    write_report(
        a.report.as_deref(),
        json!({
            "iterations": result.iterations,
            "edges_added": result.edges_added,
            "stop_reason": result.stop_reason,
            "seeds": seeds.len(),
            "vertices": result.graph.vertex_count(),
            "edges": result.graph.edge_count(),
            "wall_time_s": wall,
        }),
    )?;
    if result.truncated() {
        log::warn!("output is partial: max_iterations reached");
    }
    Ok(())
}

fn run_baseline(a: BaselineArgs) -> Result<(), CliError> {
    let file = PipelineConfig::load(a.common.config.as_deref())?;
    let mut cfg = file.baseline;
    set(&mut cfg.cell_size, a.cell_size);
    set(&mut cfg.threshold, a.threshold);
    let trajs = load_trajectories(&a.input, None, (!a.no_clean).then_some(&file.clean))?;
    let started = Instant::now();
    let grid = density_grid(&trajs.trajectories, cfg.cell_size).map_err(|e| CliError::Usage(e.to_string()))?;
    let g = extract_graph(&grid, cfg.threshold, trajs.projection);
    let wall = started.elapsed().as_secs_f64();
    write_text(&a.out, &write_graph(&g))?;
    write_report(
        a.report.as_deref(),
        json!({
            "occupied_cells": grid.nonzero().filter(|&(_, n)| n >= cfg.threshold).count(),
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "wall_time_s": wall,
        }),
    )
}

fn run_refine(a: RefineArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(a.common.config.as_deref())?.refine;
    set(&mut cfg.junction_snap, a.junction_snap);
    set(&mut cfg.simplify_tol, a.simplify_tol);
    set(&mut cfg.smooth_window, a.smooth_window);
    set(&mut cfg.min_component_len, a.min_component_len);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let g = load_graph(&a.input)?;
    write_text(&a.out, &write_graph(&refine_geometry(&g, &cfg)))
}

fn run_eval(a: EvalArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(a.common.config.as_deref())?.eval;
    set(&mut cfg.d_match, a.d_match);
    set(&mut cfg.sample_spacing, a.sample_spacing);
    if !(cfg.d_match > 0.0 && cfg.sample_spacing > 0.0) {
        return Err(CliError::Usage("d_match and sample_spacing must be positive".into()));
    }
    let truth = load_graph(&a.truth)?;
    let inferred = load_graph(&a.inferred)?.reprojected(*truth.projection());
    let report = geo_precision_recall(&inferred, &truth, &cfg);
    write_report(a.out.as_deref(), serde_json::to_value(report).unwrap())
}

fn run_serve(a: ServeArgs) -> Result<(), CliError> {
    let mut cfg = PipelineConfig::load(a.common.config.as_deref())?.serve;
    set(&mut cfg.host, a.host);
    set(&mut cfg.port, a.port);
    cfg.data_dir = a.data_dir.or(cfg.data_dir);
    set(&mut cfg.merge_radius, a.merge_radius);
    let addr: SocketAddr = format!("{}:{}", cfg.host, cfg.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let app = AppState::new(cfg.merge_radius, cfg.data_dir).map_err(|e| match e {
        roadtrace_edit::EditError::InvalidConfig(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Data(format!("{addr}: {e}")))?;
        log::info!("listening on http://{addr}");
        serve(listener, Arc::new(app))
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}

/// Runs one command line and returns the process exit code: 0 on success,
/// 1 on usage errors, 2 on data or I/O errors.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => run_synth(a),
        Command::Trace(a) => run_trace(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Refine(a) => run_refine(a),
        Command::Eval(a) => run_eval(a),
        Command::Serve(a) => run_serve(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("roadtrace: {e}");
            e.exit_code()
        }
    }
}
