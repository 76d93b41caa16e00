//! `geomem` command-line driver.
//!
//! Exit status: 0 on success, 2 on configuration errors, 1 on runtime
//! errors. Diagnostics go to stderr and data to stdout.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use geomem::bench::{self, BenchSetup, Method};
use geomem::config::RunConfig;
use geomem::retrieval::point_to_frame_retrieve;
use geomem::snapshot::{load_snapshot, save_snapshot};
use geomem::stream::{FrameStream, StreamWriter};
use geomem::world::{
    generate_terrain, make_revisit_trajectory_with, render_depth_noisy, unroll_trajectory,
    HeightField, TrajectoryScript,
};
use geomem::{Pose, SpatialMemory};

#[derive(Parser)]
#[command(
    name = "geomem",
    version,
    about = "Geometry-grounded spatial memory engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured trajectory to a frame directory.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Replay a frame directory through the engine and save a snapshot.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Frame directory written by `simulate`.
        #[arg(long)]
        stream: PathBuf,
        /// Per-frame log destination; stdout when omitted.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Query a snapshot from one pose.
    Retrieve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: PathBuf,
        /// `x,y,z,pitch,yaw`
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
    },
    /// Run the efficiency benchmark and write the report CSV.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a snapshot file.
    SnapshotInfo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<geomem::Error> for Failure {
    fn from(e: geomem::Error) -> Self {
        Failure::Runtime(e.to_string())
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
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn require_out(cfg: &RunConfig, what: &str) -> CliResult<PathBuf> {
    cfg.out
        .clone()
        .ok_or_else(|| Failure::Config(format!("{what} needs --out or `out` in the config")))
}

fn terrain(cfg: &RunConfig) -> CliResult<HeightField> {
    generate_terrain(
        cfg.seed,
        cfg.terrain_extent,
        cfg.terrain_cell,
        cfg.terrain_roughness,
    )
    .map_err(|e| Failure::Config(e.to_string()))
}

fn trajectory(cfg: &RunConfig, length: usize) -> CliResult<TrajectoryScript> {
    match &cfg.trajectory {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Failure::Config(format!("cannot read trajectory {}: {e}", path.display()))
            })?;
            TrajectoryScript::parse(&text).map_err(|e| Failure::Config(e.to_string()))
        }
        None => make_revisit_trajectory_with(
            &cfg.revisit_params(),
            cfg.seed,
            length,
            cfg.trajectory_loops,
        )
        .map_err(|e| Failure::Config(e.to_string())),
    }
}

fn cmd_simulate(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let out = require_out(&cfg, "simulate")?;
    let intr = cfg
        .intrinsics()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let hf = terrain(&cfg)?;
    let script = trajectory(&cfg, cfg.trajectory_length)?;
    let noise = cfg.noise();
    let mut writer = StreamWriter::create(&out, intr)?;
    let poses = unroll_trajectory(&script);
    for (i, pose) in poses.iter().enumerate() {
        let (depth, conf) = render_depth_noisy(&hf, pose, &intr, &noise, i as u64)?;
        writer.push(i as u32, *pose, &depth, &conf)?;
    }
    let manifest = writer.finish()?;
    log::info!("wrote {} frames to {}", poses.len(), out.display());
    println!("{}", manifest.display());
    Ok(())
}

struct LogLine {
    frame: u32,
    keyframe: bool,
    coverage: f64,
    scale: f64,
    retrieved: Vec<u32>,
}

fn format_log(lines: &[LogLine]) -> String {
    let mut out = String::from("# frame keyframe coverage scale retrieved\n");
    for l in lines {
        let ids = if l.retrieved.is_empty() {
            "-".to_string()
        } else {
            l.retrieved
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            l.frame, l.keyframe as u8, l.coverage, l.scale, ids
        );
    }
    out
}

fn cmd_ingest(common: &Common, stream_dir: &Path, log_path: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(common)?;
    let out = require_out(&cfg, "ingest")?;
    let stream = FrameStream::open(stream_dir)?;
    let mut mem = SpatialMemory::new(*stream.intrinsics(), cfg.memory)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let mut lines: Vec<LogLine> = Vec::with_capacity(stream.len());
    // keyframes whose window has not been integrated yet
    let mut pending: Vec<usize> = Vec::new();
    let settle = |lines: &mut Vec<LogLine>, pending: &mut Vec<usize>, scale: f64| {
        for i in pending.drain(..) {
            lines[i].scale = scale;
        }
    };
    for (i, entry) in stream.entries().iter().enumerate() {
        let (depth, conf) = stream.load(i)?;
        let d = mem.ingest(entry.id, entry.pose, depth, conf)?;
        if d.is_keyframe {
            pending.push(lines.len());
        }
        lines.push(LogLine {
            frame: d.frame_id,
            keyframe: d.is_keyframe,
            coverage: d.coverage,
            scale: d.scale,
            retrieved: d.retrieval.frames.clone(),
        });
        if let Some(report) = &d.integration {
            settle(&mut lines, &mut pending, report.scale);
        }
    }
    if let Some(report) = mem.flush()? {
        settle(&mut lines, &mut pending, report.scale);
    }
    let store = mem.store();
    save_snapshot(store.geometry(), store.frames(), &out)?;
    log::info!(
        "{} frames, {} keyframes, {} points -> {}",
        store.frame_count(),
        store.keyframe_count(),
        store.geometry().len(),
        out.display()
    );
    let text = format_log(&lines);
    match log_path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_pose(text: &str) -> CliResult<Pose> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bad --pose `{text}`: {e}")))?;
    if v.len() != 5 {
        return Err(Failure::Config(
            "--pose needs five values: x,y,z,pitch,yaw".into(),
        ));
    }
    Pose::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| Failure::Config(e.to_string()))
}

fn cmd_retrieve(common: &Common, snapshot: &Path, pose: &str) -> CliResult<()> {
    let cfg = load_config(common)?;
    let pose = parse_pose(pose)?;
    let intr = cfg
        .intrinsics()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let (geo, _) = load_snapshot(snapshot)?;
    let result = point_to_frame_retrieve(&pose, &geo, &intr, &cfg.memory.retrieval_params());
    let mut out = String::from("frame votes\n");
    for (f, v) in result.frames.iter().zip(&result.votes) {
        let _ = writeln!(out, "{f} {v}");
    }
    let _ = writeln!(out, "elapsed_us {}", result.elapsed_us);
    print!("{out}");
    Ok(())
}

fn cmd_bench(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let intr = cfg
        .intrinsics()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let methods: Vec<Method> = cfg
        .bench_methods
        .iter()
        .map(|m| Method::from_name(m))
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(e.to_string()))?;
    let hf = terrain(&cfg)?;
    let script = trajectory(&cfg, cfg.bench_frames)?;
    let mut setup = BenchSetup::new(&hf, intr);
    setup.memory = cfg.memory;
    setup.noise = cfg.noise();
    setup.warmup = cfg.bench_warmup;
    setup.replicas = cfg.bench_replicas;
    let report = bench::run_efficiency_bench(
        &script,
        cfg.bench_frames,
        &methods,
        cfg.bench_bucket,
        &setup,
    )?;
    match &cfg.out {
        Some(path) => {
            bench::emit_report(&report, path)?;
            bench::emit_sidecars(&report, &cfg.to_string(), path)?;
            log::info!("report written to {}", path.display());
        }
        None => print!("{}", bench::report_csv(&report)),
    }
    Ok(())
}

fn cmd_snapshot_info(common: &Common, snapshot: &Path) -> CliResult<()> {
    load_config(common)?;
    let (geo, frames) = load_snapshot(snapshot)?;
    let keyframes = frames.iter().filter(|f| f.is_keyframe).count();
    println!("frames {}", frames.len());
    println!("keyframes {keyframes}");
    println!("points {}", geo.len());
    println!("cells {}", geo.cells().len());
    println!("max_cell_occupancy {}", geo.max_cell_occupancy());
    println!("voxel_size {}", geo.voxel_size());
    println!("max_per_voxel {}", geo.max_per_voxel());
    println!("merge_radius {}", geo.merge_radius());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common } => cmd_simulate(common),
        Command::Ingest {
            common,
            stream,
            log,
        } => cmd_ingest(common, stream, log.as_deref()),
        Command::Retrieve {
            common,
            snapshot,
            pose,
        } => cmd_retrieve(common, snapshot, pose),
        Command::Bench { common } => cmd_bench(common),
        Command::SnapshotInfo { common, snapshot } => cmd_snapshot_info(common, snapshot),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("geomem: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("geomem: {msg}");
            ExitCode::from(1)
        }
    }
}
