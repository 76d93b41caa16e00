//! Throughput and memory-growth benchmark of the geometric memory against
//! the store-everything pose baseline, reported per frame bucket.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::clock::Stopwatch;
use crate::engine::{MemoryConfig, SpatialMemory};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Intrinsics, Pose};
use crate::retrieval::{pose_baseline_retrieve, PoseEntry};
use crate::world::{
    render_depth_noisy, unroll_trajectory, HeightField, NoiseModel, TrajectoryScript,
};

pub const DEFAULT_BUCKET: usize = 1000;
pub const DEFAULT_WARMUP: usize = 32;
pub const REPORT_HEADER: &str = "method,range_start,range_end,qps,mem_increment,mem_total";
pub const COMPONENTS_HEADER: &str = "method,range_start,range_end,ingest_us,retrieve_us";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Geometric,
    PoseBaseline,
}

impl Method {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "geometric" => Ok(Method::Geometric),
            "pose_baseline" => Ok(Method::PoseBaseline),
            other => Err(invalid(format!("unknown bench method `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Geometric => "geometric",
            Method::PoseBaseline => "pose_baseline",
        }
    }
}

/// One (method, bucket) row. `range_end` is inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub range_start: usize,
    pub range_end: usize,
    pub qps: f64,
    pub mem_increment: u64,
    pub mem_total: u64,
}

/// Mean per-frame time split into memory update and retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentRow {
    pub method: String,
    pub range_start: usize,
    pub range_end: usize,
    pub ingest_us: f64,
    pub retrieve_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub components: Vec<ComponentRow>,
    pub machine: String,
    pub config_hash: String,
}

impl BenchReport {
    pub fn rows_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a BenchRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn components_for<'a>(
        &'a self,
        method: &'a str,
    ) -> impl Iterator<Item = &'a ComponentRow> + 'a {
        self.components.iter().filter(move |r| r.method == method)
    }
}

/// Everything except the trajectory that shapes a run.
#[derive(Debug, Clone)]
pub struct BenchSetup<'a> {
    pub terrain: &'a HeightField,
    pub intrinsics: Intrinsics,
    pub memory: MemoryConfig,
    pub noise: NoiseModel,
    /// Leading frames processed but left out of the first bucket's timing.
    pub warmup: usize,
    /// Independent copies run on separate threads; timings are averaged.
    pub replicas: usize,
}

impl<'a> BenchSetup<'a> {
    pub fn new(terrain: &'a HeightField, intrinsics: Intrinsics) -> Self {
        Self {
            terrain,
            intrinsics,
            memory: MemoryConfig::default(),
            noise: NoiseModel::NONE,
            warmup: DEFAULT_WARMUP,
            replicas: 1,
        }
    }
}

pub fn machine_descriptor() -> String {
    let threads = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "{}-{} threads={threads}",
        std::env::consts::ARCH,
        std::env::consts::OS
    )
}

#[derive(Debug, Clone, Default)]
struct Bucket {
    timed: usize,
    ingest_us: f64,
    retrieve_us: f64,
    added: u64,
}

/// Per-method accumulator over one pass of the trajectory.
enum Runner {
    Geometric(Box<SpatialMemory>),
    Baseline(Vec<PoseEntry>),
}

impl Runner {
    fn step(
        &mut self,
        id: u32,
        pose: Pose,
        frame: Option<&(crate::raster::DepthMap, crate::raster::ConfidenceMap)>,
        intr: &Intrinsics,
        k: usize,
    ) -> Result<(f64, f64, u64)> {
        match self {
            Runner::Geometric(mem) => {
                let (depth, conf) = frame
                    .expect("geometric runs receive rendered frames")
                    .clone();
                let watch = Stopwatch::start();
                let retrieval = mem.retrieve(&pose);
                let retrieve_us = watch.elapsed_us();
                let watch = Stopwatch::start();
                let decision = mem.admit(id, pose, depth, conf, retrieval)?;
                let ingest_us = watch.elapsed_us();
                Ok((ingest_us, retrieve_us, decision.is_keyframe as u64))
            }
            Runner::Baseline(frames) => {
                let watch = Stopwatch::start();
                frames.push(PoseEntry { id, pose });
                let ingest_us = watch.elapsed_us();
                let watch = Stopwatch::start();
                let result = pose_baseline_retrieve(&pose, frames, intr, k);
                let retrieve_us = watch.elapsed_us();
                std::hint::black_box(result);
                Ok((ingest_us, retrieve_us, 1))
            }
        }
    }
}

fn run_once(
    poses: &[Pose],
    methods: &[Method],
    bucket: usize,
    setup: &BenchSetup<'_>,
) -> Result<Vec<Vec<Bucket>>> {
    let mut runners: Vec<Runner> = methods
        .iter()
        .map(|m| match m {
            Method::Geometric => SpatialMemory::new(setup.intrinsics, setup.memory)
                .map(|m| Runner::Geometric(Box::new(m))),
            Method::PoseBaseline => Ok(Runner::Baseline(Vec::with_capacity(poses.len()))),
        })
        .collect::<Result<_>>()?;
    let needs_frames = methods.contains(&Method::Geometric);
    let mut buckets = vec![vec![Bucket::default(); poses.len() / bucket]; methods.len()];
    for (i, pose) in poses.iter().enumerate() {
        let frame = if needs_frames {
            Some(render_depth_noisy(
                setup.terrain,
                pose,
                &setup.intrinsics,
                &setup.noise,
                i as u64,
            )?)
        } else {
            None
        };
        for (runner, per_method) in runners.iter_mut().zip(buckets.iter_mut()) {
            let (ingest_us, retrieve_us, added) = runner.step(
                i as u32,
                *pose,
                frame.as_ref(),
                &setup.intrinsics,
                setup.memory.top_k,
            )?;
            let b = &mut per_method[i / bucket];
            b.added += added;
            if i >= setup.warmup || i >= bucket {
                b.timed += 1;
                b.ingest_us += ingest_us;
                b.retrieve_us += retrieve_us;
            }
        }
    }
    for r in &mut runners {
        if let Runner::Geometric(mem) = r {
            mem.flush()?;
        }
    }
    Ok(buckets)
}

fn config_hash(
    script: &TrajectoryScript,
    n: usize,
    methods: &[Method],
    bucket: usize,
    setup: &BenchSetup<'_>,
) -> String {
    let t = setup.terrain;
    let desc = format!(
        "{script}\nn={n}\nbucket={bucket}\nmethods={methods:?}\nterrain={},{},{}\nintrinsics={:?}\nmemory={:?}\nnoise={:?}\nwarmup={}\n",
        t.seed(),
        t.extent(),
        t.cell(),
        setup.intrinsics,
        setup.memory,
        setup.noise,
        setup.warmup,
    );
    Sha256::digest(desc.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Streams the first `n` poses of `trajectory` through each method.
///
/// Per frame the geometric method times one retrieval and then the gate plus
/// any window integration; the baseline times its append and linear scan.
/// Frame rendering is not timed. `qps` is timed frames per second of the
/// summed ingest and retrieval time.
pub fn run_efficiency_bench(
    trajectory: &TrajectoryScript,
    n: usize,
    methods: &[Method],
    bucket: usize,
    setup: &BenchSetup<'_>,
) -> Result<BenchReport> {
    if bucket == 0 || !n.is_multiple_of(bucket) || n == 0 {
        return Err(invalid(format!(
            "frame count {n} must be a positive multiple of bucket {bucket}"
        )));
    }
    if setup.replicas == 0 {
        return Err(invalid("replicas must be at least 1"));
    }
    let mut methods = methods.to_vec();
    methods.dedup();
    let mut report = BenchReport {
        rows: Vec::new(),
        components: Vec::new(),
        machine: machine_descriptor(),
        config_hash: config_hash(trajectory, n, &methods, bucket, setup),
    };
    if methods.is_empty() {
        return Ok(report);
    }
    let poses = unroll_trajectory(trajectory);
    if poses.len() < n {
        return Err(invalid(format!(
            "trajectory has {} poses, bench needs {n}",
            poses.len()
        )));
    }
    let poses = &poses[..n];
    let runs: Vec<Vec<Vec<Bucket>>> = if setup.replicas == 1 {
        vec![run_once(poses, &methods, bucket, setup)?]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..setup.replicas)
                .map(|_| scope.spawn(|| run_once(poses, &methods, bucket, setup)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().map_err(|_| invalid("bench replica panicked"))?)
                .collect::<Result<Vec<_>>>()
        })?
    };
    let replicas = runs.len() as f64;
    for (mi, method) in methods.iter().enumerate() {
        let mut total = 0u64;
        for bi in 0..n / bucket {
            let first = &runs[0][mi][bi];
            if runs.iter().any(|r| r[mi][bi].added != first.added) {
                return Err(invalid("bench replicas disagree on memory counts"));
            }
            let (mut ingest, mut retrieve, mut qps) = (0.0, 0.0, 0.0);
            for r in &runs {
                let b = &r[mi][bi];
                let frames = b.timed.max(1) as f64;
                ingest += b.ingest_us / frames;
                retrieve += b.retrieve_us / frames;
                qps += b.timed as f64 / ((b.ingest_us + b.retrieve_us) * 1e-6);
            }
            total += first.added;
            let (range_start, range_end) = (bi * bucket, (bi + 1) * bucket - 1);
            report.rows.push(BenchRow {
                method: method.name().to_string(),
                range_start,
                range_end,
                qps: qps / replicas,
                mem_increment: first.added,
                mem_total: total,
            });
            report.components.push(ComponentRow {
                method: method.name().to_string(),
                range_start,
                range_end,
                ingest_us: ingest / replicas,
                retrieve_us: retrieve / replicas,
            });
        }
    }
    Ok(report)
}

/// CSV text of the report rows. Floats use the shortest representation that
/// parses back to the same value.
pub fn report_csv(report: &BenchReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.range_start, r.range_end, r.qps, r.mem_increment, r.mem_total
        );
    }
    out
}

pub fn components_csv(report: &BenchReport) -> String {
    let mut out = format!("{COMPONENTS_HEADER}\n");
    for r in &report.components {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.method, r.range_start, r.range_end, r.ingest_us, r.retrieve_us
        );
    }
    out
}

pub fn emit_report(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, report_csv(report))?;
    Ok(())
}

/// Writes `<stem>.components.csv` and `<stem>.config.txt` next to `path`;
/// the latter echoes `config_text` with the machine and config hash.
pub fn emit_sidecars(
    report: &BenchReport,
    config_text: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let stem = path.with_extension("");
    let with = |suffix: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(suffix);
        std::path::PathBuf::from(s)
    };
    fs::write(with(".components.csv"), components_csv(report))?;
    let mut echo = format!(
        "# machine: {}\n# config_hash: {}\n",
        report.machine, report.config_hash
    );
    echo.push_str(config_text);
    fs::write(with(".config.txt"), echo)?;
    Ok(())
}

pub fn parse_report(text: &str) -> Result<Vec<BenchRow>> {
    let mut lines = text.lines().enumerate();
    let bad = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };
    match lines.next() {
        Some((_, h)) if h.trim_end() == REPORT_HEADER => {}
        _ => return Err(bad(0, format!("missing header `{REPORT_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad(
                lineno,
                format!("line {}: expected 6 fields", lineno + 1),
            ));
        }
        let field = |i: usize| f[i].trim();
        let int = |i: usize| {
            field(i)
                .parse::<u64>()
                .map_err(|e| bad(lineno, format!("line {}: field {}: {e}", lineno + 1, i + 1)))
        };
        rows.push(BenchRow {
            method: field(0).to_string(),
            range_start: int(1)? as usize,
            range_end: int(2)? as usize,
            qps: field(3)
                .parse::<f64>()
                .map_err(|e| bad(lineno, format!("line {}: qps: {e}", lineno + 1)))?,
            mem_increment: int(4)?,
            mem_total: int(5)?,
        });
    }
    Ok(rows)
}
