//! Run configuration: flat `key = value` text, `#` comments, unknown keys
//! rejected.
//!
//! | key | default | range |
//! |-----|---------|-------|
//! | `seed` | 0 | any u64 |
//! | `terrain_extent` | 256 | > 0, meters |
//! | `terrain_cell` | 1 | > 0, meters |
//! | `terrain_roughness` | 0.5 | >= 0 |
//! | `trajectory` | unset | path to a trajectory script |
//! | `trajectory_length` | 200 | >= 2 frames, when no script is given |
//! | `trajectory_loops` | 1 | revisit laps beyond the first |
//! | `camera_height` | 12 | meters above the origin plane |
//! | `camera_pitch` | 0.35 | radians, positive looks down |
//! | `step_move` | 0.5 | meters per action |
//! | `image_width`, `image_height` | 384, 224 | >= 1 |
//! | `hfov_deg` | 70 | (0, 180) |
//! | `noise_fraction` | 0 | [0, 1] pixels with attenuated confidence |
//! | `voxel_size` | 0.5 | > 0 |
//! | `max_per_voxel` | 4 | >= 1 |
//! | `novel_threshold` | 0.15 | [0, 1] |
//! | `tau_hist` | 8 | >= 0 |
//! | `top_k` | 8 | >= 1 |
//! | `window_capacity` | 8 | >= 1 |
//! | `window_overlap` | 2 | <= window_capacity |
//! | `tau_min` | 0.1 | [0, 1] |
//! | `keep_fraction` | 0.6 | (0, 1] |
//! | `raster_width`, `raster_height` | 96, 56 | >= 1 |
//! | `occlusion` | true | bool |
//! | `bench_frames` | 4000 | multiple of `bench_bucket` |
//! | `bench_bucket` | 1000 | >= 1 |
//! | `bench_warmup` | 32 | frames excluded from timing |
//! | `bench_methods` | geometric,pose_baseline | comma list |
//! | `bench_replicas` | 1 | >= 1 concurrent copies |
//! | `out` | unset | default output path |

use std::fmt;
use std::path::{Path, PathBuf};

use crate::engine::MemoryConfig;
use crate::error::{invalid, Result};
use crate::geometry::Intrinsics;
use crate::scale_alignment::FilterParams;
use crate::world::{NoiseModel, RevisitParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub terrain_extent: f64,
    pub terrain_cell: f64,
    pub terrain_roughness: f64,
    pub trajectory: Option<PathBuf>,
    pub trajectory_length: usize,
    pub trajectory_loops: usize,
    pub camera_height: f64,
    pub camera_pitch: f64,
    pub step_move: f64,
    pub image_width: usize,
    pub image_height: usize,
    pub hfov_deg: f64,
    pub noise_fraction: f64,
    pub memory: MemoryConfig,
    pub bench_frames: usize,
    pub bench_bucket: usize,
    pub bench_warmup: usize,
    pub bench_methods: Vec<String>,
    pub bench_replicas: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let revisit = RevisitParams::default();
        Self {
            seed: 0,
            terrain_extent: 256.0,
            terrain_cell: 1.0,
            terrain_roughness: 0.5,
            trajectory: None,
            trajectory_length: 200,
            trajectory_loops: 1,
            camera_height: revisit.camera_height,
            camera_pitch: revisit.pitch,
            step_move: revisit.step_move,
            image_width: crate::geometry::DEFAULT_WIDTH,
            image_height: crate::geometry::DEFAULT_HEIGHT,
            hfov_deg: crate::geometry::DEFAULT_HFOV_DEG,
            noise_fraction: 0.0,
            memory: MemoryConfig::default(),
            bench_frames: 4000,
            bench_bucket: 1000,
            bench_warmup: 32,
            bench_methods: vec!["geometric".into(), "pose_baseline".into()],
            bench_replicas: 1,
            out: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| invalid(format!("config key `{key}`: bad value `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(invalid(format!(
            "config key `{key}`: expected a boolean, got `{value}`"
        ))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(invalid(format!(
                    "config line {}: expected `key = value`",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.memory;
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "terrain_extent" => self.terrain_extent = parse_num(key, value)?,
            "terrain_cell" => self.terrain_cell = parse_num(key, value)?,
            "terrain_roughness" => self.terrain_roughness = parse_num(key, value)?,
            "trajectory" => self.trajectory = Some(PathBuf::from(value)),
            "trajectory_length" => self.trajectory_length = parse_num(key, value)?,
            "trajectory_loops" => self.trajectory_loops = parse_num(key, value)?,
            "camera_height" => self.camera_height = parse_num(key, value)?,
            "camera_pitch" => self.camera_pitch = parse_num(key, value)?,
            "step_move" => self.step_move = parse_num(key, value)?,
            "image_width" => self.image_width = parse_num(key, value)?,
            "image_height" => self.image_height = parse_num(key, value)?,
            "hfov_deg" => self.hfov_deg = parse_num(key, value)?,
            "noise_fraction" => self.noise_fraction = parse_num(key, value)?,
            "voxel_size" => m.voxel_size = parse_num(key, value)?,
            "max_per_voxel" => m.max_per_voxel = parse_num(key, value)?,
            "novel_threshold" => m.novel_threshold = parse_num(key, value)?,
            "tau_hist" => m.tau_hist = parse_num(key, value)?,
            "top_k" => m.top_k = parse_num(key, value)?,
            "window_capacity" => m.window_capacity = parse_num(key, value)?,
            "window_overlap" => m.window_overlap = parse_num(key, value)?,
            "tau_min" => m.filter.tau_min = parse_num(key, value)?,
            "keep_fraction" => m.filter.keep_fraction = parse_num(key, value)?,
            "raster_width" => m.raster_width = parse_num(key, value)?,
            "raster_height" => m.raster_height = parse_num(key, value)?,
            "occlusion" => m.occlusion = parse_bool(key, value)?,
            "bench_frames" => self.bench_frames = parse_num(key, value)?,
            "bench_bucket" => self.bench_bucket = parse_num(key, value)?,
            "bench_warmup" => self.bench_warmup = parse_num(key, value)?,
            "bench_methods" => {
                self.bench_methods = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "bench_replicas" => self.bench_replicas = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(invalid(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.memory.validate()?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("terrain_extent", self.terrain_extent)?;
        positive("terrain_cell", self.terrain_cell)?;
        positive("step_move", self.step_move)?;
        if !(self.terrain_roughness.is_finite() && self.terrain_roughness >= 0.0) {
            return Err(invalid("terrain_roughness must be non-negative"));
        }
        if !self.camera_height.is_finite() || !self.camera_pitch.is_finite() {
            return Err(invalid("camera pose must be finite"));
        }
        if self.trajectory_length < 2 || self.trajectory_length < 2 * self.trajectory_loops {
            return Err(invalid(
                "trajectory_length must be at least 2 and at least 2 * trajectory_loops",
            ));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(invalid("image size must be non-zero"));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(invalid("hfov_deg must lie in (0, 180)"));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(invalid("noise_fraction must lie in [0, 1]"));
        }
        if self.bench_bucket == 0 || !self.bench_frames.is_multiple_of(self.bench_bucket) {
            return Err(invalid(
                "bench_frames must be a positive multiple of bench_bucket",
            ));
        }
        if self.bench_replicas == 0 {
            return Err(invalid("bench_replicas must be at least 1"));
        }
        for m in &self.bench_methods {
            crate::bench::Method::from_name(m)?;
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::from_hfov(self.image_width, self.image_height, self.hfov_deg)
    }

    pub fn revisit_params(&self) -> RevisitParams {
        RevisitParams {
            camera_height: self.camera_height,
            pitch: self.camera_pitch,
            step_move: self.step_move,
            ..RevisitParams::default()
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            fraction: self.noise_fraction,
            seed: self.seed,
        }
    }

    pub fn filter(&self) -> FilterParams {
        self.memory.filter
    }
}

/// Canonical form: every key, one per line, in table order. Parsing the
/// output yields an equal config.
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.memory;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "terrain_extent = {}", self.terrain_extent)?;
        writeln!(f, "terrain_cell = {}", self.terrain_cell)?;
        writeln!(f, "terrain_roughness = {}", self.terrain_roughness)?;
        if let Some(t) = &self.trajectory {
            writeln!(f, "trajectory = {}", t.display())?;
        }
        writeln!(f, "trajectory_length = {}", self.trajectory_length)?;
        writeln!(f, "trajectory_loops = {}", self.trajectory_loops)?;
        writeln!(f, "camera_height = {}", self.camera_height)?;
        writeln!(f, "camera_pitch = {}", self.camera_pitch)?;
        writeln!(f, "step_move = {}", self.step_move)?;
        writeln!(f, "image_width = {}", self.image_width)?;
        writeln!(f, "image_height = {}", self.image_height)?;
        writeln!(f, "hfov_deg = {}", self.hfov_deg)?;
        writeln!(f, "noise_fraction = {}", self.noise_fraction)?;
        writeln!(f, "voxel_size = {}", m.voxel_size)?;
        writeln!(f, "max_per_voxel = {}", m.max_per_voxel)?;
        writeln!(f, "novel_threshold = {}", m.novel_threshold)?;
        writeln!(f, "tau_hist = {}", m.tau_hist)?;
        writeln!(f, "top_k = {}", m.top_k)?;
        writeln!(f, "window_capacity = {}", m.window_capacity)?;
        writeln!(f, "window_overlap = {}", m.window_overlap)?;
        writeln!(f, "tau_min = {}", m.filter.tau_min)?;
        writeln!(f, "keep_fraction = {}", m.filter.keep_fraction)?;
        writeln!(f, "raster_width = {}", m.raster_width)?;
        writeln!(f, "raster_height = {}", m.raster_height)?;
        writeln!(f, "occlusion = {}", m.occlusion)?;
        writeln!(f, "bench_frames = {}", self.bench_frames)?;
        writeln!(f, "bench_bucket = {}", self.bench_bucket)?;
        writeln!(f, "bench_warmup = {}", self.bench_warmup)?;
        writeln!(f, "bench_methods = {}", self.bench_methods.join(","))?;
        writeln!(f, "bench_replicas = {}", self.bench_replicas)?;
        if let Some(o) = &self.out {
            writeln!(f, "out = {}", o.display())?;
        }
        Ok(())
    }
}
