//! Point-to-frame retrieval: project the global cloud into the query view,
//! keep the points that survive occlusion, and vote by source frame.
//!
//! Also hosts the exhaustive reference implementation and the pose-overlap
//! baseline that scans every stored frame.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::clock::Stopwatch;
use crate::geometry::{extrinsics_from_pose, project_point, Extrinsics, Intrinsics, Pose};
use crate::memory_store::{GlobalGeometry, MapPoint, DEFAULT_RASTER_HEIGHT, DEFAULT_RASTER_WIDTH};
use crate::visibility::{splat_radius, to_screen, Frustum, ScreenPoint, ZBuffer};

pub const DEFAULT_TOP_K: usize = 8;
/// Sample grid side for the pose baseline (8 x 8 = 64 directions).
pub const BASELINE_GRID: usize = 8;
/// Range at which baseline sample rays are tested against stored frusta.
pub const BASELINE_SAMPLE_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub k: usize,
    /// Raster used for the visibility test.
    pub width: usize,
    pub height: usize,
    /// With occlusion off, every in-frustum point votes.
    pub occlusion: bool,
}

impl Default for RetrievalParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOP_K,
            width: DEFAULT_RASTER_WIDTH,
            height: DEFAULT_RASTER_HEIGHT,
            occlusion: true,
        }
    }
}

/// Frame ids ranked by vote count (ties: smaller id first).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RetrievalResult {
    pub frames: Vec<u32>,
    pub votes: Vec<u64>,
    pub elapsed_us: f64,
}

impl RetrievalResult {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Same ids, order and counts; timing ignored.
    pub fn same_ranking(&self, other: &RetrievalResult) -> bool {
        self.frames == other.frames && self.votes == other.votes
    }

    fn from_votes(votes: HashMap<u32, u64>, k: usize) -> Self {
        let mut ranked: Vec<(u32, u64)> = votes.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        Self {
            frames: ranked.iter().map(|r| r.0).collect(),
            votes: ranked.iter().map(|r| r.1).collect(),
            elapsed_us: 0.0,
        }
    }
}

fn tally(samples: &[ScreenPoint], zb: Option<&ZBuffer>) -> HashMap<u32, u64> {
    let mut votes: HashMap<u32, u64> = HashMap::new();
    for s in samples {
        if zb.is_none_or(|zb| zb.is_front(s.px, s.py, s.depth)) {
            *votes.entry(s.source).or_default() += 1;
        }
    }
    votes
}

fn splat_all(samples: &[ScreenPoint], raster: &Intrinsics, spacing: f64) -> ZBuffer {
    let mut zb = ZBuffer::new(raster.width, raster.height);
    for s in samples {
        zb.splat(
            s.px,
            s.py,
            s.depth,
            splat_radius(s.depth, spacing, raster.fx),
        );
    }
    zb
}

/// Top-k historical frames for `pose`. Only voxels whose bounding sphere may
/// intersect the view frustum are projected.
pub fn point_to_frame_retrieve(
    pose: &Pose,
    geo: &GlobalGeometry,
    intr: &Intrinsics,
    params: &RetrievalParams,
) -> RetrievalResult {
    retrieve_over(pose, &[geo], intr, params)
}

/// As [`point_to_frame_retrieve`] with votes pooled over several point sets
/// sharing one z-buffer. The splat spacing follows the first set.
pub fn retrieve_over(
    pose: &Pose,
    geos: &[&GlobalGeometry],
    intr: &Intrinsics,
    params: &RetrievalParams,
) -> RetrievalResult {
    let watch = Stopwatch::start();
    let Some(first) = geos.first() else {
        return RetrievalResult::default();
    };
    let raster = intr.resized(params.width, params.height);
    let ext = extrinsics_from_pose(pose);
    let frustum = Frustum::new(&raster, &ext);
    let mut samples = Vec::new();
    for geo in geos {
        geo.for_each_in_frustum(&frustum, |p| {
            if let Some(s) = to_screen(&p.position_f64(), p.source, &raster, &ext) {
                samples.push(s);
            }
        });
    }
    let zb = params
        .occlusion
        .then(|| splat_all(&samples, &raster, first.voxel_size() / 2.0));
    let mut result = RetrievalResult::from_votes(tally(&samples, zb.as_ref()), params.k);
    result.elapsed_us = watch.elapsed_us();
    result
}

/// Reference retrieval: every point is projected, no spatial index.
pub fn brute_force_oracle(
    pose: &Pose,
    geo: &GlobalGeometry,
    intr: &Intrinsics,
    params: &RetrievalParams,
) -> RetrievalResult {
    let points: Vec<MapPoint> = geo.points().copied().collect();
    brute_force_over(&points, pose, geo.voxel_size(), intr, params)
}

/// As [`brute_force_oracle`] over an explicit point list (any order).
pub fn brute_force_over(
    points: &[MapPoint],
    pose: &Pose,
    voxel_size: f64,
    intr: &Intrinsics,
    params: &RetrievalParams,
) -> RetrievalResult {
    let watch = Stopwatch::start();
    let raster = intr.resized(params.width, params.height);
    let ext = extrinsics_from_pose(pose);
    let samples: Vec<ScreenPoint> = points
        .iter()
        .filter_map(|p| to_screen(&p.position_f64(), p.source, &raster, &ext))
        .collect();
    let zb = params
        .occlusion
        .then(|| splat_all(&samples, &raster, voxel_size / 2.0));
    let mut result = RetrievalResult::from_votes(tally(&samples, zb.as_ref()), params.k);
    result.elapsed_us = watch.elapsed_us();
    result
}

/// Pose-only view of a stored frame, for the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseEntry {
    pub id: u32,
    pub pose: Pose,
}

/// 64 world-frame sample points at [`BASELINE_SAMPLE_RANGE`] along rays
/// through an 8 x 8 grid of cell centers of the query image.
pub fn baseline_samples(pose: &Pose, intr: &Intrinsics) -> Vec<Vector3<f64>> {
    let ext = extrinsics_from_pose(pose);
    let mut out = Vec::with_capacity(BASELINE_GRID * BASELINE_GRID);
    for j in 0..BASELINE_GRID {
        for i in 0..BASELINE_GRID {
            let u = (i as f64 + 0.5) * intr.width as f64 / BASELINE_GRID as f64 - 0.5;
            let v = (j as f64 + 0.5) * intr.height as f64 / BASELINE_GRID as f64 - 0.5;
            let ray = intr.pixel_ray(u, v).normalize() * BASELINE_SAMPLE_RANGE;
            out.push(ext.camera_to_world(&ray));
        }
    }
    out
}

/// Fraction of query samples inside the frame's frustum.
pub fn baseline_score(samples: &[Vector3<f64>], frame: &Extrinsics, intr: &Intrinsics) -> f64 {
    let inside = samples
        .iter()
        .filter(|s| project_point(s, intr, frame).is_some())
        .count();
    inside as f64 / samples.len() as f64
}

/// Linear scan over every stored frame, ranked by frustum overlap score.
/// `votes` holds the number of overlapping samples (score x 64).
pub fn pose_baseline_retrieve(
    pose: &Pose,
    frames: &[PoseEntry],
    intr: &Intrinsics,
    k: usize,
) -> RetrievalResult {
    let watch = Stopwatch::start();
    let samples = baseline_samples(pose, intr);
    let mut scored: Vec<(u32, u64)> = frames
        .iter()
        .map(|f| {
            let ext = extrinsics_from_pose(&f.pose);
            let inside = samples
                .iter()
                .filter(|s| project_point(s, intr, &ext).is_some())
                .count();
            (f.id, inside as u64)
        })
        .filter(|&(_, n)| n > 0)
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    RetrievalResult {
        frames: scored.iter().map(|s| s.0).collect(),
        votes: scored.iter().map(|s| s.1).collect(),
        elapsed_us: watch.elapsed_us(),
    }
}
