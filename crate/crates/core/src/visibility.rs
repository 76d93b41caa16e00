//! Point splatting into a depth buffer, shared by coverage rendering and
//! retrieval, plus conservative frustum tests for voxel culling.

use nalgebra::Vector3;

use crate::geometry::{project_point, Extrinsics, Intrinsics};

pub const MIN_DEPTH_TOLERANCE: f64 = 0.05;
pub const RELATIVE_DEPTH_TOLERANCE: f64 = 0.02;
/// Largest splat half-width in pixels.
pub const MAX_SPLAT_RADIUS: usize = 6;

/// Depth slack for "same surface" comparisons at depth `z`.
#[inline]
pub fn depth_tolerance(z: f64) -> f64 {
    MIN_DEPTH_TOLERANCE.max(RELATIVE_DEPTH_TOLERANCE * z)
}

/// Half-width in pixels of the square a point covers at depth `z`, sized so
/// neighbouring samples `spacing` meters apart leave no holes.
#[inline]
pub fn splat_radius(z: f64, spacing: f64, focal: f64) -> usize {
    let r = (0.5 * spacing * focal / z).round();
    if r.is_finite() && r > 0.0 {
        (r as usize).min(MAX_SPLAT_RADIUS)
    } else {
        0
    }
}

/// A screen-space sample: nearest pixel, camera depth, source id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenPoint {
    pub px: usize,
    pub py: usize,
    pub depth: f64,
    pub source: u32,
}

#[inline]
pub fn to_screen(
    p: &Vector3<f64>,
    source: u32,
    intr: &Intrinsics,
    ext: &Extrinsics,
) -> Option<ScreenPoint> {
    project_point(p, intr, ext).map(|(u, v, depth)| ScreenPoint {
        px: ((u + 0.5).floor() as usize).min(intr.width - 1),
        py: ((v + 0.5).floor() as usize).min(intr.height - 1),
        depth,
        source,
    })
}

/// Nearest-depth buffer. Empty pixels hold `+inf`.
#[derive(Debug, Clone)]
pub struct ZBuffer {
    width: usize,
    height: usize,
    depth: Vec<f64>,
}

impl ZBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    /// Writes `z` into the `(2r+1)^2` square around `(x, y)` where nearer.
    pub fn splat(&mut self, x: usize, y: usize, z: f64, radius: usize) {
        let x0 = x.saturating_sub(radius);
        let y0 = y.saturating_sub(radius);
        let x1 = (x + radius).min(self.width - 1);
        let y1 = (y + radius).min(self.height - 1);
        for yy in y0..=y1 {
            let row = &mut self.depth[yy * self.width..(yy + 1) * self.width];
            for d in &mut row[x0..=x1] {
                if z < *d {
                    *d = z;
                }
            }
        }
    }

    /// Whether a sample at `(x, y, z)` is the front surface there.
    #[inline]
    pub fn is_front(&self, x: usize, y: usize, z: f64) -> bool {
        let front = self.at(x, y);
        z <= front + depth_tolerance(front)
    }

    pub fn filled_pixels(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Side planes of a camera frustum in camera coordinates, for sphere tests.
#[derive(Debug, Clone, Copy)]
pub struct Frustum {
    ext: Extrinsics,
    // unit inward normals of the four side planes through the center
    planes: [Vector3<f64>; 4],
}

impl Frustum {
    pub fn new(intr: &Intrinsics, ext: &Extrinsics) -> Self {
        let right = (intr.width as f64 - 0.5 - intr.cx) / intr.fx;
        let left = (intr.cx + 0.5) / intr.fx;
        let top = (intr.height as f64 - 0.5 - intr.cy) / intr.fy;
        let bottom = (intr.cy + 0.5) / intr.fy;
        let planes = [
            Vector3::new(-1.0, 0.0, right).normalize(),
            Vector3::new(1.0, 0.0, left).normalize(),
            Vector3::new(0.0, -1.0, top).normalize(),
            Vector3::new(0.0, 1.0, bottom).normalize(),
        ];
        Self { ext: *ext, planes }
    }

    /// Conservative: false only if no part of the sphere can project onto
    /// the raster in front of the camera.
    #[inline]
    pub fn may_contain_sphere(&self, center: &Vector3<f64>, radius: f64) -> bool {
        let c = self.ext.world_to_camera(center);
        c.z > -radius && self.planes.iter().all(|n| n.dot(&c) >= -radius)
    }
}
