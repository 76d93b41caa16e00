//! Camera math: orientation, extrinsics, pinhole projection, back-projection
//! and per-pixel Plücker rays.
//!
//! Conventions: right-handed world with `+y` up. A camera with zero pitch and
//! yaw has its axes aligned with the world axes and looks down `+z`. Yaw turns
//! about world `+y`, pitch about the camera `x` axis; positive pitch tilts the
//! view downward. Pixel `u` grows along camera `+x` and `v` along camera `+y`,
//! so row `v = 0` is the bottom of the view. Displaying the raster rotated by
//! 180 degrees gives the familiar upright picture.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};

use crate::error::{invalid, Result};
use crate::raster::{ConfidenceMap, DepthMap, MIN_VALID_DEPTH};

/// Camera position and viewing direction. Roll is not modelled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    x: f64,
    y: f64,
    z: f64,
    pitch: f64,
    yaw: f64,
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

impl Pose {
    /// Validates the pose; yaw is wrapped into `[-pi, pi)`.
    pub fn new(x: f64, y: f64, z: f64, pitch: f64, yaw: f64) -> Result<Self> {
        if ![x, y, z, pitch, yaw].iter().all(|v| v.is_finite()) {
            return Err(invalid("pose components must be finite"));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
            return Err(invalid(format!("pitch {pitch} outside [-pi/2, pi/2]")));
        }
        Ok(Self {
            x,
            y,
            z,
            pitch,
            yaw: normalize_angle(yaw),
        })
    }

    pub fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn pitch(&self) -> f64 {
        self.pitch
    }
    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.x, self.y, self.z, self.pitch, self.yaw]
    }

    /// Viewing direction in world coordinates.
    pub fn forward(&self) -> Vector3<f64> {
        orientation(self.pitch, self.yaw) * Vector3::z()
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

pub const DEFAULT_WIDTH: usize = 384;
pub const DEFAULT_HEIGHT: usize = 224;
pub const DEFAULT_HFOV_DEG: f64 = 70.0;

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let finite = [fx, fy, cx, cy].iter().all(|v| v.is_finite());
        if !finite || fx <= 0.0 || fy <= 0.0 {
            return Err(invalid("focal lengths must be finite and positive"));
        }
        if width == 0 || height == 0 {
            return Err(invalid("image size must be non-zero"));
        }
        if !(0.0..width as f64).contains(&cx) || !(0.0..height as f64).contains(&cy) {
            return Err(invalid(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square pixels with the given horizontal field of view; the principal
    /// point sits at `(width / 2, height / 2)`.
    pub fn from_hfov(width: usize, height: usize, hfov_deg: f64) -> Result<Self> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(invalid(format!(
                "horizontal fov {hfov_deg} outside (0, 180)"
            )));
        }
        let f = (width as f64 / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
        Self::new(f, f, (width / 2) as f64, (height / 2) as f64, width, height)
    }

    /// Same field of view resampled to another image size.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }

    /// Half-angle between the optical axis and the image corner ray.
    pub fn half_diagonal_fov(&self) -> f64 {
        let dx = (self.cx.max(self.width as f64 - self.cx)) / self.fx;
        let dy = (self.cy.max(self.height as f64 - self.cy)) / self.fy;
        (dx * dx + dy * dy).sqrt().atan()
    }

    /// Camera-frame ray through pixel `(u, v)` with unit z component.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Whether continuous pixel coordinates fall on the raster (pixel centers
    /// sit on integer coordinates).
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::from_hfov(DEFAULT_WIDTH, DEFAULT_HEIGHT, DEFAULT_HFOV_DEG)
            .expect("default intrinsics are valid")
    }
}

/// Camera orientation `q_yaw * q_pitch`, where yaw turns about world up and
/// pitch about the camera's own x axis. This maps camera-frame vectors into
/// the world frame.
fn orientation(pitch: f64, yaw: f64) -> Matrix3<f64> {
    let q_yaw = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), yaw);
    let q_pitch = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), pitch);
    (q_yaw * q_pitch).to_rotation_matrix().into_inner()
}

/// Camera-to-world rotation for a pitch/yaw pair.
pub fn rotation_from_pitch_yaw(pitch: f64, yaw: f64) -> Result<Matrix3<f64>> {
    if !pitch.is_finite() || !yaw.is_finite() {
        return Err(invalid("pitch and yaw must be finite"));
    }
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&pitch) {
        return Err(invalid(format!("pitch {pitch} outside [-pi/2, pi/2]")));
    }
    Ok(orientation(pitch, yaw))
}

/// World-to-camera rigid transform `[R | -R C]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// World-to-camera rotation block.
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Camera center in world coordinates, `-R^T t`.
    pub fn camera_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn inverse_matrix(&self) -> Matrix4<f64> {
        let rt = self.rotation.transpose();
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
        m.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&(-(rt * self.translation)));
        m
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }
}

pub fn extrinsics_from_pose(pose: &Pose) -> Extrinsics {
    let rotation = orientation(pose.pitch, pose.yaw).transpose();
    let translation = -(rotation * pose.position());
    Extrinsics {
        rotation,
        translation,
    }
}

/// A world point tagged with the frame that observed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub position: Vector3<f64>,
    pub frame_id: u32,
    pub confidence: f32,
}

/// Lifts every valid depth pixel into world coordinates.
pub fn backproject(
    depth: &DepthMap,
    conf: &ConfidenceMap,
    intr: &Intrinsics,
    ext: &Extrinsics,
    frame_id: u32,
) -> Result<Vec<WorldPoint>> {
    if !depth.same_shape(conf) {
        return Err(invalid("depth and confidence maps differ in size"));
    }
    if depth.width() != intr.width || depth.height() != intr.height {
        return Err(invalid(format!(
            "depth map is {}x{}, intrinsics expect {}x{}",
            depth.width(),
            depth.height(),
            intr.width,
            intr.height
        )));
    }
    let mut out = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let d = depth.get(u, v);
            if d < MIN_VALID_DEPTH {
                continue;
            }
            let cam = intr.pixel_ray(u as f64, v as f64) * d as f64;
            out.push(WorldPoint {
                position: ext.camera_to_world(&cam),
                frame_id,
                confidence: conf.get(u, v),
            });
        }
    }
    Ok(out)
}

/// Pixel coordinates and camera depth of one projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
    pub index: usize,
}

/// Forward pinhole projection of one world point, or `None` when it lies
/// behind the camera or off the raster.
#[inline]
pub fn project_point(
    p: &Vector3<f64>,
    intr: &Intrinsics,
    ext: &Extrinsics,
) -> Option<(f64, f64, f64)> {
    let c = ext.world_to_camera(p);
    if c.z <= 0.0 {
        return None;
    }
    let u = intr.fx * c.x / c.z + intr.cx;
    let v = intr.fy * c.y / c.z + intr.cy;
    intr.contains(u, v).then_some((u, v, c.z))
}

pub fn project_points(
    points: &[WorldPoint],
    intr: &Intrinsics,
    ext: &Extrinsics,
) -> Vec<Projection> {
    points
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            project_point(&p.position, intr, ext).map(|(u, v, depth)| Projection {
                u,
                v,
                depth,
                index,
            })
        })
        .collect()
}

/// Per-pixel Plücker line coordinates `(d, m)`, with `m = c x d` for camera
/// center `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PluckerRayMap {
    pub width: usize,
    pub height: usize,
    pub directions: Vec<Vector3<f64>>,
    pub moments: Vec<Vector3<f64>>,
}

impl PluckerRayMap {
    pub fn at(&self, u: usize, v: usize) -> (Vector3<f64>, Vector3<f64>) {
        let i = v * self.width + u;
        (self.directions[i], self.moments[i])
    }

    /// Interleaved `[dx, dy, dz, mx, my, mz]` per pixel.
    pub fn to_channels(&self) -> Vec<f32> {
        self.directions
            .iter()
            .zip(&self.moments)
            .flat_map(|(d, m)| [d.x, d.y, d.z, m.x, m.y, m.z].map(|c| c as f32))
            .collect()
    }
}

pub fn plucker_rays(intr: &Intrinsics, ext: &Extrinsics) -> PluckerRayMap {
    let center = ext.camera_center();
    let cam_to_world = ext.rotation().transpose();
    let n = intr.width * intr.height;
    let mut directions = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let d = (cam_to_world * intr.pixel_ray(u as f64, v as f64)).normalize();
            moments.push(center.cross(&d));
            directions.push(d);
        }
    }
    PluckerRayMap {
        width: intr.width,
        height: intr.height,
        directions,
        moments,
    }
}
