//! Deterministic synthetic environment: value-noise terrain, ray-marched
//! depth, and scripted first-person trajectories.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{rotation_from_pitch_yaw, Intrinsics, Pose};
use crate::raster::{ConfidenceMap, DepthMap};

/// Closest valid z-depth the renderer reports.
pub const NEAR_PLANE: f64 = 0.01;
/// Rays longer than this see sky.
pub const FAR_DISTANCE: f64 = 160.0;

const NOISE_BASE_WAVELENGTH: f64 = 32.0;
const NOISE_OCTAVES: usize = 4;
const RELIEF_METERS: f64 = 8.0;

/// Square terrain grid centered on the world origin.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    samples: usize,
    cell: f64,
    origin: f64,
    seed: u64,
    elevations: Vec<f64>,
}

impl HeightField {
    pub fn flat(extent: f64, cell: f64) -> Result<Self> {
        generate_terrain(0, extent, cell, 0.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn extent(&self) -> f64 {
        (self.samples - 1) as f64 * self.cell
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.elevations
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
                (lo.min(h), hi.max(h))
            })
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        let hi = self.origin + self.extent();
        (self.origin..=hi).contains(&x) && (self.origin..=hi).contains(&z)
    }

    /// Bilinear elevation, `None` outside the grid.
    pub fn elevation_at(&self, x: f64, z: f64) -> Option<f64> {
        if !self.contains(x, z) {
            return None;
        }
        let gx = (x - self.origin) / self.cell;
        let gz = (z - self.origin) / self.cell;
        let last = self.samples - 1;
        let ix = (gx.floor() as usize).min(last - 1);
        let iz = (gz.floor() as usize).min(last - 1);
        let fx = gx - ix as f64;
        let fz = gz - iz as f64;
        let at = |i: usize, j: usize| self.elevations[j * self.samples + i];
        let top = at(ix, iz) * (1.0 - fx) + at(ix + 1, iz) * fx;
        let bottom = at(ix, iz + 1) * (1.0 - fx) + at(ix + 1, iz + 1) * fx;
        Some(top * (1.0 - fz) + bottom * fz)
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Multi-octave value noise over `[-extent/2, extent/2]^2`.
pub fn generate_terrain(seed: u64, extent: f64, cell: f64, roughness: f64) -> Result<HeightField> {
    if !(extent.is_finite() && extent > 0.0) {
        return Err(invalid(format!(
            "terrain extent must be positive, got {extent}"
        )));
    }
    if !(cell.is_finite() && cell > 0.0) {
        return Err(invalid(format!(
            "terrain cell must be positive, got {cell}"
        )));
    }
    if !(roughness.is_finite() && roughness >= 0.0) {
        return Err(invalid(format!(
            "roughness must be non-negative, got {roughness}"
        )));
    }
    let samples = (extent / cell).round() as usize + 1;
    if samples < 2 {
        return Err(invalid("terrain must span at least one cell"));
    }
    let cell = extent / (samples - 1) as f64;
    let mut elevations = vec![0.0; samples * samples];
    if roughness > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut amplitude = 1.0;
        let mut wavelength = NOISE_BASE_WAVELENGTH;
        for _ in 0..NOISE_OCTAVES {
            let n = (extent / wavelength).ceil() as usize + 2;
            let lattice: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for j in 0..samples {
                for i in 0..samples {
                    let gx = i as f64 * cell / wavelength;
                    let gz = j as f64 * cell / wavelength;
                    let (lx, lz) = (gx.floor() as usize, gz.floor() as usize);
                    let (tx, tz) = (smoothstep(gx - lx as f64), smoothstep(gz - lz as f64));
                    let at = |a: usize, b: usize| lattice[b * n + a];
                    let top = at(lx, lz) * (1.0 - tx) + at(lx + 1, lz) * tx;
                    let bottom = at(lx, lz + 1) * (1.0 - tx) + at(lx + 1, lz + 1) * tx;
                    elevations[j * samples + i] +=
                        amplitude * RELIEF_METERS * roughness * (top * (1.0 - tz) + bottom * tz);
                }
            }
            amplitude *= 0.5;
            wavelength *= 0.5;
        }
    }
    Ok(HeightField {
        samples,
        cell,
        origin: -extent / 2.0,
        seed,
        elevations,
    })
}

/// Seeded confidence attenuation applied to a fraction of the hit pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        fraction: 0.0,
        seed: 0,
    };
    pub const MIN_CONFIDENCE: f64 = 0.3;
}

/// Ray-marched z-depth of the terrain. Sky pixels get depth 0 and
/// confidence 0.
pub fn render_depth(
    hf: &HeightField,
    pose: &Pose,
    intr: &Intrinsics,
) -> Result<(DepthMap, ConfidenceMap)> {
    render_depth_noisy(hf, pose, intr, &NoiseModel::NONE, 0)
}

/// As [`render_depth`], attenuating confidence on a seeded pixel subset.
/// `frame_salt` decorrelates the subsets of different frames.
pub fn render_depth_noisy(
    hf: &HeightField,
    pose: &Pose,
    intr: &Intrinsics,
    noise: &NoiseModel,
    frame_salt: u64,
) -> Result<(DepthMap, ConfidenceMap)> {
    if !hf.contains(pose.x(), pose.z()) {
        return Err(Error::OutOfBounds(format!(
            "camera at ({}, {}) outside terrain of extent {}",
            pose.x(),
            pose.z(),
            hf.extent()
        )));
    }
    let rot = rotation_from_pitch_yaw(pose.pitch(), pose.yaw())?;
    let origin = pose.position();
    let (w, h) = (intr.width, intr.height);
    let mut depth = vec![0f32; w * h];
    let mut conf = vec![0f32; w * h];
    let mut rng =
        ChaCha8Rng::seed_from_u64(noise.seed ^ frame_salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for v in 0..h {
        for u in 0..w {
            let cam = intr.pixel_ray(u as f64, v as f64);
            let norm = cam.norm();
            let dir = rot * (cam / norm);
            // z-depth = ray length / |cam|
            let hit = march(hf, &origin, &dir, NEAR_PLANE * norm);
            let i = v * w + u;
            // consume the same draws for every pixel so subsets are stable
            let (pick, atten): (f64, f64) = (
                rng.random(),
                rng.random_range(NoiseModel::MIN_CONFIDENCE..=1.0),
            );
            if let Some(t) = hit {
                depth[i] = (t / norm) as f32;
                conf[i] = if pick < noise.fraction {
                    atten as f32
                } else {
                    1.0
                };
            }
        }
    }
    Ok((DepthMap::new(w, h, depth)?, ConfidenceMap::new(w, h, conf)?))
}

fn march(hf: &HeightField, origin: &Vector3<f64>, dir: &Vector3<f64>, t_start: f64) -> Option<f64> {
    let gap = |t: f64| -> Option<f64> {
        let p = origin + dir * t;
        hf.elevation_at(p.x, p.z).map(|e| p.y - e)
    };
    let mut prev = t_start;
    if gap(prev)? <= 0.0 {
        return None;
    }
    let mut t = prev;
    loop {
        let g = gap(t)?;
        if g <= 0.0 {
            break;
        }
        prev = t;
        t += (0.4 * g).clamp(0.02 + 0.002 * t, 4.0);
        if t > FAR_DISTANCE {
            return None;
        }
    }
    let (mut lo, mut hi) = (prev, t);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        match gap(mid) {
            Some(g) if g > 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    Some(hi)
}

/// One first-person control input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Forward,
    Back,
    Left,
    Right,
    TurnLeft,
    TurnRight,
    LookUp,
    LookDown,
}

impl Action {
    pub const ALL: [Action; 8] = [
        Action::Forward,
        Action::Back,
        Action::Left,
        Action::Right,
        Action::TurnLeft,
        Action::TurnRight,
        Action::LookUp,
        Action::LookDown,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::Back => "back",
            Action::Left => "left",
            Action::Right => "right",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::LookUp => "look_up",
            Action::LookDown => "look_down",
        }
    }
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.token() == s)
            .ok_or_else(|| invalid(format!("unknown action `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScript {
    pub initial: Pose,
    pub actions: Vec<Action>,
    /// Meters per translation action.
    pub step_move: f64,
    /// Radians per rotation action.
    pub step_turn: f64,
}

impl TrajectoryScript {
    pub fn new(
        initial: Pose,
        actions: Vec<Action>,
        step_move: f64,
        step_turn: f64,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(invalid("trajectory script has no actions"));
        }
        if !(step_move.is_finite() && step_turn.is_finite()) {
            return Err(invalid("step sizes must be finite"));
        }
        Ok(Self {
            initial,
            actions,
            step_move,
            step_turn,
        })
    }

    /// Number of poses the script unrolls to (initial pose included).
    pub fn frame_count(&self) -> usize {
        self.actions.len() + 1
    }

    /// Parses the line format written by `Display`.
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// pose <x> <y> <z> <pitch> <yaw>
    /// step_move <meters>
    /// step_turn <radians>
    /// forward
    /// turn_left
    /// ...
    /// ```
    ///
    /// The three header lines must all appear, in any order, before the
    /// first action token.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pose = None;
        let mut step_move = None;
        let mut step_turn = None;
        let mut actions = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| invalid(format!("trajectory line {}: {msg}", lineno + 1));
            let mut fields = line.split_whitespace();
            let key = fields.next().unwrap_or_default();
            let nums = |fields: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                fields
                    .map(|f| {
                        f.parse::<f64>()
                            .map_err(|e| err(format!("bad number `{f}`: {e}")))
                    })
                    .collect()
            };
            let header = matches!(key, "pose" | "step_move" | "step_turn");
            if header && !actions.is_empty() {
                return Err(err(format!("header `{key}` after first action")));
            }
            match key {
                "pose" => {
                    let v = nums(fields)?;
                    if v.len() != 5 {
                        return Err(err("pose needs 5 numbers".into()));
                    }
                    pose = Some(
                        Pose::new(v[0], v[1], v[2], v[3], v[4]).map_err(|e| err(e.to_string()))?,
                    );
                }
                "step_move" | "step_turn" => {
                    let v = nums(fields)?;
                    if v.len() != 1 {
                        return Err(err(format!("{key} needs one number")));
                    }
                    if key == "step_move" {
                        step_move = Some(v[0]);
                    } else {
                        step_turn = Some(v[0]);
                    }
                }
                token => {
                    if fields.next().is_some() {
                        return Err(err(format!("unexpected text after `{token}`")));
                    }
                    actions.push(token.parse::<Action>().map_err(|e| err(e.to_string()))?);
                }
            }
        }
        let missing = |name: &str| invalid(format!("trajectory missing `{name}` header"));
        Self::new(
            pose.ok_or_else(|| missing("pose"))?,
            actions,
            step_move.ok_or_else(|| missing("step_move"))?,
            step_turn.ok_or_else(|| missing("step_turn"))?,
        )
    }
}

impl fmt::Display for TrajectoryScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y, z, pitch, yaw] = self.initial.to_array();
        writeln!(f, "pose {x} {y} {z} {pitch} {yaw}")?;
        writeln!(f, "step_move {}", self.step_move)?;
        writeln!(f, "step_turn {}", self.step_turn)?;
        for a in &self.actions {
            writeln!(f, "{}", a.token())?;
        }
        Ok(())
    }
}

/// Applies the actions in order. Translations stay in the horizontal plane
/// spanned by the current yaw; pitch saturates at +-pi/2.
pub fn unroll_trajectory(script: &TrajectoryScript) -> Vec<Pose> {
    let mut poses = Vec::with_capacity(script.frame_count());
    let p0 = script.initial;
    let (mut x, y, mut z, mut pitch, mut yaw) = (p0.x(), p0.y(), p0.z(), p0.pitch(), p0.yaw());
    poses.push(p0);
    let step = script.step_move;
    for action in &script.actions {
        let (s, c) = yaw.sin_cos();
        match action {
            Action::Forward => (x, z) = (x + step * s, z + step * c),
            Action::Back => (x, z) = (x - step * s, z - step * c),
            // camera +x is the viewer's left
            Action::Left => (x, z) = (x + step * c, z - step * s),
            Action::Right => (x, z) = (x - step * c, z + step * s),
            Action::TurnLeft => yaw += script.step_turn,
            Action::TurnRight => yaw -= script.step_turn,
            Action::LookUp => pitch = (pitch - script.step_turn).clamp(-FRAC_PI_2, FRAC_PI_2),
            Action::LookDown => pitch = (pitch + script.step_turn).clamp(-FRAC_PI_2, FRAC_PI_2),
        }
        let pose = Pose::new(x, y, z, pitch, yaw).expect("unrolled pose stays valid");
        yaw = pose.yaw();
        poses.push(pose);
    }
    poses
}

/// Shape of the generated revisit trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevisitParams {
    pub camera_height: f64,
    pub pitch: f64,
    pub step_move: f64,
    /// Turn per action; corners use `pi/2 / step_turn` actions.
    pub step_turn: f64,
}

impl Default for RevisitParams {
    fn default() -> Self {
        Self {
            camera_height: 12.0,
            pitch: 0.35,
            step_move: 0.5,
            step_turn: FRAC_PI_8,
        }
    }
}

pub fn make_revisit_trajectory(
    seed: u64,
    length: usize,
    loop_count: usize,
) -> Result<TrajectoryScript> {
    make_revisit_trajectory_with(&RevisitParams::default(), seed, length, loop_count)
}

/// Script with `length` poses. With `loop_count = n > 0` it drives the same
/// closed rectangular circuit at least `n + 1` times, so every later lap re-enters
/// the frusta of the first. With `loop_count = 0` it is a straight
/// exploration path with net-zero heading jitter.
pub fn make_revisit_trajectory_with(
    params: &RevisitParams,
    seed: u64,
    length: usize,
    loop_count: usize,
) -> Result<TrajectoryScript> {
    if length < 2 || length < 2 * loop_count {
        return Err(invalid(format!(
            "length {length} too short for {loop_count} loops"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = length - 1;
    let initial = Pose::new(0.0, params.camera_height, 0.0, params.pitch, 0.0)?;
    let mut actions = Vec::with_capacity(budget);
    if loop_count == 0 {
        while actions.len() < budget {
            if budget - actions.len() >= 3 && rng.random_bool(0.1) {
                let (a, b) = if rng.random_bool(0.5) {
                    (Action::TurnLeft, Action::TurnRight)
                } else {
                    (Action::TurnRight, Action::TurnLeft)
                };
                actions.extend([a, b, Action::Forward]);
            } else {
                actions.push(Action::Forward);
            }
        }
    } else {
        let laps = loop_count + 1;
        let corner = (FRAC_PI_2 / params.step_turn).round().max(1.0) as usize;
        let lap_len = budget / laps;
        let forward_total = lap_len.saturating_sub(4 * corner);
        if forward_total < 4 {
            return Err(invalid(format!(
                "length {length} too short for {loop_count} loops"
            )));
        }
        // rectangle sides a, b, a, b
        let half = forward_total / 2;
        let a = rng.random_range((half / 3).max(1)..=(half - (half / 3).max(1)));
        let b = half - a;
        let turn = if rng.random_bool(0.5) {
            Action::TurnLeft
        } else {
            Action::TurnRight
        };
        let mut lap = Vec::with_capacity(lap_len);
        for side in [a, b, a, b] {
            lap.extend(std::iter::repeat_n(Action::Forward, side));
            lap.extend(std::iter::repeat_n(turn, corner));
        }
        // the remainder of the budget re-drives the start of the circuit
        actions.extend(lap.iter().cycle().take(budget).copied());
    }
    TrajectoryScript::new(initial, actions, params.step_move, params.step_turn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_roughness_is_flat() {
        let hf = generate_terrain(9, 16.0, 1.0, 0.0).unwrap();
        assert!(hf.elevations().iter().all(|&h| h == 0.0));
        assert_eq!(hf.elevation_at(3.3, -7.9), Some(0.0));
        assert_eq!(hf.elevation_at(8.5, 0.0), None);
    }

    #[test]
    fn terrain_is_deterministic() {
        let a = generate_terrain(3, 64.0, 1.0, 0.5).unwrap();
        let b = generate_terrain(3, 64.0, 1.0, 0.5).unwrap();
        let c = generate_terrain(4, 64.0, 1.0, 0.5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.elevations(), c.elevations());
    }

    #[test]
    fn terrain_rejects_bad_params() {
        assert!(generate_terrain(0, 0.0, 1.0, 0.5).is_err());
        assert!(generate_terrain(0, 10.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn horizon_view_has_sky_on_upper_rows() {
        let hf = HeightField::flat(256.0, 1.0).unwrap();
        let intr = Intrinsics::from_hfov(32, 20, 70.0).unwrap();
        let pose = Pose::new(0.0, 2.0, 0.0, 0.0, 0.0).unwrap();
        let (depth, conf) = render_depth(&hf, &pose, &intr).unwrap();
        // v grows along world up at zero pitch
        for v in (intr.cy as usize)..intr.height {
            for u in 0..intr.width {
                assert_eq!(depth.get(u, v), 0.0);
                assert_eq!(conf.get(u, v), 0.0);
            }
        }
        assert!(depth.get(16, 0) > 0.0);
    }

    #[test]
    fn outside_extent_is_error() {
        let hf = HeightField::flat(10.0, 1.0).unwrap();
        let pose = Pose::new(50.0, 2.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            render_depth(&hf, &pose, &Intrinsics::default()),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn noise_attenuates_requested_fraction() {
        let hf = HeightField::flat(256.0, 1.0).unwrap();
        let intr = Intrinsics::from_hfov(64, 40, 70.0).unwrap();
        let pose = Pose::new(0.0, 5.0, 0.0, FRAC_PI_2, 0.0).unwrap();
        let noise = NoiseModel {
            fraction: 0.25,
            seed: 11,
        };
        let (_, conf) = render_depth_noisy(&hf, &pose, &intr, &noise, 3).unwrap();
        let low = conf.values().iter().filter(|&&c| c < 1.0).count() as f64 / conf.len() as f64;
        assert!((low - 0.25).abs() < 0.05, "attenuated fraction {low}");
        assert!(conf.values().iter().all(|&c| c >= 0.3));
        let (_, again) = render_depth_noisy(&hf, &pose, &intr, &noise, 3).unwrap();
        assert_eq!(conf, again);
    }

    #[test]
    fn translations_follow_yaw() {
        let initial = Pose::new(0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        let s = TrajectoryScript::new(initial, vec![Action::Forward; 4], 1.0, 0.1).unwrap();
        let last = *unroll_trajectory(&s).last().unwrap();
        assert_relative_eq!(
            last.position(),
            Vector3::new(0.0, 1.0, 4.0),
            epsilon = 1e-12
        );

        let s = TrajectoryScript::new(initial, vec![Action::TurnLeft; 4], 1.0, FRAC_PI_2).unwrap();
        let last = *unroll_trajectory(&s).last().unwrap();
        assert!(normalize_diff(last.yaw(), initial.yaw()) < 1e-12);
    }

    fn normalize_diff(a: f64, b: f64) -> f64 {
        crate::geometry::normalize_angle(a - b).abs()
    }

    #[test]
    fn out_and_back_closes() {
        let initial = Pose::new(3.0, 5.0, -2.0, 0.2, 0.7).unwrap();
        let mut actions = vec![Action::Forward; 100];
        actions.extend([Action::TurnLeft; 2]);
        actions.extend([Action::Forward; 100]);
        let s = TrajectoryScript::new(initial, actions, 0.5, FRAC_PI_2).unwrap();
        let last = *unroll_trajectory(&s).last().unwrap();
        assert!((last.position() - initial.position()).norm() < 1e-9);
        assert!(normalize_diff(last.yaw(), initial.yaw() + PI) < 1e-12);
    }

    #[test]
    fn pitch_saturates() {
        let s =
            TrajectoryScript::new(Pose::identity(), vec![Action::LookDown; 10], 1.0, 0.5).unwrap();
        assert_eq!(unroll_trajectory(&s).last().unwrap().pitch(), FRAC_PI_2);
    }

    #[test]
    fn script_text_round_trip() {
        let s = make_revisit_trajectory(5, 120, 2).unwrap();
        let text = s.to_string();
        assert_eq!(TrajectoryScript::parse(&text).unwrap(), s);
        assert!(TrajectoryScript::parse("pose 0 0 0 0 0\nstep_move 1\nforward\n").is_err());
        assert!(
            TrajectoryScript::parse("pose 0 0 0 0 0\nstep_move 1\nstep_turn 1\njump\n").is_err()
        );
        assert!(TrajectoryScript::parse("pose 0 0 0 0 0\nstep_move 1\nstep_turn 1\n").is_err());
        assert!(
            TrajectoryScript::parse("pose 0 0 0 0 0\nstep_move 1\nforward\nstep_turn 1\n").is_err()
        );
    }

    #[test]
    fn exploration_never_returns() {
        let s = make_revisit_trajectory(1, 200, 0).unwrap();
        assert_eq!(s.frame_count(), 200);
        let poses = unroll_trajectory(&s);
        for w in poses.windows(2) {
            assert!(w[1].z() >= w[0].z());
            assert!(w[1].yaw().abs() <= s.step_turn + 1e-12);
        }
    }

    #[test]
    fn revisit_script_is_seeded() {
        assert_eq!(
            make_revisit_trajectory(8, 300, 2).unwrap(),
            make_revisit_trajectory(8, 300, 2).unwrap()
        );
        let s = make_revisit_trajectory(8, 300, 2).unwrap();
        assert_eq!(s.frame_count(), 300);
        assert!(make_revisit_trajectory(8, 3, 2).is_err());
    }
}
