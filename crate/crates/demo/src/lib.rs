//! Browser bindings: drive a camera over a seeded terrain, feed each view
//! through the spatial memory, and fit a depth scale between noisy maps.

use geomem::scale_alignment::{estimate_scale, filter_correspondences, FilterParams};
use geomem::world::{generate_terrain, render_depth, HeightField};
use geomem::{ConfidenceMap, DepthMap, Intrinsics, MemoryConfig, Pose, SpatialMemory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const STEP_MOVE: f64 = 0.5;
const STEP_TURN: f64 = std::f64::consts::FRAC_PI_8;

fn js_err(e: geomem::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Outcome of feeding one view into the memory.
#[wasm_bindgen]
pub struct StepReport {
    frame: u32,
    keyframe: bool,
    coverage: f64,
    retrieved: Vec<u32>,
}

#[wasm_bindgen]
impl StepReport {
    #[wasm_bindgen(getter)]
    pub fn frame(&self) -> u32 {
        self.frame
    }

    #[wasm_bindgen(getter)]
    pub fn keyframe(&self) -> bool {
        self.keyframe
    }

    #[wasm_bindgen(getter)]
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    #[wasm_bindgen(getter)]
    pub fn retrieved(&self) -> Vec<u32> {
        self.retrieved.clone()
    }
}

/// A camera walking a seeded terrain with a spatial memory attached.
#[wasm_bindgen]
pub struct Explorer {
    terrain: HeightField,
    intrinsics: Intrinsics,
    memory: SpatialMemory,
    pose: Pose,
    next_id: u32,
    depth: DepthMap,
    confidence: ConfidenceMap,
}

impl Explorer {
    fn pose_after(&self, action: &str) -> Result<Pose, JsValue> {
        let p = &self.pose;
        let (s, c) = p.yaw().sin_cos();
        let (mut x, mut z, mut pitch, mut yaw) = (p.x(), p.z(), p.pitch(), p.yaw());
        match action {
            "forward" => (x, z) = (x + STEP_MOVE * s, z + STEP_MOVE * c),
            "back" => (x, z) = (x - STEP_MOVE * s, z - STEP_MOVE * c),
            "turn_left" => yaw += STEP_TURN,
            "turn_right" => yaw -= STEP_TURN,
            "look_up" => pitch = (pitch - STEP_TURN).max(-1.2),
            "look_down" => pitch = (pitch + STEP_TURN).min(1.4),
            other => return Err(JsValue::from_str(&format!("unknown action `{other}`"))),
        }
        if !self.terrain.contains(x, z) {
            return Err(JsValue::from_str("edge of the terrain"));
        }
        Pose::new(x, p.y(), z, pitch, yaw).map_err(js_err)
    }
}

#[wasm_bindgen]
impl Explorer {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, width: usize, height: usize) -> Result<Explorer, JsValue> {
        let terrain = generate_terrain(seed, 256.0, 1.0, 0.5).map_err(js_err)?;
        let intrinsics = Intrinsics::from_hfov(width, height, 70.0).map_err(js_err)?;
        let memory = SpatialMemory::new(intrinsics, MemoryConfig::default()).map_err(js_err)?;
        let ground = terrain.elevation_at(0.0, 0.0).unwrap_or(0.0);
        let pose = Pose::new(0.0, ground + 12.0, 0.0, 0.35, 0.0).map_err(js_err)?;
        let (depth, confidence) = render_depth(&terrain, &pose, &intrinsics).map_err(js_err)?;
        Ok(Explorer {
            terrain,
            intrinsics,
            memory,
            pose,
            next_id: 0,
            depth,
            confidence,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Current view depth, row-major with row 0 at the bottom; 0 is sky.
    pub fn depth(&self) -> Vec<f32> {
        self.depth.values().to_vec()
    }

    /// `[x, y, z, pitch, yaw]` of the camera.
    pub fn pose(&self) -> Vec<f64> {
        self.pose.to_array().to_vec()
    }

    /// Moves the camera, re-renders, and ingests the new view.
    pub fn step(&mut self, action: &str) -> Result<StepReport, JsValue> {
        self.pose = self.pose_after(action)?;
        let (d, c) = render_depth(&self.terrain, &self.pose, &self.intrinsics).map_err(js_err)?;
        self.depth = d;
        self.confidence = c;
        self.ingest()
    }

    /// Ingests the current view without moving.
    pub fn ingest(&mut self) -> Result<StepReport, JsValue> {
        let id = self.next_id;
        self.next_id += 1;
        let d = self
            .memory
            .ingest(id, self.pose, self.depth.clone(), self.confidence.clone())
            .map_err(js_err)?;
        Ok(StepReport {
            frame: id,
            keyframe: d.is_keyframe,
            coverage: d.coverage,
            retrieved: d.retrieval.frames,
        })
    }

    /// Frames the memory would retrieve for the current pose, with votes
    /// interleaved as `[id, votes, id, votes, ...]`.
    pub fn retrieve(&self) -> Vec<u32> {
        let r = self.memory.retrieve(&self.pose);
        r.frames
            .iter()
            .zip(&r.votes)
            .flat_map(|(&f, &v)| [f, v.min(u32::MAX as u64) as u32])
            .collect()
    }

    #[wasm_bindgen(getter)]
    pub fn keyframes(&self) -> usize {
        self.memory.keyframe_count()
    }

    #[wasm_bindgen(getter)]
    pub fn points(&self) -> usize {
        self.memory.store().geometry().len()
    }
}

/// Recovers `truth` from a synthetic pair of depth maps where the new map
/// carries multiplicative `noise` and `outliers` of its pixels are
/// low-confidence garbage. Returns `[estimate, kept pairs]`.
#[wasm_bindgen]
pub fn fit_scale(truth: f64, noise: f64, outliers: f64, seed: u64) -> Result<Vec<f64>, JsValue> {
    if !(truth > 0.0 && (0.0..1.0).contains(&noise) && (0.0..=1.0).contains(&outliers)) {
        return Err(JsValue::from_str(
            "need truth > 0, 0 <= noise < 1, 0 <= outliers <= 1",
        ));
    }
    let (w, h) = (64, 36);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let old: Vec<f32> = (0..w * h).map(|_| rng.random_range(1.0..80.0)).collect();
    let mut new = Vec::with_capacity(w * h);
    let mut conf = Vec::with_capacity(w * h);
    for d in &old {
        if rng.random_bool(outliers) {
            new.push(rng.random_range(1.0..80.0));
            conf.push(rng.random_range(0.0..0.3));
        } else {
            let n = 1.0
                + if noise > 0.0 {
                    rng.random_range(-noise..noise)
                } else {
                    0.0
                };
            new.push((*d as f64 / truth * n) as f32);
            conf.push(rng.random_range(0.5..1.0));
        }
    }
    let corr = filter_correspondences(
        &DepthMap::new(w, h, old).map_err(js_err)?,
        &DepthMap::new(w, h, new).map_err(js_err)?,
        &ConfidenceMap::filled(w, h, 1.0),
        &ConfidenceMap::new(w, h, conf).map_err(js_err)?,
        &FilterParams::default(),
    )
    .map_err(js_err)?;
    let s = estimate_scale(&corr).map_err(js_err)?;
    Ok(vec![s, corr.len() as f64])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explorer_walks_and_remembers() {
        let mut e = Explorer::new(42, 48, 28).unwrap();
        let first = e.ingest().unwrap();
        assert!(first.keyframe);
        for _ in 0..5 {
            e.step("forward").unwrap();
        }
        assert!(e.keyframes() >= 1);
        assert!(!e.retrieve().is_empty());
        assert_eq!(e.depth().len(), 48 * 28);
    }

    #[test]
    fn scale_fit_recovers_truth() {
        let r = fit_scale(1.7, 0.05, 0.2, 3).unwrap();
        assert!((r[0] - 1.7).abs() / 1.7 < 0.02);
    }
}
