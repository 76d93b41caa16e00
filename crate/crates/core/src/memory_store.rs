//! The global geometry: a voxel-capped point cloud whose points remember the
//! keyframe they came from, keyframe gating by novel coverage, and windowed
//! integration with cross-window scale alignment.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use smallvec::SmallVec;

use crate::error::{invalid, Result};
use crate::geometry::{backproject, extrinsics_from_pose, Intrinsics, Pose, WorldPoint};
use crate::raster::{ConfidenceMap, DepthMap, MIN_VALID_DEPTH};
use crate::scale_alignment::{
    align_window, apply_scale, detect_overlap, FilterParams, OverlapPair,
};
use crate::visibility::{depth_tolerance, splat_radius, to_screen, Frustum};

pub const DEFAULT_VOXEL_SIZE: f64 = 0.5;
pub const DEFAULT_MAX_PER_VOXEL: usize = 4;
pub const DEFAULT_NOVEL_THRESHOLD: f64 = 0.15;
pub const DEFAULT_CONTEXT_LEN: usize = 16;
pub const DEFAULT_TAU_HIST: usize = DEFAULT_CONTEXT_LEN / 2;
pub const DEFAULT_WINDOW_CAPACITY: usize = 8;
pub const DEFAULT_WINDOW_OVERLAP: usize = 2;
pub const DEFAULT_RASTER_WIDTH: usize = 96;
pub const DEFAULT_RASTER_HEIGHT: usize = 56;

pub type VoxelKey = [i32; 3];

/// A stored world point. Positions are kept in `f32`, matching the snapshot
/// layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapPoint {
    pub position: [f32; 3],
    pub source: u32,
    pub confidence: f32,
}

impl MapPoint {
    pub fn from_world(p: &WorldPoint) -> Self {
        Self {
            position: [
                p.position.x as f32,
                p.position.y as f32,
                p.position.z as f32,
            ],
            source: p.frame_id,
            confidence: p.confidence,
        }
    }

    pub fn position_f64(&self) -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::new(
            self.position[0] as f64,
            self.position[1] as f64,
            self.position[2] as f64,
        )
    }

    /// True when `self` outranks `other` for a voxel slot: higher confidence,
    /// then older source frame.
    #[inline]
    fn outranks(&self, other: &MapPoint) -> bool {
        match self.confidence.total_cmp(&other.confidence) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.source < other.source,
        }
    }
}

pub fn voxel_key(position: &[f32; 3], voxel_size: f64) -> VoxelKey {
    position.map(|c| (c as f64 / voxel_size).floor() as i32)
}

/// Keeps at most `max_per_voxel` points per cell, preferring higher
/// confidence, then lower frame id, then earlier input order. Output lists
/// cells in order of first appearance, best point first.
pub fn voxel_downsample(
    points: &[MapPoint],
    voxel_size: f64,
    max_per_voxel: usize,
) -> Result<Vec<MapPoint>> {
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(invalid(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }
    if max_per_voxel == 0 {
        return Err(invalid("max points per voxel must be at least 1"));
    }
    let mut order: Vec<VoxelKey> = Vec::new();
    let mut cells: HashMap<VoxelKey, Vec<MapPoint>> = HashMap::new();
    for p in points {
        let key = voxel_key(&p.position, voxel_size);
        let cell = cells.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        let at = cell
            .iter()
            .position(|q| p.outranks(q))
            .unwrap_or(cell.len());
        if at < max_per_voxel {
            cell.insert(at, *p);
            cell.truncate(max_per_voxel);
        }
    }
    Ok(order
        .iter()
        .flat_map(|k| cells.remove(k).unwrap_or_default())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelCell {
    pub key: VoxelKey,
    pub points: SmallVec<[MapPoint; 4]>,
}

/// Voxel-indexed world point cloud. Cells keep their points sorted by rank
/// and are listed in creation order, so iteration is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalGeometry {
    voxel_size: f64,
    max_per_voxel: usize,
    merge_radius: f64,
    cells: Vec<VoxelCell>,
    lookup: HashMap<VoxelKey, usize>,
    len: usize,
}

impl GlobalGeometry {
    /// Points closer than a quarter voxel to a better-ranked point in the
    /// same cell are absorbed.
    pub fn new(voxel_size: f64, max_per_voxel: usize) -> Result<Self> {
        Self::with_merge_radius(voxel_size, max_per_voxel, voxel_size / 4.0)
    }

    pub fn with_merge_radius(
        voxel_size: f64,
        max_per_voxel: usize,
        merge_radius: f64,
    ) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(invalid(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        if max_per_voxel == 0 {
            return Err(invalid("max points per voxel must be at least 1"));
        }
        if !(merge_radius.is_finite() && merge_radius >= 0.0) {
            return Err(invalid("merge radius must be non-negative"));
        }
        Ok(Self {
            voxel_size,
            max_per_voxel,
            merge_radius,
            cells: Vec::new(),
            lookup: HashMap::new(),
            len: 0,
        })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn max_per_voxel(&self) -> usize {
        self.max_per_voxel
    }

    pub fn merge_radius(&self) -> f64 {
        self.merge_radius
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cells(&self) -> &[VoxelCell] {
        &self.cells
    }

    pub fn cell(&self, key: &VoxelKey) -> Option<&VoxelCell> {
        self.lookup.get(key).map(|&i| &self.cells[i])
    }

    pub fn points(&self) -> impl Iterator<Item = &MapPoint> + '_ {
        self.cells.iter().flat_map(|c| c.points.iter())
    }

    pub fn clear(&mut self) {
        self.cells.clear();
        self.lookup.clear();
        self.len = 0;
    }

    /// Inserts one point; returns whether it was retained.
    pub fn insert(&mut self, p: MapPoint) -> bool {
        let key = voxel_key(&p.position, self.voxel_size);
        let idx = *self.lookup.entry(key).or_insert_with(|| {
            self.cells.push(VoxelCell {
                key,
                points: SmallVec::new(),
            });
            self.cells.len() - 1
        });
        let cap = self.max_per_voxel;
        let r2 = (self.merge_radius * self.merge_radius) as f32;
        let cell = &mut self.cells[idx].points;
        let before = cell.len();
        if r2 > 0.0 {
            let near = |q: &MapPoint| {
                let d: f32 = (0..3)
                    .map(|i| (q.position[i] - p.position[i]).powi(2))
                    .sum();
                d <= r2
            };
            if let Some(j) = cell.iter().position(near) {
                if !p.outranks(&cell[j]) {
                    return false;
                }
                cell.remove(j);
            }
        }
        let at = cell
            .iter()
            .position(|q| p.outranks(q))
            .unwrap_or(cell.len());
        // a merge removal always leaves room above the removed slot
        if at >= cap {
            return false;
        }
        cell.insert(at, p);
        cell.truncate(cap);
        self.len = self.len + cell.len() - before;
        true
    }

    pub fn extend_from_world(&mut self, points: &[WorldPoint]) -> usize {
        points
            .iter()
            .filter(|p| self.insert(MapPoint::from_world(p)))
            .count()
    }

    /// Distinct source frame ids.
    pub fn sources(&self) -> BTreeSet<u32> {
        self.points().map(|p| p.source).collect()
    }

    pub fn max_cell_occupancy(&self) -> usize {
        self.cells.iter().map(|c| c.points.len()).max().unwrap_or(0)
    }

    /// Points in cells whose bounding sphere may intersect the frustum.
    pub fn for_each_in_frustum(&self, frustum: &Frustum, mut f: impl FnMut(&MapPoint)) {
        let radius = 0.5 * 3f64.sqrt() * self.voxel_size;
        for cell in &self.cells {
            let center = nalgebra::Vector3::new(
                (cell.key[0] as f64 + 0.5) * self.voxel_size,
                (cell.key[1] as f64 + 0.5) * self.voxel_size,
                (cell.key[2] as f64 + 0.5) * self.voxel_size,
            );
            if frustum.may_contain_sphere(&center, radius) {
                cell.points.iter().for_each(&mut f);
            }
        }
    }

    /// Checks the cell assignment and occupancy invariants.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut total = 0;
        for (i, cell) in self.cells.iter().enumerate() {
            if self.lookup.get(&cell.key) != Some(&i) {
                return Err(format!("cell {:?} missing from lookup", cell.key));
            }
            if cell.points.len() > self.max_per_voxel {
                return Err(format!(
                    "cell {:?} holds {} points",
                    cell.key,
                    cell.points.len()
                ));
            }
            for p in &cell.points {
                if voxel_key(&p.position, self.voxel_size) != cell.key {
                    return Err(format!("point {:?} filed under {:?}", p.position, cell.key));
                }
            }
            total += cell.points.len();
        }
        if total != self.len || self.lookup.len() != self.cells.len() {
            return Err("point count out of sync".into());
        }
        Ok(())
    }
}

/// Knobs for coverage rendering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    pub width: usize,
    pub height: usize,
}

impl Default for CoverageParams {
    fn default() -> Self {
        Self {
            width: DEFAULT_RASTER_WIDTH,
            height: DEFAULT_RASTER_HEIGHT,
        }
    }
}

/// Samples `depth` at the pixel centers of a `width x height` raster.
fn resample_nearest(depth: &DepthMap, width: usize, height: usize) -> Vec<f64> {
    let sx = depth.width() as f64 / width as f64;
    let sy = depth.height() as f64 / height as f64;
    let mut out = Vec::with_capacity(width * height);
    for ry in 0..height {
        let v = (((ry as f64 + 0.5) * sy) as usize).min(depth.height() - 1);
        for rx in 0..width {
            let u = (((rx as f64 + 0.5) * sx) as usize).min(depth.width() - 1);
            out.push(depth.get(u, v) as f64);
        }
    }
    out
}

/// Fraction of the frame's valid pixels that the stored geometry does not
/// explain. Stored points are splatted from `pose` at the coverage raster
/// resolution; a splatted pixel counts as explained when the point's depth
/// lies within [`depth_tolerance`] of the frame's own depth there.
/// Empty geometry gives 1.0; a frame with no valid pixels gives 0.0.
pub fn novel_coverage(
    pose: &Pose,
    depth: &DepthMap,
    geo: &GlobalGeometry,
    intr: &Intrinsics,
    params: &CoverageParams,
) -> f64 {
    coverage_against(&[geo], pose, depth, intr, params)
}

pub(crate) fn coverage_against(
    sources: &[&GlobalGeometry],
    pose: &Pose,
    depth: &DepthMap,
    intr: &Intrinsics,
    params: &CoverageParams,
) -> f64 {
    let (w, h) = (params.width, params.height);
    let observed = resample_nearest(depth, w, h);
    let valid = observed
        .iter()
        .filter(|&&d| d >= MIN_VALID_DEPTH as f64)
        .count();
    if valid == 0 {
        return 0.0;
    }
    if sources.iter().all(|g| g.is_empty()) {
        return 1.0;
    }
    let raster = intr.resized(w, h);
    let ext = extrinsics_from_pose(pose);
    let frustum = Frustum::new(&raster, &ext);
    let mut explained = vec![false; w * h];
    for geo in sources {
        let spacing = geo.voxel_size();
        geo.for_each_in_frustum(&frustum, |p| {
            let Some(s) = to_screen(&p.position_f64(), p.source, &raster, &ext) else {
                return;
            };
            let r = splat_radius(s.depth, spacing, raster.fx);
            let tol = depth_tolerance(s.depth);
            for y in s.py.saturating_sub(r)..=(s.py + r).min(h - 1) {
                for x in s.px.saturating_sub(r)..=(s.px + r).min(w - 1) {
                    let i = y * w + x;
                    let d = observed[i];
                    if d >= MIN_VALID_DEPTH as f64
                        && (d - s.depth).abs() <= tol.max(depth_tolerance(d))
                    {
                        explained[i] = true;
                    }
                }
            }
        });
    }
    let covered = explained.iter().filter(|&&e| e).count();
    (valid - covered) as f64 / valid as f64
}

/// Keyframe rule: enough novel coverage, or too little retrieved history.
#[inline]
pub fn keyframe_decision(
    coverage: f64,
    retrieval_count: usize,
    novel_threshold: f64,
    tau_hist: usize,
) -> bool {
    coverage >= novel_threshold || retrieval_count < tau_hist
}

/// Computes coverage for the frame and applies [`keyframe_decision`].
#[allow(clippy::too_many_arguments)]
pub fn is_keyframe(
    pose: &Pose,
    depth: &DepthMap,
    geo: &GlobalGeometry,
    intr: &Intrinsics,
    params: &CoverageParams,
    retrieval_count: usize,
    novel_threshold: f64,
    tau_hist: usize,
) -> bool {
    // skip the render when the history clause already decides
    retrieval_count < tau_hist
        || keyframe_decision(
            novel_coverage(pose, depth, geo, intr, params),
            retrieval_count,
            novel_threshold,
            tau_hist,
        )
}

/// One observed frame. Non-keyframes carry no pixel payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub id: u32,
    pub pose: Pose,
    pub depth: Option<DepthMap>,
    pub confidence: Option<ConfidenceMap>,
    pub is_keyframe: bool,
}

impl FrameRecord {
    pub fn keyframe(id: u32, pose: Pose, depth: DepthMap, confidence: ConfidenceMap) -> Self {
        Self {
            id,
            pose,
            depth: Some(depth),
            confidence: Some(confidence),
            is_keyframe: true,
        }
    }

    pub fn metadata(id: u32, pose: Pose) -> Self {
        Self {
            id,
            pose,
            depth: None,
            confidence: None,
            is_keyframe: false,
        }
    }

    pub fn without_payload(&self) -> Self {
        Self {
            depth: None,
            confidence: None,
            ..self.clone()
        }
    }
}

/// Fresh depth for a frame already in the store, estimated inside a new
/// window; the scale reference for that window.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapFrame {
    pub id: u32,
    pub depth: DepthMap,
    pub confidence: ConfidenceMap,
}

/// Keyframes waiting for joint processing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProcessingWindow {
    pub capacity: usize,
    pub pending: Vec<FrameRecord>,
    pub retrieved: Vec<u32>,
    pub overlap: Vec<OverlapFrame>,
}

impl ProcessingWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            ..Default::default()
        }
    }

    pub fn is_full(&self) -> bool {
        self.pending.len() >= self.capacity
    }

    pub fn frame_ids(&self) -> BTreeSet<u32> {
        self.pending
            .iter()
            .map(|f| f.id)
            .chain(self.overlap.iter().map(|f| f.id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationReport {
    pub scale: f64,
    pub fallback: bool,
    pub correspondences: usize,
    pub overlap_frames: Vec<u32>,
    pub keyframes: Vec<u32>,
    pub points_added: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreParams {
    pub voxel_size: f64,
    pub max_per_voxel: usize,
    pub filter: FilterParams,
}

impl Default for StoreParams {
    fn default() -> Self {
        Self {
            voxel_size: DEFAULT_VOXEL_SIZE,
            max_per_voxel: DEFAULT_MAX_PER_VOXEL,
            filter: FilterParams::default(),
        }
    }
}

/// Global geometry plus the frame table it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    intrinsics: Intrinsics,
    params: StoreParams,
    geometry: GlobalGeometry,
    frames: BTreeMap<u32, FrameRecord>,
}

impl MemoryStore {
    pub fn new(intrinsics: Intrinsics, params: StoreParams) -> Result<Self> {
        params.filter.validate()?;
        let geometry = GlobalGeometry::new(params.voxel_size, params.max_per_voxel)?;
        Ok(Self {
            intrinsics,
            params,
            geometry,
            frames: BTreeMap::new(),
        })
    }

    pub fn from_parts(
        intrinsics: Intrinsics,
        params: StoreParams,
        geometry: GlobalGeometry,
        frames: Vec<FrameRecord>,
    ) -> Result<Self> {
        let frames: BTreeMap<u32, FrameRecord> = frames.into_iter().map(|f| (f.id, f)).collect();
        for p in geometry.points() {
            if !frames.get(&p.source).is_some_and(|f| f.is_keyframe) {
                return Err(invalid(format!(
                    "point source {} is not a stored keyframe",
                    p.source
                )));
            }
        }
        Ok(Self {
            intrinsics,
            params,
            geometry,
            frames,
        })
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn params(&self) -> &StoreParams {
        &self.params
    }

    pub fn geometry(&self) -> &GlobalGeometry {
        &self.geometry
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> + '_ {
        self.frames.values()
    }

    pub fn frame(&self, id: u32) -> Option<&FrameRecord> {
        self.frames.get(&id)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn keyframe_count(&self) -> usize {
        self.frames.values().filter(|f| f.is_keyframe).count()
    }

    pub fn keyframe_ids(&self) -> BTreeSet<u32> {
        self.frames
            .values()
            .filter(|f| f.is_keyframe)
            .map(|f| f.id)
            .collect()
    }

    /// Records a frame that was not admitted; only its pose is kept.
    pub fn record_non_keyframe(&mut self, id: u32, pose: Pose) -> Result<()> {
        if self.frames.contains_key(&id) {
            return Err(invalid(format!("frame {id} already stored")));
        }
        self.frames.insert(id, FrameRecord::metadata(id, pose));
        Ok(())
    }

    /// Aligns the window's scale against overlapping stored keyframes,
    /// back-projects the pending keyframes, and folds them into the voxel
    /// grid.
    pub fn integrate_window(&mut self, window: ProcessingWindow) -> Result<IntegrationReport> {
        for f in &window.pending {
            if self.frames.contains_key(&f.id) {
                return Err(invalid(format!("frame {} already stored", f.id)));
            }
            if f.depth.is_none() || f.confidence.is_none() {
                return Err(invalid(format!(
                    "pending frame {} has no depth payload",
                    f.id
                )));
            }
        }
        let window_ids: BTreeSet<u32> = window.overlap.iter().map(|f| f.id).collect();
        let stored: BTreeSet<u32> = self
            .frames
            .values()
            .filter(|f| f.is_keyframe && f.depth.is_some())
            .map(|f| f.id)
            .collect();
        let overlap = detect_overlap(&window_ids, &stored);
        let pairs: Vec<OverlapPair<'_>> = window
            .overlap
            .iter()
            .filter(|f| overlap.contains(&f.id))
            .map(|f| {
                let old = &self.frames[&f.id];
                OverlapPair {
                    d_old: old.depth.as_ref().expect("stored keyframe depth"),
                    c_old: old.confidence.as_ref().expect("stored keyframe confidence"),
                    d_new: &f.depth,
                    c_new: &f.confidence,
                }
            })
            .collect();
        let alignment = align_window(&pairs, &self.params.filter)?;
        if overlap.is_empty() && !self.geometry.is_empty() {
            log::warn!("window without overlap frames; using s = 1");
        }

        let depths: Vec<DepthMap> = window
            .pending
            .iter()
            .map(|f| f.depth.clone().unwrap())
            .collect();
        let aligned = apply_scale(&depths, alignment.scale)?;
        let mut points_added = 0;
        let mut keyframes = Vec::with_capacity(window.pending.len());
        for (frame, depth) in window.pending.into_iter().zip(aligned) {
            let conf = frame.confidence.expect("checked above");
            let ext = extrinsics_from_pose(&frame.pose);
            let pts = backproject(&depth, &conf, &self.intrinsics, &ext, frame.id)?;
            points_added += self.geometry.extend_from_world(&pts);
            keyframes.push(frame.id);
            self.frames.insert(
                frame.id,
                FrameRecord::keyframe(frame.id, frame.pose, depth, conf),
            );
        }
        Ok(IntegrationReport {
            scale: alignment.scale,
            fallback: alignment.fallback,
            correspondences: alignment.correspondences,
            overlap_frames: overlap.into_iter().collect(),
            keyframes,
            points_added,
        })
    }

    /// Every point's source is a stored keyframe.
    pub fn check_source_integrity(&self) -> std::result::Result<(), String> {
        for p in self.geometry.points() {
            match self.frames.get(&p.source) {
                Some(f) if f.is_keyframe => {}
                _ => {
                    return Err(format!(
                        "point source {} is not a stored keyframe",
                        p.source
                    ))
                }
            }
        }
        self.geometry.check_invariants()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{render_depth, HeightField};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn pt(x: f32, y: f32, z: f32, source: u32, confidence: f32) -> MapPoint {
        MapPoint {
            position: [x, y, z],
            source,
            confidence,
        }
    }

    #[test]
    fn distinct_cells_unchanged() {
        let pts: Vec<MapPoint> = (0..10).map(|i| pt(i as f32, 0.2, 0.2, i, 0.5)).collect();
        assert_eq!(voxel_downsample(&pts, 0.5, 1).unwrap(), pts);
    }

    #[test]
    fn identical_positions_collapse_to_best() {
        let pts: Vec<MapPoint> = (0..100)
            .map(|i| pt(1.1, 2.2, 3.3, i, (i % 17) as f32 / 16.0))
            .collect();
        let out = voxel_downsample(&pts, 0.5, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].confidence, 1.0);
        assert_eq!(out[0].source, 16);
        assert!(voxel_downsample(&pts, 0.0, 1).is_err());
        assert!(voxel_downsample(&pts, 1.0, 0).is_err());
    }

    fn reference_downsample(points: &[MapPoint], voxel: f64, cap: usize) -> Vec<MapPoint> {
        let mut groups: BTreeMap<[i64; 3], Vec<(usize, MapPoint)>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            let k = p.position.map(|c| (c as f64 / voxel).floor() as i64);
            groups.entry(k).or_default().push((i, *p));
        }
        let mut out = Vec::new();
        for (_, mut g) in groups {
            g.sort_by(|(ia, a), (ib, b)| {
                b.confidence
                    .total_cmp(&a.confidence)
                    .then(a.source.cmp(&b.source))
                    .then(ia.cmp(ib))
            });
            out.extend(g.into_iter().take(cap).map(|(_, p)| p));
        }
        out
    }

    fn canonical(mut v: Vec<MapPoint>) -> Vec<(u32, u32, u32, u32, u32)> {
        let mut k: Vec<_> = v
            .drain(..)
            .map(|p| {
                (
                    p.position[0].to_bits(),
                    p.position[1].to_bits(),
                    p.position[2].to_bits(),
                    p.source,
                    p.confidence.to_bits(),
                )
            })
            .collect();
        k.sort();
        k
    }

    proptest! {
        #[test]
        fn downsample_matches_group_by(
            raw in prop::collection::vec((-4.0f32..4.0, -4.0f32..4.0, -4.0f32..4.0, 0u32..20, 0u8..5), 0..400),
            cap in 1usize..5,
        ) {
            let pts: Vec<MapPoint> = raw.iter().map(|&(x, y, z, s, c)| pt(x, y, z, s, c as f32 / 4.0)).collect();
            let fast = voxel_downsample(&pts, 1.0, cap).unwrap();
            let slow = reference_downsample(&pts, 1.0, cap);
            prop_assert_eq!(canonical(fast), canonical(slow));
        }

        #[test]
        fn geometry_without_merge_equals_downsample(
            raw in prop::collection::vec((-4.0f32..4.0, -4.0f32..4.0, -4.0f32..4.0, 0u32..20, 0u8..5), 0..400),
        ) {
            let pts: Vec<MapPoint> = raw.iter().map(|&(x, y, z, s, c)| pt(x, y, z, s, c as f32 / 4.0)).collect();
            let mut geo = GlobalGeometry::with_merge_radius(1.0, 3, 0.0).unwrap();
            for p in &pts {
                geo.insert(*p);
            }
            prop_assert!(geo.check_invariants().is_ok());
            let expected = voxel_downsample(&pts, 1.0, 3).unwrap();
            prop_assert_eq!(geo.points().copied().collect::<Vec<_>>(), expected);
        }
    }

    #[test]
    fn merged_duplicates_are_absorbed() {
        let mut geo = GlobalGeometry::new(1.0, 4).unwrap();
        assert!(geo.insert(pt(0.5, 0.5, 0.5, 1, 0.5)));
        assert!(!geo.insert(pt(0.5, 0.5, 0.5, 2, 0.5)));
        assert!(geo.insert(pt(0.55, 0.5, 0.5, 3, 0.9)));
        assert_eq!(geo.len(), 1);
        assert_eq!(geo.points().next().unwrap().source, 3);
        assert!(geo.insert(pt(0.1, 0.1, 0.1, 4, 0.1)));
        assert_eq!(geo.len(), 2);
        geo.check_invariants().unwrap();
    }

    fn test_frame() -> (HeightField, Intrinsics, Pose) {
        let hf = crate::world::generate_terrain(42, 128.0, 1.0, 0.5).unwrap();
        let intr = Intrinsics::from_hfov(96, 56, 70.0).unwrap();
        let (_, hi) = hf.min_max();
        let pose = Pose::new(0.0, hi + 6.0, 0.0, 0.5, 0.4).unwrap();
        (hf, intr, pose)
    }

    #[test]
    fn empty_geometry_is_fully_novel() {
        let (hf, intr, pose) = test_frame();
        let (depth, _) = render_depth(&hf, &pose, &intr).unwrap();
        let geo = GlobalGeometry::new(0.5, 4).unwrap();
        assert_eq!(
            novel_coverage(&pose, &depth, &geo, &intr, &CoverageParams::default()),
            1.0
        );
        assert!(is_keyframe(
            &pose,
            &depth,
            &geo,
            &intr,
            &CoverageParams::default(),
            0,
            0.15,
            8
        ));
    }

    #[test]
    fn gate_clauses() {
        assert!(!keyframe_decision(0.0, 8, 0.15, 8));
        assert!(keyframe_decision(0.149, 7, 0.15, 8));
        assert!(keyframe_decision(0.15, 8, 0.15, 8));
    }

    #[test]
    fn integrate_one_frame_then_duplicate() {
        let (hf, intr, pose) = test_frame();
        let (depth, conf) = render_depth(&hf, &pose, &intr).unwrap();
        let valid = depth.valid_count();
        let mut store = MemoryStore::new(intr, StoreParams::default()).unwrap();
        let mut win = ProcessingWindow::new(8);
        win.pending
            .push(FrameRecord::keyframe(0, pose, depth.clone(), conf.clone()));
        let r = store.integrate_window(win).unwrap();
        assert!(r.fallback);
        assert_eq!(r.scale, 1.0);
        let first = store.geometry().len();
        assert!(first <= valid && first > valid / 4, "{first} of {valid}");
        assert_eq!(r.points_added, first);

        let mut win = ProcessingWindow::new(8);
        win.pending
            .push(FrameRecord::keyframe(1, pose, depth, conf));
        store.integrate_window(win).unwrap();
        let added = store.geometry().len() - first;
        assert!(
            added * 100 <= first,
            "duplicate pass added {added} to {first}"
        );
        store.check_source_integrity().unwrap();
        assert!(store.geometry().max_cell_occupancy() <= DEFAULT_MAX_PER_VOXEL);
    }

    #[test]
    fn self_render_is_not_novel() {
        let (hf, intr, pose) = test_frame();
        let (depth, conf) = render_depth(&hf, &pose, &intr).unwrap();
        let mut store = MemoryStore::new(intr, StoreParams::default()).unwrap();
        let mut win = ProcessingWindow::new(8);
        win.pending
            .push(FrameRecord::keyframe(0, pose, depth.clone(), conf));
        store.integrate_window(win).unwrap();
        let c = novel_coverage(
            &pose,
            &depth,
            store.geometry(),
            &intr,
            &CoverageParams::default(),
        );
        assert!(c < 0.1, "self coverage {c}");
    }

    #[test]
    fn opposite_view_is_novel() {
        let (hf, intr, pose) = test_frame();
        let (depth, conf) = render_depth(&hf, &pose, &intr).unwrap();
        let mut store = MemoryStore::new(intr, StoreParams::default()).unwrap();
        let mut win = ProcessingWindow::new(8);
        win.pending
            .push(FrameRecord::keyframe(0, pose, depth, conf));
        store.integrate_window(win).unwrap();
        let back = Pose::new(
            pose.x(),
            pose.y(),
            pose.z(),
            pose.pitch(),
            pose.yaw() + std::f64::consts::PI,
        )
        .unwrap();
        let (depth, _) = render_depth(&hf, &back, &intr).unwrap();
        let c = novel_coverage(
            &back,
            &depth,
            store.geometry(),
            &intr,
            &CoverageParams::default(),
        );
        assert!(c > 0.9, "opposite coverage {c}");
    }

    #[test]
    fn rejects_duplicate_ids_and_missing_payload() {
        let (_, intr, pose) = test_frame();
        let mut store = MemoryStore::new(intr, StoreParams::default()).unwrap();
        store.record_non_keyframe(3, pose).unwrap();
        assert!(store.record_non_keyframe(3, pose).is_err());
        let mut win = ProcessingWindow::new(8);
        win.pending.push(FrameRecord::metadata(4, pose));
        assert!(store.integrate_window(win).is_err());
    }
}
