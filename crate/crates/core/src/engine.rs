//! Streaming front end over [`MemoryStore`]: per frame, retrieve history,
//! gate the frame, and integrate keyframes a window at a time.

use crate::error::{invalid, Result};
use crate::geometry::{backproject, extrinsics_from_pose, Intrinsics, Pose};
use crate::memory_store::{
    coverage_against, keyframe_decision, CoverageParams, FrameRecord, GlobalGeometry,
    IntegrationReport, MemoryStore, OverlapFrame, ProcessingWindow, StoreParams,
    DEFAULT_MAX_PER_VOXEL, DEFAULT_NOVEL_THRESHOLD, DEFAULT_RASTER_HEIGHT, DEFAULT_RASTER_WIDTH,
    DEFAULT_TAU_HIST, DEFAULT_VOXEL_SIZE, DEFAULT_WINDOW_CAPACITY, DEFAULT_WINDOW_OVERLAP,
};
use crate::raster::{ConfidenceMap, DepthMap};
use crate::retrieval::{retrieve_over, RetrievalParams, RetrievalResult, DEFAULT_TOP_K};
use crate::scale_alignment::FilterParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryConfig {
    pub voxel_size: f64,
    pub max_per_voxel: usize,
    pub novel_threshold: f64,
    pub tau_hist: usize,
    pub top_k: usize,
    pub window_capacity: usize,
    pub window_overlap: usize,
    pub filter: FilterParams,
    pub raster_width: usize,
    pub raster_height: usize,
    pub occlusion: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            voxel_size: DEFAULT_VOXEL_SIZE,
            max_per_voxel: DEFAULT_MAX_PER_VOXEL,
            novel_threshold: DEFAULT_NOVEL_THRESHOLD,
            tau_hist: DEFAULT_TAU_HIST,
            top_k: DEFAULT_TOP_K,
            window_capacity: DEFAULT_WINDOW_CAPACITY,
            window_overlap: DEFAULT_WINDOW_OVERLAP,
            filter: FilterParams::default(),
            raster_width: DEFAULT_RASTER_WIDTH,
            raster_height: DEFAULT_RASTER_HEIGHT,
            occlusion: true,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(invalid("voxel_size must be positive"));
        }
        if self.max_per_voxel == 0 || self.top_k == 0 || self.window_capacity == 0 {
            return Err(invalid(
                "max_per_voxel, top_k and window_capacity must be at least 1",
            ));
        }
        if self.window_overlap > self.window_capacity {
            return Err(invalid("window_overlap cannot exceed window_capacity"));
        }
        if !(0.0..=1.0).contains(&self.novel_threshold) {
            return Err(invalid("novel_threshold must lie in [0, 1]"));
        }
        if self.raster_width == 0 || self.raster_height == 0 {
            return Err(invalid("raster size must be non-zero"));
        }
        Ok(())
    }

    pub fn store_params(&self) -> StoreParams {
        StoreParams {
            voxel_size: self.voxel_size,
            max_per_voxel: self.max_per_voxel,
            filter: self.filter,
        }
    }

    pub fn retrieval_params(&self) -> RetrievalParams {
        RetrievalParams {
            k: self.top_k,
            width: self.raster_width,
            height: self.raster_height,
            occlusion: self.occlusion,
        }
    }

    pub fn coverage_params(&self) -> CoverageParams {
        CoverageParams {
            width: self.raster_width,
            height: self.raster_height,
        }
    }
}

/// What happened to one ingested frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub frame_id: u32,
    pub is_keyframe: bool,
    pub coverage: f64,
    /// Scale applied to this frame's depth while gating.
    pub scale: f64,
    pub retrieval: RetrievalResult,
    /// Present when this frame completed a window.
    pub integration: Option<IntegrationReport>,
}

/// Raw per-frame depth as estimated inside its window.
#[derive(Debug, Clone)]
struct RawFrame {
    id: u32,
    depth: DepthMap,
    confidence: ConfidenceMap,
}

pub struct SpatialMemory {
    config: MemoryConfig,
    store: MemoryStore,
    // provisional points of keyframes not yet integrated
    staging: GlobalGeometry,
    window: ProcessingWindow,
    window_raw: Vec<RawFrame>,
    carry: Vec<RawFrame>,
    scale: f64,
    last_id: Option<u32>,
}

impl SpatialMemory {
    pub fn new(intrinsics: Intrinsics, config: MemoryConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            store: MemoryStore::new(intrinsics, config.store_params())?,
            staging: GlobalGeometry::new(config.voxel_size, config.max_per_voxel)?,
            window: ProcessingWindow::new(config.window_capacity),
            window_raw: Vec::new(),
            carry: Vec::new(),
            scale: 1.0,
            last_id: None,
            config,
        })
    }

    pub fn config(&self) -> &MemoryConfig {
        &self.config
    }

    pub fn store(&self) -> &MemoryStore {
        &self.store
    }

    pub fn into_store(self) -> MemoryStore {
        self.store
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        self.store.intrinsics()
    }

    pub fn current_scale(&self) -> f64 {
        self.scale
    }

    /// Keyframes admitted so far, integrated or pending.
    pub fn keyframe_count(&self) -> usize {
        self.store.keyframe_count() + self.window.pending.len()
    }

    pub fn pending(&self) -> usize {
        self.window.pending.len()
    }

    /// Votes over stored geometry and keyframes staged in the open window.
    pub fn retrieve(&self, pose: &Pose) -> RetrievalResult {
        retrieve_over(
            pose,
            &[self.store.geometry(), &self.staging],
            self.store.intrinsics(),
            &self.config.retrieval_params(),
        )
    }

    /// Gates a frame given its retrieval result and stages it if admitted.
    pub fn admit(
        &mut self,
        id: u32,
        pose: Pose,
        depth: DepthMap,
        confidence: ConfidenceMap,
        retrieval: RetrievalResult,
    ) -> Result<FrameDecision> {
        if self.last_id.is_some_and(|l| id <= l) {
            return Err(invalid(format!(
                "frame id {id} not after {}",
                self.last_id.unwrap()
            )));
        }
        let intr = *self.store.intrinsics();
        if depth.width() != intr.width
            || depth.height() != intr.height
            || !depth.same_shape(&confidence)
        {
            return Err(invalid("frame size does not match intrinsics"));
        }
        self.last_id = Some(id);
        let scaled = depth.scaled(self.scale);
        let history_short = retrieval.len() < self.config.tau_hist;
        let coverage = if self.store.geometry().is_empty() && self.staging.is_empty() {
            1.0
        } else {
            coverage_against(
                &[self.store.geometry(), &self.staging],
                &pose,
                &scaled,
                &intr,
                &self.config.coverage_params(),
            )
        };
        let is_keyframe = keyframe_decision(
            coverage,
            retrieval.len(),
            self.config.novel_threshold,
            self.config.tau_hist,
        );
        debug_assert!(!history_short || is_keyframe);
        let mut decision = FrameDecision {
            frame_id: id,
            is_keyframe,
            coverage,
            scale: self.scale,
            retrieval,
            integration: None,
        };
        if !is_keyframe {
            self.store.record_non_keyframe(id, pose)?;
            return Ok(decision);
        }
        let pts = backproject(
            &scaled,
            &confidence,
            &intr,
            &extrinsics_from_pose(&pose),
            id,
        )?;
        self.staging.extend_from_world(&pts);
        self.window_raw.push(RawFrame {
            id,
            depth: depth.clone(),
            confidence: confidence.clone(),
        });
        self.window
            .pending
            .push(FrameRecord::keyframe(id, pose, depth, confidence));
        self.window.retrieved = decision.retrieval.frames.clone();
        if self.window.is_full() {
            decision.integration = Some(self.integrate()?);
        }
        Ok(decision)
    }

    /// Retrieval followed by [`SpatialMemory::admit`].
    pub fn ingest(
        &mut self,
        id: u32,
        pose: Pose,
        depth: DepthMap,
        confidence: ConfidenceMap,
    ) -> Result<FrameDecision> {
        let retrieval = self.retrieve(&pose);
        self.admit(id, pose, depth, confidence, retrieval)
    }

    /// Integrates a partially filled window at end of stream.
    pub fn flush(&mut self) -> Result<Option<IntegrationReport>> {
        if self.window.pending.is_empty() {
            return Ok(None);
        }
        self.integrate().map(Some)
    }

    fn integrate(&mut self) -> Result<IntegrationReport> {
        let mut window = std::mem::replace(
            &mut self.window,
            ProcessingWindow::new(self.config.window_capacity),
        );
        // the previous window's tail is re-observed here: its raw depth is
        // this window's estimate for frames the store already holds
        window.overlap = self
            .carry
            .drain(..)
            .map(|r| OverlapFrame {
                id: r.id,
                depth: r.depth,
                confidence: r.confidence,
            })
            .collect();
        let report = self.store.integrate_window(window)?;
        self.scale = report.scale;
        let raw = std::mem::take(&mut self.window_raw);
        let keep = raw.len().saturating_sub(self.config.window_overlap);
        self.carry = raw.into_iter().skip(keep).collect();
        self.staging.clear();
        Ok(report)
    }
}
