//! Geometry-grounded spatial memory for long-horizon video world models.
//!
//! The crate covers camera geometry, a procedural terrain renderer that
//! stands in for a depth network, cross-window depth-scale alignment, a
//! voxel-capped global point cloud with keyframe gating, point-to-frame
//! retrieval, training-window orchestration, and a benchmark harness.

pub mod bench;
pub mod clock;
pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod memory_store;
pub mod protocol;
pub mod raster;
pub mod retrieval;
pub mod scale_alignment;
pub mod snapshot;
pub mod stream;
pub mod visibility;
pub mod world;

pub use engine::{FrameDecision, MemoryConfig, SpatialMemory};
pub use error::{Error, Result};
pub use geometry::{Extrinsics, Intrinsics, Pose};
pub use memory_store::{FrameRecord, GlobalGeometry, MapPoint, MemoryStore};
pub use raster::{ConfidenceMap, DepthMap};
pub use retrieval::RetrievalResult;
