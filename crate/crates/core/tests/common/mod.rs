#![allow(dead_code)]

use geomem::world::{
    generate_terrain, render_depth, unroll_trajectory, HeightField, TrajectoryScript,
};
use geomem::{FrameDecision, Intrinsics, MemoryConfig, Pose, SpatialMemory};

pub fn seed42() -> HeightField {
    generate_terrain(42, 256.0, 1.0, 0.5).unwrap()
}

pub fn raster_intrinsics() -> Intrinsics {
    Intrinsics::from_hfov(96, 56, 70.0).unwrap()
}

pub struct Run {
    pub poses: Vec<Pose>,
    pub decisions: Vec<FrameDecision>,
    pub memory: SpatialMemory,
}

/// Streams every pose of `script` through a fresh engine and flushes.
pub fn ingest_script(hf: &HeightField, script: &TrajectoryScript, intr: &Intrinsics) -> Run {
    let poses = unroll_trajectory(script);
    let mut memory = SpatialMemory::new(*intr, MemoryConfig::default()).unwrap();
    let decisions = poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (d, c) = render_depth(hf, p, intr).unwrap();
            memory.ingest(i as u32, *p, d, c).unwrap()
        })
        .collect();
    memory.flush().unwrap();
    Run {
        poses,
        decisions,
        memory,
    }
}

/// Index of the first pose after the start that returns to it.
pub fn first_lap_end(poses: &[Pose]) -> Option<usize> {
    poses
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, p)| (p.position() - poses[0].position()).norm() < 1e-9)
        .map(|(i, _)| i)
}
