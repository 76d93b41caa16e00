mod common;

use std::collections::HashMap;

use common::{first_lap_end, ingest_script, raster_intrinsics, seed42};
use geomem::memory_store::{voxel_downsample, voxel_key, GlobalGeometry, MapPoint, VoxelKey};
use geomem::snapshot::{decode_snapshot, encode_snapshot, load_snapshot, save_snapshot};
use geomem::world::{generate_terrain, make_revisit_trajectory};
use geomem::{FrameRecord, Pose};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn revisit_loop_plateaus_after_first_lap() {
    let hf = seed42();
    let intr = raster_intrinsics();
    let run = ingest_script(&hf, &make_revisit_trajectory(7, 480, 3).unwrap(), &intr);
    let lap = first_lap_end(&run.poses).expect("trajectory returns to its start");
    let tau = run.memory.config().tau_hist;
    let late: Vec<u32> = run.decisions[lap + tau..]
        .iter()
        .filter(|d| d.is_keyframe)
        .map(|d| d.frame_id)
        .collect();
    assert!(late.is_empty(), "admissions after lap {lap}: {late:?}");
    assert!(run.memory.keyframe_count() > 0);
    run.memory.store().check_source_integrity().unwrap();
    run.memory.store().geometry().check_invariants().unwrap();
}

#[test]
fn straight_exploration_grows_linearly() {
    let hf = generate_terrain(42, 512.0, 1.0, 0.5).unwrap();
    let intr = raster_intrinsics();
    let run = ingest_script(&hf, &make_revisit_trajectory(7, 400, 0).unwrap(), &intr);
    let per_quarter: Vec<usize> = run
        .decisions
        .chunks(100)
        .map(|c| c.iter().filter(|d| d.is_keyframe).count())
        .collect();
    // the first quarter carries the empty-history warm-up
    let steady = &per_quarter[1..];
    let lo = *steady.iter().min().unwrap();
    let hi = *steady.iter().max().unwrap();
    assert!(lo > 0, "keyframes per quarter {per_quarter:?}");
    assert!(hi <= 2 * lo, "keyframes per quarter {per_quarter:?}");
}

#[test]
fn identical_streams_give_identical_snapshots() {
    let hf = seed42();
    let intr = raster_intrinsics();
    let script = make_revisit_trajectory(3, 120, 1).unwrap();
    let bytes = || {
        let run = ingest_script(&hf, &script, &intr);
        let store = run.memory.store();
        encode_snapshot(store.geometry(), store.frames())
    };
    assert_eq!(bytes(), bytes());
}

fn random_store(n: usize, seed: u64) -> (GlobalGeometry, Vec<FrameRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<FrameRecord> = (0..50)
        .map(|i| {
            let pose = Pose::new(
                rng.random_range(-100.0..100.0),
                rng.random_range(0.0..30.0),
                rng.random_range(-100.0..100.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.1..3.1),
            )
            .unwrap();
            let mut f = FrameRecord::metadata(i, pose);
            f.is_keyframe = i % 3 != 1;
            f
        })
        .collect();
    let mut geo = GlobalGeometry::new(0.5, 4).unwrap();
    while geo.len() < n {
        geo.insert(MapPoint {
            position: [
                rng.random_range(-200.0..200.0),
                rng.random_range(-20.0..40.0),
                rng.random_range(-200.0..200.0),
            ],
            source: 3 * rng.random_range(0..16),
            confidence: rng.random_range(0.0..1.0),
        });
    }
    (geo, frames)
}

#[test]
fn ten_thousand_point_snapshot_round_trips_bit_identically() {
    let (geo, frames) = random_store(10_000, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.gmem");
    save_snapshot(&geo, &frames, &path).unwrap();
    let (geo2, frames2) = load_snapshot(&path).unwrap();
    assert_eq!(geo2.len(), 10_000);
    for (a, b) in geo.points().zip(geo2.points()) {
        assert_eq!(a.position.map(f32::to_bits), b.position.map(f32::to_bits));
        assert_eq!(a.source, b.source);
        assert_eq!(a.confidence.to_bits(), b.confidence.to_bits());
    }
    assert_eq!(geo, geo2);
    assert_eq!(frames2.len(), frames.len());
    for (a, b) in frames.iter().zip(&frames2) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.is_keyframe, b.is_keyframe);
        assert_eq!(
            a.pose.to_array().map(f64::to_bits),
            b.pose.to_array().map(f64::to_bits)
        );
    }
    let file = std::fs::read(&path).unwrap();
    assert_eq!(encode_snapshot(&geo2, &frames2), file);
    geo2.check_invariants().unwrap();
}

#[test]
fn truncated_snapshots_are_rejected() {
    let (geo, frames) = random_store(200, 6);
    let bytes = encode_snapshot(&geo, &frames);
    for cut in [0, 3, 5, 9, bytes.len() / 2, bytes.len() - 1] {
        assert!(decode_snapshot(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_snapshot(&bad).is_err());
}

/// Group-by-cell reference for the downsampler.
fn reference_downsample(points: &[MapPoint], voxel: f64, cap: usize) -> Vec<MapPoint> {
    let mut order: Vec<VoxelKey> = Vec::new();
    let mut groups: HashMap<VoxelKey, Vec<(usize, MapPoint)>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let k = voxel_key(&p.position, voxel);
        groups.entry(k).or_insert_with(|| {
            order.push(k);
            Vec::new()
        });
        groups.get_mut(&k).unwrap().push((i, *p));
    }
    let mut out = Vec::new();
    for k in order {
        let mut g = groups.remove(&k).unwrap();
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn downsampler_matches_group_by_reference(seed in any::<u64>(), n in 0usize..400, cap in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<MapPoint> = (0..n)
            .map(|_| MapPoint {
                position: [
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ],
                source: rng.random_range(0..5),
                // coarse confidences force tie-breaking
                confidence: rng.random_range(0..4) as f32 / 4.0,
            })
            .collect();
        let got = voxel_downsample(&points, 0.5, cap).unwrap();
        prop_assert_eq!(got, reference_downsample(&points, 0.5, cap));
    }

    #[test]
    fn geometry_respects_cap_and_cells(seed in any::<u64>(), cap in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut geo = GlobalGeometry::new(0.5, cap).unwrap();
        for _ in 0..500 {
            geo.insert(MapPoint {
                position: [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
                source: rng.random_range(0..10),
                confidence: rng.random_range(0.0..1.0),
            });
        }
        prop_assert!(geo.max_cell_occupancy() <= cap);
        for cell in geo.cells() {
            for p in &cell.points {
                prop_assert_eq!(voxel_key(&p.position, 0.5), cell.key);
            }
        }
        prop_assert_eq!(geo.points().count(), geo.len());
    }
}
