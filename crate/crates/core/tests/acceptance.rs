//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::{first_lap_end, ingest_script, raster_intrinsics, seed42};
use geomem::bench::{
    parse_report, report_csv, run_efficiency_bench, BenchReport, BenchSetup, Method,
};
use geomem::geometry::{
    backproject, extrinsics_from_pose, plucker_rays, project_point, Intrinsics, Pose,
};
use geomem::memory_store::{keyframe_decision, GlobalGeometry, MapPoint};
use geomem::protocol::{run_cft, NoiseSampler, Origin, StubPredictor};
use geomem::retrieval::{brute_force_oracle, point_to_frame_retrieve};
use geomem::scale_alignment::{
    estimate_scale, filter_correspondences, CorrespondenceSet, FilterParams,
};
use geomem::snapshot::{decode_snapshot, encode_snapshot, load_snapshot, save_snapshot};
use geomem::world::make_revisit_trajectory;
use geomem::{ConfidenceMap, DepthMap, FrameRecord, MemoryConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant, mut o: Outcome) -> Outcome {
    let took = start.elapsed();
    o.detail = format!(
        "{}; {:.2}s (limit {}s)",
        o.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    o.pass &= took < limit;
    o
}

fn scale_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h) = (64, 36);
    let params = FilterParams::default();
    let (mut worst_clean, mut worst_noisy) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let truth: f64 = rng.random_range(0.5..=2.0);
        let old: Vec<f32> = (0..w * h).map(|_| rng.random_range(1.0..80.0)).collect();
        // exact pairs in f64; f32 rasters would add rounding noise
        let new: Vec<f64> = old.iter().map(|d| *d as f64 / truth).collect();
        let pairs =
            CorrespondenceSet::from_pairs(old.iter().map(|d| *d as f64).collect(), new).unwrap();
        let s = estimate_scale(&pairs).unwrap();
        let d_old = DepthMap::new(w, h, old.clone()).unwrap();
        worst_clean = worst_clean.max((s - truth).abs() / truth);

        // low-confidence pixels carry unrelated depth
        let mut noisy = Vec::with_capacity(w * h);
        let mut conf = Vec::with_capacity(w * h);
        for d in &old {
            if rng.random_bool(0.2) {
                noisy.push(rng.random_range(1.0..80.0));
                conf.push(rng.random_range(0.0..0.3));
            } else {
                let n = 1.0 + rng.random_range(-0.05..0.05);
                noisy.push((*d as f64 / truth * n) as f32);
                conf.push(rng.random_range(0.5..1.0));
            }
        }
        let corr = filter_correspondences(
            &d_old,
            &DepthMap::new(w, h, noisy).unwrap(),
            &ConfidenceMap::filled(w, h, 1.0),
            &ConfidenceMap::new(w, h, conf).unwrap(),
            &params,
        )
        .unwrap();
        let s = estimate_scale(&corr).unwrap();
        worst_noisy = worst_noisy.max((s - truth).abs() / truth);
    }
    within(
        Duration::from_secs(5),
        start,
        check(
            worst_clean <= 1e-9 && worst_noisy <= 0.02,
            format!("worst relative error clean {worst_clean:.2e} (≤1e-9), noisy {worst_noisy:.4} (≤0.02)"),
        ),
    )
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let hf = seed42();
    let intr = raster_intrinsics();
    let run = ingest_script(&hf, &make_revisit_trajectory(5, 200, 1).unwrap(), &intr);
    let geo = run.memory.store().geometry();
    let params = run.memory.config().retrieval_params();
    let (mut agree, mut exact) = (0, true);
    for pose in &run.poses {
        let fast = point_to_frame_retrieve(pose, geo, &intr, &params);
        let oracle = brute_force_oracle(pose, geo, &intr, &params);
        let a: BTreeSet<u32> = fast.frames.iter().copied().collect();
        let b: BTreeSet<u32> = oracle.frames.iter().copied().collect();
        if a == b {
            agree += 1;
            exact &= fast.same_ranking(&oracle);
        }
    }
    let rate = agree as f64 / run.poses.len() as f64;
    within(
        Duration::from_secs(60),
        start,
        check(
            rate >= 0.95 && exact,
            format!(
                "top-{} sets agree on {:.1}% of 200 queries (≥95%), order and votes exact: {exact}",
                params.k,
                100.0 * rate
            ),
        ),
    )
}

fn run_bench() -> (BenchReport, Duration) {
    let start = Instant::now();
    let hf = seed42();
    let setup = BenchSetup::new(&hf, raster_intrinsics());
    let script = make_revisit_trajectory(7, 4000, 9).unwrap();
    let report = run_efficiency_bench(
        &script,
        4000,
        &[Method::Geometric, Method::PoseBaseline],
        1000,
        &setup,
    )
    .unwrap();
    (report, start.elapsed())
}

fn constant_time(report: &BenchReport, took: Duration) -> Outcome {
    let qps = |m: &str| -> Vec<f64> { report.rows_for(m).map(|r| r.qps).collect() };
    let (geo, base) = (qps("geometric"), qps("pose_baseline"));
    // time per query is the reciprocal of throughput
    let geo_growth = geo[0] / geo[3];
    let base_growth = base[0] / base[3];
    let limit = Duration::from_secs(15 * 60);
    let mut o = check(
        geo_growth <= 1.5 && base_growth >= 2.5,
        format!(
            "query time growth bucket 0 to 3: geometric {geo_growth:.2}x (≤1.5), baseline {base_growth:.2}x (≥2.5); qps geometric {geo:.1?}, baseline {base:.1?}"
        ),
    );
    o.detail = format!(
        "{}; {:.1}s (limit {}s)",
        o.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    o.pass &= took < limit;
    o
}

fn sublinear_memory(report: &BenchReport) -> Outcome {
    let inc = |m: &str| -> Vec<u64> { report.rows_for(m).map(|r| r.mem_increment).collect() };
    let (geo, base) = (inc("geometric"), inc("pose_baseline"));
    let total: u64 = geo.iter().sum();
    let non_increasing = geo.windows(2).all(|w| w[1] <= w[0]);
    check(
        non_increasing && total as f64 <= 0.05 * 4000.0 && base == [1000; 4],
        format!("geometric increments {geo:?} (non-increasing), total {total} (≤200); baseline {base:?}"),
    )
}

fn keyframe_gate() -> Outcome {
    let start = Instant::now();
    let cfg = MemoryConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    for _ in 0..1000 {
        let coverage: f64 = if rng.random_bool(0.1) {
            cfg.novel_threshold
        } else {
            rng.random_range(0.0..=1.0)
        };
        let count = rng.random_range(0..=16);
        let expected = coverage >= cfg.novel_threshold || count < 8;
        agree += (keyframe_decision(coverage, count, cfg.novel_threshold, cfg.tau_hist) == expected)
            as usize;
    }
    let hf = seed42();
    let run = ingest_script(
        &hf,
        &make_revisit_trajectory(7, 320, 3).unwrap(),
        &raster_intrinsics(),
    );
    let lap = first_lap_end(&run.poses).unwrap_or(run.poses.len());
    let late: Vec<u32> = run.decisions[(lap + cfg.tau_hist).min(run.decisions.len())..]
        .iter()
        .filter(|d| d.is_keyframe)
        .map(|d| d.frame_id)
        .collect();
    within(
        Duration::from_secs(10),
        start,
        check(
            agree == 1000 && cfg.tau_hist == 8 && late.is_empty() && lap < run.poses.len(),
            format!("gate agrees on {agree}/1000 pairs at tau_hist {}; admissions after lap end {lap} + warm-up: {late:?}", cfg.tau_hist),
        ),
    )
}

/// Hand schedule: a frame is predicted at step `j` iff an earlier step `m`
/// targeted it, i.e. frame = m + W - 1 for some m < j.
fn hand_trace(steps: usize, window: usize) -> Vec<(usize, usize, usize, Origin)> {
    let mut out = Vec::new();
    for j in 0..steps {
        for slot in 0..window {
            let frame = j + slot;
            let predicted = frame + 1 >= window && frame + 1 - window < j;
            let origin = if predicted {
                Origin::Predicted
            } else {
                Origin::GroundTruth
            };
            out.push((j, slot, frame, origin));
        }
    }
    out
}

fn cft_trace() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut details = Vec::new();
    for (steps, window) in [(1, 4), (3, 4), (5, 8)] {
        let n = steps + window - 1;
        let video: Vec<Vec<u8>> = (0..n).map(|i| vec![i as u8; 3]).collect();
        let cond: Vec<Vec<u8>> = (0..n).map(|i| vec![(7 * i) as u8]).collect();
        let out = run_cft(
            &video,
            &cond,
            steps,
            window,
            &mut StubPredictor::marking(),
            &mut NoiseSampler::new(11, 1.0),
        )
        .unwrap();
        let got: Vec<_> = out
            .trace
            .iter()
            .map(|r| (r.step, r.slot, r.frame, r.origin))
            .collect();
        let mean = out.step_losses.iter().sum::<f64>() / steps as f64;
        let same = got == hand_trace(steps, window);
        let err = (out.loss - mean).abs();
        ok &= same && err <= 1e-12;
        details.push(format!(
            "({steps},{window}) trace {} loss err {err:.1e}",
            if same { "equal" } else { "DIFFERS" }
        ));
    }
    within(Duration::from_secs(1), start, check(ok, details.join(", ")))
}

fn geometry_round_trips() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let intr = Intrinsics::default();
    let (mut worst_px, mut worst_rel) = (0.0f64, 0.0f64);
    let mut tested = 0;
    while tested < 10_000 {
        let pose = Pose::new(
            rng.random_range(-100.0..100.0),
            rng.random_range(0.0..40.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
        )
        .unwrap();
        let ext = extrinsics_from_pose(&pose);
        let (u, v) = (
            rng.random_range(0..intr.width),
            rng.random_range(0..intr.height),
        );
        let z: f32 = rng.random_range(0.5..100.0);
        let mut depth = vec![0.0f32; intr.width * intr.height];
        depth[v * intr.width + u] = z;
        let d = DepthMap::new(intr.width, intr.height, depth).unwrap();
        let c = ConfidenceMap::filled(intr.width, intr.height, 1.0);
        let p = backproject(&d, &c, &intr, &ext, 0).unwrap();
        let (pu, pv, pz) = project_point(&p[0].position, &intr, &ext).unwrap();
        worst_px = worst_px
            .max((pu - u as f64).abs())
            .max((pv - v as f64).abs());
        worst_rel = worst_rel.max((pz - z as f64).abs() / z as f64);
        tested += 1;
    }
    let mut worst_center = 0.0f64;
    for _ in 0..1000 {
        let pose = Pose::new(
            rng.random_range(-1e3..1e3),
            rng.random_range(-1e2..1e2),
            rng.random_range(-1e3..1e3),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.1..3.1),
        )
        .unwrap();
        let ext = extrinsics_from_pose(&pose);
        worst_center = worst_center.max(ext.world_to_camera(&pose.position()).norm());
    }
    let pose = Pose::new(5.0, 9.0, -2.0, 0.4, 1.1).unwrap();
    let map = plucker_rays(&intr, &extrinsics_from_pose(&pose));
    let (mut worst_dot, mut worst_norm) = (0.0f64, 0.0f64);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let (d, m) = map.at(u, v);
            worst_dot = worst_dot.max(m.dot(&d).abs());
            worst_norm = worst_norm.max((d.norm() - 1.0).abs());
        }
    }
    within(
        Duration::from_secs(10),
        start,
        check(
            worst_px < 0.5 && worst_rel <= 1e-6 && worst_center <= 1e-9 && worst_dot < 1e-9 && worst_norm < 1e-12,
            format!(
                "10k pixels: {worst_px:.1e} px, {worst_rel:.1e} rel depth; centre {worst_center:.1e}; {}x{} rays m.d {worst_dot:.1e}, |d|-1 {worst_norm:.1e}",
                intr.width, intr.height
            ),
        ),
    )
}

fn persistence(report: &BenchReport) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut geo = GlobalGeometry::new(0.5, 4).unwrap();
    while geo.len() < 10_000 {
        geo.insert(MapPoint {
            position: [
                rng.random_range(-150.0..150.0),
                rng.random_range(-10.0..30.0),
                rng.random_range(-150.0..150.0),
            ],
            source: rng.random_range(0..40),
            confidence: rng.random_range(0.0..1.0),
        });
    }
    let frames: Vec<FrameRecord> = (0..40)
        .map(|i| {
            let mut f = FrameRecord::metadata(
                i,
                Pose::new(i as f64, 3.0, -(i as f64), 0.2, 0.01 * i as f64).unwrap(),
            );
            f.is_keyframe = true;
            f
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.gmem");
    save_snapshot(&geo, &frames, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let (geo2, frames2) = load_snapshot(&path).unwrap();
    let points_equal = geo.points().zip(geo2.points()).all(|(a, b)| {
        a.position.map(f32::to_bits) == b.position.map(f32::to_bits)
            && a.source == b.source
            && a.confidence.to_bits() == b.confidence.to_bits()
    });
    let snapshot_ok = geo2.len() == 10_000
        && points_equal
        && geo == geo2
        && encode_snapshot(&geo2, &frames2) == bytes
        && decode_snapshot(&bytes).is_ok();
    let rows = parse_report(&report_csv(report)).unwrap();
    let csv_ok = rows == report.rows;
    within(
        Duration::from_secs(5),
        start,
        check(
            snapshot_ok && csv_ok,
            format!("10k-point snapshot bit-identical: {snapshot_ok}; bench CSV parse-back exact over {} rows: {csv_ok}", rows.len()),
        ),
    )
}

fn main() {
    let mut failures = 0;
    let mut report_line = |n: usize, name: &str, o: Outcome| {
        println!(
            "criterion {n} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failures += (!o.pass) as usize;
    };
    report_line(1, "scale-alignment recovery", scale_recovery());
    report_line(2, "retrieval-oracle agreement", oracle_agreement());
    let (bench, took) = run_bench();
    report_line(3, "constant-time retrieval", constant_time(&bench, took));
    report_line(4, "sublinear memory growth", sublinear_memory(&bench));
    report_line(5, "keyframe gate", keyframe_gate());
    report_line(6, "chained-training trace", cft_trace());
    report_line(7, "geometry round-trips", geometry_round_trips());
    report_line(8, "persistence", persistence(&bench));
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
