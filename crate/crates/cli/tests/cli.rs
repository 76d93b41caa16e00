use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geomem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geomem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const FLAT: &str = "\
terrain_extent = 128
terrain_roughness = 0
trajectory_length = 10
trajectory_loops = 0
image_width = 48
image_height = 28
";

const REVISIT: &str = "\
seed = 42
trajectory_length = 200
trajectory_loops = 1
image_width = 96
image_height = 56
";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, cfg: &Path, out: &str) -> PathBuf {
    let out = dir.join(out);
    let o = geomem(&["simulate", "--config", s(cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn flat_simulation_writes_ten_frames_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.cfg", FLAT);
    let out = simulate(dir.path(), &cfg, "stream");
    let depth_files = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "depth")
        })
        .count();
    assert_eq!(depth_files, 10);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert_eq!(
        manifest.lines().filter(|l| l.starts_with("frame ")).count(),
        10
    );
    assert!(manifest.contains("frames 10"));
}

#[test]
fn simulation_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.cfg",
        &FLAT.replace("terrain_roughness = 0", "terrain_roughness = 0.5"),
    );
    let a = simulate(dir.path(), &cfg, "a");
    let b = simulate(dir.path(), &cfg, "b");
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 21);
    for n in names {
        assert_eq!(
            fs::read(a.join(&n)).unwrap(),
            fs::read(b.join(&n)).unwrap(),
            "{n:?}"
        );
    }
    let c = dir.path().join("c");
    let o = geomem(&[
        "simulate",
        "--config",
        s(&cfg),
        "--seed",
        "9",
        "--out",
        s(&c),
    ]);
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("frame_000005.depth")).unwrap(),
        fs::read(c.join("frame_000005.depth")).unwrap()
    );
}

#[test]
fn tampered_stream_fails_ingest_with_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.cfg", FLAT);
    let out = simulate(dir.path(), &cfg, "stream");
    fs::remove_file(out.join("frame_000009.depth")).unwrap();
    let snap = dir.path().join("snap.gmem");
    let o = geomem(&[
        "ingest",
        "--config",
        s(&cfg),
        "--stream",
        s(&out),
        "--out",
        s(&snap),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    assert!(!snap.exists());
}

struct LogRow {
    frame: u32,
    keyframe: bool,
    scale: f64,
    retrieved: Vec<u32>,
}

fn parse_log(text: &str) -> Vec<LogRow> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 5, "log line `{l}`");
            LogRow {
                frame: f[0].parse().unwrap(),
                keyframe: f[1] == "1",
                scale: f[3].parse().unwrap(),
                retrieved: if f[4] == "-" {
                    Vec::new()
                } else {
                    f[4].split(',').map(|x| x.parse().unwrap()).collect()
                },
            }
        })
        .collect()
}

#[test]
fn revisit_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "revisit.cfg", REVISIT);
    let stream = simulate(dir.path(), &cfg, "stream");
    let snap = dir.path().join("snap.gmem");
    let log = dir.path().join("ingest.log");
    let o = geomem(&[
        "ingest",
        "--config",
        s(&cfg),
        "--stream",
        s(&stream),
        "--out",
        s(&snap),
        "--log",
        s(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_log(&fs::read_to_string(&log).unwrap());
    assert_eq!(rows.len(), 200);

    // the first window has nothing to align against
    let first: Vec<&LogRow> = rows.iter().filter(|r| r.keyframe).take(8).collect();
    assert!(first.iter().all(|r| r.scale == 1.0));

    let mut logged = std::collections::BTreeSet::new();
    for r in &rows {
        for id in &r.retrieved {
            assert!(
                logged.contains(id),
                "frame {} retrieved unlogged {id}",
                r.frame
            );
        }
        if r.keyframe {
            logged.insert(r.frame);
        }
    }

    let info = geomem(&["snapshot-info", "--snapshot", s(&snap)]);
    assert!(info.status.success());
    let info = String::from_utf8(info.stdout).unwrap();
    assert!(info.contains("frames 200"));
    assert!(info.contains(&format!("keyframes {}", logged.len())));
    // every keyframe comes from the first lap plus warm-up
    let last = *logged.iter().max().unwrap();
    assert!(last < 120, "late keyframe {last}");

    let manifest = fs::read_to_string(stream.join("manifest.txt")).unwrap();
    let pose0: Vec<&str> = manifest
        .lines()
        .find(|l| l.starts_with("frame 0 "))
        .unwrap()
        .split_whitespace()
        .skip(2)
        .collect();
    let o = geomem(&[
        "retrieve",
        "--config",
        s(&cfg),
        "--snapshot",
        s(&snap),
        "--pose",
        &pose0.join(","),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame votes"));
    let hits: Vec<(u32, u64)> = lines
        .clone()
        .take_while(|l| !l.starts_with("elapsed_us"))
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert!(!hits.is_empty() && hits.len() <= 8);
    assert!(hits.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(hits.iter().all(|(f, _)| logged.contains(f)));
    assert!(text.lines().last().unwrap().starts_with("elapsed_us "));
}

#[test]
fn bench_writes_report_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bench.cfg",
        "image_width = 48\nimage_height = 28\ntrajectory_loops = 1\nbench_frames = 80\nbench_bucket = 20\nbench_warmup = 2\n",
    );
    let out = dir.path().join("bench.csv");
    let o = geomem(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("method,range_start,range_end,qps,mem_increment,mem_total\n"));
    assert!(dir.path().join("bench.components.csv").exists());
    assert!(fs::read_to_string(dir.path().join("bench.config.txt"))
        .unwrap()
        .contains("bench_frames = 80"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write_config(dir.path(), "typo.cfg", "voxle_size = 0.5\n");
    let o = geomem(&[
        "simulate",
        "--config",
        s(&typo),
        "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("voxle_size"));

    let bad = write_config(dir.path(), "bad.cfg", "keep_fraction = 1.5\n");
    let o = geomem(&["bench", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));

    let o = geomem(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = geomem(&["retrieve", "--snapshot", "nowhere.gmem", "--pose", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_snapshot_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let snap = write_config(dir.path(), "junk.gmem", "not a snapshot");
    let o = geomem(&["snapshot-info", "--snapshot", s(&snap)]);
    assert_eq!(o.status.code(), Some(1));
    let o = geomem(&["retrieve", "--snapshot", s(&snap), "--pose", "0,10,0,0.3,0"]);
    assert_eq!(o.status.code(), Some(1));
}
