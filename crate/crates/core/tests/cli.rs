use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lowrate_mot::io::{read_mot, SequenceDir};
use lowrate_mot::synth::preset;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrate-mot")).args(args).env("LOWRATE_MOT_LOG", "error").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let seq = dir.path().join(name);
    let mut args = vec!["synth", "--out", s(&seq)];
    args.extend_from_slice(extra);
    ok(&args);
    seq
}

#[test]
fn full_rate_tracking_of_crossing_is_perfect() {
    let dir = TempDir::new().unwrap();
    let seq = synth(&dir, "crossing", &["--preset", "crossing", "--seed", "2", "--no-images"]);
    let res = dir.path().join("out/res.txt");
    ok(&["track", "--seq", s(&seq), "--hz", "full", "--out", s(&res)]);
    let report = ok(&["eval", "--gt", s(&seq.join("gt/gt.txt")), "--res", s(&res), "--metrics", "idf1,mota", "--format", "csv"]);
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "MOTA,IDF1,IDSW,FP,FN,IDTP,IDFP,IDFN,GT,Results,Frames");
    assert!(lines.next().unwrap().starts_with("1.0000,1.0000,0,0,0,"), "{report}");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/res.txt.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "full_frequency");
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["frames_read"], 0);
    for key in ["visual_tracking_ms", "association_ms", "kalman_ms", "io_ms", "total_ms"] {
        assert!(manifest["timings_ms"][key].as_f64().unwrap() >= 0.0, "{key}");
    }
}

#[test]
fn low_rate_tracking_reads_only_scheduled_frames() {
    let dir = TempDir::new().unwrap();
    // Render every frame so that any stray read would succeed unnoticed.
    let seq = synth(&dir, "crossing", &["--preset", "crossing", "--seed", "5"]);
    let res = dir.path().join("res.txt");
    let manifest = dir.path().join("run.json");
    ok(&["track", "--seq", s(&seq), "--hz", "2", "--out", s(&res), "--manifest", s(&manifest)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    let schedule = ok(&["subsample", "--fps", "30", "--frames", "300", "--hz", "2"]);
    let count = |prefix: &str| {
        schedule.lines().find_map(|l| l.strip_prefix(prefix)).unwrap().split_whitespace().count() as u64
    };
    assert_eq!(m["frames_read"].as_u64().unwrap(), count("detection ") + count("intermediate "));
    assert_eq!(m["mode"], "low_frequency");
    assert_eq!(m["delta_t"], 0.5);
    let records = read_mot(&res).unwrap();
    assert!(records.iter().all(|r| (r.frame - 1) % 15 == 0));
}

#[test]
fn rate_above_source_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let seq = synth(&dir, "single", &["--preset", "single", "--no-images"]);
    let out = run(&["track", "--seq", s(&seq), "--hz", "40", "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));
    assert_eq!(run(&["subsample", "--fps", "30", "--frames", "10", "--hz", "40"]).status.code(), Some(2));
}

#[test]
fn input_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let missing = run(&["track", "--seq", s(&dir.path().join("nope")), "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(missing.status.code(), Some(3));

    let seq = synth(&dir, "single", &["--preset", "single", "--no-images"]);
    let det = seq.join("det/det.txt");
    let text = fs::read_to_string(&det).unwrap();
    let fewer: Vec<&str> = text.lines().skip(1).collect();
    let short = dir.path().join("short.txt");
    fs::write(&short, fewer.join("\n") + "\n").unwrap();
    let out = run(&["track", "--seq", s(&seq), "--det", s(&short), "--no-images", "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let config = dir.path().join("bad.toml");
    fs::write(&config, "theta_bdd = 3\n").unwrap();
    let out = run(&["track", "--seq", s(&seq), "--config", s(&config), "--no-images", "--out", s(&dir.path().join("r.txt"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_outputs() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a", &["--preset", "clones", "--seed", "9", "--hz", "1"]);
    let b = synth(&dir, "b", &["--preset", "clones", "--seed", "9", "--hz", "1"]);
    for file in ["det/det.txt", "det/det.emb", "gt/gt.txt", "seqinfo.ini", "img1/000016.ppm"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let dir_a = SequenceDir::open(&a).unwrap();
    assert!(!dir_a.image_path(2).exists());

    let crossing = synth(&dir, "crossing", &["--preset", "crossing", "--no-images"]);
    let ids: std::collections::BTreeSet<i64> = read_mot(&crossing.join("gt/gt.txt")).unwrap().iter().map(|r| r.id).collect();
    assert_eq!(ids.len(), 2);

    let mut empty = preset("single", 1).unwrap();
    empty.targets.clear();
    let scenario = dir.path().join("empty.json");
    fs::write(&scenario, serde_json::to_string(&empty).unwrap()).unwrap();
    let out = synth(&dir, "empty", &["--scenario", s(&scenario), "--seed", "4", "--no-images"]);
    assert_eq!(fs::read_to_string(out.join("det/det.txt")).unwrap(), "");

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"name\": 3}").unwrap();
    assert_eq!(run(&["synth", "--scenario", s(&broken), "--out", s(&dir.path().join("x"))]).status.code(), Some(3));
}

#[test]
fn eval_reports() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.txt");
    let split = dir.path().join("split.txt");
    let line = |f: u32, id: u32| format!("{f},{id},10,10,20,40,1,-1,-1,-1\n");
    fs::write(&gt, (1..=10).map(|f| line(f, 1)).collect::<String>()).unwrap();
    fs::write(&split, (1..=10).map(|f| line(f, if f <= 5 { 7 } else { 8 })).collect::<String>()).unwrap();

    let perfect = ok(&["eval", "--gt", s(&gt), "--res", s(&gt)]);
    for key in ["HOTA", "DetA", "AssA", "MOTA", "IDF1"] {
        let row = perfect.lines().find(|l| l.starts_with(key)).unwrap();
        assert!(row.ends_with("1.0000"), "{row}");
    }
    let report = ok(&["eval", "--gt", s(&gt), "--res", s(&split), "--metrics", "idf1"]);
    assert!(report.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["IDF1", "0.5000"]), "{report}");
    assert!(!report.contains("HOTA"));

    assert_eq!(run(&["eval", "--gt", s(&gt), "--res", s(&gt), "--metrics", "mostp"]).status.code(), Some(2));
    let late = dir.path().join("late.txt");
    fs::write(&late, line(12, 1)).unwrap();
    assert_eq!(run(&["eval", "--gt", s(&gt), "--res", s(&late)]).status.code(), Some(3));
}

#[test]
fn subsample_and_config_commands() {
    let text = ok(&["subsample", "--fps", "30", "--frames", "91", "--hz", "1"]);
    assert!(text.contains("detection 1 31 61 91\nintermediate 16 46 76\n"), "{text}");

    let dir = TempDir::new().unwrap();
    let config = dir.path().join("c.toml");
    ok(&["config", "--out", s(&config)]);
    assert_eq!(fs::read_to_string(&config).unwrap(), ok(&["config"]));
    let seq = synth(&dir, "single", &["--preset", "single", "--no-images"]);
    ok(&["track", "--seq", s(&seq), "--config", s(&config), "--no-images", "--out", s(&dir.path().join("r.txt"))]);
}
