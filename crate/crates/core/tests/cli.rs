use std::fs;
use std::path::Path;
use std::process::Command;

use avodkit::cli::{
    cmd_detect, cmd_eval, cmd_feasibility, cmd_synth, CliError, DetectConfig, DetectSummary, SynthConfig,
    MANIFEST_FILE,
};
use avodkit::dataset_io::{parse_kitti_label, SceneSpec, Variant};
use avodkit::detector::PipelineConfig;
use avodkit::netfeas::FeasibilityConfig;

fn small_synth(scenes: usize) -> SynthConfig {
    SynthConfig {
        scenes,
        scene: SceneSpec {
            cars: 3,
            pedestrians: 1,
            cyclists: 1,
            ..SceneSpec::default()
        },
        ..SynthConfig::default()
    }
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn synth_zero_scenes_writes_only_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scenes");
    let m = cmd_synth(&small_synth(0), 1, &out, 1).unwrap();
    assert!(m.outputs.keys().all(|k| !k.ends_with(".bin")));
    assert!(out.join(MANIFEST_FILE).exists());
    for sub in ["velodyne", "label_2", "calib"] {
        let d = out.join(sub);
        assert!(!d.exists() || files_in(&d).is_empty());
    }
}

#[test]
fn synth_labels_parse_and_match_requested_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scenes");
    cmd_synth(&small_synth(3), 9, &out, 1).unwrap();
    assert_eq!(files_in(&out.join("velodyne")), ["000000.bin", "000001.bin", "000002.bin"]);
    for name in files_in(&out.join("label_2")) {
        let text = fs::read_to_string(out.join("label_2").join(name)).unwrap();
        let objects: Vec<_> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| parse_kitti_label(l).unwrap())
            .collect();
        assert_eq!(objects.len(), 5);
    }
}

#[test]
fn detect_on_empty_scene_dir_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    cmd_synth(&small_synth(0), 0, &scenes, 1).unwrap();
    let out = tmp.path().join("det");
    cmd_detect(&scenes, &DetectConfig::default(), 0, &out, 1).unwrap();
    let summary: DetectSummary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.scenes.is_empty());
}

#[test]
fn perfect_oracle_round_trip_gives_full_ap() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    cmd_synth(&small_synth(2), 4, &scenes, 1).unwrap();
    let det = tmp.path().join("det");
    let cfg = DetectConfig {
        pipeline: PipelineConfig::with_mode(Variant::SIL),
        ..DetectConfig::default()
    };
    cmd_detect(&scenes, &cfg, 4, &det, 1).unwrap();
    let summary: DetectSummary = serde_json::from_slice(&fs::read(det.join("summary.json")).unwrap()).unwrap();
    for s in &summary.scenes {
        assert_eq!(s.detections, s.ground_truth, "scene {}", s.id);
        assert_eq!(s.fuse_calls, 0);
    }
    let (report, _) = cmd_eval(&det, &scenes, 0.5, &tmp.path().join("eval"), 1).unwrap();
    assert_eq!(report.map, Some(1.0));
    assert!(tmp.path().join("eval/pr_curve.csv").exists());
}

#[test]
fn eval_with_no_detections_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    cmd_synth(&small_synth(2), 5, &scenes, 1).unwrap();
    let det = tmp.path().join("det");
    fs::create_dir_all(&det).unwrap();
    let (report, _) = cmd_eval(&det, &scenes, 0.5, &tmp.path().join("eval"), 1).unwrap();
    assert_eq!(report.map, Some(0.0));
}

#[test]
fn eval_rejects_detections_for_unknown_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    cmd_synth(&small_synth(1), 5, &scenes, 1).unwrap();
    let det = tmp.path().join("det");
    fs::create_dir_all(&det).unwrap();
    fs::write(det.join("000042.txt"), "").unwrap();
    let err = cmd_eval(&det, &scenes, 0.5, &tmp.path().join("eval"), 1).unwrap_err();
    assert!(matches!(err, CliError::SceneIdMismatch(ref id) if id == "000042"));
    assert_eq!(err.kind(), "SceneIdMismatch");
}

#[test]
fn feasibility_without_channels_has_no_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = FeasibilityConfig {
        channels: vec![],
        ..FeasibilityConfig::kitti_presets()
    };
    let (analysis, _) = cmd_feasibility(&cfg, None, &tmp.path().join("f")).unwrap();
    assert!(analysis.feasibility.rows.is_empty());
    assert!(!analysis.recommendation.is_empty());
}

#[test]
fn feasibility_reports_missing_ap_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("ap.csv");
    fs::write(&table, "class,variant,ap\nCar,SF,0.7\n").unwrap();
    let err = cmd_feasibility(&FeasibilityConfig::kitti_presets(), Some(&table), &tmp.path().join("f")).unwrap_err();
    assert_eq!(err.kind(), "MissingApEntry");
}

#[test]
fn binary_reports_errors_as_json_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    cmd_synth(&small_synth(1), 5, &scenes, 1).unwrap();
    let det = tmp.path().join("det");
    fs::create_dir_all(&det).unwrap();
    fs::write(det.join("000099.txt"), "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_avodkit"))
        .arg("eval")
        .arg("--detections")
        .arg(&det)
        .arg("--ground-truth")
        .arg(&scenes)
        .arg("--out")
        .arg(tmp.path().join("eval"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().rev().find(|l| l.starts_with('{')).expect("json error line");
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"], "SceneIdMismatch");
}

#[test]
fn binary_rejects_unknown_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_avodkit"))
        .args(["detect", "--mode", "XYZ", "--scenes"])
        .arg(tmp.path())
        .arg("--out")
        .arg(tmp.path().join("d"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("XYZ"));
}
