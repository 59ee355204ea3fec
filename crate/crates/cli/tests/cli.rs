use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pointmask::io;
use pointmask::synth;
use serde_json::{json, Value};
use tempfile::TempDir;

fn pointmask(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointmask"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pointmask(dir, args);
    assert!(
        out.status.success(),
        "pointmask {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Noise-free rectangles with sides 3 to 9, one or two per scene.
fn sharp_corpus(dir: &Path, count: usize, corrupt: bool) {
    write_json(
        &dir.join("spec.json"),
        &json!({ "random": { "count": count, "targets_per_scene": [1, 2], "margin": 24, "min_separation": 30 } }),
    );
    let mut args = vec!["synth", "--spec", "spec.json", "--out", "corpus", "--seed", "11"];
    if corrupt {
        write_json(
            &dir.join("corrupt.json"),
            &json!({ "false_component_count": 3, "false_component_distance": 100.0 }),
        );
        args.extend(["--corrupt", "corrupt.json"]);
    }
    ok(dir, &args);
}

fn png_count(dir: &Path) -> usize {
    fs::read_dir(dir)
        .map(|rd| rd.filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count())
        .unwrap_or(0)
}

fn run_log_images(path: &Path) -> Vec<Value> {
    read_json(path)["images"].as_array().unwrap().clone()
}

#[test]
fn synthetic_corpus_round_trips_through_pmg_and_eval() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 20, false);
    ok(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg"]);
    assert_eq!(png_count(&d.join("pmg/masks")), 20);

    let stdout = ok(d, &["eval", "--manifest", "pmg/manifest.json", "--report", "pmg/report.json"]);
    assert!(stdout.contains("IoU 100.00  Pd 100.00  Fa 0.00"), "{stdout}");
    for cat in ["Point", "Spot", "Extended"] {
        assert!(stdout.contains(cat), "{stdout}");
    }
    let doc = io::read_report(d.join("pmg/report.json")).unwrap();
    assert_eq!(doc.schema, io::REPORT_SCHEMA);
    assert_eq!(doc.report.iou, 1.0);
    assert_eq!(doc.source_bit_depths, vec![8]);
    assert!(d.join("pmg/report.run_log.json").exists());
}

#[test]
fn generated_masks_match_the_library() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 4, false);
    ok(d, &["--l-ep", "10", "--alpha", "0.3", "pmg", "--manifest", "corpus/manifest.json", "--out", "pmg"]);
    let manifest = io::load_manifest(d.join("corpus/manifest.json")).unwrap();
    let cfg = pointmask::PmgConfig {
        l_ep: 10,
        alpha: 0.3,
        ..Default::default()
    };
    for e in &manifest.entries {
        let img = io::load_image(manifest.resolve(&e.image)).unwrap().image;
        let pts: Vec<_> = e.points.iter().map(|p| pointmask::PointLabel::new(p[0] as usize, p[1] as usize)).collect();
        let expected = pointmask::point_to_mask(&img, &pts, &cfg).unwrap();
        let got = io::load_mask(d.join(format!("pmg/masks/{}.png", e.id)), 0.5).unwrap();
        assert_eq!(got, expected, "{}", e.id);
    }
}

#[test]
fn overrides_are_recorded_in_the_run_log() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 2, false);
    ok(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg", "--l-ep", "10"]);
    let log = read_json(&d.join("pmg/run_log.json"));
    assert_eq!(log["config"]["pmg"]["l_ep"], 10);
    assert_eq!(log["command"], "pmg");
    let inputs = log["inputs"].as_object().unwrap();
    assert!(inputs.contains_key("corpus/manifest.json"));
    assert!(inputs.values().all(|v| v.as_str().unwrap().len() == 64));
    assert_eq!(log["outputs"].as_object().unwrap().len(), 3);
}

#[test]
fn empty_manifest_warns_and_succeeds() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_json(&d.join("m.json"), &json!({ "version": 1, "entries": [] }));
    let out = pointmask(d, &["pmg", "--manifest", "m.json", "--out", "pmg"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no entries"));
    assert_eq!(png_count(&d.join("pmg/masks")), 0);
}

#[test]
fn bad_entries_are_listed_and_fail_the_run() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 3, false);
    let mut m = read_json(&d.join("corpus/manifest.json"));
    m["entries"][1]["image"] = json!("images/missing.png");
    write_json(&d.join("corpus/broken.json"), &m);

    let out = pointmask(d, &["pmg", "--manifest", "corpus/broken.json", "--out", "pmg"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scene_0001"));
    assert_eq!(png_count(&d.join("pmg/masks")), 2);

    let out = pointmask(d, &["pmg", "--manifest", "corpus/broken.json", "--out", "strict", "--strict"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.join("strict/manifest.json").exists());
}

#[test]
fn config_and_data_errors_have_distinct_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 1, false);
    let bad_config = pointmask(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "x", "--alpha", "1.5"]);
    assert_eq!(bad_config.status.code(), Some(2));
    let bad_r = pointmask(d, &["update", "--manifest", "corpus/manifest.json", "--out", "x", "--r", "0"]);
    assert_eq!(bad_r.status.code(), Some(2));
    let missing = pointmask(d, &["pmg", "--manifest", "nope.json", "--out", "x"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(!d.join("x").exists(), "nothing is written before validation");
}

#[test]
fn update_erases_distant_false_components() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 6, true);
    ok(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg"]);

    let out = pointmask(d, &["update", "--manifest", "pmg/manifest.json", "--out", "upd"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.matches("erased 3 components").count(), 6, "{stderr}");
    for img in run_log_images(&d.join("upd/run_log.json")) {
        assert_eq!(img["erased_components"], 3);
    }

    ok(d, &["update", "--manifest", "pmg/manifest.json", "--out", "wide", "--r", "1000"]);
    for img in run_log_images(&d.join("wide/run_log.json")) {
        assert_eq!(img["erased_components"], 0);
    }
}

#[test]
fn update_with_prediction_equal_to_initial_is_identity() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 3, false);
    ok(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg"]);
    let mut m = read_json(&d.join("pmg/manifest.json"));
    for e in m["entries"].as_array_mut().unwrap() {
        e["prediction_mask"] = e["initial_mask"].clone();
    }
    write_json(&d.join("pmg/self.json"), &m);
    ok(d, &["update", "--manifest", "pmg/self.json", "--out", "upd"]);
    for i in 0..3 {
        let name = format!("masks/scene_{i:04}.png");
        let a = io::load_mask(d.join("pmg").join(&name), 0.5).unwrap();
        let b = io::load_mask(d.join("upd").join(&name), 0.5).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn missing_predictions_fail_unless_allowed() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 2, false);
    ok(d, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg"]);
    let out = pointmask(d, &["update", "--manifest", "pmg/manifest.json", "--out", "upd"]);
    assert_eq!(out.status.code(), Some(3));

    ok(d, &["update", "--manifest", "pmg/manifest.json", "--out", "pass", "--allow-missing-pred"]);
    let a = io::load_mask(d.join("pmg/masks/scene_0000.png"), 0.5).unwrap();
    let b = io::load_mask(d.join("pass/masks/scene_0000.png"), 0.5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_false_pixel_in_a_512_image() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let gt = pointmask::BinaryMask::from_fn(512, 512, |x, y| (200..203).contains(&x) && (200..203).contains(&y));
    let mut pred = gt.clone();
    pred.set(10, 10, true);
    io::save_mask(&gt, d.join("gt.png")).unwrap();
    io::save_mask(&pred, d.join("pred.png")).unwrap();
    io::save_mask(&gt, d.join("img.png")).unwrap();
    write_json(
        &d.join("m.json"),
        &json!({ "version": 1, "entries": [
            { "id": "a", "image": "img.png", "gt_mask": "gt.png", "prediction_mask": "pred.png" }
        ]}),
    );
    let stdout = ok(d, &["eval", "--manifest", "m.json", "--source", "prediction", "--report", "r.json"]);
    // One pixel in 512 * 512, per million.
    let fa_ppm = 1e6 / (512.0 * 512.0);
    assert!(stdout.contains(&format!("Fa {fa_ppm:.2}")), "{stdout}");
    assert!(stdout.contains("Fa 3.81"));
}

#[test]
fn eval_without_pairs_fails() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 2, false);
    let out = pointmask(d, &["eval", "--manifest", "corpus/manifest.json", "--report", "r.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!d.join("r.json").exists());
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn cropping_size_sweep_stays_flat_on_small_rectangles() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 10, false);
    ok(d, &["sweep", "--manifest", "corpus/manifest.json", "--param", "l_ep", "--values", "5,10,15,20,25", "--out", "sw"]);
    let (header, rows) = csv(&d.join("sw/sweep.csv"));
    assert_eq!(&header[..4], ["l_ep", "iou", "pd", "fa"]);
    assert_eq!(rows.len(), 5);
    assert!(column(&header, &rows, "iou").iter().all(|&v| v >= 0.7));
}

#[test]
fn alpha_sweep_includes_the_zero_baseline() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 3, false);
    let stdout = ok(d, &["sweep", "--manifest", "corpus/manifest.json", "--param", "alpha", "--values", "0,0.15,0.5", "--out", "sw"]);
    let (header, rows) = csv(&d.join("sw/sweep.csv"));
    assert_eq!(column(&header, &rows, "alpha"), vec![0.0, 0.15, 0.5]);
    assert!(stdout.starts_with("alpha,iou"));
}

#[test]
fn sweep_rejects_an_empty_range() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 1, false);
    let out = pointmask(d, &["sweep", "--manifest", "corpus/manifest.json", "--param", "r", "--values", "", "--out", "sw"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pointmask(d, &["sweep", "--manifest", "corpus/manifest.json", "--param", "l_ep", "--values", "2.5", "--out", "sw"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn radius_sweep_peaks_at_an_intermediate_radius() {
    // Large targets labelled with coarse points: a small radius erases true
    // targets whose centroid sits far from the label, a huge radius keeps the
    // injected false alarms.
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write_json(
        &d.join("spec.json"),
        &json!({ "random": { "count": 12, "width": 200, "height": 200, "side": [20, 28], "margin": 40 } }),
    );
    write_json(
        &d.join("corrupt.json"),
        &json!({ "false_component_count": 3, "false_component_distance": 100.0, "false_component_half_extent": 3 }),
    );
    ok(d, &["synth", "--spec", "spec.json", "--corrupt", "corrupt.json", "--out", "corpus", "--seed", "3"]);
    ok(d, &["centroids", "--manifest", "corpus/manifest.json", "--out", "corpus/coarse.txt", "--jitter", "0.25", "--seed", "9"]);
    let mut m = read_json(&d.join("corpus/manifest.json"));
    m["points_file"] = json!("coarse.txt");
    write_json(&d.join("corpus/coarse.json"), &m);

    ok(d, &["sweep", "--manifest", "corpus/coarse.json", "--param", "r", "--values", "10,30,1000", "--out", "sw"]);
    let (header, rows) = csv(&d.join("sw/sweep.csv"));
    let iou = column(&header, &rows, "filtered_iou");
    assert!(iou[1] > iou[0] && iou[1] > iou[2], "filtered IoU by r: {iou:?}");
    let erased = column(&header, &rows, "erased_components");
    assert_eq!(erased[2], 0.0);
}

#[test]
fn centroids_from_masks_reproduce_synth_labels() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    sharp_corpus(d, 5, false);
    ok(d, &["centroids", "--masks-dir", "corpus/masks", "--out", "labels.txt"]);
    let derived = io::load_points(d.join("labels.txt")).unwrap();
    let original = io::load_points(d.join("corpus/points.txt")).unwrap();
    assert_eq!(derived, original);
    assert!(d.join("labels.run_log.json").exists());

    ok(d, &["centroids", "--masks-dir", "corpus/masks", "--out", "j1.txt", "--jitter", "0.125", "--seed", "4"]);
    ok(d, &["centroids", "--masks-dir", "corpus/masks", "--out", "j2.txt", "--jitter", "0.125", "--seed", "4"]);
    assert_eq!(fs::read(d.join("j1.txt")).unwrap(), fs::read(d.join("j2.txt")).unwrap());
    // Jittered labels still land on their targets.
    for (id, pts) in io::load_points(d.join("j1.txt")).unwrap().iter() {
        let gt = io::load_mask(d.join(format!("corpus/masks/{id}.png")), 0.5).unwrap();
        assert!(pts.iter().all(|&(x, y)| gt.get(x as usize, y as usize)));
    }
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in fs::read_dir(&p).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn reruns_are_bit_exact() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        fs::create_dir_all(dir).unwrap();
        write_json(
            &dir.join("spec.json"),
            &json!({ "random": { "count": 6, "noise_fraction": 0.1, "blob_probability": 0.5, "targets_per_scene": [1, 3], "margin": 20, "min_separation": 30 } }),
        );
        write_json(&dir.join("corrupt.json"), &json!({ "drop_probability": 0.3, "false_component_count": 2, "false_component_distance": 60.0, "dilation": 1 }));
        ok(dir, &["synth", "--spec", "spec.json", "--corrupt", "corrupt.json", "--out", "corpus", "--seed", "77"]);
        ok(dir, &["pmg", "--manifest", "corpus/manifest.json", "--out", "pmg", "--jobs", jobs]);
    }
    assert_eq!(tree(&a.join("corpus")), tree(&b.join("corpus")));
    let masks = |d: &Path| tree(&d.join("pmg/masks"));
    assert_eq!(masks(&a), masks(&b));
    let outputs = |d: &Path| read_json(&d.join("pmg/run_log.json"))["outputs"].clone();
    assert_eq!(outputs(&a), outputs(&b));

    // The library regenerates the same ground truth the CLI wrote.
    let specs = synth::random_scenes(
        &synth::CorpusParams {
            count: 6,
            noise_fraction: 0.1,
            blob_probability: 0.5,
            targets_per_scene: [1, 3],
            margin: 20,
            min_separation: 30,
            ..Default::default()
        },
        77,
    )
    .unwrap();
    let scene = synth::generate_scene(&specs[2]).unwrap();
    assert_eq!(io::load_mask(a.join("corpus/masks/scene_0002.png"), 0.5).unwrap(), scene.gt);
}
