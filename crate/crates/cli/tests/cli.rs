use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tcmra(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcmra"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = tcmra(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON object")
}

const SMALL: [&str; 3] = ["--synth.n_storms=24", "--synth.frames_per_storm=12", "--synth.image_width=32"];

fn synth(dir: &Path) {
    let mut args = vec!["synth", "generate", "out", "--sparsify"];
    args.extend(SMALL);
    let v = ok(dir, &args);
    assert_eq!(v["storms"], 24);
}

fn first(dir: &Path, sub: &str) -> String {
    let mut names: Vec<String> = fs::read_dir(dir.join("out").join(sub))
        .unwrap()
        .map(|e| format!("out/{sub}/{}", e.unwrap().file_name().to_string_lossy()))
        .collect();
    names.sort();
    names.swap_remove(0)
}

#[test]
fn full_pipeline_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let built = ok(d, &["dataset", "build", "--frames", "out/wsc", "--hurdat2", "out/best_track.txt", "out/manifest.json"]);
    assert!(built["samples"].as_u64().unwrap() > 0);
    ok(d, &["dataset", "split", "out/manifest.json", "out/split.json", "--dataset.split_fractions=[0.5,0.1,0.4]"]);
    let trained = ok(d, &["model", "train", "out/manifest.json", "--split", "out/split.json", "--out", "out/m.wnc", "--model.epochs=4"]);
    assert_eq!(trained["epochs"], 4);
    assert_eq!(trained["mode"], "wavelet");

    let eval = ok(
        d,
        &[
            "model", "eval", "out/m.wnc", "out/manifest.json", "--split", "out/split.json", "--partition", "train",
            "--roc", "out/roc.csv", "--summary", "out/summary.json", "--scores", "out/scores.csv",
        ],
    );
    let auc = eval["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
    let saved: Value = serde_json::from_str(&fs::read_to_string(d.join("out/summary.json")).unwrap()).unwrap();
    assert_eq!(saved["auc"], eval["auc"]);
    let roc = fs::read_to_string(d.join("out/roc.csv")).unwrap();
    let mut lines = roc.lines();
    assert_eq!(lines.next(), Some("fpr,tpr,threshold"));
    assert!(lines.next().unwrap().ends_with(",inf"));
    assert!(roc.lines().last().unwrap().starts_with("1.0,1.0,"));
    let scores = fs::read_to_string(d.join("out/scores.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("storm_id,t,label,posterior,p_t,primed"));
    assert_eq!(scores.lines().count() as u64, eval["n"].as_u64().unwrap() + 1);

    let cam = ok(d, &["model", "cam", "out/m.wnc", "out/manifest.json", "--csv", "out/cam.csv", "--pgm", "out/cam.pgm", "--subbands", "out/sb.csv"]);
    assert_eq!(cam["width"], 32);
    assert!(fs::read(d.join("out/cam.pgm")).unwrap().starts_with(b"P5\n32 32\n255\n"));
    // approx plus three orientations at each of the three levels
    assert_eq!(fs::read_to_string(d.join("out/sb.csv")).unwrap().lines().count(), 1 + 1 + 9);
}

#[test]
fn sparsify_meets_ratio_and_overrides_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let irf = first(d, "frames");
    let s = ok(d, &["wavelet", "sparsify", &irf, "a.wsc"]);
    let pixels = s["pixels"].as_f64().unwrap();
    assert!(s["entries"].as_f64().unwrap() <= (0.10 * pixels).ceil());
    let r = ok(d, &["wavelet", "ratio", "a.wsc"]);
    assert_eq!(r["ratio"], s["ratio"]);

    let flag = ok(d, &["wavelet", "sparsify", "--q", "0.02", &irf, "b.wsc"]);
    let dotted = ok(d, &["wavelet", "sparsify", &irf, "c.wsc", "--wavelet.q", "0.02"]);
    assert_eq!(flag["entries"], dotted["entries"]);
    assert!(flag["entries"].as_u64() < s["entries"].as_u64());
    assert_eq!(fs::read(d.join("b.wsc")).unwrap(), fs::read(d.join("c.wsc")).unwrap());

    let rec = ok(d, &["wavelet", "reconstruct", "a.wsc", "rec.csv", "--pgm", "rec.pgm"]);
    assert_eq!(rec["width"], 32);
    assert_eq!(fs::read_to_string(d.join("rec.csv")).unwrap().lines().count(), 32);
}

#[test]
fn config_file_is_read() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let irf = first(d, "frames");
    fs::write(d.join("cfg.json"), r#"{"wavelet": {"q": 0.01}}"#).unwrap();
    let a = ok(d, &["--config", "cfg.json", "wavelet", "sparsify", &irf, "a.wsc"]);
    assert_eq!(a["q"], 0.01);
    let b = ok(d, &["--config", "cfg.json", "wavelet", "sparsify", &irf, "b.wsc", "--wavelet.q=0.03"]);
    assert_eq!(b["q"], 0.03);
}

#[test]
fn usage_errors_exit_one_and_write_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for args in [
        vec!["wavelet", "ratio", "x.wsc", "--no-such-flag"],
        vec!["synth", "generate", "out", "--synth.no_such_key=3"],
        vec!["synth", "generate", "out", "--wavelet.q=2"],
        vec!["frobnicate"],
    ] {
        let out = tcmra(d, &args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
    }
    assert_eq!(fs::read_dir(d).unwrap().count(), 0);
}

#[test]
fn data_errors_exit_two_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.wsc"), b"not a coefficient file").unwrap();
    let out = tcmra(d, &["wavelet", "ratio", "bad.wsc"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string());
    assert!(err["message"].is_string());

    let out = tcmra(d, &["wavelet", "ratio", "missing.wsc"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn frame_pack_unpack_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let irf = first(d, "frames");
    let info = ok(d, &["frame", "unpack", &irf, "grid.csv", "--pgm", "grid.pgm"]);
    ok(
        d,
        &[
            "frame", "pack", "grid.csv", "re.irf", "--storm-id", info["storm_id"].as_str().unwrap(),
            "--time", info["timestamp"].as_str().unwrap(), "--lat", "15.5", "--lon", "-60.25",
        ],
    );
    ok(d, &["frame", "unpack", "re.irf", "grid2.csv"]);
    assert_eq!(fs::read(d.join("grid.csv")).unwrap(), fs::read(d.join("grid2.csv")).unwrap());
}

#[test]
fn token_round_trip_matches_vocabulary() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let wsc = first(d, "wsc");
    ok(d, &["token", "fit", &wsc, "--out", "vocab.json", "--tokenizer.V=8"]);
    let enc = ok(d, &["token", "encode", "vocab.json", &wsc, "--out", "tokens.txt"]);
    let dec = ok(d, &["token", "decode", "vocab.json", "tokens.txt", "--out", "back.wsc"]);
    assert_eq!(enc["entries"], dec["entries"]);
    ok(d, &["token", "encode", "vocab.json", "back.wsc", "--out", "tokens2.txt"]);
    let body = |p: &str| fs::read_to_string(d.join(p)).unwrap().lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body("tokens.txt"), body("tokens2.txt"));
}

#[test]
fn ingest_writes_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth(d);
    let v = ok(d, &["ingest", "hurdat2", "out/best_track.txt", "--labels", "labels.csv", "--tracks", "tracks.json"]);
    assert_eq!(v["storms"], 24);
    let labels = fs::read_to_string(d.join("labels.csv")).unwrap();
    assert_eq!(labels.lines().next(), Some("storm_id,timestamp,label,delta_kt"));
    assert_eq!(labels.lines().count() as u64, v["labels"].as_u64().unwrap() + 1);
    assert_eq!(labels, fs::read_to_string(d.join("out/labels.csv")).unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let run = || {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path();
        synth(d);
        ok(d, &["dataset", "build", "--frames", "out/wsc", "--hurdat2", "out/best_track.txt", "out/manifest.json"]);
        ok(d, &["dataset", "split", "out/manifest.json", "out/split.json"]);
        ok(d, &["model", "train", "out/manifest.json", "--split", "out/split.json", "--out", "out/m.wnc", "--model.epochs=2"]);
        ["out/manifest.json", "out/split.json", "out/m.wnc", "out/best_track.txt"]
            .map(|p| fs::read(d.join(p)).unwrap())
    };
    assert_eq!(run(), run());
}

#[test]
fn sparsify_example_from_defaults_stays_under_a_tenth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "generate", "out", "--synth.n_storms=3", "--synth.frames_per_storm=9", "--synth.image_width=128"]);
    let irf = first(d, "frames");
    ok(d, &["wavelet", "sparsify", "--q", "0.10", "--r-frac", "0.25", &irf, "out.wsc"]);
    let r = ok(d, &["wavelet", "ratio", "out.wsc"]);
    assert!(r["ratio"].as_f64().unwrap() <= 0.10);
}

/// Warm frames for label 1, cold for label 0, with a little storm-specific texture.
fn separable_dataset(d: &Path) {
    use tcmra::dataset::{write_manifest, ManifestEntry};
    use tcmra::time::{format_basic, from_unix};
    use tcmra::wavelet::{sparsify, Grid, RadialMaskSpec, WaveletSpec};

    let w = 16;
    let hours = |h: i64| from_unix(1_280_620_800 + 3600 * h).unwrap();
    let mut entries = Vec::new();
    fs::create_dir_all(d.join("wsc")).unwrap();
    for s in 0..16usize {
        let id = format!("AL{:02}2010", s + 1);
        let label = (s % 2) as u8;
        let base = if label == 1 { 260.0 } else { 210.0 };
        let mut paths = Vec::new();
        for f in 0..5i64 {
            let ts = hours(6 * f);
            let px = (0..w * w)
                .map(|i| base + 3.0 * ((i * (s + 3) + f as usize) as f64 * 0.7).sin())
                .collect();
            let set = sparsify(&Grid::from_vec(w, px).unwrap(), &WaveletSpec::new(2, 2), 0.5, &RadialMaskSpec::none())
                .unwrap()
                .with_source(id.clone(), Some(ts));
            let name = format!("wsc/{id}_{}.wsc", format_basic(&ts));
            fs::write(d.join(&name), tcmra::wavelet::write_wsc(&set).unwrap()).unwrap();
            paths.push(name);
        }
        entries.push(ManifestEntry {
            storm_id: id,
            t: hours(24),
            frame_paths: paths,
            label,
            env: None,
            env_names: vec![],
        });
    }
    fs::write(d.join("manifest.json"), write_manifest(&entries).unwrap()).unwrap();
}

#[test]
fn eval_on_separable_split_reports_perfect_auc() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    separable_dataset(d);
    ok(d, &["dataset", "split", "manifest.json", "split.json", "--dataset.split_fractions=[0.5,0.0,0.5]"]);
    ok(d, &["model", "train", "manifest.json", "--split", "split.json", "--out", "m.wnc"]);
    let eval = ok(d, &["model", "eval", "m.wnc", "manifest.json", "--split", "split.json"]);
    assert!(eval["positives"].as_u64().unwrap() > 0);
    assert!(eval["positives"].as_u64() < eval["n"].as_u64());
    assert_eq!(eval["auc"], 1.0);
}
