mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use plumekit::evaluation::{auc, parse_roc_csv};
use plumekit::mif::compute_support_1d;
use plumekit::synth::{self, SceneSpec};
use plumekit::{io, Grid, GroundTruthMask, Label, Signature};
use tempfile::TempDir;

fn plumekit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plumekit"))
        .current_dir(dir)
        .env_remove("PLUMEKIT_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = plumekit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn auc_from_stdout(stdout: &str) -> f64 {
    let line = stdout.lines().rev().find(|l| l.starts_with("AUC=")).expect("no AUC line");
    line["AUC=".len()..].parse().unwrap()
}

/// Writes a 32x32x16 scene spec and synthesises it into `dir`.
fn small_scene(dir: &TempDir, seed: u64, alpha: f64) {
    let spec = SceneSpec::new(32, 32, 16, seed, alpha);
    std::fs::write(dir.path().join("scene.txt"), synth::spec_to_string(&spec)).unwrap();
    ok(
        dir.path(),
        &[
            "synth", "--spec", "scene.txt", "--out-cube", "cube.hsc", "--out-mask", "gt.gtm", "--out-sig", "sig.txt",
        ],
    );
}

fn manifest_value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("no {key} in manifest"))
}

#[test]
fn decompose_constant_signal_gives_no_imfs() {
    let dir = TempDir::new().unwrap();
    io::write_signature(&Signature::new(vec![3.0; 50]).unwrap(), dir.path().join("flat.txt")).unwrap();
    let stdout = ok(dir.path(), &["decompose", "--input", "flat.txt", "--dims", "1", "--out-prefix", "flat_", "--verify"]);
    assert_eq!(stdout.trim(), "flat_manifest.txt");
    let manifest = std::fs::read_to_string(dir.path().join("flat_manifest.txt")).unwrap();
    assert_eq!(manifest_value(&manifest, "imfs"), "0");
    let residual = io::read_signature(dir.path().join("flat_residual.csv")).unwrap();
    assert_eq!(residual.values(), &[3.0; 50][..]);
}

#[test]
fn decompose_sine_reports_its_support() {
    let dir = TempDir::new().unwrap();
    let n = 256;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * 6.0 * i as f64 / n as f64).sin() + 0.01 * i as f64).collect();
    io::write_signature(&Signature::new(x.clone()).unwrap(), dir.path().join("x.txt")).unwrap();
    ok(dir.path(), &["decompose", "--input", "x.txt", "--dims", "1", "--out-prefix", "x_", "--verify"]);
    let manifest = std::fs::read_to_string(dir.path().join("x_manifest.txt")).unwrap();
    assert!(manifest_value(&manifest, "imfs").parse::<usize>().unwrap() >= 1);
    assert_eq!(
        manifest_value(&manifest, "imf_1.support"),
        compute_support_1d(&x).unwrap().to_string()
    );
    let first = io::read_signature(dir.path().join("x_imf_1.csv")).unwrap();
    assert_eq!(first.len(), n);
}

#[test]
fn decompose_2d_map_verifies() {
    let dir = TempDir::new().unwrap();
    let map = Grid::from_fn(24, 20, |r, c| (r as f64 * 0.9).sin() * (c as f64 * 0.7).cos() + 0.05 * r as f64);
    io::write_detection_map(&map, dir.path().join("m.csv"), io::MapFormat::Csv).unwrap();
    ok(dir.path(), &["decompose", "--input", "m.csv", "--dims", "2", "--out-prefix", "m_", "--verify"]);
    let manifest = std::fs::read_to_string(dir.path().join("m_manifest.txt")).unwrap();
    assert_eq!(manifest_value(&manifest, "shape"), "24x20");
    assert!(dir.path().join("m_imf_1.dmp").exists());
}

#[test]
fn classify_ace_detects_the_synthetic_plume() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 3, 1.0);
    let stdout = ok(
        dir.path(),
        &["classify", "--cube", "cube.hsc", "--sig", "sig.txt", "--method", "ace", "--mask", "gt.gtm", "--out", "ace.dmp"],
    );
    let reported = auc_from_stdout(&stdout);
    assert!(reported > 0.9, "AUC {reported}");

    // The AUC printed agrees with the one recomputed from the written map.
    let map = io::read_detection_map(dir.path().join("ace.dmp")).unwrap();
    let gt = io::read_mask(dir.path().join("gt.gtm")).unwrap();
    assert!((auc(&map, &gt).unwrap() - reported).abs() < 1e-3);
}

#[test]
fn reversing_twice_restores_the_map() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 4, 1.0);
    ok(dir.path(), &["classify", "--cube", "cube.hsc", "--sig", "sig.txt", "--method", "cos", "--out", "cos.dmp"]);
    ok(dir.path(), &["reverse", "--input", "cos.dmp", "--out", "once.dmp"]);
    ok(dir.path(), &["reverse", "--input", "once.dmp", "--out", "twice.dmp"]);
    let original = io::read_detection_map(dir.path().join("cos.dmp")).unwrap();
    let once = io::read_detection_map(dir.path().join("once.dmp")).unwrap();
    let twice = io::read_detection_map(dir.path().join("twice.dmp")).unwrap();
    let (lo, hi) = original.min_max();
    for ((a, b), c) in original.data().iter().zip(twice.data()).zip(once.data()) {
        assert!((a - b).abs() <= 4.0 * f32::EPSILON as f64 * hi.abs().max(1.0));
        assert!((c - (hi + lo - a)).abs() <= 4.0 * f32::EPSILON as f64 * hi.abs().max(1.0));
    }
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = plumekit(dir.path(), &["classify", "--cube", "cube.hsc", "--out", "x.dmp"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sig"));
}

#[test]
fn missing_input_file_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let out = plumekit(dir.path(), &["roc", "--scores", "nope.dmp", "--gt", "nope.gtm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.dmp"));
}

#[test]
fn dimension_mismatch_names_both_shapes() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 5, 1.0);
    io::write_signature(&Signature::new(vec![1.0; 7]).unwrap(), dir.path().join("short.txt")).unwrap();
    let out = plumekit(dir.path(), &["classify", "--cube", "cube.hsc", "--sig", "short.txt", "--out", "x.dmp"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("32x32x16") && err.contains('7'), "{err}");
}

fn write_instance(dir: &Path, scores: &[f64], labels: &[Label], map_name: &str, gt_name: &str) {
    let map = Grid::new(1, scores.len(), scores.to_vec()).unwrap();
    io::write_detection_map(&map, dir.join(map_name), io::MapFormat::Csv).unwrap();
    io::write_mask(&GroundTruthMask::new(1, labels.len(), labels.to_vec()).unwrap(), dir.join(gt_name)).unwrap();
}

#[test]
fn roc_of_a_perfect_separation_is_one() {
    let dir = TempDir::new().unwrap();
    use Label::*;
    write_instance(dir.path(), &[0.9, 0.8, 0.1, 0.2, 0.3], &[Plume, Plume, Background, Background, Background], "s.csv", "g.gtm");
    let stdout = ok(dir.path(), &["roc", "--scores", "s.csv", "--gt", "g.gtm", "--out", "roc.csv"]);
    assert_eq!(auc_from_stdout(&stdout), 1.0);
    let curve = parse_roc_csv(&std::fs::read_to_string(dir.path().join("roc.csv")).unwrap()).unwrap();
    assert_eq!(curve.auc, 1.0);
    assert_eq!(curve.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
    assert_eq!(curve.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
}

#[test]
fn roc_ignores_boundary_pixels_and_matches_the_oracle() {
    let dir = TempDir::new().unwrap();
    use Label::*;
    let scores = [0.7, 0.4, 0.4, 0.9, 0.1, 0.6];
    let labels = [Plume, Background, Plume, Background, Background, Plume];
    write_instance(dir.path(), &scores, &labels, "s.csv", "a.gtm");
    let a = auc_from_stdout(&ok(dir.path(), &["roc", "--scores", "s.csv", "--gt", "a.gtm"]));
    // 3 positives, 3 negatives; pairwise wins 5 of 9 with the tie worth half.
    assert!((a - 5.5 / 9.0).abs() < 1e-12, "{a}");
    assert!((a - common::unique_threshold_auc(&scores, &labels)).abs() < 1e-12);

    // Extra pixels that are marked boundary change nothing.
    let mut scores_b = scores.to_vec();
    let mut labels_b = labels.to_vec();
    scores_b.extend([100.0, -100.0]);
    labels_b.extend([Boundary, Boundary]);
    write_instance(dir.path(), &scores_b, &labels_b, "sb.csv", "b.gtm");
    let b = auc_from_stdout(&ok(dir.path(), &["roc", "--scores", "sb.csv", "--gt", "b.gtm"]));
    assert_eq!(a, b);
}

#[test]
fn synth_is_reproducible_and_shapes_agree() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    small_scene(&a, 11, 1.0);
    small_scene(&b, 11, 1.0);
    for f in ["cube.hsc", "gt.gtm", "sig.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let cube = io::read_hypercube(a.path().join("cube.hsc")).unwrap();
    let gt = io::read_mask(a.path().join("gt.gtm")).unwrap();
    assert_eq!((cube.height(), cube.width(), cube.bands()), (32, 32, 16));
    gt.check_against_cube(&cube).unwrap();
    assert!(gt.count(Label::Plume) > 0 && gt.count(Label::Background) > 0);
}

#[test]
fn no_implant_chain_is_near_chance() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 12, 0.0);
    let stdout = ok(
        dir.path(),
        &["classify", "--cube", "cube.hsc", "--sig", "sig.txt", "--method", "ace", "--mask", "gt.gtm", "--out", "m.dmp"],
    );
    let a = auc_from_stdout(&stdout);
    assert!((a - 0.5).abs() <= 0.1, "AUC {a}");
}

#[test]
fn help_lists_sifting_defaults() {
    let dir = TempDir::new().unwrap();
    let help = ok(dir.path(), &["decompose", "--help"]);
    for needle in ["--sd", "0.001", "--max-imfs", "16", "200", "ellipsoidal", "antisymmetric"] {
        assert!(help.contains(needle), "help lacks {needle}:\n{help}");
    }
}

#[test]
fn pipeline_flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 6, 1.0);
    std::fs::write(
        dir.path().join("run.cfg"),
        "# reference run\ncube = cube.hsc\nsig = sig.txt\ngt = gt.gtm\nout = from_config.dmp\nmethod = ace\n",
    )
    .unwrap();
    let from_config = auc_from_stdout(&ok(dir.path(), &["pipeline", "--config", "run.cfg"]));
    assert!(dir.path().join("from_config.dmp").exists());

    let stdout = ok(
        dir.path(),
        &["pipeline", "--config", "run.cfg", "--method", "cos", "--out", "cos.csv", "--roc-out", "roc.csv"],
    );
    let cos = auc_from_stdout(&stdout);
    assert!(dir.path().join("cos.csv").exists() && dir.path().join("roc.csv").exists());
    assert!(cos < from_config, "cos {cos} vs ace {from_config}");

    let out = plumekit(dir.path(), &["pipeline", "--config", "run.cfg", "--method", "svm"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.cfg"), "cube = cube.hsc\nsig = sig.txt\nout = x.dmp\ncolour = blue\n").unwrap();
    let out = plumekit(dir.path(), &["pipeline", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn thread_count_from_environment_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    small_scene(&dir, 7, 1.0);
    let args = ["classify", "--cube", "cube.hsc", "--sig", "sig.txt", "--method", "mf", "--postp"];
    let mut outputs = Vec::new();
    for (threads, name) in [("1", "one.dmp"), ("3", "three.dmp")] {
        let out = Command::new(env!("CARGO_BIN_EXE_plumekit"))
            .current_dir(dir.path())
            .env("PLUMEKIT_THREADS", threads)
            .args(args)
            .args(["--out", name])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
