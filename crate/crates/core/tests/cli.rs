use ndarray::Array2;
use resofeat::signal::{load_bundle, save_bundle};
use resofeat::{DatasetBundle, Label, SignalSample};
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resofeat")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_spec(path: &Path, dim: &str, effect: f64) {
    let spec = format!(
        r#"{{"n_subjects_per_class": 4, "samples_per_subject": 2, "n_channels": 6, "n_time": 768,
            "fs": 128, "effect_dimension": "{dim}", "effect_size": {effect}, "seed": 3}}"#
    );
    std::fs::write(path, spec).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_sweep_edge_eval() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let bundle = dir.path().join("bundle");
    let report = dir.path().join("report");
    write_spec(&spec, "spectral", 1.0);

    ok(&["synth", "--spec", s(&spec), "--out", s(&bundle)]);
    assert_eq!(load_bundle(&bundle).unwrap().samples.len(), 16);

    ok(&["sweep", "--bundle", s(&bundle), "--budget", "12", "--folds", "4", "--seed", "5", "--out", s(&report)]);
    let csv = std::fs::read_to_string(report.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("n_f_feat,n_t_feat,n_g_feat,mean_accuracy,fold_0,fold_1,fold_2,fold_3\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["flags"]["seed"], "5");
    assert_eq!(json["metadata"]["flags"]["budget"], "12");

    let edge = dir.path().join("edge.csv");
    ok(&["edge", "--result", s(&report.join("sweep.json")), "--out", s(&edge)]);
    assert_eq!(std::fs::read(&edge).unwrap(), std::fs::read(report.join("edge.csv")).unwrap());

    let diag = dir.path().join("diag.json");
    let models = dir.path().join("models");
    let stdout = ok(&[
        "eval", "--bundle", s(&bundle), "--config", "6,1,2", "--folds", "4", "--seed", "5",
        "--diagnostics", s(&diag), "--models", s(&models),
    ]);
    assert!(stdout.contains("mean: "));
    let d: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&diag).unwrap()).unwrap();
    let folds = d["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 4);
    assert_eq!(folds[0]["adjacency"].as_array().unwrap().len(), 6);
    assert_eq!(folds[0]["eigenvalues"].as_array().unwrap().len(), 6);
    assert_eq!(folds[0]["clusters"].as_array().unwrap().len(), 6);
    let model = std::fs::read_to_string(models.join("fold_0.json")).unwrap();
    resofeat::SvmModel::from_json(&model).unwrap();
}

#[test]
fn decimate_and_partition_record_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let bundle = dir.path().join("b");
    write_spec(&spec, "none", 0.0);
    ok(&["synth", "--spec", s(&spec), "--out", s(&bundle)]);

    let dec = dir.path().join("dec");
    ok(&["decimate", "--bundle", s(&bundle), "--factor", "2", "--out", s(&dec)]);
    let d = load_bundle(&dec).unwrap();
    assert_eq!(d.fs(), Some(64.0));
    assert_eq!(d.samples[0].n_time(), 384);
    assert_eq!(d.provenance.last().unwrap(), "decimate:block-mean:2");

    let part = dir.path().join("part");
    ok(&["partition", "--bundle", s(&dec), "--window-seconds", "2", "--out", s(&part)]);
    let p = load_bundle(&part).unwrap();
    assert_eq!(p.samples.len(), 16 * 3);
    assert_eq!(p.provenance.len(), 2);
}

#[test]
fn import_csv_appends() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "Fp1,Fp2\n1,2\n3,4\n5,6\n").unwrap();
    std::fs::write(&b, "Fp1,Fp2\n0,1\n1,0\n0,1\n").unwrap();
    let out = dir.path().join("bundle");
    ok(&["import-csv", "--fs", "250", "--subject", "p1", "--label", "1", s(&a), "--out", s(&out)]);
    ok(&["import-csv", "--fs", "250", "--subject", "c1", "--label", "0", s(&b), "--out", s(&out)]);
    let bundle = load_bundle(&out).unwrap();
    assert_eq!(bundle.channel_names, vec!["Fp1", "Fp2"]);
    assert_eq!(bundle.samples.len(), 2);
    assert_eq!(bundle.samples[0].label, Label::Patient);
    assert_eq!(bundle.samples[0].data[[0, 2]], 5.0);
    assert_eq!(bundle.samples[1].data[[1, 1]], 0.0);
}

#[test]
fn input_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = dir.path().join("out");
    assert_eq!(run(&["sweep", "--bundle", s(&missing), "--out", s(&out)]).status.code(), Some(1));
    assert_eq!(run(&["sweep"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));

    let spec = dir.path().join("spec.json");
    let bundle = dir.path().join("b");
    write_spec(&spec, "none", 0.0);
    ok(&["synth", "--spec", s(&spec), "--out", s(&bundle)]);
    assert_eq!(run(&["eval", "--bundle", s(&bundle), "--config", "1,2"]).status.code(), Some(1));
    assert_eq!(run(&["decimate", "--bundle", s(&bundle), "--factor", "0", "--out", s(&out)]).status.code(), Some(1));
    assert_eq!(run(&["import-csv", "--fs", "1", "--subject", "x", "--label", "7", s(&spec), "--out", s(&out)]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_with_2() {
    // Every channel flat: no correlation graph and no feature variance.
    let dir = tempfile::tempdir().unwrap();
    let mut b = DatasetBundle::new("flat", vec!["a".into(), "b".into(), "c".into()]);
    for (i, label) in [Label::Control, Label::Patient, Label::Control, Label::Patient].into_iter().enumerate() {
        b.samples.push(SignalSample::new(Array2::zeros((3, 512)), 128.0, format!("s{i}"), label).unwrap());
    }
    let bundle = dir.path().join("flat");
    save_bundle(&b, &bundle).unwrap();
    let out = dir.path().join("out");
    let r = run(&["sweep", "--bundle", s(&bundle), "--budget", "6", "--folds", "2", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
}
