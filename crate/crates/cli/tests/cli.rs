//! Exit codes, report schemas, and wiring of the CLI against the library.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;
use unsemble::data::{parse_prediction_csv, Encoding};
use unsemble::ensemble::majority_vote;
use unsemble::imbalance::ImbalanceMethod;
use unsemble::pipeline::isml_predict;
use unsemble::simulation::{generate, SyntheticSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unsemble"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_synthetic(dir: &Path, name: &str, spec: &SyntheticSpec) -> String {
    let (z, _) = generate(spec).unwrap();
    let path = dir.join(name);
    fs::write(&path, z.to_csv_pm_one()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn estimate_both_produces_two_reports_with_stable_schema() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(6, 2_000, 0.3, 0.75, 11);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    let out = run(&["estimate", "--input", &input, "--method", "both"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = reports.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    for r in arr {
        for field in ["method", "b", "delta", "classifiers", "v", "residual"] {
            assert!(r.get(field).is_some(), "missing field {field}");
        }
        let cls = r["classifiers"].as_array().unwrap();
        assert_eq!(cls.len(), 6);
        for c in cls {
            for field in ["psi", "eta", "pi", "clipped"] {
                assert!(c.get(field).is_some(), "missing classifier field {field}");
            }
        }
    }
    assert_eq!(arr[0]["method"], "tensor");
    assert_eq!(arr[1]["method"], "likelihood");
}

#[test]
fn estimate_csv_format() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(5, 500, 0.0, 0.7, 12);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    let out = run(&["estimate", "--input", &input, "--method", "tensor", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("method,b,delta,classifier,psi,eta,pi,clipped,v,residual\n"));
    assert_eq!(text.lines().count(), 1 + 5);
}

#[test]
fn estimate_two_row_csv_exits_2_with_too_few_classifiers() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("two.csv");
    fs::write(&path, "1,2\n1,1\n").unwrap();
    let out = run(&["estimate", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("structured error object");
    assert_eq!(err["error"]["code"], "TooFewClassifiers");
}

#[test]
fn estimate_degenerate_tensor_exits_3_but_reports_likelihood() {
    // mutually orthogonal centered rows: exactly diagonal covariance
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("orth.csv");
    fs::write(&path, "1,1,-1,-1\n1,-1,1,-1\n1,-1,-1,1\n").unwrap();
    let out = run(&["estimate", "--input", path.to_str().unwrap(), "--method", "both"]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "DegenerateDesign");
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let arr = reports.as_array().unwrap();
    assert_eq!(arr.len(), 1);
    assert_eq!(arr[0]["method"], "likelihood");
}

#[test]
fn estimate_rejects_bad_delta_as_usage_error() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(4, 100, 0.0, 0.7, 13);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    let out = run(&["estimate", "--input", &input, "--delta", "0.7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["estimate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predict_mv_matches_library_and_has_n_rows() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(5, 300, 0.2, 0.7, 14);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    let out = run(&["predict", "--input", &input, "--method", "mv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let labels: Vec<i8> = text
        .lines()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(labels.len(), 300);

    let z = parse_prediction_csv(&fs::read_to_string(&input).unwrap(), Encoding::PmOne).unwrap();
    let expect = majority_vote(&z);
    assert_eq!(labels, expect.labels);
}

#[test]
fn predict_isml_matches_pipeline_composition() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(6, 1_500, 0.3, 0.72, 15);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    let out = run(&["predict", "--input", &input, "--method", "isml"]);
    assert!(out.status.success());
    let labels: Vec<i8> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let z = parse_prediction_csv(&fs::read_to_string(&input).unwrap(), Encoding::PmOne).unwrap();
    let (expect, _) = isml_predict(
        &z,
        ImbalanceMethod::Likelihood,
        &unsemble::imbalance::LikelihoodOptions::default(),
    )
    .unwrap();
    assert_eq!(labels, expect.labels);
}

#[test]
fn predict_isml_em_and_sml_run() {
    let dir = TempDir::new().unwrap();
    let spec = SyntheticSpec::symmetric(5, 800, 0.0, 0.75, 16);
    let input = write_synthetic(dir.path(), "z.csv", &spec);
    for rule in ["sml", "isml-em"] {
        let out = run(&["predict", "--input", &input, "--method", rule]);
        assert!(out.status.success(), "rule {rule}");
        assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 800);
    }
}

#[test]
fn transpose_flag_accepts_wide_files() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("wide.csv");
    // 2 instances x 4 classifiers in transposed orientation
    fs::write(&path, "1,0,1,1\n0,1,1,0\n").unwrap();
    let out = run(&[
        "predict",
        "--input",
        path.to_str().unwrap(),
        "--encoding",
        "zero-one",
        "--transpose",
        "--method",
        "mv",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn simulate_unknown_scenario_exits_1() {
    let out = run(&["simulate", "--scenario", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], "Usage");
}

#[test]
fn simulate_ensemble_reports_four_methods() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("ens.csv");
    let out = run(&[
        "simulate",
        "--scenario",
        "ensemble",
        "--trials",
        "2",
        "--n",
        "400",
        "--seed",
        "7",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&out_path).unwrap();
    for metric in ["ba_mv", "ba_sml", "ba_isml", "ba_oracle"] {
        assert!(csv.contains(metric), "missing {metric} in {csv}");
    }
}

#[test]
fn simulate_writes_plot_data() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("imb.csv");
    let plot_path = dir.path().join("imb.plot");
    let out = run(&[
        "simulate",
        "--scenario",
        "imbalance",
        "--trials",
        "2",
        "--n-values",
        "300",
        "--b-values",
        "0.3",
        "--seed",
        "5",
        "--out",
        out_path.to_str().unwrap(),
        "--plot-out",
        plot_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let plot = fs::read_to_string(&plot_path).unwrap();
    // 2 methods x 2 metrics x 2 trials
    assert_eq!(plot.lines().count(), 8);
    // summary went to stdout
    assert!(String::from_utf8(out.stdout).unwrap().contains("b_hat"));
}
