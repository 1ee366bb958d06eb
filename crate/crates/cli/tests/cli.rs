use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use spca::data::{CenterOptions, Dataset, RawData, Task};
use spca::kernel::KernelSpec;
use spca::method::{train, Method, TrainSettings};
use spca::solver::NuisanceMode;
use tempfile::TempDir;

fn spca(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spca"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPCA_THREADS")
        .output()
        .expect("run spca")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn value(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("no '{key}' in {stdout}"))
        .to_string()
}

fn read_csv(path: &Path) -> (Vec<String>, DMatrix<f64>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|c| c.parse().unwrap()).collect())
        .collect();
    let n = rows.len();
    let m = DMatrix::from_fn(n, headers.len(), |i, j| rows[i][j]);
    (headers, m)
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--n", "80", "--p", "6", "--r", "2", "--seed", "5", "--out", "data.csv"];
    args.extend_from_slice(extra);
    ok(spca(&args, dir));
    dir.join("data.csv")
}

fn raw_from(path: &Path) -> RawData {
    let (_, m) = read_csv(path);
    let p = m.ncols() - 1;
    RawData::new(m.columns(0, p).into_owned(), m.columns(p, 1).into_owned(), Task::Regression).unwrap()
}

#[test]
fn predict_reproduces_the_fit() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), &[]);
    let fit = ok(spca(
        &["fit", "--data", "data.csv", "--task", "reg", "--method", "lspca", "--r", "2", "--lambda", "0.3", "--out", "m.txt"],
        tmp.path(),
    ));
    let pred = ok(spca(&["predict", "--model", "m.txt", "--data", "data.csv", "--out", "p.csv", "--embedding"], tmp.path()));
    assert_eq!(value(&fit, "train_error"), value(&pred, "error"));

    // the loaded model predicts exactly what the in-memory model does
    let raw = raw_from(&data);
    let ds = Dataset::from_raw(&raw, CenterOptions::default()).unwrap();
    let trained = train(&ds, &TrainSettings::new(Method::Lspca, 2).with_lambda(0.3)).unwrap();
    let (headers, out) = read_csv(&tmp.path().join("p.csv"));
    assert_eq!(headers, vec!["z1", "z2", "pred_y"]);
    let z = trained.model.embed(&raw.x).unwrap();
    let y = trained.model.predict(&raw.x).unwrap().values().clone();
    assert_eq!(out.columns(0, 2).into_owned(), z);
    assert_eq!(out.columns(2, 1).into_owned(), y);
    assert!((out.columns(0, 2) - &trained.train_embedding).amax() <= 1e-12);
}

#[test]
fn mle_fit_reports_consistent_trade_off() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    let out = ok(spca(
        &["fit", "--data", "data.csv", "--task", "reg", "--method", "lspca", "--mode", "mle", "--r", "2", "--out", "m.txt"],
        tmp.path(),
    ));
    let get = |k: &str| value(&out, k).parse::<f64>().unwrap();
    let (sx, a, sy) = (get("sigma_x2"), get("alpha"), get("sigma_y2"));
    assert!((get("lambda") - sy / sx).abs() <= 1e-12 * get("lambda"));
    assert!((get("gamma") - (1.0 - (sx / (sx + a)).sqrt())).abs() <= 1e-12);
}

#[test]
fn kernel_model_reproduces_training_embedding() {
    let tmp = TempDir::new().unwrap();
    let data = synth(tmp.path(), &[]);
    ok(spca(
        &["fit", "--data", "data.csv", "--task", "reg", "--method", "klspca", "--r", "2", "--lambda", "1", "--bandwidth", "2.5", "--out", "k.txt"],
        tmp.path(),
    ));
    ok(spca(&["predict", "--model", "k.txt", "--data", "data.csv", "--out", "p.csv", "--embedding"], tmp.path()));
    let ds = Dataset::from_raw(&raw_from(&data), CenterOptions::default()).unwrap();
    let s = TrainSettings::new(Method::Klspca, 2).with_mode(NuisanceMode::Cv { lambda: 1.0 }).with_kernel(KernelSpec::rbf(2.5));
    let trained = train(&ds, &s).unwrap();
    let (_, out) = read_csv(&tmp.path().join("p.csv"));
    assert!((out.columns(0, 2) - &trained.train_embedding).amax() <= 1e-10);
}

#[test]
fn empty_input_gives_a_header_only() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    ok(spca(&["fit", "--data", "data.csv", "--task", "reg", "--method", "pcr", "--r", "2", "--out", "m.txt"], tmp.path()));
    std::fs::write(tmp.path().join("empty.csv"), "x1,x2,x3,x4,x5,x6\n").unwrap();
    let out = ok(spca(&["predict", "--model", "m.txt", "--data", "empty.csv", "--out", "p.csv"], tmp.path()));
    assert_eq!(value(&out, "rows"), "0");
    assert_eq!(std::fs::read_to_string(tmp.path().join("p.csv")).unwrap().trim(), "pred_y");
}

#[test]
fn rejects_unknown_versions_and_shape_mismatches() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    ok(spca(&["fit", "--data", "data.csv", "--task", "reg", "--method", "pcr", "--r", "2", "--out", "m.txt"], tmp.path()));
    let text = std::fs::read_to_string(tmp.path().join("m.txt")).unwrap();
    std::fs::write(tmp.path().join("v2.txt"), text.replacen("spca-model 1", "spca-model 2", 1)).unwrap();
    let out = spca(&["predict", "--model", "v2.txt", "--data", "data.csv", "--out", "p.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    std::fs::write(tmp.path().join("narrow.csv"), "x1,x2\n1,2\n").unwrap();
    let out = spca(&["predict", "--model", "m.txt", "--data", "narrow.csv", "--out", "p.csv"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    let usage = spca(&["fit", "--data", "data.csv", "--task", "reg", "--method", "lrpca", "--r", "2", "--out", "m.txt"], tmp.path());
    assert_eq!(usage.status.code(), Some(1));
    let bad_flag = spca(&["fit", "--bogus"], tmp.path());
    assert_eq!(bad_flag.status.code(), Some(1));
    std::fs::write(tmp.path().join("holes.csv"), "a,b,y\n1,2,3\n4,NA,6\n7,,9\n1,x,2\n").unwrap();
    let data = spca(&["fit", "--data", "holes.csv", "--task", "reg", "--method", "pcr", "--r", "1", "--out", "m.txt"], tmp.path());
    assert_eq!(data.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&data.stderr);
    assert!(msg.contains("3 missing or non-numeric") && msg.contains("column 'b'") && msg.contains("line 3"), "{msg}");
    // a constant response makes the noise estimate degenerate
    std::fs::write(
        tmp.path().join("flat.csv"),
        "a,b,c,y\n1,0,2,1\n0,1,1,1\n2,1,0,1\n1,3,1,1\n0,2,2,1\n3,1,1,1\n",
    )
    .unwrap();
    let num = spca(&["fit", "--data", "flat.csv", "--task", "reg", "--method", "lspca", "--mode", "mle", "--r", "1", "--out", "m.txt"], tmp.path());
    assert_eq!(num.status.code(), Some(3), "{}", String::from_utf8_lossy(&num.stderr));
}

#[test]
fn string_labels_are_sorted_lexicographically() {
    let tmp = TempDir::new().unwrap();
    let mut text = String::from("u,v,kind\n");
    for i in 0..40 {
        let u = (i as f64 * 0.37).sin();
        let v = (i as f64 * 1.3).cos();
        let kind = if u + 0.3 * v > 0.0 { "zeta" } else { "alpha" };
        text.push_str(&format!("{u},{v},{kind}\n"));
    }
    std::fs::write(tmp.path().join("c.csv"), text).unwrap();
    ok(spca(&["fit", "--data", "c.csv", "--task", "class", "--method", "pcc", "--r", "1", "--lr-reg", "0.1", "--out", "m.txt"], tmp.path()));
    ok(spca(&["predict", "--model", "m.txt", "--data", "c.csv", "--out", "p.csv"], tmp.path()));
    let header = std::fs::read_to_string(tmp.path().join("p.csv")).unwrap();
    assert!(header.starts_with("prob_alpha,prob_zeta,label"));
}

const PLAN: &str = r#"
data = "data.csv"
task = "reg"
methods = ["lspca", "pcr"]
r = 2
lambdas = [0.01, 0.1, 1.0, 10.0]
seed = 11
repeats = 3
folds = 3
"#;

#[test]
fn experiment_outputs_are_consistent_and_repeatable() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), &[]);
    std::fs::write(tmp.path().join("plan.toml"), PLAN).unwrap();
    ok(spca(&["experiment", "--plan", "plan.toml", "--out", "a"], tmp.path()));
    ok(spca(&["experiment", "--plan", "plan.toml", "--out", "b"], tmp.path()));
    for f in ["records.ldjson", "summary.tsv", "pareto.tsv", "failures.ldjson"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }

    let pareto = std::fs::read_to_string(tmp.path().join("a/pareto.tsv")).unwrap();
    let sweep_train = pareto.lines().filter(|l| l.contains("\tsweep\t") && l.contains("\ttrain\t")).count();
    assert_eq!(sweep_train, 4);

    let records = std::fs::read_to_string(tmp.path().join("a/records.ldjson")).unwrap();
    let errs: Vec<f64> = records
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["method"] == "pcr")
        .map(|v| v["test_error"].as_f64().unwrap())
        .collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let summary = std::fs::read_to_string(tmp.path().join("a/summary.tsv")).unwrap();
    let row: Vec<&str> = summary.lines().find(|l| l.starts_with("pcr\t")).unwrap().split('\t').collect();
    assert!((row[3].parse::<f64>().unwrap() - mean).abs() <= 1e-15);
}
