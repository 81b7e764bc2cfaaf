use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use recycle_nls::cli_io::cli::{run, Cli};

use clap::Parser;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_recycle-nls"))
}

fn chwirut() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/Chwirut1.dat")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn fit_reports_certified_values() {
    let out = bin().args(["fit", "--model", "chwirut1", "--data"]).arg(chwirut()).output().unwrap();
    let text = ok(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,estimate,std_error,certified,certified_sd"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "theta_1");
    let est: f64 = row[1].parse().unwrap();
    let cert: f64 = row[3].parse().unwrap();
    assert!((est / cert - 1.0).abs() < 1e-6);
}

#[test]
fn recycle_json_summary_round_trips() {
    let cli = Cli::try_parse_from([
        "recycle-nls", "recycle", "--model", "model1", "--n", "50", "--B", "120", "--format", "json",
        "--seed", "11", "--workers", "2",
    ])
    .unwrap();
    let out = run(&cli).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out.body).unwrap();
    let reps = v["replicates"].as_array().unwrap();
    assert_eq!(reps.len(), 120);
    let converged: Vec<f64> = reps
        .iter()
        .filter(|r| r["flag"] == "converged")
        .map(|r| r["r_star"].as_f64().unwrap())
        .collect();
    let mean = converged.iter().sum::<f64>() / converged.len() as f64;
    let reported = v["summary"]["pivots"]["r_star"]["mean"].as_f64().unwrap();
    assert!((mean - reported).abs() < 1e-15);
    assert_eq!(v["summary"]["intervals"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["seed"], 11);
}

#[test]
fn recycle_csv_columns() {
    let out = bin()
        .args(["recycle", "--model", "chwirut1", "--B", "5", "--seed", "3", "--data"])
        .arg(chwirut())
        .output()
        .unwrap();
    let text = ok(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "b,theta_star_1,theta_star_2,theta_star_3,sigma_star,r_star,r_star_stud,flag"
    );
    assert_eq!(lines.count(), 5);
    // Five replicates are too few for an interval.
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn seed_env_fallback() {
    let args = ["simdist", "--model", "model1", "--n", "20", "--reps", "30"];
    let a = ok(&bin().args(args).env("RECYCLE_NLS_SEED", "5").output().unwrap());
    let b = ok(&bin().args(args).args(["--seed", "5"]).output().unwrap());
    let c = ok(&bin().args(args).args(["--seed", "6"]).output().unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn csv_data_and_custom_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("line.csv");
    std::fs::write(&data, "x,y\n1,2.1\n2,3.9\n3,6.2\n4,7.8\n").unwrap();
    let model = dir.path().join("line.toml");
    std::fs::write(&model, "name = \"slope\"\nparams = [\"k\"]\nexpr = \"k * x\"\n").unwrap();
    let out = bin()
        .args(["fit", "--start", "1", "--format", "json", "--model-file"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&out)).unwrap();
    let closed = (2.1 + 2.0 * 3.9 + 3.0 * 6.2 + 4.0 * 7.8) / 30.0;
    assert!((v["theta"][0].as_f64().unwrap() - closed).abs() < 1e-10);
}

#[test]
fn errors_exit_nonzero() {
    let out = bin().args(["fit", "--model", "nope", "--data"]).arg(chwirut()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown model"));
    let out = bin().args(["fit", "--model", "chwirut1", "--data", "/nonexistent.dat"]).output().unwrap();
    assert!(!out.status.success());
    let out = bin().args(["recycle", "--model", "model1", "--c", "1,2,3"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn tables_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("samples.csv");
    let out = bin()
        .args(["tables", "--model", "model1", "--n", "20", "--scheme", "multinomial", "--B", "60", "--reps", "60", "--samples"])
        .arg(&samples)
        .output()
        .unwrap();
    let text = ok(&out);
    assert_eq!(text.lines().count(), 3);
    let s = std::fs::read_to_string(&samples).unwrap();
    assert_eq!(s.lines().next().unwrap(), "n,column,index,pivot,normal_quantile");
    assert_eq!(s.lines().count(), 1 + 60 + 60);
}
