use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_holderclt");

fn holderclt(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).env_remove("HOLDERCLT_OUT").output().unwrap()
}

fn config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

const BROWNIAN: &str = r#"
version = 1
seed = 1

[grid]
shape = [513]

[model]
kind = "gaussian"
covariance = "brownian"
"#;

#[test]
fn grr_audit_on_brownian_paths_has_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "b.toml", BROWNIAN);
    let out = dir.path().join("grr");
    let o = holderclt(&["audit", "grr", "--alpha", "0.4", "--p", "8", "--paths", "500", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("audit.csv")).unwrap();
    let v = csv_column(&csv, "violations");
    assert_eq!(v.len(), 500);
    assert!(v.iter().all(|x| x == "0"));
}

#[test]
fn measure_on_the_unit_interval_reports_theta_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "u.toml", "version = 1\n[grid]\nshape = [1024]\n");
    let out = dir.path().join("m");
    let o = holderclt(&["measure", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("measure.csv")).unwrap();
    let theta: f64 = csv_column(&csv, "theta")[0].parse().unwrap();
    assert!((theta - 2.0).abs() < 0.1, "theta = {theta}");
    assert_eq!(csv_column(&csv, "majorizing")[0], "true");
}

#[test]
fn violations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "r.toml",
        "version = 1\n[audit]\nrosenthal_constant = 0.3\nrosenthal_n = [16]\nrosenthal_p = [4.0]\nrosenthal_replicas = 20000\n",
    );
    let out = dir.path().join("r");
    let o = holderclt(&["audit", "rosenthal", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(1));
    let csv = fs::read_to_string(out.join("audit.csv")).unwrap();
    assert_eq!(csv_column(&csv, "violation"), vec!["true"]);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(holderclt(&["frobnicate"], &out).status.code(), Some(2));
    assert_eq!(holderclt(&["clt", "--config", "/does/not/exist.toml"], &out).status.code(), Some(2));
    let unknown = config(dir.path(), "k.toml", &format!("{BROWNIAN}\n[clt]\nreplicaz = 3\n"));
    let o = holderclt(&["clt", "--config", &unknown], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicaz"));
    let future = config(dir.path(), "v.toml", &BROWNIAN.replace("version = 1", "version = 9"));
    assert_eq!(holderclt(&["simulate", "--config", &future], &out).status.code(), Some(2));
    let no_model = config(dir.path(), "n.toml", "version = 1\n[grid]\nshape = [9]\n");
    assert_eq!(holderclt(&["simulate", "--config", &no_model], &out).status.code(), Some(2));
    assert_eq!(holderclt(&["norms", "--field", &no_model], &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "p.toml",
        r#"
version = 1
[grid]
shape = [17]
[model]
kind = "series"
innovation = "pareto"
tail_index = 3.0
[audit]
n = [1]
replicas = 50
"#,
    );
    let o = holderclt(&["audit", "kramer", "--config", &cfg], &dir.path().join("k"));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Kramer"));
}

#[test]
fn manifest_records_the_effective_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "b.toml", BROWNIAN);
    let out = dir.path().join("s");
    let o = holderclt(&["simulate", "--config", &cfg, "--seed", "99", "--replicas", "3"], &out);
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["format"], "holderclt-manifest v1");
    assert_eq!(m["seed"], 99);
    assert_eq!(m["subcommand"], "simulate");
    let text = m["config"].as_str().unwrap();
    assert!(text.contains("seed = 99") && text.contains("replicas = 3"));
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    let field = fs::read_to_string(out.join("field.txt")).unwrap();
    assert!(field.starts_with("# holderclt-field v1\nshape 513\nreplicas 3\n"));

    // re-running from the manifest reproduces the outputs
    let again = dir.path().join("again");
    let manifest = out.join("manifest.json");
    assert_eq!(holderclt(&["simulate", "--config", manifest.to_str().unwrap()], &again).status.code(), Some(0));
    for f in ["field.txt", "paths.csv", "report.json", "manifest.json"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_directory_defaults_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "b.toml", BROWNIAN);
    let target = dir.path().join("from-env");
    let o = Command::new(BIN)
        .args(["simulate", "--config", &cfg, "--replicas", "2"])
        .env("HOLDERCLT_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("manifest.json").exists());
}

#[test]
fn norms_reads_a_field_file() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("line.txt");
    let n = 33;
    let values: Vec<String> = (0..n).map(|i| (i as f64 / (n - 1) as f64).to_string()).collect();
    fs::write(&field, format!("# holderclt-field v1\nshape {n}\nreplicas 1\n{}\n", values.join(" "))).unwrap();
    let out = dir.path().join("n");
    let o = holderclt(&["norms", "--field", field.to_str().unwrap(), "--beta", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("norms.csv")).unwrap();
    let h: f64 = csv_column(&csv, "holder_norm")[0].parse().unwrap();
    assert!((h - 2.0).abs() < 1e-12);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}
