use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geomflux_cli::config::Task;
use geomflux_cli::tasks::header;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_geomflux"));
    c.env_remove("GEOMFLUX_OUT_DIR");
    c
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn run(task: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(task)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn csv_headers_are_stable() {
    let golden = [
        (Task::Phase, "route,phase,trapezoid,overlap_product,error_estimate,status"),
        (Task::Tensor, "point,i,j,g_derivative,v_derivative,g_states,v_states,g_force,delta_b_sq,status"),
        (Task::Correlation, "point,component,t,q,q_heisenberg,c_ab,c_ba,status"),
        (Task::Theorem, "point,component,lhs,rhs,residual,delta_b,lambda,active,status"),
        (Task::Susceptibility, "point,component,z,chi_ab_re,chi_ab_im,chi_ba_re,chi_ba_im,status"),
        (Task::Classical, "component,t,q,stderr"),
        (Task::VerifyAll, "criterion,check,value,tolerance,passed"),
    ];
    for (task, expected) in golden {
        assert_eq!(header(task).join(","), expected, "{task}");
    }
}

#[test]
fn files_carry_the_golden_header() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("theorem", &configs().join("spin-theorem.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("theorem.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), header(Task::Theorem).join(","));
    // two points, three components each
    assert_eq!(csv.lines().count(), 1 + 6);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("theorem.json")).unwrap()).unwrap();
    assert_eq!(json["task"], "theorem");
    assert_eq!(json["status"], "pass");
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    assert!(json.get("wall_time").is_none());
    for check in json["checks"].as_array().unwrap() {
        assert!(check["value"].as_f64().unwrap() <= 1e-8 || check["name"].as_str().unwrap().contains("quadrature"));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("random-susceptibility.json");
    assert_eq!(run("susceptibility", &cfg, a.path(), &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("susceptibility", &cfg, b.path(), &["--threads", "3"]).status.code(), Some(0));
    for f in ["susceptibility.csv", "susceptibility.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn degenerate_point_fails_with_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("phase", &configs().join("degenerate-phase.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let csv = fs::read_to_string(tmp.path().join("phase.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",DegenerateSpectrum")));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("phase.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "error");
    assert_eq!(json["failures"][0]["code"], "DegenerateSpectrum");
}

#[test]
fn schema_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"family": {"kind": "spin", "hbarr": 1}, "path": {"kind": "line", "from": [0, 0], "to": [1, 1]}}"#,
    );
    let out = run("phase", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("family.hbarr") && err.contains("did you mean \"hbar\""), "{err}");
    assert!(err.contains("path.from") && err.contains("family.param_dim"), "{err}");
    assert!(!tmp.path().join("phase.csv").exists());
}

#[test]
fn failed_check_exits_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("spin-theorem.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["tolerances"] = serde_json::json!({ "theorem": 1e-30 });
    let cfg = write_config(tmp.path(), &doc.to_string());
    let out = run("theorem", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn out_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["tensor", "--config"])
        .arg(configs().join("random-tensor.json"))
        .env("GEOMFLUX_OUT_DIR", tmp.path().join("nested"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("nested/tensor.csv").exists());
    assert!(tmp.path().join("nested/tensor.json").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("harmonic-torus.json");
    assert_eq!(run("classical", &cfg, a.path(), &[]).status.code(), Some(0));
    assert_eq!(run("classical", &cfg, b.path(), &["--seed", "99"]).status.code(), Some(0));
    let ja: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("classical.json")).unwrap()).unwrap();
    let jb: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.path().join("classical.json")).unwrap()).unwrap();
    assert_eq!(ja["seed"], 8);
    assert_eq!(jb["seed"], 99);
    assert_ne!(ja["config_hash"], jb["config_hash"]);
    assert_ne!(ja["results"]["rhs"], jb["results"]["rhs"]);
}

#[test]
fn task_mismatch_and_missing_config_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run("tensor", &configs().join("spin-theorem.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["phase", "--out-dir"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn example_configs_validate() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let cfg = geomflux_cli::config::validate_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(geomflux_cli::config::validate_config(&cfg.to_json()).unwrap(), cfg);
    }
}
