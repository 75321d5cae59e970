use std::path::Path;
use std::process::{Command, Output};

fn homotopy_opt(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_homotopy-opt"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("HOMOTOPY_OPT_THREADS", t);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn theory_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let constants = write(
        dir.path(),
        "c.json",
        r#"{"L": 1.0, "mu": 1.0, "sigma2": 0.02, "delta": 0.5, "gamma": 0.5, "B": 1.0, "r": 0.5, "alpha": 0.1, "k": 7}"#,
    );
    let out = homotopy_opt(&["theory", "--constants", &constants, "--json"], None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rho"));
    let json_start = text.find('{').unwrap();
    let report: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert!((report["rho"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!((report["tracking"]["eps_tilde"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn usage_errors_and_infeasible_constants() {
    assert_eq!(homotopy_opt(&["run"], None).status.code(), Some(2));
    assert_eq!(homotopy_opt(&["frobnicate"], None).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let constants = write(
        dir.path(),
        "c.json",
        r#"{"L": 1.0, "mu": 1.0, "sigma2": 0.02, "delta": 0.5, "gamma": 0.5, "B": 0.001, "r": 0.5, "k": 7}"#,
    );
    let out = homotopy_opt(&["theory", "--constants", &constants], None);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed checks"));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "toy.json",
        r#"{"experiment": "toy-erf", "repeats": 6, "master_seed": 3}"#,
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = homotopy_opt(
            &["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()],
            Some(threads),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(&p).unwrap(),
                )
            })
            .collect();
        files.sort();
        outputs.push(files);
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}
