use std::path::Path;
use std::process::{Command, Output};

fn blockpf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockpf"))
        .args(args)
        .output()
        .expect("spawn blockpf")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ari_of_identical_files_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.txt");
    std::fs::write(&p, "1,2,3\n4,5\n6\n").unwrap();
    let out = blockpf(&["ari", path_str(&p), path_str(&p)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0");
}

#[test]
fn partition_recovers_planted_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("omega.csv");
    // indices {1,3,5} and {2,4,6} are strongly tied
    let mut text = String::new();
    for i in 0..6 {
        let row: Vec<String> = (0..6)
            .map(|j| {
                if i == j {
                    "1".into()
                } else if i % 2 == j % 2 {
                    "0.9".into()
                } else {
                    "0.05".into()
                }
            })
            .collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&csv, text).unwrap();
    let out = blockpf(&["partition", "--similarity", path_str(&csv), "--k", "2", "--zeta", "6"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "1,3,5\n2,4,6\n");
}

#[test]
fn run_without_config_is_a_usage_error() {
    let out = blockpf(&["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn unreadable_config_is_a_run_failure() {
    let out = blockpf(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"kind": "linear_gaussian", "d_x": 6, "noise": {"kind": "identity_scaled", "scale": 0.5}},
            "filters": [{"name": "kf", "scheme": "kf"}, {"name": "blocks", "scheme": "bpf_known", "k": 3}],
            "n_particles": 40, "n_runs": 2, "horizon": 4, "master_seed": 5}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = blockpf(&["run", "--config", path_str(&cfg), "--out", path_str(&out_dir), "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("filter_name,K,zeta,Np,n_runs,horizon,"));
    assert_eq!(stdout.lines().count(), 3);
    assert!(out_dir.join("summary.csv").is_file());
    assert!(out_dir.join("steps.csv").is_file());
}
