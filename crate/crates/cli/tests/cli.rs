use std::path::Path;
use std::process::{Command, Output};

fn infpolar(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_infpolar"));
    cmd.args(args).env_remove("INFPOLAR_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn small_world(dir: &Path) {
    let spec = dir.join("world.toml");
    std::fs::write(&spec, "politicians_per_party = 30\ninfluencers = 90\n").unwrap();
    let out = infpolar(
        &["generate", "--spec", spec.to_str().unwrap(), "--seed", "4", "--out", dir.join("w").to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_run_report_timeline() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let world = tmp.path().join("w");
    for f in ["tweets.jsonl", "users.csv", "embeddings.bin", "ground_truth.json", "pipeline.toml"] {
        assert!(world.join(f).is_file(), "{f}");
    }
    let config = world.join("pipeline.toml");
    let out = infpolar(&["run", "--config", config.to_str().unwrap(), "--set", "min_cluster_size=8"], &[]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "{stderr}");
    assert!(stderr.contains("ingesting corpus") && stderr.contains("done"));
    assert!(world.join("out/summary.json").is_file());

    let report = infpolar(&["report", world.join("out").to_str().unwrap()], &[]);
    assert!(report.status.success());
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("FarmersProtest") && text.contains("CAA_NRC"));
    assert!(text.contains("OLS"));

    let tl = infpolar(&["timeline", "--config", config.to_str().unwrap(), "--party", "bjp"], &[]);
    assert!(tl.status.success());
    let csv = String::from_utf8_lossy(&tl.stdout);
    assert!(csv.starts_with("week,all,"));
    assert!(csv.lines().count() > 10);
}

#[test]
fn output_dir_env_override() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let config = tmp.path().join("w/pipeline.toml");
    let elsewhere = tmp.path().join("elsewhere");
    let out = infpolar(
        &["run", "--config", config.to_str().unwrap(), "--set", "min_cluster_size=8"],
        &[("INFPOLAR_OUTPUT_DIR", &elsewhere)],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elsewhere.join("summary.json").is_file());
    assert!(!tmp.path().join("w/out").exists());
}

#[test]
fn validation_failures_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");

    std::fs::write(&cfg, "users = \"u.csv\"\nevents = [\"CAA_NRC\"]\n").unwrap();
    let out = infpolar(&["run", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tweets"));

    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    assert_eq!(infpolar(&["run", "--config", cfg.to_str().unwrap()], &[]).status.code(), Some(1));

    assert_eq!(infpolar(&["run"], &[]).status.code(), Some(1));
    assert_eq!(infpolar(&["timeline", "--config", "x", "--party", "green"], &[]).status.code(), Some(1));
    assert_eq!(infpolar(&["report", tmp.path().join("missing").to_str().unwrap()], &[]).status.code(), Some(1));

    std::fs::write(&cfg, "participation = 2.0\n").unwrap();
    let gen = infpolar(&["generate", "--spec", cfg.to_str().unwrap(), "--out", tmp.path().join("g").to_str().unwrap()], &[]);
    assert_eq!(gen.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    small_world(tmp.path());
    let world = tmp.path().join("w");
    std::fs::write(world.join("embeddings.bin"), b"not a vector file").unwrap();
    let out = infpolar(&["run", "--config", world.join("pipeline.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_zero() {
    let out = infpolar(&["--help"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["generate", "run", "timeline", "report"] {
        assert!(text.contains(sub));
    }
}
