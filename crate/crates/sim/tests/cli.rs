use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsma-sim")).args(args).output().expect("binary runs")
}

fn sweep(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["sweep", "--trials", "2", "--set", "experiment.values=[10.0, 20.0]", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let res = sim(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    res
}

#[test]
fn summary_has_one_row_per_solve() {
    let dir = tempfile::tempdir().unwrap();
    sweep(dir.path(), &[]);
    let text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_param,mode,antenna,ris,trial,seed,sum_rate_bpshz,iterations,converged,wall_ms"
    );
    // Two sweep points, four modes, two trials.
    assert_eq!(lines.count(), 16);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    sweep(a.path(), &["--sweep", "convergence"]);
    sweep(b.path(), &["--sweep", "convergence"]);
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 2);
    for name in names {
        if name == "manifest.toml" {
            continue;
        }
        let left = fs::read(a.path().join(&name)).unwrap();
        let right = fs::read(b.path().join(&name)).unwrap();
        assert_eq!(left, right, "{name:?} differs");
    }
}

#[test]
fn unknown_keys_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[system]\nantenas = 4\n[experiment]\ntrails = 3\n").unwrap();
    let res = sim(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(!res.status.success());
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("system.antenas") && err.contains("experiment.trails"), "{err}");
}

#[test]
fn overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[system]\nantennas = 6\nris_elements = 8\n").unwrap();
    let out = dir.path().join("out");
    sweep(&out, &["--config", cfg.to_str().unwrap(), "--set", "system.antennas=4", "--mode", "rsma", "--antenna", "ma"]);
    let manifest: toml::Table = fs::read_to_string(out.join("manifest.toml")).unwrap().parse().unwrap();
    assert_eq!(manifest["system"]["antennas"].as_integer(), Some(4));
    assert_eq!(manifest["system"]["ris_elements"].as_integer(), Some(8));
    assert_eq!(manifest["experiment"]["modes"].as_array().unwrap().len(), 1);
    assert!(manifest["build"]["version"].is_str());
}

#[test]
fn crowded_layouts_are_rejected() {
    let res = sim(&["solve", "--set", "system.antennas=40"]);
    assert!(!res.status.success());
}

#[test]
fn check_subcommand_passes() {
    let res = sim(&["check", "--instances", "4"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
