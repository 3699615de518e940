use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set",
    "spec.p=2",
    "--set",
    "spec.P1=16",
    "--set",
    "spec.P2=2",
    "--set",
    "data.n_pub=8",
    "--set",
    "data.n_priv=128",
    "--seeds",
    "3",
];

fn basin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basin"))
        .args(args)
        .output()
        .expect("spawn basin")
}

fn run_ok(sub: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = basin(&args);
    assert!(
        o.status.success(),
        "basin {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn separation_outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut extra = SMALL.to_vec();
    extra.extend(["--set", "data.dump=true"]);
    run_ok("separation", &a, &extra);
    run_ok("separation", &b, &extra);
    for f in ["records.csv", "summary.csv", "datasets.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs");
    }

    let records = read(&a, "records.csv");
    assert!(records.starts_with("experiment,mode,seed,arm,excess_risk,evaluator,basin_hit,"));
    assert_eq!(records.lines().count(), 1 + 3 * 3);
}

#[test]
fn different_root_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("separation", &a, SMALL);
    let mut extra = SMALL.to_vec();
    extra.extend(["--seed", "7"]);
    run_ok("separation", &b, &extra);
    assert_ne!(read(&a, "records.csv"), read(&b, "records.csv"));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let mut extra = SMALL.to_vec();
    extra.extend(["--seed", "11", "--set", "dp.epsilon=2"]);
    run_ok("separation", &a, &extra);

    let manifest = a.join("manifest.txt");
    let b = tmp.path().join("b");
    run_ok("separation", &b, &["--config", manifest.to_str().unwrap()]);
    assert_eq!(read(&a, "records.csv"), read(&b, "records.csv"));
}

#[test]
fn ood_public_rows_have_no_second_block_signal() {
    let tmp = tempfile::tempdir().unwrap();
    let mut extra = SMALL.to_vec();
    extra.extend(["--mode", "ood", "--set", "data.dump=true"]);
    run_ok("separation", tmp.path(), &extra);
    let body = read(tmp.path(), "datasets.csv");
    let mut public = 0;
    for line in body.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[1] == "public" {
            public += 1;
            assert!(
                cols[4..].iter().all(|c| c.parse::<f64>().unwrap() == 0.0),
                "{line}"
            );
        }
    }
    assert_eq!(public, 3 * 8);
}

#[test]
fn quadratic_and_schedule_run() {
    let tmp = tempfile::tempdir().unwrap();
    let q = tmp.path().join("q");
    run_ok("quadratic", &q, SMALL);
    assert_eq!(read(&q, "summary.csv").lines().count(), 4);

    let s = tmp.path().join("s");
    run_ok("schedule", &s, SMALL);
    let summary = read(&s, "summary.csv");
    assert_eq!(summary.lines().count(), 4, "{summary}");
    for name in ["front_loaded", "back_loaded", "uniform"] {
        assert!(summary.contains(name), "{summary}");
    }
    let costs: Vec<f64> = read(&s, "schedules.csv")
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(costs.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-9 * w[0]));
}

#[test]
fn toy_landscape_has_two_minima_per_slice() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("landscape", tmp.path(), &[]);
    let minima = read(tmp.path(), "minima.csv");
    assert_eq!(minima.lines().count(), 1 + 4, "{minima}");
    for x in ["-0.4", "0.5"] {
        assert!(
            minima.lines().skip(1).any(|l| l.split(',').nth(1) == Some(x)),
            "{minima}"
        );
    }
    let heat = read(tmp.path(), "heatmap.csv");
    assert_eq!(heat.lines().count(), 1 + 401 * 101);
}

#[test]
fn plane_landscape_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut extra = SMALL.to_vec();
    extra.extend([
        "--set",
        "landscape.kind=plane",
        "--set",
        "landscape.plane_res=11",
        "--set",
        "landscape.plane_margin=2",
    ]);
    run_ok("landscape", tmp.path(), &extra);
    assert_eq!(read(tmp.path(), "plane.csv").lines().count(), 1 + 15 * 15);
    assert!(read(tmp.path(), "basin.csv").lines().count() >= 2);
}

#[test]
fn calibrate_and_selftest_run() {
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("c");
    run_ok(
        "calibrate",
        &c,
        &[
            "--set",
            "calibrate.n_pub_grid=1,32",
            "--set",
            "calibrate.trials=20",
        ],
    );
    assert_eq!(read(&c, "calibration.csv").lines().count(), 3);

    let s = tmp.path().join("s");
    let o = run_ok("selftest", &s, &[]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));
}

#[test]
fn bad_configs_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    for args in [
        vec!["separation", "--out", out, "--set", "no.such=1"],
        vec!["separation", "--out", out, "--set", "spec.R1=0.9"],
        vec!["separation", "--out", out, "--mode", "sideways"],
        vec!["separation", "--out", out, "--set", "dp.epsilon"],
    ] {
        let o = basin(&args);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }

    let cfg = tmp.path().join("dup.conf");
    fs::write(&cfg, "spec.p = 2\nspec.p = 3\n").unwrap();
    let o = basin(&["separation", "--out", out, "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn theorem_scaling_follows_overridden_p() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(
        "separation",
        tmp.path(),
        &["--scaling", "theorem", "--set", "spec.p=3", "--seeds", "2"],
    );
    let manifest = read(tmp.path(), "manifest.txt");
    for line in [
        "spec.P1 = 81",
        "spec.P2 = 3",
        "data.n_pub = 3",
        "data.n_priv = 9",
        "run.scaling = theorem",
    ] {
        assert!(manifest.lines().any(|l| l == line), "missing `{line}`");
    }
}
