use std::path::Path;
use std::process::Command;

fn bench(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_bench")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "bench {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Drops the wall time column so runs can be compared byte for byte.
fn without_wall_time(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "wall_seconds").unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .enumerate()
                .filter(|(i, _)| *i != col)
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn pipeline(dir: &Path) {
    let s = |p: &str| dir.join(p).to_string_lossy().into_owned();
    bench(&["gen", "maxcut", "--nodes", "40", "--density", "0.3", "--order", "5", "--seed", "3", "--out", &s("mc.json")]);
    bench(&[
        "gen", "random", "--m", "12", "--nonneg", "2", "--psd", "3", "--ineq", "1", "--eq", "1", "--box-fraction", "0.2",
        "--upper-bound", "--seed", "4", "--out", &s("rand.json"),
    ]);
    bench(&["trace", "--instance", &s("mc.json"), "--out", &s("mc"), "--mu-min", "1e-4"]);
    bench(&["trace", "--instance", &s("rand.json"), "--out", &s("rand"), "--mu-min", "1e-3"]);
    bench(&[
        "replay", "--trace", &s("mc"), "--trace", &s("rand"), "--solvers", "DS,IT,RP,DP", "--seed", "5", "--out",
        &s("results.csv"),
    ]);
    bench(&["summarize", "--in", &s("results.csv"), "--group", "mu", "--out", &s("by_mu.csv")]);
    bench(&["summarize", "--in", &s("results.csv"), "--group", "bundle", "--out", &s("by_bundle.csv")]);
}

#[test]
fn full_pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let ra = without_wall_time(&a.path().join("results.csv"));
    assert!(ra.lines().count() > 8);
    assert_eq!(ra, without_wall_time(&b.path().join("results.csv")));
    for f in ["by_mu.csv", "by_bundle.csv"] {
        let sa = std::fs::read_to_string(a.path().join(f)).unwrap();
        assert_eq!(sa, std::fs::read_to_string(b.path().join(f)).unwrap());
    }
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bench"))
        .args(["replay", "--trace", "/nonexistent", "--solvers", "XX", "--out"])
        .arg(dir.path().join("r.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
