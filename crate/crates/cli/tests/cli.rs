use std::path::Path;
use std::process::{Command, Output};

use hmp_core::channel::{save_channel_file, Scenario};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmp-sim")).args(args).output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn fast_config(dir: &Path) -> String {
    let p = dir.join("fast.cfg");
    std::fs::write(&p, "se_samples = 5000\n").unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn two_trials_give_two_trace_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = fast_config(dir.path());
    let o = sim(&[
        "--config", &cfg, "--N", "256", "--M", "103", "--P", "32", "--snr", "15", "--algos", "hmp-tsgm-lvd",
        "--trials", "2", "--iters", "10", "--seed", "7", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(&out, "nmse_vs_iter.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("algo,snr_db,trial,iter,nmse_db"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 20);
    for (trial, block) in rows.chunks(10).enumerate() {
        for (i, r) in block.iter().enumerate() {
            assert_eq!(r[0], "hmp-tsgm-lvd");
            assert_eq!(r[2], trial.to_string());
            assert_eq!(r[3], (i + 1).to_string());
            assert!(r[4].parse::<f64>().unwrap() < 0.0);
        }
    }
    assert_eq!(read(&out, "nmse_vs_snr.csv").lines().count(), 2);
    assert_eq!(read(&out, "se_trace.csv").lines().next(), Some("snr_db,iter,v,eta,predicted_nmse_db"));
    let manifest = read(&out, "manifest.txt");
    assert!(manifest.contains("seed = 7\n"));
    assert!(manifest.starts_with("version = 0.1.0"));
}

#[test]
fn missing_channel_file_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(&["--channel-file", "missing.haf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("no such file"), "{err}");
}

#[test]
fn foreign_file_is_not_a_channel_file() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.haf");
    std::fs::write(&junk, b"PNG\x00 not a channel").unwrap();
    let o = sim(&["--channel-file", junk.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a channel file"));
}

#[test]
fn invalid_dimensions_are_bad_input() {
    for args in [
        &["--N", "64", "--M", "64"][..],
        &["--P", "40", "--K", "32"],
        &["--trials", "0"],
        &["--algos", "omp"],
        &["--N", "sixty"],
    ] {
        let o = sim(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = sim(&["--se-only", "--out", file.join("sub").to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn external_channel_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario::new(64, 26, 4);
    let path = dir.path().join("h.haf");
    save_channel_file(&sc.channel(3).unwrap(), &path).unwrap();
    let out = dir.path().join("out");
    let cfg = fast_config(dir.path());
    let base = [
        "--config", &cfg, "--N", "64", "--M", "26", "--P", "4", "--K", "4", "--trials", "2", "--iters", "3",
        "--algos", "hmp-tsgm", "--channel-file", path.to_str().unwrap(),
    ];
    let o = sim(&[&base[..], &["--out", out.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "nmse_vs_iter.csv").lines().count(), 1 + 2 * 3);
    // mismatched dimensions are refused
    let o = sim(&[&base[..], &["--N", "128", "--out", out.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let cfg = fast_config(dir.path());
    let o = sim(&[
        "--config", &cfg, "--N", "48", "--M", "20", "--P", "3", "--K", "3", "--snr", "5,25", "--trials", "2",
        "--iters", "4", "--seed", "99", "--m-list", "12", "--exact-digamma", "--out", a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b = dir.path().join("b");
    let o = sim(&["--config", a.join("manifest.txt").to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["nmse_vs_iter.csv", "nmse_vs_snr.csv", "nmse_vs_m.csv", "se_trace.csv"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    assert_eq!(read(&a, "nmse_vs_m.csv").lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "N = 48\nM = 20\nP = 2\nK = 2\ntrials = 1\niters = 2\nalgos = hmp-bg\nse_samples = 2000\n").unwrap();
    let out = dir.path().join("o");
    let o = sim(&["--config", cfg.to_str().unwrap(), "--iters", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&out, "nmse_vs_iter.csv").lines().count(), 1 + 3);
    assert!(read(&out, "manifest.txt").contains("iters = 3\n"));
}

#[test]
fn state_evolution_fixed_points_order_with_snr() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("se");
    let o = sim(&["--se-only", "--N", "512", "--M", "410", "--snr", "10,20,30", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("nmse_vs_iter.csv").exists());
    let csv = read(&out, "se_trace.csv");
    let mut last = std::collections::BTreeMap::new();
    let mut steps = std::collections::BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let snr: f64 = f[0].parse().unwrap();
        last.insert(snr as i64, f[4].parse::<f64>().unwrap());
        *steps.entry(snr as i64).or_insert(0) += 1;
    }
    assert_eq!(last.len(), 3);
    assert!(steps.values().all(|&s| s <= 100));
    assert!(last[&10] > last[&20] && last[&20] > last[&30], "{last:?}");
    assert!(read(&out, "manifest.txt").contains("converged"));
}
