use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use klein_cli::{run, EXIT_CONFIG, EXIT_NUMERICAL};
use klein_core::io::{read_snapshot_file, RunManifest, MANIFEST, SUMMARY};

fn klein(args: &[&str]) -> i32 {
    run(std::iter::once("klein").chain(args.iter().copied()))
}

fn files_on_disk(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

fn summary(dir: &Path) -> Vec<(String, f64)> {
    fs::read_to_string(dir.join(SUMMARY))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

fn metric(dir: &Path, name: &str) -> f64 {
    summary(dir).into_iter().find(|(k, _)| k == name).unwrap_or_else(|| panic!("no {name}")).1
}

#[test]
fn free_scenario_writes_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("free");
    assert_eq!(klein(&["scenario", "fig1c_free", "--out", out.to_str().unwrap()]), 0);

    let on_disk = files_on_disk(&out);
    let snaps = on_disk.iter().filter(|f| f.starts_with("snap_T") && f.ends_with(".csv")).count();
    assert_eq!(snaps, 21);
    assert!(on_disk.contains(SUMMARY));

    let manifest = RunManifest::load(&out.join(MANIFEST)).unwrap();
    let listed: BTreeSet<String> = manifest.files.iter().cloned().collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest.config.name, "fig1c_free");
    assert!(manifest.derived.contains_key("P0"));

    let first = read_snapshot_file(&out.join("snap_T0.000000.csv")).unwrap();
    assert_eq!(first.x.len(), manifest.config.n_x);
    let v = metric(&out, "com_velocity") / metric(&out, "group_velocity");
    assert!((v - 1.0).abs() < 1e-3, "{v}");
}

#[test]
fn config_file_round_trip_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = klein_core::scenarios::builtin_config("fig1c_free").unwrap();
    cfg.name = "from_file".into();
    cfg.n_x = 2001;
    cfg.n_p = 1001;
    cfg.n_snapshots = 3;
    let path = tmp.path().join("run.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    let out = tmp.path().join("o");
    assert_eq!(klein(&["scenario", path.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    let manifest = RunManifest::load(&out.join(MANIFEST)).unwrap();
    assert_eq!(manifest.config, cfg);
}

#[test]
fn bad_inputs_exit_with_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert_eq!(klein(&["scenario", "no/such/file.toml", "--out", out]), EXIT_CONFIG);
    assert_eq!(klein(&["scenario", "fig9_unknown", "--out", out]), EXIT_CONFIG);
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nV0 = 1\n").unwrap();
    assert_eq!(klein(&["scenario", bad.to_str().unwrap(), "--out", out]), EXIT_CONFIG);
    assert_eq!(klein(&["frobnicate"]), EXIT_CONFIG);
}

#[test]
fn amps_reports_super_klein_and_the_pole() {
    // E = W/2 with M = 1, P = 2: W = 2 sqrt(5)
    let w = (2.0 * 5f64.sqrt()).to_string();
    assert_eq!(klein(&["amps", "--P", "2", "--W", &w, "--mre", "convergent", "--n-max", "3"]), 0);
    assert_eq!(klein(&["amps", "--P", "2", "--W", &w, "--mre", "divergent"]), EXIT_NUMERICAL);
    assert_eq!(klein(&["amps", "--P", "2", "--W", &w, "--mre", "divergent", "--delta", "0.1"]), 0);
    assert_eq!(klein(&["amps", "--P", "2", "--W", "1", "--shape", "smooth-tanh"]), EXIT_CONFIG);
    assert_eq!(klein(&["amps", "--P", "2", "--W", &w, "--shape", "smooth-tanh", "--b", "50", "--mre", "divergent"]), 0);
}

#[test]
fn oracle_command_conserves_charge() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle");
    assert_eq!(klein(&["oracle", "subcritical_narrow", "--out", out.to_str().unwrap()]), 0);
    assert!(metric(&out, "oracle_charge_drift") < 1e-4);
    assert!(metric(&out, "oracle_causality_leakage") < klein_cli::CAUSALITY_TOLERANCE);
    let manifest = RunManifest::load(&out.join(MANIFEST)).unwrap();
    assert_eq!(manifest.files.iter().cloned().collect::<BTreeSet<_>>(), files_on_disk(&out));
}

#[test]
fn acausal_scenario_advances_by_twice_the_width() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("fig4b");
    assert_eq!(klein(&["scenario", "fig4b_acausal", "--out", out.to_str().unwrap()]), 0);
    // the leading transmitted packet; weaker echoes trail it by further multiples of 2
    let a = metric(&out, "advancement_peak");
    assert!((a - 2.0).abs() < 0.1, "{a}");
    assert!(metric(&out, "advancement") > 1.9);
}
