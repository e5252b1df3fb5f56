use std::fs;

use ftmbqc::experiment::{
    csv_bytes, enumerate_points, exit_code, replay, run_experiment, ExperimentConfig, Manifest, CSV_HEADER,
    MANIFEST_FILE, SUMMARY_FILE, TRANSCRIPTS_FILE,
};
use ftmbqc::Error;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(text).unwrap()
}

#[test]
fn csv_header_is_frozen() {
    let golden = "experiment,layout,backend,strategy,p,d,k,l,m,p0,alpha,metric,value,stderr,trials\n";
    assert_eq!(format!("{CSV_HEADER}\n"), golden);
    assert_eq!(String::from_utf8(csv_bytes(&[]).unwrap()).unwrap(), golden);
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"version": 1, "experiment": "bounds_table", "grid": {"k": [1]}}"#);
    run_experiment(&cfg, 1, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(text.starts_with(golden));
}

#[test]
fn noiseless_protocol_single_accepts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"version": 1, "experiment": "protocol_single", "grid": {"p": [0.0], "k": [1], "d": [3]}, "trials": 50}"#,
    );
    let out = run_experiment(&cfg, 2, dir.path()).unwrap();
    let accept = out.rows.iter().find(|r| r.metric == "accept").unwrap();
    assert_eq!(accept.value, 1.0);
    assert_eq!(accept.trials, Some(50));
    assert!(out.manifest.complete);
}

#[test]
fn bounds_table_recursion_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"version": 1, "experiment": "bounds_table", "grid": {"p0": [1e-5], "l": [0, 1, 2]}}"#);
    let out = run_experiment(&cfg, 1, dir.path()).unwrap();
    let values: Vec<f64> = out.rows.iter().map(|r| r.value).collect();
    assert_eq!(out.rows.len(), 3);
    assert_eq!(values[0], 1e-5);
    assert!((values[1] / 1.1025e-6 - 1.0).abs() < 1e-12);
    assert!((values[2] - 1.3401e-8).abs() < 5e-13);
}

#[test]
fn stderr_is_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"version": 1, "experiment": "decoder_validation", "layout": "empty-vacuum", "backend": "blossom",
            "grid": {"p": [0.05], "d": [3]}, "trials": 400, "seed": 3}"#,
    );
    let out = run_experiment(&cfg, 1, dir.path()).unwrap();
    for r in out.rows.iter().filter(|r| r.trials.is_some()) {
        let n = r.trials.unwrap() as f64;
        let want = (r.value * (1.0 - r.value) / n).sqrt();
        assert!((r.stderr.unwrap() - want).abs() < 1e-15, "{r:?}");
        assert!((r.value * n - (r.value * n).round()).abs() < 1e-9);
    }
}

#[test]
fn csv_is_identical_across_thread_counts() {
    let cfg = config(
        r#"{"version": 1, "experiment": "acceptance_sweep", "backend": "blossom",
            "grid": {"p": [0.0, 0.003], "k": [1, 2]}, "trials": 30, "seed": 11}"#,
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, 1, a.path()).unwrap();
    run_experiment(&cfg, 4, b.path()).unwrap();
    assert_eq!(
        fs::read(a.path().join(SUMMARY_FILE)).unwrap(),
        fs::read(b.path().join(SUMMARY_FILE)).unwrap()
    );
}

#[test]
fn replay_matches_record_under_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"version": 1, "experiment": "acceptance_sweep", "backend": "blossom",
            "grid": {"p": [0.0, 0.004], "k": [2]}, "trials": 6, "transcripts": 3, "seed": 5}"#,
    );
    run_experiment(&cfg, 3, dir.path()).unwrap();
    let path = dir.path().join(TRANSCRIPTS_FILE);
    let lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(replay(&path, 0, 0, 1).unwrap(), lines[0]);
    assert_eq!(replay(&path, 1, 2, 1).unwrap(), lines[5]);
    assert_eq!(replay(&path, 1, 2, 4).unwrap(), lines[5]);
    // Trials beyond the recorded prefix regenerate without a reference.
    assert!(replay(&path, 1, 5, 2).is_ok());
    assert!(replay(&path, 1, 6, 2).is_err());
}

#[test]
fn tampered_manifest_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(r#"{"version": 1, "experiment": "protocol_single", "trials": 3, "transcripts": 1}"#);
    run_experiment(&cfg, 1, dir.path()).unwrap();
    let mpath = dir.path().join(MANIFEST_FILE);
    let original = fs::read_to_string(&mpath).unwrap();
    let tpath = dir.path().join(TRANSCRIPTS_FILE);
    assert!(replay(&tpath, 0, 0, 1).is_ok());

    let mut m: Manifest = serde_json::from_str(&original).unwrap();
    m.config["trials"] = serde_json::json!(4);
    fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
    assert!(matches!(replay(&tpath, 0, 0, 1), Err(Error::Integrity(_))));

    let mut m: Manifest = serde_json::from_str(&original).unwrap();
    m.seed += 1;
    fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
    assert!(matches!(replay(&tpath, 0, 0, 1), Err(Error::Integrity(_))));

    // A recorded line that no longer matches its regeneration.
    fs::write(&mpath, &original).unwrap();
    let line = fs::read_to_string(&tpath).unwrap().replace("\"accepted\":true", "\"accepted\":false");
    fs::write(&tpath, line).unwrap();
    assert!(matches!(replay(&tpath, 0, 0, 1), Err(Error::Integrity(_))));
}

#[test]
fn capacity_overflow_flushes_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"version": 1, "experiment": "acceptance_sweep", "grid": {"p": [0.0, 0.05]}, "trials": 5}"#,
    );
    let result = run_experiment(&cfg, 1, dir.path()).map(|_| ());
    assert!(matches!(result, Err(Error::Capacity { .. })));
    assert_eq!(exit_code(&result), 3);
    let m = Manifest::load(dir.path()).unwrap();
    assert!(!m.complete);
    assert!(m.error.unwrap().contains("capacity"));
    // The noiseless point finished and its rows were kept.
    assert_eq!(m.rows, 7);
    let csv = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn point_enumeration() {
    let cfg = config(
        r#"{"version": 1, "experiment": "detection_suite", "grid": {"k": [5], "p": [0.0, 0.01]},
            "strategies": [{"kind": "honest"}, {"kind": "single_bad_block"}, {"kind": "honest", "p": 0.2}]}"#,
    );
    let pts = enumerate_points(&cfg).unwrap();
    let ps: Vec<Option<f64>> = pts.iter().map(|p| p.p).collect();
    assert_eq!(ps, [Some(0.0), Some(0.01), None, Some(0.2)]);
    assert!(pts.iter().enumerate().all(|(i, p)| p.index == i as u64));
    let single = config(r#"{"version": 1, "experiment": "protocol_single", "grid": {"k": [1, 2]}}"#);
    assert!(enumerate_points(&single).is_err());
}

#[test]
fn detection_suite_single_bad_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        r#"{"version": 1, "experiment": "detection_suite", "grid": {"k": [1]}, "trials": 3000, "seed": 9,
            "strategies": [{"kind": "single_bad_block"}, {"kind": "bad_blocks", "positions": [0, 2]}]}"#,
    );
    let out = run_experiment(&cfg, 2, dir.path()).unwrap();
    let get = |s: &str, m: &str| out.rows.iter().find(|r| r.strategy == s && r.metric == m).unwrap().clone();
    let one = get("single_bad_block", "accept");
    assert!((one.value - 1.0 / 3.0).abs() <= 4.0 * one.stderr.unwrap());
    assert_eq!(get("single_bad_block", "membership_given_accept").value, 0.0);
    assert_eq!(get("bad_blocks_2", "accept").value, 0.0);
    assert_eq!(get("single_bad_block", "violation").value, 0.0);
}
