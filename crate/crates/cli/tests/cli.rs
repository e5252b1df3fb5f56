use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ftmbqc"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn enumerate_saw_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["enumerate-saw", "--nu-max", "4"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "nu,count\n1,6\n2,30\n3,150\n4,726\n");
}

#[test]
fn validate_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", r#"{"version": 1, "experiment": "protocol_single"}"#);
    let out = run(&["validate-config", "--config", &good], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("ok: protocol_single with 1 points"));

    let typo = write_config(dir.path(), "typo.json", r#"{"version": 1, "experiment": "protocol_single", "seeed": 1}"#);
    assert_eq!(run(&["validate-config", "--config", &typo], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("nope.json").to_string_lossy().into_owned();
    assert_eq!(run(&["validate-config", "--config", &missing], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["validate-config", "--config", &good, "--trials", "0"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn run_writes_results_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1, "experiment": "protocol_single", "grid": {"p": [0.0], "k": [1], "d": [3]},
            "trials": 20, "transcripts": 2}"#,
    );
    let out = run(&["run", "--config", &cfg, "--out-dir", "res", "--threads", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let res = dir.path().join("res");
    let csv = fs::read_to_string(res.join("summary.csv")).unwrap();
    let accept = csv.lines().find(|l| l.contains(",accept,")).unwrap();
    assert!(accept.ends_with(",accept,1.0,0.0,20"), "{accept}");
    assert!(res.join("plot.py").exists());

    let out = run(&["replay", "res/transcripts.jsonl", "--trial", "1"], dir.path());
    assert!(out.status.success());
    let recorded = fs::read_to_string(res.join("transcripts.jsonl")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("{}\n", recorded.lines().nth(1).unwrap()));

    let manifest = res.join("MANIFEST.json");
    let text = fs::read_to_string(&manifest).unwrap().replace("\"seed\": 0", "\"seed\": 1");
    fs::write(&manifest, text).unwrap();
    let out = run(&["replay", "res/transcripts.jsonl", "--trial", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integrity"));
}

#[test]
fn overrides_and_capacity_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1, "experiment": "protocol_single", "grid": {"p": [0.05]}, "trials": 4}"#,
    );
    let out = run(&["run", "--config", &cfg, "--out-dir", "a", "--threads", "1"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let m = fs::read_to_string(dir.path().join("a/MANIFEST.json")).unwrap();
    assert!(m.contains("\"complete\": false"));

    let out = run(
        &["run", "--config", &cfg, "--out-dir", "b", "--backend", "blossom", "--seed", "7"],
        dir.path(),
    );
    assert!(out.status.success());
    let m = fs::read_to_string(dir.path().join("b/MANIFEST.json")).unwrap();
    assert!(m.contains("\"complete\": true") && m.contains("\"seed\": 7") && m.contains("\"backend\": \"blossom\""));

    let out = run(&["run", "--config", &cfg, "--backend", "fastest"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_env_var_does_not_change_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"version": 1, "experiment": "decoder_validation", "layout": "empty-vacuum", "backend": "blossom",
            "grid": {"p": [0.02, 0.1], "d": [3, 4]}, "trials": 200, "seed": 21}"#,
    );
    let mut outputs = Vec::new();
    for (threads, dirname) in [("1", "t1"), ("3", "t3")] {
        let out = bin()
            .args(["run", "--config", &cfg, "--out-dir", dirname])
            .env("FTMBQC_THREADS", threads)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert!(out.status.success());
        let m = fs::read_to_string(dir.path().join(dirname).join("MANIFEST.json")).unwrap();
        assert!(m.contains(&format!("\"threads\": {threads}")));
        outputs.push(fs::read(dir.path().join(dirname).join("summary.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}
