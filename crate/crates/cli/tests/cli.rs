use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_growthbound"))
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or("");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

/// Files under `dir` with their contents, CSV timestamp lines removed.
fn snapshot(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let text = std::fs::read_to_string(&p).unwrap();
                let (head, body) = text.split_once('\n').unwrap();
                assert!(head.starts_with("# generated_unix="), "{}", p.display());
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), body.to_string()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{ not json").unwrap();
    let out = tmp.path().join("out");
    let o = run(&["improve"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "config");
    assert!(!out.exists());
}

#[test]
fn compare_without_eps_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo("configs/disk_point_power.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["theorem_a"].as_object_mut().unwrap().remove("eps");
    let cfg = tmp.path().join("cmp.json");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["compare"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["field"], "theorem_a.eps");
    assert!(!out.exists());
}

#[test]
fn zero_jobs_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["perron", "--jobs", "0"], &repo("configs/perron_toy.json"), tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_writes_an_increasing_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["compare"], &repo("configs/disk_point_power.json"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let env: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(env["command"], "compare");
    assert_eq!(env["result"]["ratio_increasing"], true);
    assert!(tmp.path().join("compare.csv").exists());
}

#[test]
fn perron_toy_schedules_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["perron"], &repo("configs/perron_toy.json"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let env: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("perron.json")).unwrap()).unwrap();
    let diff = env["result"]["cross_schedule_max_diff"].as_f64().unwrap();
    assert!(diff <= 1e-12, "{diff}");
    assert!(tmp.path().join("perron.csv").exists());
}

#[test]
fn improve_writes_one_csv_per_method() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["improve"], &repo("configs/improve_power.json"), tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csvs = snapshot(tmp.path());
    assert_eq!(csvs.len(), 2, "{csvs:?}");
    assert!(tmp.path().join("improve.json").exists());
}

#[test]
fn verify_is_deterministic_up_to_the_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo("crates/core/corpus/box_segment_logpower.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["verify", "--grid", "9", "--seed", "3"], &cfg, out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert!(!sa.is_empty());
    assert_eq!(sa, sb);
}
