use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn latwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("latwave-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn lemma_run_writes_records_that_report_re_reads() {
    let dir = scratch("report");
    let out = dir.to_str().unwrap();
    let o = latwave(&["lemma", "bostelmann", "--out", out, "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS bostelmann"));
    assert!(dir.join("bostelmann/summary.json").exists());

    let r = latwave(&["report", out]);
    assert_eq!(r.status.code(), Some(0));
    assert!(stdout(&r).contains("1 of 1 runs passed"));

    // A tolerance too strict to meet gives exit code 1, and report agrees.
    let o = latwave(&["lemma", "bostelmann", "--tol", "1e-30", "--out", out]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert_eq!(latwave(&["report", out]).status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn shipped_configs_match_the_built_in_ones() {
    let listing = stdout(&latwave(&["preset"]));
    let names: Vec<&str> = listing.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(names.len(), 15);
    for name in names {
        let file = std::fs::read_to_string(configs().join(format!("{name}.json"))).unwrap();
        let printed = stdout(&latwave(&["preset", name]));
        let a: serde_json::Value = serde_json::from_str(&file).unwrap();
        let b: serde_json::Value = serde_json::from_str(&printed).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn config_files_drive_runs() {
    let cfg = configs().join("free-limit.json");
    let o = latwave(&["detector", "free-limit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    // Wrong experiment for the subcommand.
    let o = latwave(&["detector", "cook", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let adm = configs().join("admissible-sumset-outside.json");
    let o = latwave(&["admissible", adm.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = scratch("bad");
    let bad = dir.join("bad.json");
    let text = std::fs::read_to_string(configs().join("moyal.json")).unwrap();
    std::fs::write(&bad, text.replace("\"side\": 256", "\"side\": 64")).unwrap();
    let o = latwave(&["lemma", "moyal", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("no-wrap"), "{}", stdout(&o));

    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(latwave(&["lemma", "moyal", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(latwave(&["lemma", "no-such-lemma"]).status.code(), Some(2));
    assert_eq!(latwave(&["lemma", "moyal", "--tol", "0.1"]).status.code(), Some(2));
    assert_eq!(latwave(&["lemma", "moyal", "--jobs", "0"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}
