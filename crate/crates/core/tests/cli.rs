use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use capcheck::cli::RunConfig;

const MICRO: &str = r#"
design = "micro"
output_dir = "out"

[micro]
protected = [4, 5, 6, 7]
caps = [{ tag = true, base = 0, top = 4 }, { tag = true, base = 1, top = 3 }]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capcheck"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", MICRO);
    let o = run(&["check", good.to_str().unwrap(), "integrity"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("integrity: hold"));

    let broad = write_config(
        dir.path(),
        "broad.toml",
        &MICRO.replace("top = 4", "top = 6"),
    );
    let o = run(&["check", broad.to_str().unwrap(), "base"]);
    assert_eq!(code(&o), 1);
    let trace = dir.path().join("out/base.trace.json");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(v["frames"].as_array().is_some_and(|f| !f.is_empty()));
    assert!(dir.path().join("out/base.vcd").exists());

    let o = run(&["check", good.to_str().unwrap(), "nonsense"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("usage"));
}

#[test]
fn default_properties_come_from_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &format!("properties = [\"integrity\", \"monotonicity\"]\n{MICRO}"),
    );
    let o = run(&["check", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(
        out.contains("integrity: hold") && out.contains("monotonicity: hold"),
        "{out}"
    );
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        &format!("colour = \"red\"\n{MICRO}"),
    );
    let o = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    let o = run(&["flow", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(RunConfig::parse("k_upec = 0", "inline", Path::new(".")).is_err());
}

#[test]
fn flow_exit_codes_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", MICRO);
    let o = run(&["flow", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict: secure"));
    for f in ["report.json", "report.txt", "protected_set.toml"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }

    let buggy = write_config(
        dir.path(),
        "buggy.toml",
        &format!("{MICRO}bug_settop_grows = true\n"),
    );
    assert_eq!(code(&run(&["flow", buggy.to_str().unwrap()])), 1);

    let capped = write_config(
        dir.path(),
        "capped.toml",
        &format!("{MICRO}\n[flow]\niteration_cap = 1\ninitial = []\n"),
    );
    let o = run(&["flow", capped.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("verdict: inconclusive"));
}

#[test]
fn converged_set_can_seed_a_later_check() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", MICRO);
    assert_eq!(code(&run(&["flow", good.to_str().unwrap()])), 0);
    let reuse = write_config(
        dir.path(),
        "reuse.toml",
        &format!("protected_set = \"out/protected_set.toml\"\n{MICRO}"),
    );
    let o = run(&["check", reuse.to_str().unwrap(), "monotonicity"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn oracle_agrees_on_micro_and_refuses_core() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", MICRO);
    let o = run(&["oracle", good.to_str().unwrap(), "--depth", "12"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(!stdout(&o).contains("DISAGREE"));

    let broad = write_config(
        dir.path(),
        "broad.toml",
        &MICRO.replace("top = 4", "top = 6"),
    );
    let o = run(&["oracle", broad.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("integrity: explicit fails (depth 12), symbolic fails"));

    let core = write_config(dir.path(), "core.toml", "design = \"core\"\n");
    let o = run(&["oracle", core.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("state space limit"), "{}", stderr(&o));
}

#[test]
fn dump_core_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let core = write_config(dir.path(), "core.toml", "design = \"core\"\n");
    let o = run(&["dump-core", core.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let ts = capcheck::ir::load_system(&text).unwrap();
    assert_eq!(capcheck::ir::dump_system(&ts), text);
}

#[test]
fn external_solver_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", MICRO);
    let me = env!("CARGO_BIN_EXE_capcheck");
    let o = run(&[
        "--external-solver",
        me,
        "--solver-arg",
        "dimacs-solve",
        "check",
        good.to_str().unwrap(),
        "integrity",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "--external-solver",
        "/nonexistent/solver",
        "check",
        good.to_str().unwrap(),
        "integrity",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run_dir in ["a", "b"] {
        let sub = dir.path().join(run_dir);
        std::fs::create_dir(&sub).unwrap();
        let cfg = write_config(
            &sub,
            "c.toml",
            &format!("seed = 3\n{}", MICRO.replace("top = 4", "top = 6")),
        );
        run(&["flow", cfg.to_str().unwrap()]);
        run(&["check", cfg.to_str().unwrap(), "base"]);
        let files: Vec<Vec<u8>> = [
            "report.json",
            "report.txt",
            "protected_set.toml",
            "base.trace.json",
            "base.vcd",
        ]
        .iter()
        .map(|f| std::fs::read(sub.join("out").join(f)).unwrap())
        .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}
