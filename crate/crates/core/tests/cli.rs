mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::models_dir;
use serde_json::Value;

fn stormlet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stormlet"))
        .args(args)
        .env_remove("STORMLET_THREADS")
        .output()
        .unwrap()
}

fn model(name: &str) -> String {
    models_dir().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn die_iterative() {
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P=?[F "six"]"#]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "Property: P=?[F \"six\"]\nResult (state 0): 0.166667\n");
    assert!(stderr(&o).contains("13 states"));
}

#[test]
fn die_exact() {
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P=?[F "six"]"#, "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Result (state 0): 1/6"));
}

#[test]
fn bounded_property_prints_truth() {
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P>=0.5 [F "six"]"#]);
    assert!(stdout(&o).contains("Result (state 0): false"));
    assert_eq!(o.status.code(), Some(0));
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P>=0.5 [F "six"]"#, "--fail-on-false"]);
    assert_eq!(o.status.code(), Some(2));
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P<0.5 [F "six"]"#, "--fail-on-false"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn iteration_cap_exits_3_without_results() {
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P=?[F "six"]"#, "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("no convergence"));
}

#[test]
fn partial_results_are_withheld() {
    // The first property succeeds, the second names an unknown label.
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", r#"P=?[F "six"]"#, "--prop", r#"P=?[F "seven"]"#]);
    assert_eq!(o.status.code(), Some(4));
    assert!(o.stdout.is_empty());
}

#[test]
fn usage_errors_exit_1() {
    let o = stormlet(&["--explicit", &model("branches.tra"), "--prop", r#"P=?[F "a"]"#]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(!stderr(&o).is_empty());
    let o = stormlet(&["--prism", &model("die.pm")]);
    assert_eq!(o.status.code(), Some(1));
    let o = stormlet(&["--prism", &model("die.pm"), "--prop", "P=? [F"]);
    assert_eq!(o.status.code(), Some(1));
    let o = stormlet(&["--prism", "/nonexistent/model.pm", "--prop", r#"P=?[F "a"]"#]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_goes_to_stdout() {
    let o = stormlet(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("--explicit"));
}

#[test]
fn json_output() {
    let o = stormlet(&[
        "--explicit",
        &model("branches.tra"),
        &model("branches.lab"),
        "--exact",
        "--json",
        "--prop",
        r#"P=? [F "a"]"#,
        "--prop",
        r#"P=? [F "a" || F "b"]"#,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let results = v.as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["values"]["0"], "1/3");
    assert_eq!(results[1]["values"]["0"], "1/2");
    assert_eq!(results[1]["metadata"]["method"], "exact");
    assert_eq!(results[1]["metadata"]["condition_zero"], serde_json::json!([3]));
    assert!(results[0]["metadata"]["time_ms"].is_number());

    let o = stormlet(&["--prism", &model("robot.nm"), "--json", "--prop", r#"Rmax=? [F "dock"]"#]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["values"]["0"], "inf");
    let o = stormlet(&["--prism", &model("die.pm"), "--json", "--prop", r#"P=? [F "one"]"#]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v[0]["values"]["0"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-6);
}

#[test]
fn property_file_with_comments() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("props.txt");
    fs::write(&file, "// faces\nP=? [F \"one\"]\n\nP=? [F \"two\"] // second\n").unwrap();
    let o = stormlet(&["--prism", &model("die.pm"), "--prop-file", file.to_str().unwrap(), "--exact"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "Property: P=? [F \"one\"]\nResult (state 0): 1/6\n\nProperty: P=? [F \"two\"]\nResult (state 0): 1/6\n"
    );
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn semantic_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let tra = write(dir.path(), "bad.tra", "dtmc\n0 1 0.5\n1 1 1\n");
    let lab = write(dir.path(), "bad.lab", "#DECLARATION\ngoal\n#END\n1 goal\n");
    let o = stormlet(&["--explicit", &tra, &lab, "--prop", r#"P=?[F "goal"]"#]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let pm = write(
        dir.path(),
        "stuck.pm",
        "dtmc\nmodule m\n x : [0..1] init 0;\n [] x=0 -> (x'=1);\nendmodule\nlabel \"end\" = x=1;\n",
    );
    let o = stormlet(&["--prism", &pm, "--prop", r#"P=?[F "end"]"#]);
    assert_eq!(o.status.code(), Some(4));
    let o = stormlet(&["--prism", &pm, "--prop", r#"P=?[F "end"]"#, "--fix-deadlocks"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Result (state 0): 1"));
}

#[test]
fn syntax_error_in_model_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let tra = write(dir.path(), "m.tra", "dtmc\n0 zero 1\n");
    let lab = write(dir.path(), "m.lab", "#DECLARATION\n#END\n");
    let o = stormlet(&["--explicit", &tra, &lab, "--prop", "P=?[F true]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn constants_are_passed_to_the_frontend() {
    let dir = tempfile::tempdir().unwrap();
    let pm = write(
        dir.path(),
        "coin.pm",
        "dtmc\nconst double p;\nmodule c\n x : [0..1] init 0;\n [] x=0 -> p : (x'=1) + 1-p : true;\n [] x=1 -> true;\nendmodule\nlabel \"heads\" = x=1;\n",
    );
    let o = stormlet(&["--prism", &pm, "--constants", "p=0.25", "--prop", r#"P=?[X "heads"]"#]);
    assert_eq!(stdout(&o), "Property: P=?[X \"heads\"]\nResult (state 0): 0.25\n");
    let o = stormlet(&["--prism", &pm, "--prop", r#"P=?[X "heads"]"#]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("export");
    let props = [r#"R{"coin_flips"}=? [F "done"]"#, r#"P=? [F<=4 "six"]"#, r#"P=? [F "two"]"#];
    let mut args = vec!["--prism".to_string(), model("die.pm"), "--export-model".into(), out.to_string_lossy().into()];
    for p in props {
        args.push("--prop".into());
        args.push(p.into());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let direct = stormlet(&refs);
    assert_eq!(direct.status.code(), Some(0), "{}", stderr(&direct));
    for f in ["model.tra", "model.lab", "coin_flips.trew"] {
        assert!(out.join(f).exists(), "{} missing", f);
    }

    let p = |f: &str| out.join(f).to_string_lossy().into_owned();
    let mut args = vec![
        "--explicit".to_string(),
        p("model.tra"),
        p("model.lab"),
        "--trew".into(),
        p("coin_flips.trew"),
    ];
    for prop in props {
        args.push("--prop".into());
        args.push(prop.into());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let reloaded = stormlet(&refs);
    assert_eq!(reloaded.status.code(), Some(0), "{}", stderr(&reloaded));
    assert_eq!(stdout(&direct), stdout(&reloaded));
}

#[test]
fn mdp_action_rewards_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("robot");
    let prop = r#"Rmin=? [F "dock"|"crash"]"#;
    let direct = stormlet(&["--prism", &model("robot.nm"), "--exact", "--export-model", out.to_str().unwrap(), "--prop", prop]);
    assert_eq!(stdout(&direct), format!("Property: {}\nResult (state 0): 10/3\n", prop));
    let p = |f: &str| out.join(f).to_string_lossy().into_owned();
    let reloaded = stormlet(&["--explicit", &p("model.tra"), &p("model.lab"), "--trew", &p("time.trew"), "--exact", "--prop", prop]);
    assert_eq!(stdout(&direct), stdout(&reloaded), "{}", stderr(&reloaded));
}

#[test]
fn thread_count_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_stormlet"))
            .args(["--prism", &model("queue.sm"), "--prop", r#"P=? [F<=1 "full"]"#])
            .env("STORMLET_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let auto = run("0");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, auto.stdout);
    assert_eq!(run("many").status.code(), Some(1));
}

#[test]
fn stdout_is_identical_across_runs() {
    let args = ["--prism", &model("robot.nm"), "--prop", r#"Pmax=? [F "dock"]"#, "--prop", r#"Rmin=? [F "dock"|"crash"]"#];
    let a = stormlet(&args);
    let b = stormlet(&args);
    assert_eq!(a.stdout, b.stdout);
}
