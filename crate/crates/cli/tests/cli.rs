use std::process::{Command, Output};

fn mpesplit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpesplit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn lists_every_scheme_and_model() {
    let text = stdout(&mpesplit(&["list-schemes"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,claimed_order,class,terms,stages,sum_abs_weights,b_max");
    assert_eq!(lines.len(), 16);
    assert!(lines.iter().any(|l| l.starts_with("s4_neg,4,spe_negative,")));

    let json: serde_json::Value =
        serde_json::from_str(&stdout(&mpesplit(&["list-schemes", "--format", "json"]))).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 15);

    let models = stdout(&mpesplit(&["list-models"]));
    assert_eq!(models.lines().count(), 7);
}

#[test]
fn run_writes_csv_and_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let text = stdout(&mpesplit(&[
        "run", "--model", "ac", "--scheme", "s4_1", "--nx", "16", "--tau", "0.1", "--tfinal", "0.3", "--out", out,
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,t,tau,energy,mass,max_norm");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("3,"));
    assert!(dir.path().join("run.csv").exists());
    assert!(dir.path().join("final_c0.bin").exists());
    assert!(dir.path().join("final_c0.bin.json").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"model": "toy", "scheme": "strang_a", "n": 16, "tau": 0.5, "t_final": 1.0}"#,
    )
    .unwrap();
    let text = stdout(&mpesplit(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--tau",
        "0.25",
        "--format",
        "json",
    ]));
    let rec: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(rec["scheme"], "strang_a");
    assert_eq!(rec["steps"], 4);
    assert_eq!(rec["status"]["status"], "completed");
}

#[test]
fn negative_scheme_needs_opt_in() {
    let base = [
        "run", "--model", "ac", "--scheme", "s4_neg", "--nx", "16", "--tau", "0.1", "--tfinal", "0.1",
    ];
    let refused = mpesplit(&base);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("s4_neg"));
    let mut args = base.to_vec();
    args.push("--allow-backward");
    stdout(&mpesplit(&args));
}

#[test]
fn bad_input_fails_cleanly() {
    assert_eq!(mpesplit(&["run", "--scheme", "s99"]).status.code(), Some(1));
    assert_eq!(mpesplit(&["run", "--tau=-1"]).status.code(), Some(1));
    assert_eq!(mpesplit(&["preset", "nope"]).status.code(), Some(1));
    assert!(!mpesplit(&["run", "--model", "nope"]).status.success());
}

#[test]
fn order_check_reports_both_views() {
    let text = stdout(&mpesplit(&["order-check", "--scheme", "s3_1"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["scheme", "algebraic", "empirical"]);
    let conds = v["algebraic"].as_array().unwrap();
    assert_eq!(conds.len(), 15);
    assert!(conds.iter().all(|c| c["satisfied"] == true));
    let slope = v["empirical"]["slope"].as_f64().unwrap();
    assert!((slope - 4.0).abs() < 0.2, "slope {slope}");
    assert!(v["empirical"]["residual"].as_f64().is_some());
    assert!(!v["empirical"]["ladder"].as_array().unwrap().is_empty());
}

#[test]
fn order_check_accepts_scheme_files() {
    let dir = tempfile::tempdir().unwrap();
    let list: serde_json::Value =
        serde_json::from_str(&stdout(&mpesplit(&["list-schemes", "--format", "json"]))).unwrap();
    let strang = list
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "strang_a")
        .unwrap();
    let path = dir.path().join("strang.json");
    std::fs::write(&path, strang.to_string()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&mpesplit(&["order-check", "--scheme", path.to_str().unwrap()]))).unwrap();
    let slope = v["empirical"]["slope"].as_f64().unwrap();
    assert!((slope - 3.0).abs() < 0.2);
}

#[test]
fn converge_against_a_fine_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&mpesplit(&[
        "converge",
        "--model",
        "toy",
        "--scheme",
        "strang_a",
        "--nx",
        "16",
        "--tfinal",
        "0.5",
        "--ladder",
        "0.1,0.05,0.025",
        "--reference",
        "s4_1:0.005",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tau,error_inf,rate");
    assert!(lines[1].ends_with(','));
    let rate: f64 = lines[3].rsplit(',').next().unwrap().parse().unwrap();
    assert!((rate - 2.0).abs() < 0.3, "rate {rate}");
    assert!(dir.path().join("convergence.csv").exists());

    // The saved reference can be reused.
    let again = stdout(&mpesplit(&[
        "converge",
        "--model",
        "toy",
        "--scheme",
        "strang_a",
        "--nx",
        "16",
        "--tfinal",
        "0.5",
        "--ladder",
        "0.1,0.05,0.025",
        "--reference",
        dir.path().to_str().unwrap(),
    ]));
    assert_eq!(again, text);
}

#[test]
fn random_steps_are_seeded() {
    let args = |seed: &'static str| {
        vec![
            "converge",
            "--model",
            "nls_linear",
            "--scheme",
            "s4_2",
            "--nx",
            "16",
            "--tfinal",
            "0.5",
            "--ladder",
            "0.1,0.05",
            "--random",
            "--seed",
            seed,
        ]
    };
    let a = stdout(&mpesplit(&args("3")));
    let b = stdout(&mpesplit(&args("3")));
    let c = stdout(&mpesplit(&args("4")));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn presets_print_runnable_configs() {
    let names = stdout(&mpesplit(&["preset"]));
    assert_eq!(names.lines().count(), 8);
    let text = stdout(&mpesplit(&["preset", "cac_adaptive"]));
    let cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg["scheme"], "s4_3");
    assert_eq!(cfg["adaptive"]["alpha"], 1e6);

    let run = stdout(&mpesplit(&["preset", "rd_system", "--nx", "16", "--run"]));
    assert_eq!(run.lines().count(), 102);
}
